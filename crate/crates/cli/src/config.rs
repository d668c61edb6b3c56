//! Run configuration: one TOML file per experiment.
//!
//! ```toml
//! [engine]                 # EngineParams; every key optional
//! gamma = 0.6
//! variant = "v3_3"
//! [engine.precision]
//! eps = 1.0
//!
//! [plasticity]             # PlasticityParams; every key optional
//! n_max = 64
//!
//! [input]
//! streams = 1              # synthetic only: stream k uses seed + k
//! [input.synthetic]        # exactly one of input.synthetic / input.csv
//! total_len = 12000
//! baseline = { amplitude = 1.0, frequency = 0.0033 }
//! segments = [{ kind = "chaos", start = 1000, len = 8000, intensity = 1.0 }]
//!
//! [eval]
//! mode = "per_sample"      # or "per_beat" with beat_len
//! polarity = "surge"       # "deficit" scores -E, "surge" scores +E
//! variants = ["v3_0", "v3_3"]
//! baseline_gamma = 0.4
//!
//! [output]
//! dir = "out"
//! format = "csv"           # trace format: "csv" or "jsonl"
//! ```
//!
//! Relative input paths are resolved against the directory holding the config
//! file; the output directory is relative to the working directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sgemas_core::engine::{EngineParams, Variant};
use sgemas_core::eval::{EvalMode, Polarity};
use sgemas_core::signal::{CsvSchema, SyntheticSpec, DEFAULT_ZSCORE_WINDOW};
use sgemas_core::PlasticityParams;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub engine: EngineParams,
    pub plasticity: Option<PlasticityParams>,
    pub input: InputConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub synthetic: Option<SyntheticSpec>,
    pub csv: Option<CsvInput>,
    #[serde(default = "one")]
    pub streams: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvInput {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    pub schema: CsvSchema,
    #[serde(default = "default_window")]
    pub window_len: usize,
    pub beat_len: Option<usize>,
}

fn default_window() -> usize {
    DEFAULT_ZSCORE_WINDOW
}

impl CsvInput {
    pub fn all_paths(&self) -> Vec<PathBuf> {
        self.path.iter().chain(&self.paths).cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    PerSample,
    PerBeat,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub mode: ModeName,
    pub beat_len: Option<usize>,
    #[serde(default)]
    pub polarity: Polarity,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    pub baseline_gamma: Option<f64>,
    /// Scored file produced by `detect`, consumed by `evaluate`.
    pub scores_path: Option<PathBuf>,
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: ModeName::PerSample,
            beat_len: None,
            polarity: Polarity::default(),
            variants: all_variants(),
            baseline_gamma: None,
            scores_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    pub trace_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    #[serde(default)]
    pub format: TraceFormat,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out(),
            trace_path: None,
            report_path: None,
            format: TraceFormat::default(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub variant: Option<Variant>,
    pub scores: Option<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
        if raw
            .get("engine")
            .and_then(|e| e.as_table())
            .is_some_and(|e| e.contains_key("plasticity"))
        {
            bail!("invalid configuration: engine.plasticity: use the top-level [plasticity] section");
        }
        let mut cfg: RunConfig = toml::from_str(text).context("invalid configuration")?;
        if let Some(p) = cfg.plasticity {
            cfg.engine.plasticity = p;
        }
        Ok(cfg)
    }

    /// Parse a file, resolve relative input paths against its directory and apply
    /// overrides. No files are created.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(csv) = &mut self.input.csv {
            csv.path = csv.path.as_deref().map(|p| resolve(base, p));
            csv.paths = csv.paths.iter().map(|p| resolve(base, p)).collect();
        }
        self.eval.scores_path = self.eval.scores_path.as_deref().map(|p| resolve(base, p));
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.engine.seed = seed;
            if let Some(s) = &mut self.input.synthetic {
                s.seed = seed;
            }
        }
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(v) = o.variant {
            self.engine.variant = v;
        }
        if let Some(s) = &o.scores {
            self.eval.scores_path = Some(s.clone());
        }
    }

    /// Evaluation unit, reconciling `eval.mode`, `eval.beat_len` and
    /// `input.csv.beat_len`.
    pub fn eval_mode(&self) -> Result<EvalMode> {
        let csv_beat = self.input.csv.as_ref().and_then(|c| c.beat_len);
        let beat_len = match (self.eval.beat_len, csv_beat) {
            (Some(a), Some(b)) if a != b => {
                bail!("invalid configuration: eval.beat_len ({a}) disagrees with input.csv.beat_len ({b})")
            }
            (a, b) => a.or(b),
        };
        match (self.eval.mode, beat_len) {
            (ModeName::PerBeat, None) => bail!("invalid configuration: eval.beat_len: required for per_beat mode"),
            (ModeName::PerBeat, Some(b)) => Ok(EvalMode::PerBeat { beat_len: b }),
            // A beat length on the CSV input implies beat framing.
            (ModeName::PerSample, Some(b)) if csv_beat.is_some() => Ok(EvalMode::PerBeat { beat_len: b }),
            (ModeName::PerSample, _) => Ok(EvalMode::PerSample),
        }
    }

    /// Everything that can be checked without touching the output directory.
    pub fn validate(&self) -> Result<()> {
        self.engine.validate().context("engine")?;
        match (&self.input.synthetic, &self.input.csv) {
            (Some(_), Some(_)) => {
                bail!("invalid configuration: input: set exactly one of input.synthetic and input.csv")
            }
            (None, None) => bail!("invalid configuration: input: one of input.synthetic or input.csv is required"),
            (Some(spec), None) => spec.validate()?,
            (None, Some(csv)) => {
                let paths = csv.all_paths();
                if paths.is_empty() {
                    bail!("invalid configuration: input.csv.path: no CSV path given");
                }
                for p in &paths {
                    if !p.is_file() {
                        bail!(
                            "invalid configuration: input.csv.path: {} is not a readable file",
                            p.display()
                        );
                    }
                }
                if csv.window_len == 0 {
                    bail!("invalid configuration: input.csv.window_len: must be at least 1");
                }
                if self.input.streams != 1 {
                    bail!("invalid configuration: input.streams: only applies to synthetic input; list CSV files in input.csv.paths");
                }
            }
        }
        if self.input.streams == 0 {
            bail!("invalid configuration: input.streams: must be at least 1");
        }
        if let EvalMode::PerBeat { beat_len } = self.eval_mode()? {
            if beat_len < 2 {
                bail!("invalid configuration: eval.beat_len: must be at least 2");
            }
        }
        if let Some(g) = self.eval.baseline_gamma {
            if !(0.0..1.0).contains(&g) {
                bail!("invalid configuration: eval.baseline_gamma: must lie in [0, 1)");
            }
        }
        if self.eval.variants.is_empty() {
            bail!("invalid configuration: eval.variants: at least one variant required");
        }
        if self.output.dir.exists() && !self.output.dir.is_dir() {
            bail!(
                "invalid configuration: output.dir: {} exists and is not a directory",
                self.output.dir.display()
            );
        }
        Ok(())
    }

    /// Output file: an explicit path (relative to the output directory) or
    /// the default name.
    pub fn out_file(&self, explicit: Option<&Path>, default_name: &str) -> PathBuf {
        match explicit {
            Some(p) => resolve(&self.output.dir, p),
            None => self.output.dir.join(default_name),
        }
    }
}
