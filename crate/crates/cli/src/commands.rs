use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sgemas_core::engine::{
    flop_estimate, run_stream, score_beat, write_trace_csv, write_trace_jsonl, FlopSummary, TraceRecord,
};
use sgemas_core::eval::{
    baseline_items, engine_items, phase_trace_export, roc_auc, roc_curve, run_ablation, write_phase_csv, write_roc_csv,
    AblationSetup, EvalMode, LabeledStream, Polarity, ScoredItem,
};
use sgemas_core::signal::{
    generate_synthetic, load_csv_series, rolling_zscore, segment_beats, Column, CsvSchema, SignalFrame, SyntheticSpec,
};
use sgemas_core::{Error, Variant};

use crate::config::{RunConfig, TraceFormat};

/// What a command produced: a one-line human summary and the files written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// Non-fatal problems worth reporting on stderr.
    pub warnings: Vec<String>,
}

/// Write through a sibling temp file and rename, so a failed command never
/// leaves a truncated artifact under the final name.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("output path {} has no file name", path.display()))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    let result = (|| -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("cannot write {}", path.display()));
    }
    std::fs::rename(&tmp, path).with_context(|| format!("cannot move output into place at {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn prepare_output(cfg: &RunConfig, files: &[&Path]) -> Result<()> {
    for f in files {
        let dir = f.parent().unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    }
    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("cannot create output directory {}", cfg.output.dir.display()))
}

fn synthetic_spec(cfg: &RunConfig, command: &str) -> Result<SyntheticSpec> {
    match &cfg.input.synthetic {
        Some(spec) => Ok(spec.clone()),
        None => bail!("{command} needs synthetic input ([input.synthetic])"),
    }
}

/// Frames from a CSV file, z-scored with the configured trailing window.
fn csv_frames(path: &Path, schema: &CsvSchema, window_len: usize) -> Result<Vec<SignalFrame>> {
    let raw = load_csv_series(path, schema).with_context(|| format!("reading {}", path.display()))?;
    Ok(rolling_zscore(raw, window_len)?.collect())
}

/// The single stream a non-sweep command works on.
fn single_stream(cfg: &RunConfig, command: &str) -> Result<Vec<SignalFrame>> {
    if cfg.input.streams != 1 {
        bail!("{command} runs on one stream; input.streams is {}", cfg.input.streams);
    }
    if let Some(spec) = &cfg.input.synthetic {
        return Ok(generate_synthetic(spec)?.collect());
    }
    let csv = cfg.input.csv.as_ref().context("no input configured")?;
    let paths = csv.all_paths();
    if paths.len() != 1 {
        bail!("{command} runs on one CSV file; {} configured", paths.len());
    }
    csv_frames(&paths[0], &csv.schema, csv.window_len)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentFlops {
    pub steps: usize,
    pub flops_per_sample: f64,
    pub mean_agents: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub variant: Variant,
    pub steps: usize,
    pub peak_agents: usize,
    pub peak_step: Option<u64>,
    pub final_energy: Option<f64>,
    pub flops: FlopSummary,
    /// Cost split by ground-truth label.
    pub quiescent: Option<SegmentFlops>,
    pub anomalous: Option<SegmentFlops>,
}

fn segment_flops(trace: &[TraceRecord], label: bool) -> Option<SegmentFlops> {
    let rows: Vec<&TraceRecord> = trace.iter().filter(|r| r.label == Some(label)).collect();
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    Some(SegmentFlops {
        steps: rows.len(),
        flops_per_sample: rows.iter().map(|r| r.flops_step as f64).sum::<f64>() / n,
        mean_agents: rows.iter().map(|r| r.n_agents as f64).sum::<f64>() / n,
    })
}

pub fn summarize(cfg: &RunConfig, trace: &[TraceRecord]) -> SimulationSummary {
    let peak = trace.iter().map(|r| r.n_agents).max().unwrap_or(1);
    SimulationSummary {
        variant: cfg.engine.variant,
        steps: trace.len(),
        peak_agents: peak,
        peak_step: trace.iter().find(|r| r.n_agents == peak).map(|r| r.step),
        final_energy: trace.last().map(|r| r.energy),
        flops: flop_estimate(trace, None),
        quiescent: segment_flops(trace, false),
        anomalous: segment_flops(trace, true),
    }
}

fn trace_file(cfg: &RunConfig) -> PathBuf {
    let default = match cfg.output.format {
        TraceFormat::Csv => "trace.csv",
        TraceFormat::Jsonl => "trace.jsonl",
    };
    cfg.out_file(cfg.output.trace_path.as_deref(), default)
}

fn write_trace(cfg: &RunConfig, path: &Path, trace: &[TraceRecord]) -> Result<()> {
    match cfg.output.format {
        TraceFormat::Csv => write_atomic(path, |w| write_trace_csv(trace, w)),
        TraceFormat::Jsonl => write_atomic(path, |w| write_trace_jsonl(trace, w)),
    }
}

/// Run the engine over a synthetic stream; write the trace, the (H, E) phase
/// points and a JSON summary.
pub fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let spec = synthetic_spec(cfg, "simulate")?;
    if cfg.input.streams != 1 {
        bail!("simulate runs on one stream; input.streams is {}", cfg.input.streams);
    }
    let trace_path = trace_file(cfg);
    let phase_path = cfg.output.dir.join("phase.csv");
    let summary_path = cfg.out_file(cfg.output.report_path.as_deref(), "summary.json");

    let trace = run_stream(&cfg.engine, generate_synthetic(&spec)?)?;
    let summary = summarize(cfg, &trace);

    prepare_output(cfg, &[&trace_path, &summary_path])?;
    write_trace(cfg, &trace_path, &trace)?;
    write_atomic(&phase_path, |w| write_phase_csv(&phase_trace_export(&trace), w))?;
    write_json(&summary_path, &summary)?;

    Ok(Outcome {
        summary: format!(
            "steps={} peak_n={} final_e={} flops_total={} flops_per_sample={:.1}",
            summary.steps,
            summary.peak_agents,
            summary.final_energy.map_or("n/a".into(), |e| format!("{e:.4}")),
            summary.flops.flops_total,
            summary.flops.flops_per_sample
        ),
        files: vec![trace_path, phase_path, summary_path],
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ScoreRow {
    index: usize,
    start: u64,
    energy: f64,
    score: f64,
    label: Option<bool>,
}

fn fmt_label(l: Option<bool>) -> &'static str {
    match l {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

/// Score a CSV recording per sample or per beat. Labels pass through; an
/// unlabeled input yields a file without a label column.
pub fn detect(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    if cfg.input.csv.is_none() {
        bail!("detect needs CSV input ([input.csv])");
    }
    let mode = cfg.eval_mode()?;
    let frames = single_stream(cfg, "detect")?;
    let labeled = frames.iter().any(|f| f.label.is_some());
    let polarity = cfg.eval.polarity;

    let mut trace = None;
    let rows: Vec<ScoreRow> = match mode {
        EvalMode::PerSample => {
            let t = run_stream(&cfg.engine, frames.iter().cloned())?;
            let rows = t
                .iter()
                .enumerate()
                .map(|(i, r)| ScoreRow {
                    index: i,
                    start: r.step,
                    energy: r.energy,
                    score: polarity.score(r.energy),
                    label: r.label,
                })
                .collect();
            trace = Some(t);
            rows
        }
        EvalMode::PerBeat { beat_len } => segment_beats(&frames, beat_len)?
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let energy = -score_beat(&cfg.engine, b)?;
                Ok(ScoreRow {
                    index: i,
                    start: b.start as u64,
                    energy,
                    score: polarity.score(energy),
                    label: b.label,
                })
            })
            .collect::<sgemas_core::Result<_>>()?,
    };

    let scores_path = cfg.out_file(cfg.output.report_path.as_deref(), "scores.csv");
    let trace_path = cfg.output.trace_path.as_ref().map(|_| trace_file(cfg));
    prepare_output(cfg, &[&scores_path])?;
    write_atomic(&scores_path, |w| {
        if labeled {
            writeln!(w, "index,start,energy,score,label")?;
        } else {
            writeln!(w, "index,start,energy,score")?;
        }
        for r in &rows {
            write!(w, "{},{},{:?},{:?}", r.index, r.start, r.energy, r.score)?;
            if labeled {
                write!(w, ",{}", fmt_label(r.label))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    let mut files = vec![scores_path];
    if let (Some(path), Some(t)) = (trace_path, &trace) {
        write_trace(cfg, &path, t)?;
        files.push(path);
    }
    let mut warnings = Vec::new();
    if !labeled {
        warnings.push("input has no labels; the scores file cannot be evaluated".to_string());
    }
    Ok(Outcome {
        summary: format!(
            "mode={} units={} labeled={}",
            mode.name(),
            rows.len(),
            rows.iter().filter(|r| r.label.is_some()).count()
        ),
        files,
        warnings,
    })
}

/// Items from a `detect` output file.
pub fn read_scores(path: &Path) -> Result<Vec<ScoredItem>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read scores file {}", path.display()))?;
    let header = text.lines().next().unwrap_or_default();
    if !header.split(',').any(|c| c.trim() == "label") {
        return Err(Error::Unlabeled(format!(
            "{} has no label column; evaluation needs a scored file produced from labeled input",
            path.display()
        ))
        .into());
    }
    let schema = CsvSchema {
        value_column: Column::Name("score".into()),
        label_column: Some(Column::Name("label".into())),
        delimiter: ',',
        has_header: true,
    };
    let frames = load_csv_series(path, &schema).map_err(|e| match e {
        Error::Parse { row, column, .. } if column == "label" => anyhow::Error::from(Error::Unlabeled(format!(
            "{}: row {row} has no usable label",
            path.display()
        ))),
        other => anyhow::Error::from(other),
    })?;
    Ok(frames
        .into_iter()
        .map(|f| ScoredItem::new(f.value, f.label.unwrap_or(false)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub gamma: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    /// `"scores_file"` or `"engine"`.
    pub source: String,
    pub variant: Option<Variant>,
    pub mode: Option<EvalMode>,
    pub polarity: Option<Polarity>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub auc: f64,
    pub baseline: Option<BaselineResult>,
}

/// AUC and ROC points, from a scores file or by running the engine on the
/// configured input; optionally against the leaky baseline.
pub fn evaluate(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let mode = cfg.eval_mode()?;
    let from_file = cfg.eval.scores_path.clone();
    let (items, baseline) = match &from_file {
        Some(path) => (read_scores(path)?, None),
        None => {
            let frames = single_stream(cfg, "evaluate")?;
            let items = engine_items(&cfg.engine, &frames, mode, cfg.eval.polarity)?;
            let baseline = cfg
                .eval
                .baseline_gamma
                .map(|g| baseline_items(g, &frames, mode).map(|b| (g, b)))
                .transpose()?;
            (items, baseline)
        }
    };
    let auc = roc_auc(&items)?;
    let roc = roc_curve(&items)?;
    let baseline = baseline
        .map(|(gamma, b)| -> Result<_> { Ok((gamma, roc_auc(&b)?, roc_curve(&b)?)) })
        .transpose()?;

    let n_pos = items.iter().filter(|i| i.label).count();
    let report = EvaluationReport {
        source: if from_file.is_some() { "scores_file" } else { "engine" }.into(),
        variant: from_file.is_none().then_some(cfg.engine.variant),
        mode: from_file.is_none().then_some(mode),
        polarity: from_file.is_none().then_some(cfg.eval.polarity),
        n_pos,
        n_neg: items.len() - n_pos,
        auc,
        baseline: baseline.as_ref().map(|(gamma, auc, _)| BaselineResult {
            gamma: *gamma,
            auc: *auc,
        }),
    };

    let report_path = cfg.out_file(cfg.output.report_path.as_deref(), "evaluation.json");
    let roc_path = cfg.output.dir.join("roc.csv");
    prepare_output(cfg, &[&report_path])?;
    write_atomic(&roc_path, |w| write_roc_csv(&roc, w))?;
    let mut files = vec![roc_path];
    if let Some((_, _, points)) = &baseline {
        let p = cfg.output.dir.join("roc_baseline.csv");
        write_atomic(&p, |w| write_roc_csv(points, w))?;
        files.push(p);
    }
    write_json(&report_path, &report)?;
    files.push(report_path);

    let mut summary = format!("auc={auc:.4} n_pos={} n_neg={}", report.n_pos, report.n_neg);
    if let Some(b) = &report.baseline {
        summary.push_str(&format!(" baseline_gamma={} baseline_auc={:.4}", b.gamma, b.auc));
    }
    Ok(Outcome {
        summary,
        files,
        warnings: Vec::new(),
    })
}

/// The labeled streams of a sweep: seeded copies of the synthetic template,
/// or one stream per CSV file.
pub fn ablation_streams(cfg: &RunConfig) -> Result<Vec<LabeledStream>> {
    if let Some(spec) = &cfg.input.synthetic {
        return (0..cfg.input.streams)
            .map(|k| {
                let s = SyntheticSpec {
                    seed: spec.seed.wrapping_add(k as u64),
                    ..spec.clone()
                };
                Ok(LabeledStream {
                    id: format!("synthetic-{k:03}"),
                    frames: generate_synthetic(&s)?.collect(),
                })
            })
            .collect();
    }
    let csv = cfg.input.csv.as_ref().context("no input configured")?;
    csv.all_paths()
        .iter()
        .map(|p| {
            Ok(LabeledStream {
                id: p
                    .file_stem()
                    .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
                frames: csv_frames(p, &csv.schema, csv.window_len)?,
            })
        })
        .collect()
}

/// Every configured variant on every stream; JSON and CSV reports.
pub fn ablate(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let n_streams = match &cfg.input.csv {
        Some(csv) => csv.all_paths().len(),
        None => cfg.input.streams,
    };
    if n_streams < 2 {
        bail!("invalid configuration: input: ablate needs at least 2 labeled streams, got {n_streams}");
    }
    let streams = ablation_streams(cfg)?;
    let setup = AblationSetup {
        variants: cfg.eval.variants.clone(),
        mode: cfg.eval_mode()?,
        polarity: cfg.eval.polarity,
        base_seed: cfg.engine.seed,
    };
    let report = run_ablation(&cfg.engine, &streams, &setup)?;

    let json_path = cfg.out_file(cfg.output.report_path.as_deref(), "ablation.json");
    let csv_path = json_path.with_extension("csv");
    prepare_output(cfg, &[&json_path])?;
    write_atomic(&json_path, |w| report.write_json(w))?;
    write_atomic(&csv_path, |w| report.write_csv(w))?;

    let mut lines = Vec::new();
    for s in &report.summaries {
        let mean = s.mean_auc.map_or("n/a".into(), |m| format!("{m:.4}"));
        let std = s.std_auc.map_or("n/a".into(), |m| format!("{m:.4}"));
        lines.push(format!("{} auc={mean}±{std} failed={}", s.variant, s.n_failed));
    }
    for (key, t) in &report.tests {
        match (&t.result, &t.error) {
            (Some(r), _) => lines.push(format!("{key}: W={} p={:.4}", r.statistic, r.p_value)),
            (None, Some(e)) => lines.push(format!("{key}: {e}")),
            (None, None) => {}
        }
    }
    let warnings = report
        .failed_cells()
        .map(|c| {
            format!(
                "cell {} / {} failed: {}",
                c.variant,
                c.stream_id,
                c.error.as_deref().unwrap_or("")
            )
        })
        .collect();
    Ok(Outcome {
        summary: lines.join("\n"),
        files: vec![json_path, csv_path],
        warnings,
    })
}
