//! Metrics and experiment runners: ROC/AUC, the Wilcoxon signed-rank test,
//! the leaky-integrator baseline, the variant ablation sweep and the
//! entropy-energy phase export.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::{run_stream, score_beat, EngineParams, TraceRecord, Variant};
use crate::error::{Error, Result};
use crate::signal::{segment_beats, SignalFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub score: f64,
    pub label: bool,
}

impl ScoredItem {
    pub fn new(score: f64, label: bool) -> Self {
        Self { score, label }
    }
}

/// Which direction of the energy reservoir counts as anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Anomalies drain energy: score `-E`.
    #[default]
    Deficit,
    /// Anomalies charge energy: score `+E`.
    Surge,
}

impl Polarity {
    pub fn score(self, energy: f64) -> f64 {
        match self {
            Polarity::Deficit => -energy,
            Polarity::Surge => energy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EvalMode {
    PerSample,
    PerBeat { beat_len: usize },
}

impl EvalMode {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::PerSample => "per_sample",
            EvalMode::PerBeat { .. } => "per_beat",
        }
    }
}

/// Average ranks of `values`, doubled so that ties stay integral.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the average (i + 1 + j) / 2.
        let r2 = (i + 1 + j) as u64;
        for &k in &order[i..j] {
            ranks[k] = r2;
        }
        i = j;
    }
    ranks
}

fn check_finite(items: &[ScoredItem]) -> Result<()> {
    match items.iter().position(|it| !it.score.is_finite()) {
        Some(i) => Err(Error::DegenerateInput(format!("non-finite score at item {i}"))),
        None => Ok(()),
    }
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted half.
pub fn roc_auc(items: &[ScoredItem]) -> Result<f64> {
    check_finite(items)?;
    let n_pos = items.iter().filter(|it| it.label).count();
    let n_neg = items.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc { n_pos, n_neg });
    }
    let scores: Vec<f64> = items.iter().map(|it| it.score).collect();
    let ranks = doubled_ranks(&scores);
    let r2_pos: u64 = items
        .iter()
        .zip(&ranks)
        .filter(|(it, _)| it.label)
        .map(|(_, &r)| r)
        .sum();
    let (np, nn) = (n_pos as u64, n_neg as u64);
    // 2U = 2 * rank sum of positives - n_pos (n_pos + 1)
    let u2 = r2_pos - np * (np + 1);
    Ok(u2 as f64 / (2 * np * nn) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC operating points from the strictest threshold down, starting at
/// (0, 0) and ending at (1, 1). Tied scores move both rates in one step.
pub fn roc_curve(items: &[ScoredItem]) -> Result<Vec<RocPoint>> {
    check_finite(items)?;
    let n_pos = items.iter().filter(|it| it.label).count();
    let n_neg = items.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc { n_pos, n_neg });
    }
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        while i < sorted.len() && sorted[i].score == t {
            if sorted[i].label {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

pub fn write_roc_csv<W: Write>(points: &[RocPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "threshold,fpr,tpr")?;
    for p in points {
        writeln!(out, "{:?},{:?},{:?}", p.threshold, p.fpr, p.tpr)?;
    }
    Ok(())
}

/// Largest sample size for which the null distribution is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 20;
pub const WILCOXON_MIN_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Number of non-zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired differences. Zero
/// differences are dropped; tied magnitudes get average ranks.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<WilcoxonResult> {
    if let Some(i) = diffs.iter().position(|d| !d.is_finite()) {
        return Err(Error::DegenerateInput(format!("non-finite difference at index {i}")));
    }
    let nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nz.is_empty() {
        return Err(Error::DegenerateInput("all paired differences are zero".into()));
    }
    let n = nz.len();
    if n < WILCOXON_MIN_N {
        return Err(Error::DegenerateInput(format!(
            "{n} non-zero differences; at least {WILCOXON_MIN_N} required"
        )));
    }
    let mags: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&mags);
    let total2: u64 = ranks.iter().sum();
    let plus2: u64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, &r)| r).sum();
    let w2 = plus2.min(total2 - plus2);
    let statistic = w2 as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX_N {
        let count = signed_rank_count_at_most(&ranks, w2);
        let p_value = exact_two_sided(count, n);
        return Ok(WilcoxonResult {
            statistic,
            p_value,
            n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_group_sizes(&mags).map(|t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        // Continuity-corrected lower tail, doubled.
        let z = (statistic - mean + 0.5) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.cdf(z.min(0.0))).clamp(f64::MIN_POSITIVE, 1.0)
    };
    Ok(WilcoxonResult {
        statistic,
        p_value,
        n,
        exact: false,
    })
}

/// Two-sided exact p from the number of sign assignments whose positive rank
/// sum does not exceed the observed minimum.
pub fn exact_two_sided(count: u64, n: usize) -> f64 {
    (2.0 * count as f64 / (1u64 << n) as f64).min(1.0)
}

/// Number of the `2^n` sign assignments with doubled positive rank sum at most
/// `w2`, by subset-sum counting.
fn signed_rank_count_at_most(ranks2: &[u64], w2: u64) -> u64 {
    let total: u64 = ranks2.iter().sum();
    let mut ways = vec![0u64; total as usize + 1];
    ways[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if ways[s] > 0 {
                ways[s + r] += ways[s];
            }
        }
        reach += r;
    }
    ways[..=w2 as usize].iter().sum()
}

fn tie_group_sizes(values: &[f64]) -> impl Iterator<Item = u64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            sizes.push((j - i) as u64);
        }
        i = j;
    }
    sizes.into_iter()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakyStep {
    pub free_energy: f64,
    pub score: f64,
}

/// Naive leaky integrator: surprise against the previous belief, then
/// `mu <- gamma * mu + (1 - gamma) * x`.
pub fn leaky_baseline_run(gamma: f64, stream: &[SignalFrame]) -> Result<Vec<LeakyStep>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config("eval.baseline_gamma", "must lie in [0, 1)"));
    }
    let mut mu = 0.0;
    Ok(stream
        .iter()
        .map(|frame| {
            let f = (frame.value - mu).abs();
            mu = gamma * mu + (1.0 - gamma) * frame.value;
            LeakyStep {
                free_energy: f,
                score: f,
            }
        })
        .collect())
}

/// Engine scores per evaluation unit, keeping only labeled units.
pub fn engine_items(
    params: &EngineParams,
    frames: &[SignalFrame],
    mode: EvalMode,
    polarity: Polarity,
) -> Result<Vec<ScoredItem>> {
    match mode {
        EvalMode::PerSample => {
            let trace = run_stream(params, frames.iter().cloned())?;
            Ok(trace
                .iter()
                .filter_map(|r| r.label.map(|l| ScoredItem::new(polarity.score(r.energy), l)))
                .collect())
        }
        EvalMode::PerBeat { beat_len } => segment_beats(frames, beat_len)?
            .iter()
            .filter(|b| b.label.is_some())
            .map(|b| {
                // score_beat returns -E(b).
                let energy = -score_beat(params, b)?;
                Ok(ScoredItem::new(polarity.score(energy), b.label.unwrap_or(false)))
            })
            .collect(),
    }
}

/// Leaky-baseline scores per evaluation unit; per-beat scores are the mean
/// surprise over a fresh run on each beat.
pub fn baseline_items(gamma: f64, frames: &[SignalFrame], mode: EvalMode) -> Result<Vec<ScoredItem>> {
    match mode {
        EvalMode::PerSample => Ok(leaky_baseline_run(gamma, frames)?
            .iter()
            .zip(frames)
            .filter_map(|(s, f)| f.label.map(|l| ScoredItem::new(s.score, l)))
            .collect()),
        EvalMode::PerBeat { beat_len } => segment_beats(frames, beat_len)?
            .iter()
            .filter(|b| b.label.is_some())
            .map(|b| {
                let beat_frames: Vec<SignalFrame> = b
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| SignalFrame::new(i as u64, v, b.label))
                    .collect();
                let steps = leaky_baseline_run(gamma, &beat_frames)?;
                let mean = steps.iter().map(|s| s.score).sum::<f64>() / steps.len() as f64;
                Ok(ScoredItem::new(mean, b.label.unwrap_or(false)))
            })
            .collect(),
    }
}

/// A labeled stream in an ablation corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub id: String,
    pub frames: Vec<SignalFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSetup {
    pub variants: Vec<Variant>,
    pub mode: EvalMode,
    pub polarity: Polarity,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub variant: Variant,
    pub stream_id: String,
    pub seed: u64,
    pub auc: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub mean_auc: Option<f64>,
    /// Sample standard deviation; absent with fewer than two cells.
    pub std_auc: Option<f64>,
    pub n_cells: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n_pairs: usize,
    pub mean_diff: Option<f64>,
    pub result: Option<WilcoxonResult>,
    pub error: Option<String>,
}

/// Where the numbers came from, so reports from different pipelines are not
/// confused with each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub mode: EvalMode,
    pub polarity: Polarity,
    pub base_seed: u64,
    pub n_streams: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub pipeline: Pipeline,
    pub cells: Vec<AblationCell>,
    pub summaries: Vec<VariantSummary>,
    /// Keyed by `"<variant> vs v3_0"`.
    pub tests: BTreeMap<String, PairedTest>,
}

/// Stable per-cell seed: a splitmix64 chain over the base seed, the variant
/// and the stream id bytes.
pub fn cell_seed(base_seed: u64, variant: Variant, stream_id: &str) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut h = mix(base_seed ^ (variant as u64 + 1));
    for b in stream_id.bytes() {
        h = mix(h ^ b as u64);
    }
    h
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

/// Run every variant on every stream. Cells run in parallel; the report is
/// assembled in (variant, stream) order. Failed cells are recorded, not fatal.
pub fn run_ablation(params: &EngineParams, streams: &[LabeledStream], setup: &AblationSetup) -> Result<AblationReport> {
    params.validate()?;
    if setup.variants.is_empty() {
        return Err(Error::config("eval.variants", "at least one variant required"));
    }
    if streams.is_empty() {
        return Err(Error::config("input", "at least one stream required"));
    }
    let jobs: Vec<(Variant, &LabeledStream)> = setup
        .variants
        .iter()
        .flat_map(|&v| streams.iter().map(move |s| (v, s)))
        .collect();
    let cells: Vec<AblationCell> = jobs
        .par_iter()
        .map(|&(variant, stream)| {
            let seed = cell_seed(setup.base_seed, variant, &stream.id);
            let cell_params = EngineParams {
                variant,
                seed,
                ..params.clone()
            };
            let n_pos = stream.frames.iter().filter(|f| f.label == Some(true)).count();
            let n_neg = stream.frames.iter().filter(|f| f.label == Some(false)).count();
            let outcome = engine_items(&cell_params, &stream.frames, setup.mode, setup.polarity).and_then(|items| {
                let np = items.iter().filter(|i| i.label).count();
                Ok((roc_auc(&items)?, np, items.len() - np))
            });
            match outcome {
                Ok((auc, np, nn)) => AblationCell {
                    variant,
                    stream_id: stream.id.clone(),
                    seed,
                    auc: Some(auc),
                    n_pos: np,
                    n_neg: nn,
                    error: None,
                },
                Err(e) => AblationCell {
                    variant,
                    stream_id: stream.id.clone(),
                    seed,
                    auc: None,
                    n_pos,
                    n_neg,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let summaries = setup
        .variants
        .iter()
        .map(|&variant| {
            let aucs: Vec<f64> = cells
                .iter()
                .filter(|c| c.variant == variant)
                .filter_map(|c| c.auc)
                .collect();
            let total = cells.iter().filter(|c| c.variant == variant).count();
            let (mean_auc, std_auc) = mean_std(&aucs);
            VariantSummary {
                variant,
                mean_auc,
                std_auc,
                n_cells: total,
                n_failed: total - aucs.len(),
            }
        })
        .collect();

    let mut tests = BTreeMap::new();
    let reference = Variant::V3_0;
    // Entries after the first v3_0 are compared against it, including repeats.
    if let Some(ref_pos) = setup.variants.iter().position(|&v| v == reference) {
        let ref_cells = &cells[ref_pos * streams.len()..(ref_pos + 1) * streams.len()];
        for (vi, &variant) in setup.variants.iter().enumerate() {
            if vi == ref_pos {
                continue;
            }
            let var_cells = &cells[vi * streams.len()..(vi + 1) * streams.len()];
            let diffs: Vec<f64> = var_cells
                .iter()
                .zip(ref_cells)
                .filter_map(|(a, b)| Some(a.auc? - b.auc?))
                .collect();
            let (mean_diff, _) = mean_std(&diffs);
            let test = match wilcoxon_signed_rank(&diffs) {
                Ok(r) => PairedTest {
                    n_pairs: diffs.len(),
                    mean_diff,
                    result: Some(r),
                    error: None,
                },
                Err(e) => PairedTest {
                    n_pairs: diffs.len(),
                    mean_diff,
                    result: None,
                    error: Some(e.to_string()),
                },
            };
            let mut key = format!("{variant} vs {reference}");
            while tests.contains_key(&key) {
                key.push('\'');
            }
            tests.insert(key, test);
        }
    }

    Ok(AblationReport {
        pipeline: Pipeline {
            mode: setup.mode,
            polarity: setup.polarity,
            base_seed: setup.base_seed,
            n_streams: streams.len(),
        },
        cells,
        summaries,
        tests,
    })
}

impl AblationReport {
    pub fn summary(&self, variant: Variant) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }

    pub fn test(&self, variant: Variant) -> Option<&PairedTest> {
        self.tests.get(&format!("{variant} vs {}", Variant::V3_0))
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &AblationCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")
    }

    /// One row per cell: `variant,stream_id,auc,n_pos,n_neg`. A failed cell
    /// has an empty `auc`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "variant,stream_id,auc,n_pos,n_neg")?;
        for c in &self.cells {
            let auc = c.auc.map(|a| format!("{a:?}")).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", c.variant, c.stream_id, auc, c.n_pos, c.n_neg)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub step: u64,
    pub entropy: f64,
    pub energy: f64,
    pub label: Option<bool>,
}

/// Ordered (H, E) points of a trace, one per record.
pub fn phase_trace_export(trace: &[TraceRecord]) -> Vec<PhasePoint> {
    trace
        .iter()
        .map(|r| PhasePoint {
            step: r.step,
            entropy: r.entropy,
            energy: r.energy,
            label: r.label,
        })
        .collect()
}

pub fn write_phase_csv<W: Write>(points: &[PhasePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,entropy,energy,label")?;
    for p in points {
        let label = match p.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        writeln!(out, "{},{:?},{:?},{}", p.step, p.entropy, p.energy, label)?;
    }
    Ok(())
}
