//! Sample streams: synthetic generators, CSV ingestion, causal rolling
//! z-score normalization and fixed-length beat framing.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling rate of the reference ECG recordings, in Hz.
pub const REFERENCE_SAMPLE_RATE_HZ: usize = 360;

/// Default rolling normalization window: 10 s at 360 Hz.
pub const DEFAULT_ZSCORE_WINDOW: usize = 10 * REFERENCE_SAMPLE_RATE_HZ;

/// Logistic-map parameter used for chaotic segments.
pub const LOGISTIC_R: f64 = 3.99;

/// One sample of an input stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalFrame {
    pub t: u64,
    pub value: f64,
    pub label: Option<bool>,
}

impl SignalFrame {
    pub fn new(t: u64, value: f64, label: Option<bool>) -> Self {
        Self { t, value, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Quiescent,
    Chaos,
    AnomalyBurst,
    Tachycardia,
    Bradycardia,
}

impl SegmentKind {
    pub fn is_anomalous(self) -> bool {
        !matches!(self, SegmentKind::Quiescent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub len: usize,
    pub intensity: f64,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, t: usize) -> bool {
        t >= self.start && t < self.end()
    }
}

/// The quiescent oscillation every stream is built on. `frequency` is in
/// cycles per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baseline {
    pub amplitude: f64,
    pub frequency: f64,
}

fn default_chaos_hold() -> usize {
    1
}

fn default_burst_rate() -> f64 {
    0.05
}

/// Description of a labeled synthetic stream.
///
/// Segment semantics:
/// - `chaos`: logistic-map iterates (r = 3.99), centred on zero and scaled by
///   `intensity`, added to the baseline. A new iterate is drawn every
///   `chaos_hold` samples, so `chaos_hold > 1` gives a slowly wandering chaotic
///   level instead of sample-rate chaos.
/// - `anomaly_burst`: impulses of amplitude `intensity * N(0, 1)` fired with
///   probability `burst_rate` per sample.
/// - `tachycardia` / `bradycardia`: baseline frequency multiplied by
///   `intensity`.
/// - `quiescent`: explicit baseline-only stretch, labeled normal.
///
/// Samples outside every segment are quiescent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub total_len: usize,
    pub baseline: Baseline,
    #[serde(default)]
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_chaos_hold")]
    pub chaos_hold: usize,
    #[serde(default = "default_burst_rate")]
    pub burst_rate: f64,
}

impl SyntheticSpec {
    pub fn new(total_len: usize, baseline: Baseline) -> Self {
        Self {
            total_len,
            baseline,
            segments: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
            chaos_hold: default_chaos_hold(),
            burst_rate: default_burst_rate(),
        }
    }

    pub fn with_segment(mut self, kind: SegmentKind, start: usize, len: usize, intensity: f64) -> Self {
        self.segments.push(Segment {
            kind,
            start,
            len,
            intensity,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_len == 0 {
            return Err(Error::config("synthetic.total_len", "must be at least 1"));
        }
        if !self.baseline.amplitude.is_finite() {
            return Err(Error::config("synthetic.baseline.amplitude", "must be finite"));
        }
        if !(self.baseline.frequency.is_finite() && self.baseline.frequency >= 0.0) {
            return Err(Error::config("synthetic.baseline.frequency", "must be finite and >= 0"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config("synthetic.noise_sigma", "must be finite and >= 0"));
        }
        if self.chaos_hold == 0 {
            return Err(Error::config("synthetic.chaos_hold", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.burst_rate) {
            return Err(Error::config("synthetic.burst_rate", "must lie in [0, 1]"));
        }
        let mut sorted: Vec<&Segment> = self.segments.iter().collect();
        sorted.sort_by_key(|s| s.start);
        for (i, seg) in sorted.iter().enumerate() {
            let field = format!("synthetic.segments[{i}]");
            if seg.len == 0 {
                return Err(Error::config(field, "segment length must be positive"));
            }
            if seg.end() > self.total_len {
                return Err(Error::config(
                    field,
                    format!(
                        "segment [{}, {}) exceeds total_len {}",
                        seg.start,
                        seg.end(),
                        self.total_len
                    ),
                ));
            }
            if !(seg.intensity.is_finite() && seg.intensity >= 0.0) {
                return Err(Error::config(field, "intensity must be finite and >= 0"));
            }
            if let Some(prev) = i.checked_sub(1).map(|j| sorted[j]) {
                if prev.end() > seg.start {
                    return Err(Error::config(
                        field,
                        format!(
                            "segment [{}, {}) overlaps [{}, {})",
                            seg.start,
                            seg.end(),
                            prev.start,
                            prev.end()
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Ground-truth label for sample `t`, straight from segment arithmetic.
    pub fn label_at(&self, t: usize) -> bool {
        self.segments.iter().any(|s| s.contains(t) && s.kind.is_anomalous())
    }
}

/// Iterator over the frames of a [`SyntheticSpec`].
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    spec: SyntheticSpec,
    segments: Vec<Segment>,
    seg_idx: usize,
    t: usize,
    phase: f64,
    logistic: f64,
    rng: ChaCha8Rng,
}

/// Build the stream described by `spec`. The output is a pure function of the
/// spec, seed included.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticStream> {
    spec.validate()?;
    let mut segments = spec.segments.clone();
    segments.sort_by_key(|s| s.start);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let logistic = 0.1 + 0.8 * rng.random::<f64>();
    Ok(SyntheticStream {
        spec: spec.clone(),
        segments,
        seg_idx: 0,
        t: 0,
        phase: 0.0,
        logistic,
        rng,
    })
}

impl SyntheticStream {
    fn active_segment(&mut self) -> Option<Segment> {
        while self.seg_idx < self.segments.len() && self.segments[self.seg_idx].end() <= self.t {
            self.seg_idx += 1;
        }
        self.segments.get(self.seg_idx).filter(|s| s.contains(self.t)).copied()
    }
}

impl Iterator for SyntheticStream {
    type Item = SignalFrame;

    fn next(&mut self) -> Option<SignalFrame> {
        if self.t >= self.spec.total_len {
            return None;
        }
        let seg = self.active_segment();
        let mut freq = self.spec.baseline.frequency;
        let mut overlay = 0.0;
        let mut label = false;
        if let Some(seg) = seg {
            label = seg.kind.is_anomalous();
            match seg.kind {
                SegmentKind::Quiescent => {}
                SegmentKind::Chaos => {
                    if (self.t - seg.start).is_multiple_of(self.spec.chaos_hold) {
                        self.logistic = LOGISTIC_R * self.logistic * (1.0 - self.logistic);
                    }
                    overlay = seg.intensity * (self.logistic - 0.5);
                }
                SegmentKind::AnomalyBurst => {
                    if self.rng.random::<f64>() < self.spec.burst_rate {
                        let z: f64 = self.rng.sample(StandardNormal);
                        overlay = seg.intensity * z;
                    }
                }
                SegmentKind::Tachycardia | SegmentKind::Bradycardia => {
                    freq *= seg.intensity;
                }
            }
        }
        let noise: f64 = self.rng.sample(StandardNormal);
        let value = self.spec.baseline.amplitude * self.phase.sin() + overlay + self.spec.noise_sigma * noise;
        self.phase = (self.phase + TAU * freq) % TAU;
        let frame = SignalFrame::new(self.t as u64, value, Some(label));
        self.t += 1;
        Some(frame)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.spec.total_len - self.t;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for SyntheticStream {}

/// Column reference inside a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::fmt::Display for Column {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Column::Index(i) => write!(f, "#{i}"),
            Column::Name(n) => f.write_str(n),
        }
    }
}

fn default_delimiter() -> char {
    ','
}

fn default_has_header() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub value_column: Column,
    #[serde(default)]
    pub label_column: Option<Column>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_has_header")]
    pub has_header: bool,
}

impl CsvSchema {
    pub fn by_index(value: usize, label: Option<usize>) -> Self {
        Self {
            value_column: Column::Index(value),
            label_column: label.map(Column::Index),
            delimiter: default_delimiter(),
            has_header: false,
        }
    }
}

fn resolve_column(col: &Column, headers: Option<&csv::StringRecord>) -> Result<usize> {
    match (col, headers) {
        (Column::Index(i), _) => Ok(*i),
        (Column::Name(name), Some(h)) => h
            .iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column {name:?} not found in header"))),
        (Column::Name(name), None) => Err(Error::Schema(format!(
            "column {name:?} referenced by name but the file has no header row"
        ))),
    }
}

/// Read one [`SignalFrame`] per data row. Rows are numbered from 1 in error
/// messages, counting data rows only.
pub fn load_csv_series(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<SignalFrame>> {
    let path = path.as_ref();
    if !schema.delimiter.is_ascii() {
        return Err(Error::Schema("delimiter must be a single ASCII character".into()));
    }
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.has_header)
        .flexible(true)
        .from_reader(file);
    let headers = if schema.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };
    let value_idx = resolve_column(&schema.value_column, headers.as_ref())?;
    let label_idx = schema
        .label_column
        .as_ref()
        .map(|c| resolve_column(c, headers.as_ref()))
        .transpose()?;

    let mut frames = Vec::new();
    for (ordinal, record) in reader.records().enumerate() {
        let record = record?;
        let row = ordinal + 1;
        let cell = |idx: usize, col: &Column| {
            record
                .get(idx)
                .map(str::trim)
                .ok_or_else(|| Error::Schema(format!("row {row} has no column {col} ({} fields)", record.len())))
        };
        let raw = cell(value_idx, &schema.value_column)?;
        let value: f64 = raw.parse().map_err(|_| Error::Parse {
            row,
            column: schema.value_column.to_string(),
            message: format!("cannot parse {raw:?} as a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row,
                column: schema.value_column.to_string(),
                message: format!("non-finite value {raw:?}"),
            });
        }
        let label = match (label_idx, &schema.label_column) {
            (Some(idx), Some(col)) => {
                let raw = cell(idx, col)?;
                Some(match raw {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse {
                            row,
                            column: col.to_string(),
                            message: format!("label must be 0 or 1, got {other:?}"),
                        })
                    }
                })
            }
            _ => None,
        };
        frames.push(SignalFrame::new(ordinal as u64, value, label));
    }
    Ok(frames)
}

/// Causal rolling z-score over the trailing `window_len` samples (current
/// sample included), population standard deviation. A window whose values are
/// all identical maps to 0.
#[derive(Debug, Clone)]
pub struct RollingZScore {
    window_len: usize,
    values: VecDeque<f64>,
    // Monotonic deques of indices for O(1) amortized min/max.
    max_q: VecDeque<(u64, f64)>,
    min_q: VecDeque<(u64, f64)>,
    sum: f64,
    sum_sq: f64,
    pushed: u64,
}

impl RollingZScore {
    pub fn new(window_len: usize) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::config("window_len", "must be at least 1"));
        }
        Ok(Self {
            window_len,
            values: VecDeque::with_capacity(window_len),
            max_q: VecDeque::new(),
            min_q: VecDeque::new(),
            sum: 0.0,
            sum_sq: 0.0,
            pushed: 0,
        })
    }

    pub fn push(&mut self, x: f64) -> f64 {
        let idx = self.pushed;
        self.pushed += 1;
        self.values.push_back(x);
        self.sum += x;
        self.sum_sq += x * x;
        if self.values.len() > self.window_len {
            let old = self.values.pop_front().unwrap_or_default();
            self.sum -= old;
            self.sum_sq -= old * old;
        }
        let oldest = idx + 1 - self.values.len() as u64;
        while self.max_q.back().is_some_and(|&(_, v)| v <= x) {
            self.max_q.pop_back();
        }
        self.max_q.push_back((idx, x));
        while self.min_q.back().is_some_and(|&(_, v)| v >= x) {
            self.min_q.pop_back();
        }
        self.min_q.push_back((idx, x));
        while self.max_q.front().is_some_and(|&(i, _)| i < oldest) {
            self.max_q.pop_front();
        }
        while self.min_q.front().is_some_and(|&(i, _)| i < oldest) {
            self.min_q.pop_front();
        }
        // Resync the running sums once per window to bound cancellation drift.
        if self.pushed.is_multiple_of(self.window_len as u64) {
            self.sum = self.values.iter().sum();
            self.sum_sq = self.values.iter().map(|v| v * v).sum();
        }

        let (lo, hi) = (self.min_q[0].1, self.max_q[0].1);
        if lo == hi {
            return 0.0;
        }
        let n = self.values.len() as f64;
        let mean = self.sum / n;
        let mut var = self.sum_sq / n - mean * mean;
        if var <= 0.0 {
            var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        }
        (x - mean) / var.sqrt()
    }
}

/// Iterator adapter produced by [`rolling_zscore`].
#[derive(Debug, Clone)]
pub struct ZScored<I> {
    inner: I,
    norm: RollingZScore,
}

impl<I: Iterator<Item = SignalFrame>> Iterator for ZScored<I> {
    type Item = SignalFrame;

    fn next(&mut self) -> Option<SignalFrame> {
        let frame = self.inner.next()?;
        let value = self.norm.push(frame.value);
        Some(SignalFrame { value, ..frame })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.inner.size_hint()
    }
}

pub fn rolling_zscore<I>(stream: I, window_len: usize) -> Result<ZScored<I::IntoIter>>
where
    I: IntoIterator<Item = SignalFrame>,
{
    Ok(ZScored {
        inner: stream.into_iter(),
        norm: RollingZScore::new(window_len)?,
    })
}

/// A fixed-length, individually normalized window of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beat {
    /// Index of the first frame of the beat in the source stream.
    pub start: usize,
    pub samples: Vec<f64>,
    pub label: Option<bool>,
}

/// Zero-mean, unit-std normalization (population std). Constant input maps to
/// all zeros.
pub fn normalize_unit(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return vec![0.0; values.len()];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Split a stream into non-overlapping windows of `beat_len` samples. The
/// trailing partial window is dropped. A beat is labeled anomalous if any of
/// its frames is; it is unlabeled only if none of its frames carries a label.
pub fn segment_beats(frames: &[SignalFrame], beat_len: usize) -> Result<Vec<Beat>> {
    if beat_len < 2 {
        return Err(Error::config("beat_len", "must be at least 2"));
    }
    if frames.len() < beat_len {
        log::warn!(
            "stream of {} samples is shorter than one beat ({beat_len}); no beats produced",
            frames.len()
        );
        return Ok(Vec::new());
    }
    Ok(frames
        .chunks_exact(beat_len)
        .enumerate()
        .map(|(i, chunk)| {
            let values: Vec<f64> = chunk.iter().map(|f| f.value).collect();
            let label = if chunk.iter().all(|f| f.label.is_none()) {
                None
            } else {
                Some(chunk.iter().any(|f| f.label == Some(true)))
            };
            Beat {
                start: i * beat_len,
                samples: normalize_unit(&values),
                label,
            }
        })
        .collect())
}
