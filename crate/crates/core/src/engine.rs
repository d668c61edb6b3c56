//! The online inference loop: collective belief update under inertia,
//! free energy, precision, instability and entropy readouts, metabolic energy
//! bookkeeping and structural plasticity.

use std::collections::VecDeque;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::agents::{
    apply_plasticity, catalyst_transfer, regulator_transfer, sensor_transfer, AgentPopulation, PlasticityEvent,
    PlasticityParams, Role,
};
use crate::error::{Error, Result};
use crate::signal::{Beat, SignalFrame};

/// Model generation. Each variant adds one feature on top of the previous:
///
/// | variant | sensor jitter | instability drive      | precision   |
/// |---------|---------------|------------------------|-------------|
/// | v3_0    | off           | off                    | fixed at 1  |
/// | v3_1    | on            | off                    | fixed at 1  |
/// | v3_2    | on            | first scale only       | fixed at 1  |
/// | v3_3    | on            | mean over all scales   | adaptive    |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "v3_0")]
    V3_0,
    #[serde(rename = "v3_1")]
    V3_1,
    #[serde(rename = "v3_2")]
    V3_2,
    #[serde(rename = "v3_3")]
    V3_3,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::V3_0, Variant::V3_1, Variant::V3_2, Variant::V3_3];

    pub fn sensor_jitter(self) -> bool {
        self >= Variant::V3_1
    }

    pub fn instability_drive(self) -> bool {
        self >= Variant::V3_2
    }

    pub fn multi_scale(self) -> bool {
        self >= Variant::V3_3
    }

    pub fn adaptive_precision(self) -> bool {
        self >= Variant::V3_3
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::V3_0 => "v3_0",
            Variant::V3_1 => "v3_1",
            Variant::V3_2 => "v3_2",
            Variant::V3_3 => "v3_3",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('.', "_").as_str() {
            "v3_0" => Ok(Variant::V3_0),
            "v3_1" => Ok(Variant::V3_1),
            "v3_2" => Ok(Variant::V3_2),
            "v3_3" => Ok(Variant::V3_3),
            _ => Err(Error::config("variant", format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecisionParams {
    /// Variance floor; bounds precision by `1 / eps`.
    pub eps: f64,
    pub decay: f64,
}

impl Default for PrecisionParams {
    fn default() -> Self {
        Self { eps: 0.05, decay: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyParams {
    pub window: usize,
    pub bins: usize,
}

impl Default for EntropyParams {
    fn default() -> Self {
        Self { window: 64, bins: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams {
    /// Inertia of the belief update.
    pub gamma: f64,
    /// Metabolic gain on precision-weighted surprise.
    pub alpha: f64,
    /// Maintenance cost per living agent per step.
    pub beta: f64,
    /// Gain on the instability index (v3_2 and later).
    pub alpha_i: f64,
    /// Diffusion constant `D` of the belief noise `sqrt(2D) * xi`.
    pub diffusion_d: f64,
    pub e_init: f64,
    pub precision: PrecisionParams,
    pub instability_scales: Vec<usize>,
    pub entropy: EntropyParams,
    pub variant: Variant,
    pub plasticity: PlasticityParams,
    pub seed: u64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            gamma: 0.6,
            alpha: 5.0,
            beta: 0.18,
            alpha_i: 1.0,
            diffusion_d: 0.0,
            e_init: 1.0,
            precision: PrecisionParams::default(),
            instability_scales: vec![2, 8, 32],
            entropy: EntropyParams::default(),
            variant: Variant::V3_3,
            plasticity: PlasticityParams::default(),
            seed: 0,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        // gamma = 1 is accepted as the frozen-belief limit.
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("engine.gamma", "must lie in [0, 1]"));
        }
        for (field, v) in [
            ("engine.alpha", self.alpha),
            ("engine.beta", self.beta),
            ("engine.alpha_i", self.alpha_i),
            ("engine.diffusion_d", self.diffusion_d),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, "must be finite and >= 0"));
            }
        }
        if !self.e_init.is_finite() {
            return Err(Error::config("engine.e_init", "must be finite"));
        }
        if !(self.precision.eps.is_finite() && self.precision.eps > 0.0) {
            return Err(Error::config("engine.precision.eps", "must be > 0"));
        }
        if !(self.precision.decay > 0.0 && self.precision.decay < 1.0) {
            return Err(Error::config("engine.precision.decay", "must lie in (0, 1)"));
        }
        if self.instability_scales.is_empty() {
            return Err(Error::config("engine.instability_scales", "must not be empty"));
        }
        if self.instability_scales.iter().any(|&s| s < 2) {
            return Err(Error::config("engine.instability_scales", "every scale must be >= 2"));
        }
        if self.instability_scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "engine.instability_scales",
                "must be strictly increasing",
            ));
        }
        if self.entropy.window == 0 {
            return Err(Error::config("engine.entropy.window", "must be at least 1"));
        }
        if self.entropy.bins < 2 {
            return Err(Error::config("engine.entropy.bins", "must be at least 2"));
        }
        self.plasticity.validate()
    }

    /// Instability drive actually fed into the energy for a given index value.
    pub fn drive_gain(&self) -> f64 {
        if self.variant.instability_drive() {
            self.alpha_i
        } else {
            0.0
        }
    }
}

/// Instantaneous surprise.
pub fn free_energy(x: f64, mu: f64) -> f64 {
    (x - mu).abs()
}

/// One energy increment. The engine and every consistency check use this
/// exact expression so the balance can be verified bit-for-bit.
pub fn energy_delta(alpha: f64, free_energy: f64, precision: f64, drive: f64, beta: f64, n_agents: usize) -> f64 {
    alpha * free_energy * precision + drive - beta * n_agents as f64
}

/// Exponentially weighted inverse variance of the prediction error.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionTracker {
    params: PrecisionParams,
    variance: f64,
}

impl PrecisionTracker {
    pub fn new(params: PrecisionParams) -> Self {
        Self { params, variance: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn update(&mut self, error: f64) -> f64 {
        let d = self.params.decay;
        self.variance = d * self.variance + (1.0 - d) * error * error;
        self.current()
    }

    pub fn current(&self) -> f64 {
        1.0 / (self.params.eps + self.variance)
    }
}

const INSTABILITY_RESYNC: u64 = 4096;

/// Mean absolute first difference over several trailing windows, updated in
/// O(number of scales) per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityIndex {
    scales: Vec<usize>,
    diffs: VecDeque<f64>,
    sums: Vec<f64>,
    last: Option<f64>,
    pushed: u64,
}

impl InstabilityIndex {
    pub fn new(scales: &[usize]) -> Self {
        let cap = scales.iter().copied().max().unwrap_or(2) - 1;
        Self {
            scales: scales.to_vec(),
            diffs: VecDeque::with_capacity(cap + 1),
            sums: vec![0.0; scales.len()],
            last: None,
            pushed: 0,
        }
    }

    pub fn push(&mut self, x: f64) {
        let Some(prev) = self.last.replace(x) else {
            return;
        };
        let d = (x - prev).abs();
        self.diffs.push_back(d);
        self.pushed += 1;
        let n = self.diffs.len();
        for (sum, &s) in self.sums.iter_mut().zip(&self.scales) {
            *sum += d;
            if n > s - 1 {
                *sum -= self.diffs[n - s];
            }
        }
        let cap = self.scales.last().copied().unwrap_or(2) - 1;
        if self.diffs.len() > cap {
            self.diffs.pop_front();
        }
        if self.pushed.is_multiple_of(INSTABILITY_RESYNC) {
            let n = self.diffs.len();
            for (sum, &s) in self.sums.iter_mut().zip(&self.scales) {
                let k = (s - 1).min(n);
                *sum = self.diffs.range(n - k..).sum();
            }
        }
    }

    /// Value at scale index `i`; 0 before two samples have arrived.
    pub fn scale_value(&self, i: usize) -> f64 {
        let k = (self.scales[i] - 1).min(self.diffs.len());
        if k == 0 {
            0.0
        } else {
            (self.sums[i] / k as f64).max(0.0)
        }
    }

    pub fn single_scale(&self) -> f64 {
        self.scale_value(0)
    }

    pub fn multi_scale(&self) -> f64 {
        let total: f64 = (0..self.scales.len()).map(|i| self.scale_value(i)).sum();
        total / self.scales.len() as f64
    }
}

/// Shannon entropy (bits) of the amplitude histogram of a trailing window,
/// bins spanning the window's own `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveEntropy {
    window: usize,
    bins: usize,
    values: VecDeque<f64>,
    max_q: VecDeque<(u64, f64)>,
    min_q: VecDeque<(u64, f64)>,
    pushed: u64,
    counts: Vec<u32>,
}

impl WaveEntropy {
    pub fn new(params: EntropyParams) -> Self {
        Self {
            window: params.window,
            bins: params.bins,
            values: VecDeque::with_capacity(params.window + 1),
            max_q: VecDeque::new(),
            min_q: VecDeque::new(),
            pushed: 0,
            counts: vec![0; params.bins],
        }
    }

    pub fn push(&mut self, x: f64) {
        let idx = self.pushed;
        self.pushed += 1;
        self.values.push_back(x);
        if self.values.len() > self.window {
            self.values.pop_front();
        }
        let oldest = self.pushed - self.values.len() as u64;
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
    }

    /// True when every value in the window is identical (entropy 0 without
    /// building a histogram).
    pub fn is_flat(&self) -> bool {
        match (self.min_q.front(), self.max_q.front()) {
            (Some(lo), Some(hi)) => lo.1 == hi.1,
            _ => true,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn entropy(&mut self) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        let lo = self.min_q[0].1;
        let hi = self.max_q[0].1;
        let scale = self.bins as f64 / (hi - lo);
        self.counts.iter_mut().for_each(|c| *c = 0);
        for &v in &self.values {
            let b = (((v - lo) * scale) as usize).min(self.bins - 1);
            self.counts[b] += 1;
        }
        let n = self.values.len() as f64;
        let h: f64 = self
            .counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum();
        h.max(0.0)
    }
}

/// Operation-count model for one step. Counts are floating-point operations
/// of this implementation, with each transcendental or Gaussian draw counted
/// as [`flops::C_TRANSCENDENTAL`].
pub mod flops {
    /// Belief update, surprise, energy update, gradient EWMA and score.
    pub const C_FIXED: u64 = 20;
    /// Per living agent: operator evaluation, force accumulation and the
    /// plasticity bookkeeping share.
    pub const C_AGENT: u64 = 12;
    pub const C_TRANSCENDENTAL: u64 = 4;
    /// Adaptive precision: squared error, EWMA and reciprocal.
    pub const C_PRECISION: u64 = 6;
    /// Diffusion noise: Gaussian draw, scaling and add.
    pub const C_DIFFUSION: u64 = C_TRANSCENDENTAL + 3;
    /// Min/max upkeep of the entropy window.
    pub const C_ENTROPY_TRACK: u64 = 4;
    /// Histogram placement per window sample (subtract, scale).
    pub const C_ENTROPY_PER_SAMPLE: u64 = 2;
    /// Per bin: probability, log and accumulate.
    pub const C_ENTROPY_PER_BIN: u64 = 3 + C_TRANSCENDENTAL;

    /// Entropy readout cost. A flat window short-circuits to zero.
    pub fn entropy(window_len: usize, bins: usize, flat: bool) -> u64 {
        if flat {
            C_ENTROPY_TRACK
        } else {
            C_ENTROPY_TRACK + C_ENTROPY_PER_SAMPLE * window_len as u64 + C_ENTROPY_PER_BIN * bins as u64
        }
    }

    /// Incremental instability update over `scales` windows.
    pub fn instability(scales: usize) -> u64 {
        2 + 3 * scales as u64 + scales as u64
    }

    pub fn agents(n: usize) -> u64 {
        C_AGENT * n as u64
    }
}

/// Everything the engine carries from one sample to the next.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub mu: f64,
    pub mu_prev: f64,
    pub energy: f64,
    pub precision: f64,
    /// Smoothed first difference of the free energy, the gradient estimate
    /// used for spawn-type selection.
    pub grad_f: f64,
    pub f_prev: f64,
    pub step: u64,
    pub pop: AgentPopulation,
    pub flops_total: u64,
    precision_tracker: PrecisionTracker,
    instability: InstabilityIndex,
    entropy: WaveEntropy,
}

/// Decay of the free-energy gradient estimate.
pub const GRAD_DECAY: f64 = 0.9;

/// One row of the per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub x: f64,
    pub label: Option<bool>,
    pub mu: f64,
    pub free_energy: f64,
    pub precision: f64,
    pub energy: f64,
    /// Population that paid the maintenance cost of this step (before this
    /// step's births and deaths).
    pub n_agents: usize,
    pub entropy: f64,
    pub instability: f64,
    pub score: f64,
    pub births: usize,
    pub deaths: usize,
    pub flops_step: u64,
}

impl TraceRecord {
    /// Population after this step's plasticity.
    pub fn n_after(&self) -> usize {
        self.n_agents + self.births - self.deaths
    }
}

pub const TRACE_CSV_HEADER: &str =
    "step,x,label,mu,free_energy,precision,energy,n_agents,entropy,instability,score,births,deaths,flops_step";

pub struct Engine {
    params: EngineParams,
    state: EngineState,
    rng: ChaCha8Rng,
    last_events: Vec<PlasticityEvent>,
}

impl Engine {
    pub fn new(params: EngineParams) -> Result<Self> {
        params.validate()?;
        let state = EngineState {
            mu: 0.0,
            mu_prev: 0.0,
            energy: params.e_init,
            precision: 1.0,
            grad_f: 0.0,
            f_prev: 0.0,
            step: 0,
            pop: AgentPopulation::new(),
            flops_total: 0,
            precision_tracker: PrecisionTracker::new(params.precision),
            instability: InstabilityIndex::new(&params.instability_scales),
            entropy: WaveEntropy::new(params.entropy),
        };
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Ok(Self {
            params,
            state,
            rng,
            last_events: Vec::new(),
        })
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn population(&self) -> &AgentPopulation {
        &self.state.pop
    }

    /// Birth/death events of the most recent step.
    pub fn last_events(&self) -> &[PlasticityEvent] {
        &self.last_events
    }

    pub fn step(&mut self, frame: &SignalFrame) -> Result<TraceRecord> {
        let x = frame.value;
        let s = &mut self.state;
        if !x.is_finite() {
            return Err(Error::NonFiniteSample { step: s.step, value: x });
        }
        let p = &self.params;
        let variant = p.variant;
        let e_thresh = p.plasticity.e_thresh;

        // Collective action, in population order.
        let dmu = s.mu - s.mu_prev;
        let mut action = 0.0;
        for agent in s.pop.agents() {
            action += match agent.role {
                Role::Genesis => 0.0,
                Role::Sensor { sigma } if variant.sensor_jitter() => sensor_transfer(sigma, &mut self.rng),
                Role::Sensor { .. } => 0.0,
                Role::Regulator { k_p, k_d } => regulator_transfer(s.mu, dmu, k_p, k_d),
                Role::Catalyst { lambda_c } => catalyst_transfer(s.mu, lambda_c, s.energy, e_thresh),
            };
        }

        let mut mu_new = p.gamma * s.mu + (1.0 - p.gamma) * (x + action);
        let mut flops_step = flops::C_FIXED + flops::agents(s.pop.len());
        if p.diffusion_d > 0.0 {
            let xi: f64 = StandardNormal.sample(&mut self.rng);
            mu_new += (2.0 * p.diffusion_d).sqrt() * xi;
            flops_step += flops::C_DIFFUSION;
        }

        let f = free_energy(x, mu_new);
        let precision = if variant.adaptive_precision() {
            flops_step += flops::C_PRECISION;
            s.precision_tracker.update(x - mu_new)
        } else {
            1.0
        };
        s.precision = precision;

        let instability = if variant.instability_drive() {
            s.instability.push(x);
            if variant.multi_scale() {
                flops_step += flops::instability(p.instability_scales.len());
                s.instability.multi_scale()
            } else {
                flops_step += flops::instability(1);
                s.instability.single_scale()
            }
        } else {
            0.0
        };

        s.entropy.push(x);
        flops_step += flops::entropy(s.entropy.len(), p.entropy.bins, s.entropy.is_flat());
        let entropy = s.entropy.entropy();

        let n_agents = s.pop.len();
        let drive = p.drive_gain() * instability;
        s.energy += energy_delta(p.alpha, f, precision, drive, p.beta, n_agents);

        s.grad_f = GRAD_DECAY * s.grad_f + (1.0 - GRAD_DECAY) * (f - s.f_prev);
        s.f_prev = f;

        self.last_events = apply_plasticity(&mut s.pop, s.energy, s.grad_f, s.step, &p.plasticity, &mut self.rng);
        let births = self
            .last_events
            .iter()
            .filter(|e| matches!(e, PlasticityEvent::Birth(_)))
            .count();
        let deaths = self.last_events.len() - births;

        s.flops_total += flops_step;
        let record = TraceRecord {
            step: s.step,
            x,
            label: frame.label,
            mu: mu_new,
            free_energy: f,
            precision,
            energy: s.energy,
            n_agents,
            entropy,
            instability,
            score: -s.energy,
            births,
            deaths,
            flops_step,
        };
        s.mu_prev = s.mu;
        s.mu = mu_new;
        s.step += 1;
        Ok(record)
    }
}

/// Run a fresh engine over a whole stream, one record per frame.
pub fn run_stream<I>(params: &EngineParams, stream: I) -> Result<Vec<TraceRecord>>
where
    I: IntoIterator<Item = SignalFrame>,
{
    let mut engine = Engine::new(params.clone())?;
    stream.into_iter().map(|frame| engine.step(&frame)).collect()
}

/// Beat score `-E(b)`: the negated final energy of a fresh engine run over the
/// beat's samples.
pub fn score_beat(params: &EngineParams, beat: &Beat) -> Result<f64> {
    let trace = run_stream(params, beat_frames(beat))?;
    Ok(trace.last().map_or(-params.e_init, |r| r.score))
}

fn beat_frames(beat: &Beat) -> impl Iterator<Item = SignalFrame> + '_ {
    beat.samples
        .iter()
        .enumerate()
        .map(move |(i, &v)| SignalFrame::new(i as u64, v, beat.label))
}

/// Trace of one beat, for inspection alongside [`score_beat`].
pub fn trace_beat(params: &EngineParams, beat: &Beat) -> Result<Vec<TraceRecord>> {
    run_stream(params, beat_frames(beat))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopSummary {
    pub flops_total: u64,
    pub flops_per_sample: f64,
    pub flops_per_beat: Option<f64>,
}

/// Aggregate per-step operation counts; `beat_len` adds a per-beat average.
pub fn flop_estimate(records: &[TraceRecord], beat_len: Option<usize>) -> FlopSummary {
    let flops_total: u64 = records.iter().map(|r| r.flops_step).sum();
    let n = records.len();
    let flops_per_sample = if n == 0 { 0.0 } else { flops_total as f64 / n as f64 };
    let flops_per_beat = beat_len.filter(|&b| b > 0).map(|b| flops_per_sample * b as f64);
    FlopSummary {
        flops_total,
        flops_per_sample,
        flops_per_beat,
    }
}

fn fmt_label(label: Option<bool>) -> &'static str {
    match label {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

/// CSV trace, columns in [`TRACE_CSV_HEADER`] order. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:?},{},{:?},{:?},{:?},{:?},{},{:?},{:?},{:?},{},{},{}",
            r.step,
            r.x,
            fmt_label(r.label),
            r.mu,
            r.free_energy,
            r.precision,
            r.energy,
            r.n_agents,
            r.entropy,
            r.instability,
            r.score,
            r.births,
            r.deaths,
            r.flops_step
        )?;
    }
    Ok(())
}

/// Line-delimited JSON trace, one object per record.
pub fn write_trace_jsonl<W: Write>(records: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace_csv<R: std::io::Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |idx: usize, name: &str| -> Result<&str> {
            rec.get(idx)
                .ok_or_else(|| Error::Schema(format!("row {row}: missing column {name}")))
        };
        fn num<T: FromStr>(raw: &str, row: usize, name: &str) -> Result<T> {
            raw.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("cannot parse {raw:?}"),
            })
        }
        let label = match field(2, "label")? {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => {
                return Err(Error::Parse {
                    row,
                    column: "label".into(),
                    message: format!("bad label {other:?}"),
                })
            }
        };
        out.push(TraceRecord {
            step: num(field(0, "step")?, row, "step")?,
            x: num(field(1, "x")?, row, "x")?,
            label,
            mu: num(field(3, "mu")?, row, "mu")?,
            free_energy: num(field(4, "free_energy")?, row, "free_energy")?,
            precision: num(field(5, "precision")?, row, "precision")?,
            energy: num(field(6, "energy")?, row, "energy")?,
            n_agents: num(field(7, "n_agents")?, row, "n_agents")?,
            entropy: num(field(8, "entropy")?, row, "entropy")?,
            instability: num(field(9, "instability")?, row, "instability")?,
            score: num(field(10, "score")?, row, "score")?,
            births: num(field(11, "births")?, row, "births")?,
            deaths: num(field(12, "deaths")?, row, "deaths")?,
            flops_step: num(field(13, "flops_step")?, row, "flops_step")?,
        });
    }
    Ok(out)
}
