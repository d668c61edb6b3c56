//! Online metabolic anomaly detection.
//!
//! A small population of agents tracks a streaming signal. Surprise charges a
//! metabolic energy reservoir, every living agent drains it, and the
//! population grows or shrinks with the balance. The energy itself is the
//! anomaly score.

pub mod agents;
pub mod engine;
pub mod error;
pub mod eval;
pub mod signal;

pub use agents::{AgentKind, AgentPopulation, PlasticityMode, PlasticityParams};
pub use engine::{run_stream, score_beat, Engine, EngineParams, TraceRecord, Variant};
pub use error::{Error, Result};
pub use eval::{roc_auc, wilcoxon_signed_rank, EvalMode, Polarity, ScoredItem};
pub use signal::{generate_synthetic, SignalFrame, SyntheticSpec};
