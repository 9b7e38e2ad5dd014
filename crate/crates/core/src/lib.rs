//! Governance evidence for automated decisions: a tiered decision-event
//! schema, hash-chained trace logs, delegation graphs for multi-agent
//! pipelines, structural sufficiency scores, an architecture coverage
//! matrix, a label-free drift monitor and a fault-injection simulator.

pub mod cascade;
pub mod chain;
pub mod coverage;
pub mod delegation;
pub mod evidence;
pub mod monitor;
pub mod scalar;
pub mod sufficiency;

pub use scalar::{Real, Scalar};

/// Exact rational scores, for fractions that must compare without rounding.
pub type Exact = num_rational::Ratio<i64>;

pub type ExactSufficiency = sufficiency::SufficiencyReport<Exact>;
pub type Sufficiency = sufficiency::SufficiencyReport<f64>;

/// Monitor state stored in single precision, for large fleets of baselines.
pub type BaselineF32 = monitor::Baseline<f32>;
pub type MonitorConfigF32 = monitor::MonitorConfig<f32>;
pub type SignalReportF32 = monitor::SignalReport<f32>;
