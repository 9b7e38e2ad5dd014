//! Fault-injection simulator for a synthetic risk-scoring pipeline.
//!
//! Each transaction flows feature engineering → model inference →
//! post-processing rules → human review and is archived as a full-tier
//! [`DecisionEvent`](crate::evidence::DecisionEvent) on a hash-chained log.
//! Faults are injected at one stage from an onset index. The latent fraud
//! label exists only inside this module: it drives error accounting in
//! [`CascadeResult`] and is never written into a trace.
//!
//! Randomness comes from ChaCha8 seeded with `seed`, split into independent
//! streams per purpose (see [`RngStream`]) so that a faulted run and its
//! clean counterfactual consume identical draws.

mod pipeline;
mod presets;
mod probe;
mod stream;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::Architecture;
use crate::monitor::{MonitorConfig, SignalReport};

pub use pipeline::{run_pipeline, AgentLog, PipelineRun};
pub use presets::{preset, Scenario, TrackedRole, PRESET_NAMES, WORKED_EXAMPLE};
pub use probe::{compounding_probe, evidence_signature, field_diff, DEFICIT_DEFINITION};
pub use stream::{generate_stream, StreamRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("INVALID_CONFIG: {0}")]
    InvalidConfig(String),
    #[error("INVALID_FAULT: {0}")]
    InvalidFault(String),
}

/// Independent ChaCha8 streams, one per purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Data = 0,
    Faults = 1,
    Review = 2,
    Identity = 3,
}

impl RngStream {
    pub fn rng(self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStage {
    FeatureEngineering,
    ModelInference,
    PostProcessing,
    HumanReview,
}

impl PipelineStage {
    pub const ALL: [PipelineStage; 4] = [
        PipelineStage::FeatureEngineering,
        PipelineStage::ModelInference,
        PipelineStage::PostProcessing,
        PipelineStage::HumanReview,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Freeze at the value held at the onset event.
    StaleFeature,
    /// Zero a count-typed value.
    MissingActivity,
    /// Shuffle within the post-onset window.
    DistributionPreservingPermutation,
}

/// Where a fault lands depends on the stage:
/// `feature_engineering` corrupts the archived features,
/// `model_inference` corrupts only the model's served copy,
/// `post_processing` corrupts the score stream the rules consume
/// (`target_feature` must be [`SCORE_TARGET`]),
/// `human_review` makes the reviewer defer to the model on every referral.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedFault {
    pub kind: FaultKind,
    pub stage: PipelineStage,
    pub target_feature: String,
    pub onset_index: usize,
}

pub const SCORE_TARGET: &str = "score";

pub const DEFAULT_FEATURES: [&str; 4] = ["activity_count", "amount_zscore", "velocity_ratio", "merchant_risk"];

/// Configuration of one simulated pipeline. Feature 0 is a Poisson count;
/// the rest are continuous and share one latent factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub architecture: Architecture,
    pub feature_count: usize,
    pub scorer_weights: Vec<f64>,
    pub scorer_bias: f64,
    pub review_threshold: f64,
    pub block_threshold: Option<f64>,
    pub review_accuracy: f64,
    pub event_count: usize,
    pub seed: u64,
    /// Probability that a false positive is contested downstream.
    pub appeal_rate: f64,
    pub base_rate: f64,
    /// log-mean of the count feature: intercept, factor loading, label shift.
    pub activity_params: [f64; 3],
    pub factor_loadings: Vec<f64>,
    pub label_shifts: Vec<f64>,
    /// Records that replace the generated ones at fixed indices.
    pub pinned: Vec<PinnedRecord>,
    pub monitor: MonitorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnedRecord {
    pub index: usize,
    pub latent_label: bool,
    pub features: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            architecture: Architecture::HybridMlRules,
            feature_count: 4,
            scorer_weights: vec![0.35, 1.2, 0.9, 0.6],
            scorer_bias: -6.0,
            review_threshold: 0.75,
            block_threshold: None,
            review_accuracy: 0.9,
            event_count: 10_000,
            seed: 0,
            appeal_rate: 0.5,
            base_rate: 0.05,
            activity_params: [1.0, 0.4, 0.9],
            factor_loadings: vec![0.8, 0.8, 0.8],
            label_shifts: vec![2.0, 1.5, 1.0],
            pinned: Vec::new(),
            monitor: MonitorConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn feature_names(&self) -> Vec<String> {
        (0..self.feature_count)
            .map(|j| {
                DEFAULT_FEATURES
                    .get(j)
                    .map_or_else(|| format!("feature_{j}"), |s| (*s).to_owned())
            })
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names().iter().position(|n| n == name)
    }

    /// Logistic scorer.
    pub fn score(&self, features: &[f64]) -> f64 {
        let z: f64 = self
            .scorer_weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.scorer_bias;
        1.0 / (1.0 + (-z).exp())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.feature_count == 0 {
            return bad("feature_count must be at least 1".into());
        }
        if self.scorer_weights.len() != self.feature_count {
            return bad(format!(
                "{} scorer weights for {} features",
                self.scorer_weights.len(),
                self.feature_count
            ));
        }
        let continuous = self.feature_count - 1;
        if self.factor_loadings.len() != continuous || self.label_shifts.len() != continuous {
            return bad(format!("factor_loadings and label_shifts need {continuous} entries"));
        }
        if !(self.review_threshold > 0.0 && self.review_threshold < 1.0) {
            return bad("review_threshold must lie in (0, 1)".into());
        }
        if let Some(block) = self.block_threshold {
            if !(block > self.review_threshold && block < 1.0) {
                return bad("block_threshold must lie in (review_threshold, 1)".into());
            }
        }
        for (name, p) in [
            ("review_accuracy", self.review_accuracy),
            ("appeal_rate", self.appeal_rate),
            ("base_rate", self.base_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.event_count == 0 {
            return bad("event_count must be positive".into());
        }
        let numbers = self
            .scorer_weights
            .iter()
            .chain(&self.factor_loadings)
            .chain(&self.label_shifts)
            .chain(&self.activity_params)
            .chain(std::iter::once(&self.scorer_bias));
        if numbers.into_iter().any(|x| !x.is_finite()) {
            return bad("parameters must be finite".into());
        }
        for pin in &self.pinned {
            if pin.index >= self.event_count || pin.features.len() != self.feature_count {
                return bad(format!("pinned record at {} does not fit the stream", pin.index));
            }
            if pin.features.iter().any(|x| !x.is_finite()) || pin.features[0] < 0.0 {
                return bad(format!("pinned record at {} has invalid features", pin.index));
            }
        }
        Ok(())
    }

    pub fn validate_fault(&self, fault: &InjectedFault) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidFault(msg));
        if fault.onset_index >= self.event_count {
            return bad(format!("onset {} beyond {} events", fault.onset_index, self.event_count));
        }
        match fault.stage {
            PipelineStage::PostProcessing => {
                if fault.target_feature != SCORE_TARGET {
                    return bad(format!("post_processing faults target \"{SCORE_TARGET}\""));
                }
            }
            _ => {
                let Some(j) = self.feature_index(&fault.target_feature) else {
                    return bad(format!("unknown feature {}", fault.target_feature));
                };
                if fault.kind == FaultKind::MissingActivity && j != 0 && fault.stage != PipelineStage::HumanReview {
                    return bad(format!("{} is not count-typed", fault.target_feature));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub false_negatives: usize,
    pub unappealed_false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    /// Events whose stage input the fault actually altered.
    pub faults_injected: usize,
    /// Errors present in the faulted run but not in the clean run.
    pub errors_induced: ErrorCounts,
    /// Every induced false-negative trace has the same evidence signature
    /// as some genuine true-negative trace. Vacuously true with none.
    pub traces_indistinguishable: bool,
    /// A feature-distribution detector (univariate, plus the joint one if
    /// enabled) raised an alarm on the post-onset window.
    pub monitor_fired: bool,
    pub detection_latency_events: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDeficit {
    pub stage: PipelineStage,
    /// Fraction of archived traces deficient at this stage or upstream.
    pub deficit: f64,
    /// Fraction whose record at this stage alone differs from the clean one.
    pub local_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorOutcome {
    /// Baseline: the clean counterfactual of the post-onset window.
    pub paired: SignalReport,
    /// Baseline: the pre-onset window of the same run.
    pub pre_post: Option<SignalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedEvent {
    pub role: TrackedRole,
    pub index: usize,
    pub event_id: String,
    pub latent_label: bool,
    pub clean_score: f64,
    pub served_score: f64,
    pub review_threshold: f64,
    pub reviewed: bool,
    pub final_decision: String,
    pub induced_false_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub seed: u64,
    pub fault: Option<InjectedFault>,
    pub per_stage: BTreeMap<PipelineStage, StageOutcome>,
    /// Governance-invisible errors in the archived run: false negatives plus
    /// unappealed false positives.
    pub cumulative_loss: usize,
    pub baseline_loss: usize,
    pub compounding: Vec<StageDeficit>,
    pub deficit_definition: &'static str,
    pub monitor: Option<MonitorOutcome>,
    /// Why the monitor did not run, when it did not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor_skipped: Option<String>,
    pub tracked_events: Vec<TrackedEvent>,
}
