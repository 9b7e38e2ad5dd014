use serde::{Deserialize, Serialize};

use super::pipeline::{run_tracked, PipelineRun};
use super::{FaultKind, InjectedFault, PinnedRecord, PipelineConfig, PipelineStage, SimError};

pub const WORKED_EXAMPLE: &str = "worked-example";

pub const PRESET_NAMES: [&str; 4] = [
    WORKED_EXAMPLE,
    "stale-feature",
    "missing-activity",
    "permutation-blind-spot",
];

const ONSET: usize = 5_000;
const CLEAN_SCORE: f64 = 0.85;
const STALE_SCORE: f64 = 0.62;
const STALE_AMOUNT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackedRole {
    /// Holds the value the stale feature freezes at.
    StaleOnset,
    /// Fraud event pushed under the review threshold by the stale value.
    InducedFalseNegative,
    /// Genuine legitimate event whose trace matches the induced one.
    LowRiskTwin,
}

/// A named configuration with its fault and the events worth reporting.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub config: PipelineConfig,
    pub fault: Option<InjectedFault>,
    pub tracked: Vec<(TrackedRole, usize)>,
}

impl Scenario {
    pub fn run(&self) -> Result<PipelineRun, SimError> {
        run_tracked(&self.config, self.fault.as_ref(), &self.tracked)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn fe_fault(kind: FaultKind, target: &str) -> InjectedFault {
    InjectedFault {
        kind,
        stage: PipelineStage::FeatureEngineering,
        target_feature: target.to_owned(),
        onset_index: ONSET,
    }
}

pub fn preset(name: &str, seed: u64) -> Option<Scenario> {
    let config = PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    let scenario = match name {
        WORKED_EXAMPLE => worked_example(config),
        "stale-feature" => Scenario {
            name: "stale-feature",
            config,
            fault: Some(fe_fault(FaultKind::StaleFeature, "amount_zscore")),
            tracked: vec![],
        },
        "missing-activity" => Scenario {
            name: "missing-activity",
            config,
            fault: Some(fe_fault(FaultKind::MissingActivity, "activity_count")),
            tracked: vec![],
        },
        "permutation-blind-spot" => Scenario {
            name: "permutation-blind-spot",
            config,
            fault: Some(fe_fault(FaultKind::DistributionPreservingPermutation, "amount_zscore")),
            tracked: vec![],
        },
        _ => return None,
    };
    Some(scenario)
}

/// Three pinned records around the onset of a stale `amount_zscore`: the
/// onset record fixes the stale value, a fraud record scores 0.85 clean and
/// 0.62 once the stale value replaces its own, and a legitimate record
/// scores 0.62 on exactly the features the fraud record is archived with.
fn worked_example(mut config: PipelineConfig) -> Scenario {
    let w = config.scorer_weights.clone();
    let (activity, velocity) = (6.0, 2.5);
    let amount = STALE_AMOUNT + (logit(CLEAN_SCORE) - logit(STALE_SCORE)) / w[1];
    let merchant = (logit(CLEAN_SCORE) - config.scorer_bias - w[0] * activity - w[1] * amount - w[2] * velocity) / w[3];
    let fraud = vec![activity, amount, velocity, merchant];
    let twin = vec![activity, STALE_AMOUNT, velocity, merchant];

    let clean = config.score(&fraud);
    let stale = config.score(&twin);
    assert!(
        (clean - CLEAN_SCORE).abs() < 1e-9 && (stale - STALE_SCORE).abs() < 1e-9,
        "worked example calibration drifted: {clean} / {stale}"
    );

    config.pinned = vec![
        PinnedRecord {
            index: ONSET,
            latent_label: false,
            features: vec![2.0, STALE_AMOUNT, 0.0, 0.0],
        },
        PinnedRecord {
            index: ONSET + 1,
            latent_label: true,
            features: fraud,
        },
        PinnedRecord {
            index: ONSET + 2,
            latent_label: false,
            features: twin,
        },
    ];
    Scenario {
        name: WORKED_EXAMPLE,
        config,
        fault: Some(fe_fault(FaultKind::StaleFeature, "amount_zscore")),
        tracked: vec![
            (TrackedRole::StaleOnset, ONSET),
            (TrackedRole::InducedFalseNegative, ONSET + 1),
            (TrackedRole::LowRiskTwin, ONSET + 2),
        ],
    }
}
