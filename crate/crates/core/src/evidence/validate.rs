//! Tier-aware validation.
//!
//! Required fields form nested sets: 9 for lightweight, 12 for sampled and
//! 24 for full. Type invariants (ranges, digests, logic-type conflicts) are
//! checked in every tier whenever the field is present. Validation never
//! stops at the first failure.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::LogicType as LogicKind;
use super::{feature_vector_digest, is_digest, is_identifier, DecisionEvent, EvidenceTier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    MissingMandatory,
    MissingSchemaVersion,
    MissingTierField,
    InvalidIdentifier,
    InvalidDigest,
    FeatureHashMismatch,
    OutOfRange,
    NonFiniteNumber,
    LogicTypeConflict,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_value(self).expect("unit variant");
        f.write_str(text.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field_path: String,
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, code: ViolationCode, field_path: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.code == code && v.field_path == field_path)
    }
}

/// One slot of the tier inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RequiredField {
    // lightweight
    SchemaVersion,
    EventId,
    Tier,
    LogicType,
    DecisionLabel,
    OverrideOccurred,
    EventTimestamp,
    SequenceNumber,
    HashChain,
    // sampled
    FeatureEvidence,
    EvaluationSummary,
    ContextSummary,
    // full
    InputRefs,
    FeatureVector,
    ProvenanceRefs,
    LogicEvidence,
    Thresholds,
    UpstreamDecisions,
    DownstreamConsumers,
    BoundaryContracts,
    Score,
    QualityConfidence,
    Uncertainty,
    CalibrationRef,
}

const LIGHTWEIGHT: &[RequiredField] = &[
    RequiredField::SchemaVersion,
    RequiredField::EventId,
    RequiredField::Tier,
    RequiredField::LogicType,
    RequiredField::DecisionLabel,
    RequiredField::OverrideOccurred,
    RequiredField::EventTimestamp,
    RequiredField::SequenceNumber,
    RequiredField::HashChain,
];

const SAMPLED: &[RequiredField] = &[
    RequiredField::SchemaVersion,
    RequiredField::EventId,
    RequiredField::Tier,
    RequiredField::LogicType,
    RequiredField::DecisionLabel,
    RequiredField::OverrideOccurred,
    RequiredField::EventTimestamp,
    RequiredField::SequenceNumber,
    RequiredField::HashChain,
    RequiredField::FeatureEvidence,
    RequiredField::EvaluationSummary,
    RequiredField::ContextSummary,
];

const FULL: &[RequiredField] = &[
    RequiredField::SchemaVersion,
    RequiredField::EventId,
    RequiredField::Tier,
    RequiredField::LogicType,
    RequiredField::DecisionLabel,
    RequiredField::OverrideOccurred,
    RequiredField::EventTimestamp,
    RequiredField::SequenceNumber,
    RequiredField::HashChain,
    RequiredField::FeatureEvidence,
    RequiredField::EvaluationSummary,
    RequiredField::ContextSummary,
    RequiredField::InputRefs,
    RequiredField::FeatureVector,
    RequiredField::ProvenanceRefs,
    RequiredField::LogicEvidence,
    RequiredField::Thresholds,
    RequiredField::UpstreamDecisions,
    RequiredField::DownstreamConsumers,
    RequiredField::BoundaryContracts,
    RequiredField::Score,
    RequiredField::QualityConfidence,
    RequiredField::Uncertainty,
    RequiredField::CalibrationRef,
];

/// Required slots for a tier. Each tier's set contains the lower tiers' sets.
pub fn required_fields(tier: EvidenceTier) -> &'static [RequiredField] {
    match tier {
        EvidenceTier::Lightweight => LIGHTWEIGHT,
        EvidenceTier::Sampled => SAMPLED,
        EvidenceTier::Full => FULL,
    }
}

impl RequiredField {
    pub fn path(self) -> &'static str {
        use RequiredField::*;
        match self {
            SchemaVersion => "schema_version",
            EventId => "event_id",
            Tier => "tier",
            LogicType => "logic.logic_type",
            DecisionLabel => "outcome.decision_label",
            OverrideOccurred => "override.override_occurred",
            EventTimestamp => "temporal.event_timestamp",
            SequenceNumber => "temporal.sequence_number",
            HashChain => "temporal.hash_chain",
            FeatureEvidence => "context.feature_vector|logic.model_inference.feature_vector_hash",
            EvaluationSummary => "logic.rule_refs.evaluation_path|logic.model_inference",
            ContextSummary => "context.context_summary",
            InputRefs => "context.input_refs",
            FeatureVector => "context.feature_vector",
            ProvenanceRefs => "context.provenance_refs",
            LogicEvidence => "logic",
            Thresholds => "boundary.thresholds",
            UpstreamDecisions => "boundary.upstream_decisions",
            DownstreamConsumers => "boundary.downstream_consumers",
            BoundaryContracts => "boundary.boundary_contracts",
            Score => "quality.score",
            QualityConfidence => "quality.confidence",
            Uncertainty => "quality.uncertainty",
            CalibrationRef => "quality.calibration_ref",
        }
    }

    /// Mandatory in every tier.
    pub fn is_mandatory(self) -> bool {
        LIGHTWEIGHT.contains(&self)
    }

    /// Temporal slots the trace log fills in on append.
    pub fn is_chain_assigned(self) -> bool {
        matches!(self, RequiredField::SequenceNumber | RequiredField::HashChain)
    }

    pub fn is_populated(self, e: &DecisionEvent) -> bool {
        use RequiredField::*;
        let non_empty = |s: &Option<String>| s.as_deref().is_some_and(|s| !s.is_empty());
        match self {
            SchemaVersion => !e.schema_version.is_empty(),
            EventId => !e.event_id.is_empty(),
            Tier => e.tier.is_some(),
            LogicType => e.logic.logic_type.is_some(),
            DecisionLabel => non_empty(&e.outcome.decision_label),
            OverrideOccurred => e.override_record.override_occurred.is_some(),
            EventTimestamp => e.temporal.event_timestamp.is_some(),
            SequenceNumber => e.temporal.sequence_number.is_some(),
            HashChain => e.temporal.hash_chain.is_some(),
            FeatureEvidence => {
                !e.context.feature_vector.is_empty()
                    || e
                        .logic
                        .model_inference
                        .as_ref()
                        .is_some_and(|m| !m.feature_vector_hash.is_empty())
            }
            EvaluationSummary => {
                e.logic.rule_refs.iter().any(|r| !r.evaluation_path.is_empty())
                    || e.logic.model_inference.is_some()
                    || e.logic.rationale.is_some()
            }
            ContextSummary => non_empty(&e.context.context_summary),
            InputRefs => !e.context.input_refs.is_empty(),
            FeatureVector => !e.context.feature_vector.is_empty(),
            ProvenanceRefs => !e.context.provenance_refs.is_empty(),
            LogicEvidence => {
                let rules = !e.logic.rule_refs.is_empty();
                let model = e.logic.model_inference.is_some();
                match e.logic.logic_type {
                    Some(LogicKind::RuleBased) => rules && !model,
                    Some(LogicKind::MlInference) => model,
                    Some(LogicKind::Hybrid) => rules && model,
                    Some(LogicKind::AgenticDelegation) => e.logic.rationale.is_some(),
                    None => false,
                }
            }
            Thresholds => !e.boundary.thresholds.is_empty(),
            UpstreamDecisions => !e.boundary.upstream_decisions.is_empty(),
            DownstreamConsumers => !e.boundary.downstream_consumers.is_empty(),
            BoundaryContracts => !e.boundary.boundary_contracts.is_empty(),
            Score => e.quality.score.is_some(),
            QualityConfidence => e.quality.confidence.is_some(),
            Uncertainty => e.quality.uncertainty.is_some(),
            CalibrationRef => non_empty(&e.quality.calibration_ref),
        }
    }
}

/// Validates an archived event, including its chain fields.
pub fn validate_event(event: &DecisionEvent) -> ValidationReport {
    validate_with(event, false)
}

/// Validates an event before it is appended to a trace log: the sequence
/// number and hash chain may still be unset.
pub fn validate_unsealed(event: &DecisionEvent) -> ValidationReport {
    validate_with(event, true)
}

fn validate_with(event: &DecisionEvent, unsealed: bool) -> ValidationReport {
    let mut out = Vec::new();
    let mut push = |field_path: &str, code: ViolationCode, message: String| {
        out.push(Violation {
            field_path: field_path.to_owned(),
            code,
            message,
        })
    };

    let tier = event.tier.unwrap_or(EvidenceTier::Lightweight);
    for &slot in required_fields(tier) {
        if unsealed && slot.is_chain_assigned() {
            continue;
        }
        if slot.is_populated(event) {
            continue;
        }
        let (code, message) = match slot {
            RequiredField::SchemaVersion => (
                ViolationCode::MissingSchemaVersion,
                "schema_version must be declared".to_owned(),
            ),
            s if s.is_mandatory() => (
                ViolationCode::MissingMandatory,
                format!("{} is mandatory in every tier", s.path()),
            ),
            s => (
                ViolationCode::MissingTierField,
                format!("{} is required at tier {tier}", s.path()),
            ),
        };
        push(slot.path(), code, message);
    }

    if !event.event_id.is_empty() && !is_identifier(&event.event_id) {
        push(
            "event_id",
            ViolationCode::InvalidIdentifier,
            "event_id must be 32 lowercase hex characters".into(),
        );
    }
    if let Some(chain) = &event.temporal.hash_chain {
        for (path, digest) in [
            ("temporal.hash_chain.prev_hash", &chain.prev_hash),
            ("temporal.hash_chain.this_hash", &chain.this_hash),
        ] {
            if !is_digest(digest) {
                push(path, ViolationCode::InvalidDigest, "expected 64 lowercase hex characters".into());
            }
        }
    }

    let mut check_real = |path: &str, value: f64, lo: f64, hi: f64| {
        if !value.is_finite() {
            push(path, ViolationCode::NonFiniteNumber, format!("{path} is not finite"));
        } else if value < lo || value > hi {
            push(path, ViolationCode::OutOfRange, format!("{path}={value} outside [{lo}, {hi}]"));
        }
    };
    for (name, value) in &event.context.feature_vector {
        check_real(&format!("context.feature_vector.{name}"), *value, f64::MIN, f64::MAX);
    }
    for (name, value) in &event.boundary.thresholds {
        check_real(&format!("boundary.thresholds.{name}"), *value, f64::MIN, f64::MAX);
    }
    if let Some(m) = &event.logic.model_inference {
        check_real("logic.model_inference.confidence", m.confidence, 0.0, 1.0);
    }
    if let Some(v) = event.quality.score {
        check_real("quality.score", v, f64::MIN, f64::MAX);
    }
    if let Some(v) = event.quality.confidence {
        check_real("quality.confidence", v, 0.0, 1.0);
    }
    if let Some(v) = event.quality.uncertainty {
        check_real("quality.uncertainty", v, 0.0, f64::MAX);
    }
    if let Some(v) = event.outcome.decision_value {
        check_real("outcome.decision_value", v, f64::MIN, f64::MAX);
    }
    if let Some(t) = &event.override_record.trigger {
        check_real("override.trigger.threshold_exceeded", t.threshold_exceeded, f64::MIN, f64::MAX);
    }

    if let Some(m) = &event.logic.model_inference {
        let path = "logic.model_inference.feature_vector_hash";
        if !is_digest(&m.feature_vector_hash) {
            push(path, ViolationCode::InvalidDigest, "expected 64 lowercase hex characters".into());
        } else if !event.context.feature_vector.is_empty() {
            // Non-finite features were already reported above.
            if let Ok(expected) = feature_vector_digest(&event.context.feature_vector) {
                if expected != m.feature_vector_hash {
                    push(
                        path,
                        ViolationCode::FeatureHashMismatch,
                        "does not match the canonical hash of context.feature_vector".into(),
                    );
                }
            }
        }
    }

    if event.logic.logic_type == Some(LogicKind::RuleBased) && event.logic.model_inference.is_some() {
        push(
            "logic.model_inference",
            ViolationCode::LogicTypeConflict,
            "rule_based decisions carry no model inference".into(),
        );
    }

    ValidationReport {
        valid: out.is_empty(),
        violations: out,
    }
}
