//! Decision event records and tier-aware validation.
//!
//! A [`DecisionEvent`] carries six property groups (context, logic,
//! boundary, quality, override/escalation, temporal) plus an envelope and an
//! outcome. Fields that a tier may legitimately omit are modelled as
//! `Option` or empty collections so that a partially populated record still
//! parses and can be scored.

mod canonical;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::delegation::RationaleRecord;

pub use canonical::{canonical_bytes, event_digest, feature_vector_digest, CanonicalError};
pub use validate::{
    required_fields, validate_event, validate_unsealed, RequiredField, ValidationReport, Violation,
    ViolationCode,
};

/// Schema version written by this crate.
pub const SCHEMA_VERSION: &str = "0.3.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceTier {
    Lightweight,
    Sampled,
    Full,
}

impl EvidenceTier {
    pub const ALL: [EvidenceTier; 3] = [Self::Lightweight, Self::Sampled, Self::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lightweight => "lightweight",
            Self::Sampled => "sampled",
            Self::Full => "full",
        }
    }
}

impl fmt::Display for EvidenceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicType {
    RuleBased,
    MlInference,
    Hybrid,
    AgenticDelegation,
}

impl LogicType {
    pub const ALL: [LogicType; 4] = [
        Self::RuleBased,
        Self::MlInference,
        Self::Hybrid,
        Self::AgenticDelegation,
    ];
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionContext {
    #[serde(default)]
    pub input_refs: Vec<String>,
    /// Feature name to value, as received by the decision system.
    #[serde(default, deserialize_with = "unique_keys::deserialize")]
    pub feature_vector: BTreeMap<String, f64>,
    #[serde(default)]
    pub provenance_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleRef {
    pub rule_id: String,
    pub rule_version: String,
    #[serde(default)]
    pub evaluation_path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelInference {
    pub model_id: String,
    pub model_version: String,
    pub feature_vector_hash: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionLogic {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic_type: Option<LogicType>,
    #[serde(default)]
    pub rule_refs: Vec<RuleRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_inference: Option<ModelInference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<RationaleRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryContract {
    pub interface_id: String,
    pub contract_descriptor: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionBoundary {
    #[serde(default, deserialize_with = "unique_keys::deserialize")]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    pub upstream_decisions: Vec<String>,
    #[serde(default)]
    pub downstream_consumers: Vec<String>,
    #[serde(default)]
    pub boundary_contracts: Vec<BoundaryContract>,
    /// Correlation id of the delegation that produced this event, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inbound_correlation_id: Option<String>,
    /// Correlation ids of delegations this event issued.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outbound_correlation_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityIndicators {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscalationTrigger {
    pub rule_id: String,
    pub threshold_exceeded: f64,
    pub risk_category: String,
    pub authority: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideClass {
    None,
    Structured,
    Discretionary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideEscalationRecord {
    /// Mandatory in every tier; `None` only for records that failed to carry it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_occurred: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<EscalationTrigger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl OverrideEscalationRecord {
    pub fn classify(&self) -> OverrideClass {
        match (self.override_occurred, &self.trigger) {
            (Some(true), Some(_)) => OverrideClass::Structured,
            (Some(true), None) => OverrideClass::Discretionary,
            _ => OverrideClass::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashChain {
    pub prev_hash: String,
    pub this_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentClock {
    pub agent_id: String,
    pub counter: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalMetadata {
    /// Nanoseconds since the Unix epoch, UTC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_timestamp: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_number: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash_chain: Option<HashChain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_clock: Option<AgentClock>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_value: Option<f64>,
}

/// One archived decision.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionEvent {
    #[serde(default)]
    pub schema_version: String,
    /// 32 lowercase hex characters.
    #[serde(default)]
    pub event_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<EvidenceTier>,
    #[serde(default)]
    pub context: DecisionContext,
    #[serde(default)]
    pub logic: DecisionLogic,
    #[serde(default)]
    pub boundary: DecisionBoundary,
    #[serde(default)]
    pub quality: QualityIndicators,
    #[serde(default, rename = "override")]
    pub override_record: OverrideEscalationRecord,
    #[serde(default)]
    pub temporal: TemporalMetadata,
    #[serde(default)]
    pub outcome: Outcome,
}

impl DecisionEvent {
    /// A lightweight skeleton: envelope, logic type, label and
    /// `override_occurred = false`. Timestamps and chain fields are left for
    /// the caller and the trace log.
    pub fn new(
        event_id: impl Into<String>,
        tier: EvidenceTier,
        logic_type: LogicType,
        decision_label: impl Into<String>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_owned(),
            event_id: event_id.into(),
            tier: Some(tier),
            logic: DecisionLogic {
                logic_type: Some(logic_type),
                ..Default::default()
            },
            override_record: OverrideEscalationRecord {
                override_occurred: Some(false),
                ..Default::default()
            },
            outcome: Outcome {
                decision_label: Some(decision_label.into()),
                decision_value: None,
            },
            ..Default::default()
        }
    }

    pub fn logic_type(&self) -> Option<LogicType> {
        self.logic.logic_type
    }

    pub fn this_hash(&self) -> Option<&str> {
        self.temporal
            .hash_chain
            .as_ref()
            .map(|chain| chain.this_hash.as_str())
    }

    pub fn to_json_line(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json_line(line: &str) -> serde_json::Result<Self> {
        serde_json::from_str(line)
    }
}

/// True for a 32-character lowercase hex identifier.
pub fn is_identifier(s: &str) -> bool {
    is_lower_hex(s, 32)
}

/// True for a 64-character lowercase hex SHA-256 digest.
pub fn is_digest(s: &str) -> bool {
    is_lower_hex(s, 64)
}

fn is_lower_hex(s: &str, len: usize) -> bool {
    s.len() == len && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Rejects duplicate keys instead of silently keeping the last one.
mod unique_keys {
    use std::collections::BTreeMap;
    use std::fmt;
    use std::marker::PhantomData;

    use serde::de::{Deserialize, Deserializer, MapAccess, Visitor};

    pub fn deserialize<'de, D, V>(deserializer: D) -> Result<BTreeMap<String, V>, D::Error>
    where
        D: Deserializer<'de>,
        V: Deserialize<'de>,
    {
        struct UniqueVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for UniqueVisitor<V> {
            type Value = BTreeMap<String, V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map with unique keys")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((key, value)) = access.next_entry::<String, V>()? {
                    if out.contains_key(&key) {
                        return Err(serde::de::Error::custom(format!("duplicate key `{key}`")));
                    }
                    out.insert(key, value);
                }
                Ok(out)
            }
        }

        deserializer.deserialize_map(UniqueVisitor(PhantomData))
    }
}
