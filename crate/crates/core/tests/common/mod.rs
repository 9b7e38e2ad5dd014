#![allow(dead_code)]

use std::collections::BTreeMap;

use govtrace::chain::TraceLog;
use govtrace::delegation::{ConstraintCheck, RationaleRecord};
use govtrace::evidence::{
    feature_vector_digest, AgentClock, BoundaryContract, DecisionEvent, EscalationTrigger, EvidenceTier,
    LogicType, ModelInference, RequiredField, RuleRef,
};
use proptest::prelude::*;
use rand::Rng;

pub fn hex_id(n: u64) -> String {
    format!("{n:032x}")
}

/// A full-tier event with every slot populated for its logic type.
pub fn full_event(n: u64, logic: LogicType, x: f64) -> DecisionEvent {
    let mut e = DecisionEvent::new(hex_id(n), EvidenceTier::Full, logic, if x > 0.0 { "decline" } else { "approve" });
    let features = BTreeMap::from([("amount".to_owned(), x), ("velocity".to_owned(), x * 0.5 - 1.0)]);
    let digest = feature_vector_digest(&features).unwrap();
    e.context.input_refs = vec![format!("txn/{n}")];
    e.context.feature_vector = features;
    e.context.provenance_refs = vec!["store/v1".into()];
    e.context.context_summary = Some("payment screening".into());

    let rules = vec![RuleRef {
        rule_id: "band".into(),
        rule_version: "1".into(),
        evaluation_path: vec!["gate".into()],
    }];
    let model = ModelInference {
        model_id: "scorer".into(),
        model_version: "1".into(),
        feature_vector_hash: digest,
        confidence: 0.8,
    };
    match logic {
        LogicType::RuleBased => e.logic.rule_refs = rules,
        LogicType::MlInference => e.logic.model_inference = Some(model),
        LogicType::Hybrid => {
            e.logic.rule_refs = rules;
            e.logic.model_inference = Some(model);
        }
        LogicType::AgenticDelegation => {
            e.logic.rationale = Some(RationaleRecord {
                mandate_ref: "mandate/1".into(),
                constraints_evaluated: vec![ConstraintCheck {
                    constraint_id: "scope".into(),
                    result: true,
                }],
                selection_justification: "only candidate".into(),
                anchor_refs: vec!["gate/schema".into()],
            })
        }
    }
    e.boundary.thresholds.insert("review".into(), 0.7);
    e.boundary.upstream_decisions = vec!["kyc".into()];
    e.boundary.downstream_consumers = vec!["switch".into()];
    e.boundary.boundary_contracts = vec![BoundaryContract {
        interface_id: "switch/v1".into(),
        contract_descriptor: "binary".into(),
    }];
    e.quality.score = Some(0.25);
    e.quality.confidence = Some(0.75);
    e.quality.uncertainty = Some(0.1875);
    e.quality.calibration_ref = Some("cal/1".into());
    e.override_record.trigger = Some(EscalationTrigger {
        rule_id: "band".into(),
        threshold_exceeded: 0.7,
        risk_category: "fraud".into(),
        authority: "ops".into(),
    });
    e.temporal.event_timestamp = Some(1_700_000_000_000_000_000 + (n % 1_000_000_000) as i64);
    e.temporal.agent_clock = Some(AgentClock {
        agent_id: "agent".into(),
        counter: n,
    });
    e
}

/// Unpopulates one inventory slot.
pub fn clear(slot: RequiredField, e: &mut DecisionEvent) {
    use RequiredField::*;
    match slot {
        SchemaVersion => e.schema_version.clear(),
        EventId => e.event_id.clear(),
        Tier => e.tier = None,
        LogicType => e.logic.logic_type = None,
        DecisionLabel => e.outcome.decision_label = None,
        OverrideOccurred => e.override_record.override_occurred = None,
        EventTimestamp => e.temporal.event_timestamp = None,
        SequenceNumber => e.temporal.sequence_number = None,
        HashChain => e.temporal.hash_chain = None,
        FeatureEvidence => {
            e.context.feature_vector.clear();
            if let Some(m) = e.logic.model_inference.as_mut() {
                m.feature_vector_hash.clear();
            }
        }
        EvaluationSummary => {
            e.logic.rule_refs.iter_mut().for_each(|r| r.evaluation_path.clear());
            e.logic.model_inference = None;
            e.logic.rationale = None;
        }
        ContextSummary => e.context.context_summary = None,
        InputRefs => e.context.input_refs.clear(),
        FeatureVector => e.context.feature_vector.clear(),
        ProvenanceRefs => e.context.provenance_refs.clear(),
        LogicEvidence => {
            e.logic.rule_refs.clear();
            e.logic.model_inference = None;
            e.logic.rationale = None;
        }
        Thresholds => e.boundary.thresholds.clear(),
        UpstreamDecisions => e.boundary.upstream_decisions.clear(),
        DownstreamConsumers => e.boundary.downstream_consumers.clear(),
        BoundaryContracts => e.boundary.boundary_contracts.clear(),
        Score => e.quality.score = None,
        QualityConfidence => e.quality.confidence = None,
        Uncertainty => e.quality.uncertainty = None,
        CalibrationRef => e.quality.calibration_ref = None,
    }
}

pub fn arb_logic() -> impl Strategy<Value = LogicType> {
    prop::sample::select(LogicType::ALL.to_vec())
}

pub fn arb_tier() -> impl Strategy<Value = EvidenceTier> {
    prop::sample::select(EvidenceTier::ALL.to_vec())
}

/// Sealed full events at a random tier label.
pub fn arb_event() -> impl Strategy<Value = DecisionEvent> {
    (any::<u64>(), arb_logic(), arb_tier(), -1e6f64..1e6).prop_map(|(n, logic, tier, x)| {
        let mut e = full_event(n, logic, x);
        e.tier = Some(tier);
        govtrace::chain::seal(e, n % 1000, govtrace::chain::GENESIS_HASH).unwrap()
    })
}

pub fn log_of(events: impl IntoIterator<Item = DecisionEvent>) -> TraceLog {
    let mut log = TraceLog::new();
    for e in events {
        log.append(e).unwrap();
    }
    log
}

pub fn random_log<R: Rng>(len: usize, rng: &mut R) -> TraceLog {
    log_of((0..len).map(|_| {
        let logic = LogicType::ALL[rng.random_range(0..4)];
        let mut e = full_event(rng.random(), logic, rng.random_range(-100.0..100.0));
        e.tier = Some(EvidenceTier::ALL[rng.random_range(0..3)]);
        e
    }))
}

/// Flips one bit in the serialized form of `event` and returns the parsed
/// result. Flips that break parsing or leave the decoded event unchanged are
/// redrawn, so the result always differs in content. Returns the number of
/// redraws alongside it.
pub fn flip_one_bit<R: Rng>(event: &DecisionEvent, rng: &mut R) -> (DecisionEvent, usize) {
    let bytes = event.to_json_line().unwrap().into_bytes();
    let mut redraws = 0;
    loop {
        let mut flipped = bytes.clone();
        let bit = rng.random_range(0..flipped.len() * 8);
        flipped[bit / 8] ^= 1 << (bit % 8);
        if let Ok(text) = std::str::from_utf8(&flipped) {
            if let Ok(parsed) = DecisionEvent::from_json_line(text) {
                if &parsed != event {
                    return (parsed, redraws);
                }
            }
        }
        redraws += 1;
    }
}
