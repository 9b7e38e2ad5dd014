use std::collections::BTreeMap;

use serde_json::Value;

use super::pipeline::{simulate, Draws, Txn};
use super::stream::generate_stream;
use super::{InjectedFault, PipelineConfig, PipelineStage, SimError, StageDeficit};
use crate::evidence::{is_digest, DecisionEvent};

/// How the compounding scores are computed. The deficit measure is this
/// crate's operational choice, not a published formula.
pub const DEFICIT_DEFINITION: &str = "operational definition: a trace is deficient at a stage when its record \
at that stage differs from the clean counterfactual or it was already deficient upstream; the score is the \
deficient fraction of all archived traces";

/// Fields that identify an event rather than describe the decision.
const IDENTITY_FIELDS: [&str; 3] = ["event_id", "temporal", "context.input_refs"];

/// Per-stage evidence deficit of a faulted run against its clean twin.
pub fn compounding_probe(config: &PipelineConfig, fault: &InjectedFault) -> Result<Vec<StageDeficit>, SimError> {
    let stream = generate_stream(config)?;
    config.validate_fault(fault)?;
    let draws = Draws::new(config);
    let (clean, _) = simulate(config, &stream, &draws, None);
    let (faulted, _) = simulate(config, &stream, &draws, Some(fault));
    Ok(deficits(&clean, &faulted))
}

fn differs_at(stage: PipelineStage, clean: &Txn, faulted: &Txn) -> bool {
    match stage {
        PipelineStage::FeatureEngineering => clean.features != faulted.features,
        PipelineStage::ModelInference => clean.score != faulted.score,
        PipelineStage::PostProcessing => clean.automated != faulted.automated,
        PipelineStage::HumanReview => {
            clean.decline != faulted.decline || clean.override_occurred != faulted.override_occurred
        }
    }
}

pub(super) fn deficits(clean: &[Txn], faulted: &[Txn]) -> Vec<StageDeficit> {
    let n = clean.len().max(1) as f64;
    let mut inherited = vec![false; clean.len()];
    PipelineStage::ALL
        .into_iter()
        .map(|stage| {
            let mut local = 0usize;
            for (i, (c, f)) in clean.iter().zip(faulted).enumerate() {
                if differs_at(stage, c, f) {
                    local += 1;
                    inherited[i] = true;
                }
            }
            StageDeficit {
                stage,
                deficit: inherited.iter().filter(|d| **d).count() as f64 / n,
                local_difference: local as f64 / n,
            }
        })
        .collect()
}

fn strip_identity(event: &DecisionEvent) -> Value {
    let mut value = serde_json::to_value(event).expect("events serialize");
    for path in IDENTITY_FIELDS {
        let mut parts: Vec<&str> = path.split('.').collect();
        let last = parts.pop().expect("non-empty path");
        let parent = parts.iter().try_fold(&mut value, |v, p| v.get_mut(*p));
        if let Some(Value::Object(map)) = parent {
            map.remove(last);
        }
    }
    value
}

/// Blanks instance data: numbers and the digests computed from them.
fn erase_instance_values(value: &mut Value) {
    match value {
        Value::Number(_) => *value = Value::Null,
        Value::String(s) if is_digest(s) => *value = Value::Null,
        Value::Array(items) => items.iter_mut().for_each(erase_instance_values),
        Value::Object(map) => map.values_mut().for_each(erase_instance_values),
        _ => {}
    }
}

/// What a reviewer sees of an event's structure: which fields are present
/// and every categorical value, with identity fields removed and numbers
/// and digests blanked.
pub fn evidence_signature(event: &DecisionEvent) -> Value {
    let mut value = strip_identity(event);
    erase_instance_values(&mut value);
    value
}

pub(super) fn signature_key(event: &DecisionEvent) -> String {
    evidence_signature(event).to_string()
}

fn flatten(prefix: String, value: &Value, out: &mut BTreeMap<String, Value>) {
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(path, v, out);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, v) in items.iter().enumerate() {
                flatten(format!("{prefix}[{i}]"), v, out);
            }
        }
        leaf => {
            out.insert(prefix, leaf.clone());
        }
    }
}

/// Leaf paths whose values differ between two events, outside identity
/// fields (`event_id`, `temporal`, `context.input_refs`).
pub fn field_diff(a: &DecisionEvent, b: &DecisionEvent) -> Vec<String> {
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    flatten(String::new(), &strip_identity(a), &mut fa);
    flatten(String::new(), &strip_identity(b), &mut fb);
    let mut paths: Vec<String> = fa
        .iter()
        .filter(|(k, v)| fb.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    paths.extend(fb.keys().filter(|k| !fa.contains_key(*k)).cloned());
    paths.sort();
    paths
}
