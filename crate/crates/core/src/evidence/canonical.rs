//! Canonical byte form used for hashing.
//!
//! UTF-8 JSON with object keys sorted bytewise, no whitespace, integers in
//! plain decimal, reals in shortest round-trip form, lists in declared order
//! and absent optionals omitted. `temporal.hash_chain` is dropped so an
//! entry's digest never depends on itself.

use std::collections::BTreeMap;

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::DecisionEvent;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalError {
    #[error("NON_FINITE_NUMBER: {path} is NaN or infinite")]
    NonFiniteNumber { path: String },
}

pub fn canonical_bytes(event: &DecisionEvent) -> Result<Vec<u8>, CanonicalError> {
    if let Some(path) = first_non_finite(event) {
        return Err(CanonicalError::NonFiniteNumber { path });
    }
    let mut value = serde_json::to_value(event).expect("decision events always serialize");
    if let Some(temporal) = value.get_mut("temporal").and_then(Value::as_object_mut) {
        temporal.remove("hash_chain");
    }
    let mut out = Vec::with_capacity(1024);
    write_canonical(&value, &mut out);
    Ok(out)
}

/// Lowercase hex SHA-256 of [`canonical_bytes`].
pub fn event_digest(event: &DecisionEvent) -> Result<String, CanonicalError> {
    canonical_bytes(event).map(|bytes| sha256_hex(&bytes))
}

/// Digest recorded in `model_inference.feature_vector_hash`.
pub fn feature_vector_digest(features: &BTreeMap<String, f64>) -> Result<String, CanonicalError> {
    if let Some((name, _)) = features.iter().find(|(_, v)| !v.is_finite()) {
        return Err(CanonicalError::NonFiniteNumber {
            path: format!("context.feature_vector.{name}"),
        });
    }
    let value = serde_json::to_value(features).expect("finite map serializes");
    let mut out = Vec::new();
    write_canonical(&value, &mut out);
    Ok(sha256_hex(&out))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_canonical(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(b) => out.extend_from_slice(if *b { b"true" } else { b"false" }),
        Value::Number(n) => out.extend_from_slice(n.to_string().as_bytes()),
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(item, out);
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(key, out);
                out.push(b':');
                write_canonical(item, out);
            }
            out.push(b'}');
        }
    }
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    let quoted = serde_json::to_string(s).expect("strings serialize");
    out.extend_from_slice(quoted.as_bytes());
}

fn first_non_finite(event: &DecisionEvent) -> Option<String> {
    let mut reals: Vec<(String, f64)> = Vec::new();
    for (name, v) in &event.context.feature_vector {
        reals.push((format!("context.feature_vector.{name}"), *v));
    }
    if let Some(inference) = &event.logic.model_inference {
        reals.push(("logic.model_inference.confidence".into(), inference.confidence));
    }
    for (name, v) in &event.boundary.thresholds {
        reals.push((format!("boundary.thresholds.{name}"), *v));
    }
    let quality = &event.quality;
    for (path, v) in [
        ("quality.score", quality.score),
        ("quality.confidence", quality.confidence),
        ("quality.uncertainty", quality.uncertainty),
        ("outcome.decision_value", event.outcome.decision_value),
    ] {
        if let Some(v) = v {
            reals.push((path.into(), v));
        }
    }
    if let Some(trigger) = &event.override_record.trigger {
        reals.push(("override.trigger.threshold_exceeded".into(), trigger.threshold_exceeded));
    }
    reals.into_iter().find(|(_, v)| !v.is_finite()).map(|(path, _)| path)
}
