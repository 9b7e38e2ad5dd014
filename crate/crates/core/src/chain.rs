//! Append-only, hash-chained, sequence-numbered trace log.
//!
//! Entry `i` carries `sequence_number = i`, `prev_hash` equal to the previous
//! entry's `this_hash` (64 zeros for the first entry) and
//! `this_hash = SHA-256(canonical_bytes(entry))`. A log maps one-to-one onto a
//! JSONL trace file; a two-line sidecar head file (`count\nhead_hash\n`)
//! allows resuming without rehashing.
//!
//! Appends must be serialized by the caller. Verification works on any
//! snapshot and never aborts.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::evidence::{event_digest, validate_unsealed, DecisionEvent, HashChain, Violation};

/// `prev_hash` of the first entry.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("INVALID_EVENT: {} violation(s), first: {}", .0.len(), .0.first().map(|v| v.message.as_str()).unwrap_or(""))]
    InvalidEvent(Vec<Violation>),
    #[error("malformed head file: {0}")]
    MalformedHead(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChainViolationKind {
    HashMismatch,
    LinkBroken,
    SequenceGap,
    SequenceDuplicate,
}

impl fmt::Display for ChainViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::HashMismatch => "HASH_MISMATCH",
            Self::LinkBroken => "LINK_BROKEN",
            Self::SequenceGap => "SEQUENCE_GAP",
            Self::SequenceDuplicate => "SEQUENCE_DUPLICATE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainViolation {
    pub index: usize,
    pub kind: ChainViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<ChainViolation>,
    pub checked_count: usize,
}

/// `{entry_count, head_hash}` sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainHead {
    pub entry_count: usize,
    pub head_hash: String,
}

impl ChainHead {
    /// `"<count>\n<hash>\n"`.
    pub fn to_file_string(&self) -> String {
        format!("{}\n{}\n", self.entry_count, self.head_hash)
    }

    pub fn parse(text: &str) -> Result<Self, ChainError> {
        let mut lines = text.split('\n');
        let (Some(count), Some(hash), Some(""), None) =
            (lines.next(), lines.next(), lines.next(), lines.next())
        else {
            return Err(ChainError::MalformedHead("expected exactly two newline-terminated lines".into()));
        };
        let entry_count = count
            .parse()
            .map_err(|_| ChainError::MalformedHead(format!("bad entry count `{count}`")))?;
        if !crate::evidence::is_digest(hash) {
            return Err(ChainError::MalformedHead(format!("bad head hash `{hash}`")));
        }
        Ok(Self {
            entry_count,
            head_hash: hash.to_owned(),
        })
    }
}

/// Stamps `event` as entry `sequence_number` following `prev_hash`.
///
/// Fails only if the event holds a non-finite real.
pub fn seal(
    mut event: DecisionEvent,
    sequence_number: u64,
    prev_hash: &str,
) -> Result<DecisionEvent, crate::evidence::CanonicalError> {
    event.temporal.sequence_number = Some(sequence_number);
    let this_hash = event_digest(&event)?;
    event.temporal.hash_chain = Some(HashChain {
        prev_hash: prev_hash.to_owned(),
        this_hash,
    });
    Ok(event)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    entries: Vec<DecisionEvent>,
    head_hash: String,
}

impl TraceLog {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            head_hash: GENESIS_HASH.to_owned(),
        }
    }

    /// Wraps entries read back from storage without checking them; run
    /// [`TraceLog::verify`] to find out whether they chain.
    pub fn from_entries(entries: Vec<DecisionEvent>) -> Self {
        let head_hash = entries
            .last()
            .map(|e| e.this_hash().unwrap_or_default().to_owned())
            .unwrap_or_else(|| GENESIS_HASH.to_owned());
        Self { entries, head_hash }
    }

    pub fn entries(&self) -> &[DecisionEvent] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head_hash(&self) -> &str {
        &self.head_hash
    }

    pub fn head(&self) -> ChainHead {
        ChainHead {
            entry_count: self.entries.len(),
            head_hash: self.head_hash.clone(),
        }
    }

    /// Validates, sequences and hashes `event`, then appends it. On error the
    /// log is unchanged.
    pub fn append(&mut self, event: DecisionEvent) -> Result<&DecisionEvent, ChainError> {
        let report = validate_unsealed(&event);
        if !report.valid {
            return Err(ChainError::InvalidEvent(report.violations));
        }
        let sealed = seal(event, self.entries.len() as u64, &self.head_hash).map_err(|e| {
            ChainError::InvalidEvent(vec![Violation {
                field_path: String::new(),
                code: crate::evidence::ViolationCode::NonFiniteNumber,
                message: e.to_string(),
            }])
        })?;
        self.head_hash = sealed.this_hash().expect("sealed").to_owned();
        self.entries.push(sealed);
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Recomputes every digest and link, stopping at the first violation.
    /// Per entry the order of checks is hash, link, sequence.
    pub fn verify(&self) -> ChainReport {
        verify_entries(&self.entries)
    }

    /// JSONL body, one entry per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&entry.to_json_line().expect("entries serialize"));
            out.push('\n');
        }
        out
    }
}

pub fn verify_entries(entries: &[DecisionEvent]) -> ChainReport {
    let mut expected_prev = GENESIS_HASH;
    let mut prev_sequence: Option<u64> = None;
    for (index, entry) in entries.iter().enumerate() {
        let fail = |kind| ChainReport {
            valid: false,
            first_violation: Some(ChainViolation { index, kind }),
            checked_count: index + 1,
        };
        let Some(chain) = &entry.temporal.hash_chain else {
            return fail(ChainViolationKind::HashMismatch);
        };
        match event_digest(entry) {
            Ok(digest) if digest == chain.this_hash => {}
            _ => return fail(ChainViolationKind::HashMismatch),
        }
        if chain.prev_hash != expected_prev {
            return fail(ChainViolationKind::LinkBroken);
        }
        match entry.temporal.sequence_number {
            Some(seq) if seq == index as u64 => {}
            Some(seq) if seq > index as u64 => return fail(ChainViolationKind::SequenceGap),
            Some(seq) if Some(seq) == prev_sequence || seq < index as u64 => {
                return fail(ChainViolationKind::SequenceDuplicate)
            }
            _ => return fail(ChainViolationKind::SequenceGap),
        }
        expected_prev = &chain.this_hash;
        prev_sequence = entry.temporal.sequence_number;
    }
    ChainReport {
        valid: true,
        first_violation: None,
        checked_count: entries.len(),
    }
}
