use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use govtrace::delegation::{DelegationRecord, OutcomeProvenance};
use govtrace::evidence::DecisionEvent;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// One agent's files, relative to the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub agent_id: String,
    pub trace: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delegations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<PathBuf>,
}

/// Participating agent logs for one composite decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub agents: Vec<AgentEntry>,
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Usage)
}

/// A JSON document the user supplied (config, matrix, baseline). Anything
/// that does not parse is a usage error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a valid document", path.display()))
        .map_err(Failure::Usage)
}

#[derive(Debug, Clone, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parses every non-empty line; line numbers are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> (Vec<(usize, T)>, Vec<LineError>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => ok.push((i + 1, v)),
            Err(e) => bad.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    (ok, bad)
}

/// Sidecars and traces inside a manifest must parse completely.
fn read_jsonl_strict<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let (ok, bad) = parse_jsonl(&read_text(path)?);
    if let Some(first) = bad.first() {
        return Err(Failure::Usage(anyhow::anyhow!(
            "{}:{}: {}",
            path.display(),
            first.line,
            first.message
        )));
    }
    Ok(ok.into_iter().map(|(_, v)| v).collect())
}

pub fn read_events(path: &Path) -> Result<Vec<DecisionEvent>, Failure> {
    read_jsonl_strict(path)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

pub struct LoadedAgent {
    pub entry: AgentEntry,
    pub events: Vec<DecisionEvent>,
    pub head: Option<String>,
}

pub struct LoadedManifest {
    pub agents: Vec<LoadedAgent>,
    pub delegations: Vec<DelegationRecord>,
    pub provenance: Vec<OutcomeProvenance>,
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest, Failure> {
    let manifest: Manifest = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = LoadedManifest {
        agents: Vec::new(),
        delegations: Vec::new(),
        provenance: Vec::new(),
    };
    for entry in manifest.agents {
        let events = read_events(&dir.join(&entry.trace))?;
        let head = entry.head.as_ref().map(|h| read_text(&dir.join(h))).transpose()?;
        if let Some(d) = &entry.delegations {
            out.delegations.extend(read_jsonl_strict::<DelegationRecord>(&dir.join(d))?);
        }
        if let Some(p) = &entry.provenance {
            out.provenance.extend(read_jsonl_strict::<OutcomeProvenance>(&dir.join(p))?);
        }
        out.agents.push(LoadedAgent { entry, events, head });
    }
    Ok(out)
}
