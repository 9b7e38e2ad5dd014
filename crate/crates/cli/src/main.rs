//! `govtrace`: file-driven commands over decision traces.
//!
//! Exit codes: 0 clean, 1 findings (invalid events, broken chain, gaps,
//! gradient violation, alarms), 2 usage or unreadable input, 3 internal.

mod io;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use govtrace::cascade::{self, InjectedFault, PipelineConfig, PipelineRun, Scenario, PRESET_NAMES};
use govtrace::chain::{verify_entries, ChainHead, ChainReport};
use govtrace::coverage::{apply_agentic_extensions, default_matrix, CoverageMatrix, CoverageReport};
use govtrace::delegation::{assemble, attribute, cross_agent_order, detect_gaps, AttributionPath, GapReport};
use govtrace::evidence::{validate_event, DecisionEvent, Violation};
use govtrace::monitor::{detect, fit_baseline, Baseline, MonitorConfig, SignalReport};
use govtrace::sufficiency::{archive_sufficiency, graph_sufficiency, SufficiencyReport};
use serde::Serialize;

use crate::io::{load_manifest, parse_jsonl, read_events, read_json, read_text, write_jsonl, AgentEntry, LineError, Manifest};

/// Graphs above this size skip all-pairs ordering and blanket attribution.
const PAIRWISE_LIMIT: usize = 2_000;

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Clean,
    Findings,
}

impl Status {
    fn from_findings(found: bool) -> Self {
        if found {
            Status::Findings
        } else {
            Status::Clean
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Parser)]
#[command(name = "govtrace", version, about = "Governance evidence tooling for automated decision traces")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every event of a JSONL trace against its tier.
    Validate { trace: PathBuf },
    /// Check the hash chain of a JSONL trace.
    Verify {
        trace: PathBuf,
        /// Head file (`count` and `hash` lines) to detect truncation.
        #[arg(long)]
        head: Option<PathBuf>,
    },
    /// Assemble the delegation graph of a manifest and report gaps.
    Dag {
        manifest: PathBuf,
        /// Attribute only these components (default: all, on small graphs).
        #[arg(long = "attribute")]
        components: Vec<String>,
    },
    /// Structural sufficiency of a manifest or a single JSONL archive.
    Sufficiency { input: PathBuf },
    /// Coverage matrix scores, gradient check and robustness scan.
    Coverage {
        /// Alternative coding as JSON; the default matrix otherwise.
        matrix: Option<PathBuf>,
        /// Apply the agentic tracing extensions first.
        #[arg(long)]
        extensions: bool,
    },
    /// Fit a drift baseline from a window of events.
    MonitorBaseline {
        window: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        slice: Slice,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Compare a window of events against a baseline.
    MonitorDetect {
        baseline: PathBuf,
        window: PathBuf,
        #[command(flatten)]
        slice: Slice,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Run the fault-injection simulator.
    Simulate {
        #[arg(long, conflicts_with = "config", value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        preset: Option<String>,
        /// Pipeline config JSON; may carry an `injected_fault`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the review threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Enable the correlation detector.
        #[arg(long)]
        joint: bool,
        /// Directory for trace, sidecar, manifest and result files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Event index range within a trace file.
#[derive(Args, Clone, Copy)]
struct Slice {
    /// First event index to use.
    #[arg(long, default_value_t = 0)]
    skip: usize,
    /// Number of events to use (default: the rest).
    #[arg(long)]
    take: Option<usize>,
}

impl Slice {
    fn apply(self, events: Vec<DecisionEvent>) -> Vec<DecisionEvent> {
        let rest = events.into_iter().skip(self.skip);
        match self.take {
            Some(n) => rest.take(n).collect(),
            None => rest.collect(),
        }
    }
}

#[derive(Args, Clone)]
struct Thresholds {
    #[arg(long)]
    min_window: Option<usize>,
    #[arg(long)]
    psi_warn: Option<f64>,
    #[arg(long)]
    psi_alarm: Option<f64>,
    #[arg(long)]
    variance_collapse: Option<f64>,
    #[arg(long)]
    zero_inflation: Option<f64>,
    #[arg(long)]
    correlation_norm: Option<f64>,
    #[arg(long)]
    override_p: Option<f64>,
    /// Enable the correlation-matrix detector.
    #[arg(long)]
    joint: bool,
    /// Alarm on quality-score PSI as well as reporting it.
    #[arg(long)]
    score_alarm: bool,
}

impl Thresholds {
    fn config(&self) -> MonitorConfig {
        let d = MonitorConfig::default();
        MonitorConfig {
            min_window: self.min_window.unwrap_or(d.min_window),
            psi_warn: self.psi_warn.unwrap_or(d.psi_warn),
            psi_alarm: self.psi_alarm.unwrap_or(d.psi_alarm),
            variance_collapse_ratio: self.variance_collapse.unwrap_or(d.variance_collapse_ratio),
            zero_inflation_delta: self.zero_inflation.unwrap_or(d.zero_inflation_delta),
            correlation_drift_norm: self.correlation_norm.unwrap_or(d.correlation_drift_norm),
            override_p_value: self.override_p.unwrap_or(d.override_p_value),
            smoothing: d.smoothing,
            joint_detector: self.joint,
            score_alarm: self.score_alarm,
        }
    }
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) -> Result<(), Failure> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).context("serializing report")?),
        Format::Text => print!("{}", text()),
    }
    Ok(())
}

// validate ------------------------------------------------------------------

#[derive(Serialize)]
struct InvalidEvent {
    line: usize,
    event_id: String,
    violations: Vec<Violation>,
}

#[derive(Serialize)]
struct ValidateReport {
    file: PathBuf,
    events: usize,
    valid_events: usize,
    invalid: Vec<InvalidEvent>,
    unparsable: Vec<LineError>,
}

fn cmd_validate(format: Format, trace: &Path) -> Result<Status, Failure> {
    let (events, unparsable) = parse_jsonl::<DecisionEvent>(&read_text(trace)?);
    let invalid: Vec<InvalidEvent> = events
        .iter()
        .filter_map(|(line, e)| {
            let report = validate_event(e);
            (!report.valid).then(|| InvalidEvent {
                line: *line,
                event_id: e.event_id.clone(),
                violations: report.violations,
            })
        })
        .collect();
    let report = ValidateReport {
        file: trace.to_owned(),
        events: events.len(),
        valid_events: events.len() - invalid.len(),
        invalid,
        unparsable,
    };
    emit(format, &report, || {
        let mut s = String::new();
        for bad in &report.unparsable {
            let _ = writeln!(s, "line {}: PARSE_ERROR {}", bad.line, bad.message);
        }
        for bad in &report.invalid {
            for v in &bad.violations {
                let _ = writeln!(s, "line {} ({}): {} {}: {}", bad.line, bad.event_id, v.code, v.field_path, v.message);
            }
        }
        let _ = writeln!(s, "{} of {} events valid", report.valid_events, report.events);
        s
    })?;
    Ok(Status::from_findings(!report.invalid.is_empty() || !report.unparsable.is_empty()))
}

// verify --------------------------------------------------------------------

#[derive(Serialize)]
struct HeadCheck {
    expected: ChainHead,
    actual: ChainHead,
    matches: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    file: PathBuf,
    chain: Option<ChainReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parse_error: Option<LineError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    head: Option<HeadCheck>,
}

fn cmd_verify(format: Format, trace: &Path, head: Option<&Path>) -> Result<Status, Failure> {
    let expected = head
        .map(|p| {
            ChainHead::parse(&read_text(p)?)
                .with_context(|| format!("{} is not a head file", p.display()))
                .map_err(Failure::Usage)
        })
        .transpose()?;
    let (events, mut unparsable) = parse_jsonl::<DecisionEvent>(&read_text(trace)?);
    let mut report = VerifyReport {
        file: trace.to_owned(),
        chain: None,
        parse_error: None,
        head: None,
    };
    if !unparsable.is_empty() {
        // An entry that no longer parses has been altered; there is no chain to check.
        report.parse_error = Some(unparsable.remove(0));
    } else {
        let entries: Vec<DecisionEvent> = events.into_iter().map(|(_, e)| e).collect();
        let chain = verify_entries(&entries);
        if let Some(expected) = expected {
            let actual = ChainHead {
                entry_count: entries.len(),
                head_hash: entries
                    .last()
                    .and_then(|e| e.this_hash())
                    .unwrap_or(govtrace::chain::GENESIS_HASH)
                    .to_owned(),
            };
            report.head = Some(HeadCheck {
                matches: actual == expected,
                expected,
                actual,
            });
        }
        report.chain = Some(chain);
    }
    let ok = report.chain.as_ref().is_some_and(|c| c.valid) && report.head.as_ref().is_none_or(|h| h.matches);
    emit(format, &report, || {
        let mut s = String::new();
        if let Some(e) = &report.parse_error {
            let _ = writeln!(s, "line {}: entry does not parse ({})", e.line, e.message);
        }
        if let Some(chain) = &report.chain {
            match &chain.first_violation {
                Some(v) => {
                    let _ = writeln!(s, "chain broken: first violation at index {} ({})", v.index, v.kind);
                }
                None => {
                    let _ = writeln!(s, "chain intact: {} entries", chain.checked_count);
                }
            }
        }
        if let Some(h) = &report.head {
            let _ = writeln!(
                s,
                "head {}: expected {} entries ending {}, found {} ending {}",
                if h.matches { "matches" } else { "MISMATCH" },
                h.expected.entry_count,
                h.expected.head_hash,
                h.actual.entry_count,
                h.actual.head_hash
            );
        }
        s
    })?;
    Ok(Status::from_findings(!ok))
}

// dag -----------------------------------------------------------------------

#[derive(Serialize)]
struct AgentSummary {
    agent_id: String,
    entries: usize,
    chain_valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    head_matches: Option<bool>,
}

#[derive(Serialize)]
struct OrderSummary {
    ordered_pairs: usize,
    concurrent_pairs: usize,
    conflicting_pairs: Vec<(String, String)>,
}

#[derive(Serialize)]
struct DagReport {
    agents: Vec<AgentSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph_error: Option<String>,
    nodes: usize,
    delegations: usize,
    roots: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaps: Option<GapReport>,
    attributed: Vec<AttributionPath>,
    attribution_failures: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<OrderSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    skipped: Vec<String>,
}

fn cmd_dag(format: Format, manifest: &Path, components: &[String]) -> Result<Status, Failure> {
    let loaded = load_manifest(manifest)?;
    let agents: Vec<AgentSummary> = loaded
        .agents
        .iter()
        .map(|a| {
            let chain = verify_entries(&a.events);
            AgentSummary {
                agent_id: a.entry.agent_id.clone(),
                entries: a.events.len(),
                chain_valid: chain.valid,
                head_matches: a.head.as_deref().map(|h| {
                    ChainHead::parse(h).is_ok_and(|h| {
                        h.entry_count == a.events.len()
                            && Some(h.head_hash.as_str())
                                == a.events.last().and_then(|e| e.this_hash()).or(Some(govtrace::chain::GENESIS_HASH))
                    })
                }),
            }
        })
        .collect();
    let events: Vec<DecisionEvent> = loaded.agents.into_iter().flat_map(|a| a.events).collect();
    let mut report = DagReport {
        agents,
        graph_error: None,
        nodes: events.len(),
        delegations: loaded.delegations.len(),
        roots: 0,
        gaps: None,
        attributed: Vec::new(),
        attribution_failures: BTreeMap::new(),
        order: None,
        skipped: Vec::new(),
    };
    match assemble(events, loaded.delegations, loaded.provenance) {
        Err(e) => report.graph_error = Some(e.to_string()),
        Ok(graph) => {
            report.roots = graph.roots().len();
            report.gaps = Some(detect_gaps(&graph));
            let small = graph.nodes().len() <= PAIRWISE_LIMIT;
            let targets: Vec<String> = if !components.is_empty() {
                components.to_vec()
            } else if small {
                graph.provenance().iter().map(|p| p.component_id.clone()).collect()
            } else {
                report
                    .skipped
                    .push(format!("attribution: more than {PAIRWISE_LIMIT} nodes, pass --attribute"));
                Vec::new()
            };
            for c in targets {
                match attribute(&graph, &c) {
                    Ok(path) => report.attributed.push(path),
                    Err(e) => {
                        report.attribution_failures.insert(c, e.to_string());
                    }
                }
            }
            if small {
                let order = cross_agent_order(&graph);
                report.order = Some(OrderSummary {
                    ordered_pairs: order.order.len(),
                    concurrent_pairs: order.concurrent_pairs.len(),
                    conflicting_pairs: order.conflicting_pairs,
                });
            } else {
                report.skipped.push(format!("ordering: more than {PAIRWISE_LIMIT} nodes"));
            }
        }
    }
    let findings = report.graph_error.is_some()
        || report.agents.iter().any(|a| !a.chain_valid || a.head_matches == Some(false))
        || report.gaps.as_ref().is_some_and(|g| !g.is_complete())
        || !report.attribution_failures.is_empty()
        || report.order.as_ref().is_some_and(|o| !o.conflicting_pairs.is_empty());
    emit(format, &report, || render_dag(&report))?;
    Ok(Status::from_findings(findings))
}

fn render_dag(r: &DagReport) -> String {
    let mut s = String::new();
    for a in &r.agents {
        let head = match a.head_matches {
            Some(true) => ", head matches",
            Some(false) => ", head MISMATCH",
            None => "",
        };
        let chain = if a.chain_valid { "intact" } else { "BROKEN" };
        let _ = writeln!(s, "agent {}: {} entries, chain {chain}{head}", a.agent_id, a.entries);
    }
    if let Some(e) = &r.graph_error {
        let _ = writeln!(s, "graph rejected: {e}");
        return s;
    }
    let _ = writeln!(s, "{} nodes, {} delegation records, {} roots", r.nodes, r.delegations, r.roots);
    if let Some(g) = &r.gaps {
        for (name, items) in [
            ("missing child traces", &g.missing_child_traces),
            ("unanchored rationales", &g.unanchored_rationales),
            ("broken provenance", &g.broken_provenance),
            ("orphan events", &g.orphan_events),
        ] {
            let _ = writeln!(s, "{name}: {}", items.len());
            for id in items.iter().take(20) {
                let _ = writeln!(s, "  {id}");
            }
        }
    }
    let _ = writeln!(s, "attributed components: {}", r.attributed.len());
    for (c, e) in &r.attribution_failures {
        let _ = writeln!(s, "  {c}: {e}");
    }
    if let Some(o) = &r.order {
        let _ = writeln!(
            s,
            "ordering: {} ordered pairs, {} concurrent, {} conflicting",
            o.ordered_pairs,
            o.concurrent_pairs,
            o.conflicting_pairs.len()
        );
    }
    for note in &r.skipped {
        let _ = writeln!(s, "skipped {note}");
    }
    s
}

// sufficiency ---------------------------------------------------------------

fn cmd_sufficiency(format: Format, input: &Path) -> Result<Status, Failure> {
    let is_archive = input.extension().is_some_and(|e| e == "jsonl");
    let report: SufficiencyReport = if is_archive {
        archive_sufficiency(&read_events(input)?)
    } else {
        let loaded = load_manifest(input)?;
        let events = loaded.agents.into_iter().flat_map(|a| a.events).collect();
        let graph = assemble(events, loaded.delegations, loaded.provenance)
            .with_context(|| format!("{} does not assemble", input.display()))
            .map_err(Failure::Usage)?;
        graph_sufficiency(&graph)
    };
    emit(format, &report, || {
        let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(s, "field population     {:.4}", report.field_population);
        let _ = writeln!(s, "delegation coverage  {}", show(report.delegation_coverage));
        let _ = writeln!(s, "rationale coverage   {}", show(report.rationale_coverage));
        let _ = writeln!(s, "provenance coverage  {}", show(report.provenance_coverage));
        let _ = writeln!(s, "nodes                {}", report.node_count);
        if report.is_vacuous() {
            let _ = writeln!(s, "(empty input: every score is vacuous)");
        }
        let _ = writeln!(s, "flag: {}", report.epistemic_flag());
        s
    })?;
    Ok(Status::Clean)
}

// coverage ------------------------------------------------------------------

fn cmd_coverage(format: Format, matrix: Option<&Path>, extensions: bool) -> Result<Status, Failure> {
    let user_supplied = matrix.is_some();
    let mut m: CoverageMatrix = match matrix {
        Some(p) => read_json(p)?,
        None => default_matrix(),
    };
    if extensions {
        m = apply_agentic_extensions(&m);
    }
    let report = CoverageReport::new(m);
    emit(format, &report, || report.to_string())?;
    Ok(Status::from_findings(user_supplied && !report.gradient_holds()))
}

// monitor -------------------------------------------------------------------

fn monitor_failure(e: govtrace::monitor::MonitorError) -> Failure {
    Failure::Usage(anyhow!(e))
}

fn cmd_monitor_baseline(
    format: Format,
    window: &Path,
    out: Option<&Path>,
    slice: Slice,
    thresholds: &Thresholds,
) -> Result<Status, Failure> {
    let events = slice.apply(read_events(window)?);
    let baseline = fit_baseline(&events, &thresholds.config()).map_err(monitor_failure)?;
    if let Some(out) = out {
        let text = serde_json::to_string_pretty(&baseline).context("serializing baseline")?;
        fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
    }
    emit(format, &baseline, || {
        let mut s = format!("baseline over {} events\n", baseline.window_size);
        for (name, c) in &baseline.per_feature {
            let _ = writeln!(
                s,
                "  {name}: mean {:.4}, variance {:.4}, zero fraction {:.4}",
                c.mean, c.variance, c.zero_fraction
            );
        }
        let _ = writeln!(s, "  override rate {:.4}", baseline.override_rate);
        if let Some(out) = out {
            let _ = writeln!(s, "written to {}", out.display());
        }
        s
    })?;
    Ok(Status::Clean)
}

fn cmd_monitor_detect(
    format: Format,
    baseline: &Path,
    window: &Path,
    slice: Slice,
    thresholds: &Thresholds,
) -> Result<Status, Failure> {
    let baseline: Baseline = read_json(baseline)?;
    let events = slice.apply(read_events(window)?);
    let report = detect(&events, &baseline, &thresholds.config()).map_err(monitor_failure)?;
    emit(format, &report, || render_signals(&report))?;
    Ok(Status::from_findings(report.fired()))
}

fn render_signals(r: &SignalReport) -> String {
    let mut s = format!("window of {} events\n", r.window_size);
    for (name, psi) in &r.per_feature_psi {
        let ratio = r.variance_ratios[name].map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "  {name}: PSI {psi:.4}, variance ratio {ratio}, zero delta {:+.4}",
            r.zero_inflation_deltas[name]
        );
    }
    if let Some(v) = r.score_psi {
        let _ = writeln!(s, "  score PSI {v:.4}");
    }
    let o = &r.override_rate_drift;
    let _ = writeln!(
        s,
        "  override rate {:.4} -> {:.4} (z {:.2}, p {:.3e})",
        o.baseline_rate, o.window_rate, o.z, o.p_value
    );
    if let Some(c) = r.correlation_drift {
        let _ = writeln!(s, "  correlation drift {c:.4}");
    }
    if r.alarms.is_empty() {
        let _ = writeln!(s, "no alarms");
    }
    for a in &r.alarms {
        let _ = writeln!(
            s,
            "ALARM {:?} {:?} {} {:.4}",
            a.kind,
            a.severity,
            a.feature.as_deref().unwrap_or("-"),
            a.value
        );
    }
    s
}

// simulate ------------------------------------------------------------------

/// A config file: pipeline parameters plus an optional fault.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationFile {
    #[serde(default, flatten)]
    config: PipelineConfig,
    #[serde(default)]
    injected_fault: Option<InjectedFault>,
}

#[derive(Serialize)]
struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    joint: bool,
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_file: Option<&'a Path>,
    overrides: Overrides,
    config: &'a PipelineConfig,
    result: &'a cascade::CascadeResult,
}

struct SimulateArgs<'a> {
    preset: Option<&'a str>,
    config: Option<&'a Path>,
    seed: Option<u64>,
    threshold: Option<f64>,
    joint: bool,
    out: Option<&'a Path>,
}

fn cmd_simulate(format: Format, args: SimulateArgs<'_>) -> Result<Status, Failure> {
    let mut scenario = match (args.preset, args.config) {
        (Some(name), _) => cascade::preset(name, args.seed.unwrap_or(0))
            .ok_or_else(|| Failure::Usage(anyhow!("unknown preset {name}")))?,
        (None, Some(path)) => {
            let file: SimulationFile = read_json(path)?;
            Scenario {
                name: "config",
                config: file.config,
                fault: file.injected_fault,
                tracked: Vec::new(),
            }
        }
        (None, None) => return Err(Failure::Usage(anyhow!("pass --preset or --config"))),
    };
    if let Some(seed) = args.seed {
        scenario.config.seed = seed;
    }
    if let Some(t) = args.threshold {
        scenario.config.review_threshold = t;
    }
    scenario.config.monitor.joint_detector |= args.joint;

    let run = scenario.run().map_err(|e| Failure::Usage(anyhow!(e)))?;
    if let Some(dir) = args.out {
        write_run(dir, &run)?;
    }
    let report = SimulationReport {
        preset: args.preset,
        config_file: args.config,
        overrides: Overrides {
            seed: args.seed,
            threshold: args.threshold,
            joint: args.joint,
        },
        config: &scenario.config,
        result: &run.result,
    };
    if let Some(dir) = args.out {
        let text = serde_json::to_string_pretty(&report).context("serializing result")?;
        fs::write(dir.join("result.json"), text).context("writing result.json")?;
    }
    emit(format, &report, || render_simulation(&report, args.out))?;
    Ok(Status::Clean)
}

/// Writes the run in the formats the other subcommands read.
fn write_run(dir: &Path, run: &PipelineRun) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("trace.jsonl"), run.trace_log.to_jsonl())?;
    fs::write(dir.join("trace.head"), run.trace_log.head().to_file_string())?;
    let main_agent = run
        .trace_log
        .entries()
        .first()
        .and_then(|e| e.temporal.agent_clock.as_ref())
        .map_or_else(|| "pipeline".to_owned(), |c| c.agent_id.clone());
    let mut agents = vec![AgentEntry {
        agent_id: main_agent,
        trace: "trace.jsonl".into(),
        head: Some("trace.head".into()),
        delegations: Some("delegations.jsonl".into()),
        provenance: Some("provenance.jsonl".into()),
    }];
    write_jsonl(&dir.join("delegations.jsonl"), &run.delegations)?;
    write_jsonl(&dir.join("provenance.jsonl"), &run.provenance)?;
    for agent in &run.agent_logs {
        let trace = format!("agent-{}.jsonl", agent.agent_id);
        let head = format!("agent-{}.head", agent.agent_id);
        fs::write(dir.join(&trace), agent.log.to_jsonl())?;
        fs::write(dir.join(&head), agent.log.head().to_file_string())?;
        agents.push(AgentEntry {
            agent_id: agent.agent_id.clone(),
            trace: trace.into(),
            head: Some(head.into()),
            delegations: None,
            provenance: None,
        });
    }
    let manifest = serde_json::to_string_pretty(&Manifest { agents })?;
    fs::write(dir.join("manifest.json"), manifest)?;
    Ok(())
}

fn render_simulation(r: &SimulationReport<'_>, out: Option<&Path>) -> String {
    let res = r.result;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} events, architecture {}, seed {}, review threshold {}",
        r.config.event_count,
        r.config.architecture.as_str(),
        res.seed,
        r.config.review_threshold
    );
    match &res.fault {
        Some(f) => {
            let _ = writeln!(
                s,
                "fault: {:?} at {:?} on {} from event {}",
                f.kind, f.stage, f.target_feature, f.onset_index
            );
        }
        None => {
            let _ = writeln!(s, "no fault injected");
        }
    }
    for (stage, o) in &res.per_stage {
        let latency = o
            .detection_latency_events
            .map_or_else(|| "never".to_owned(), |n| format!("{n} events"));
        let _ = writeln!(
            s,
            "{stage:?}: {} events altered, {} induced FN, {} induced unappealed FP, indistinguishable {}, monitor fired {} (latency {latency})",
            o.faults_injected,
            o.errors_induced.false_negatives,
            o.errors_induced.unappealed_false_positives,
            o.traces_indistinguishable,
            o.monitor_fired
        );
    }
    let _ = writeln!(s, "governance-invisible loss: {} (clean run {})", res.cumulative_loss, res.baseline_loss);
    let _ = writeln!(s, "evidence deficit by stage ({}):", res.deficit_definition);
    for d in &res.compounding {
        let _ = writeln!(s, "  {:?}: {:.4} (local {:.4})", d.stage, d.deficit, d.local_difference);
    }
    if let Some(why) = &res.monitor_skipped {
        let _ = writeln!(s, "monitor skipped: {why}");
    }
    for t in &res.tracked_events {
        let _ = writeln!(
            s,
            "tracked {:?} #{} ({}): score {:.2} clean, {:.2} served vs threshold {:.2}, decision {}, fraud {}, induced FN {}",
            t.role,
            t.index,
            t.event_id,
            t.clean_score,
            t.served_score,
            t.review_threshold,
            t.final_decision,
            t.latent_label,
            t.induced_false_negative
        );
    }
    if let Some(dir) = out {
        let _ = writeln!(s, "files written to {}", dir.display());
    }
    s
}

fn run(cli: Cli) -> Result<Status, Failure> {
    let f = cli.format;
    match &cli.command {
        Command::Validate { trace } => cmd_validate(f, trace),
        Command::Verify { trace, head } => cmd_verify(f, trace, head.as_deref()),
        Command::Dag { manifest, components } => cmd_dag(f, manifest, components),
        Command::Sufficiency { input } => cmd_sufficiency(f, input),
        Command::Coverage { matrix, extensions } => cmd_coverage(f, matrix.as_deref(), *extensions),
        Command::MonitorBaseline {
            window,
            out,
            slice,
            thresholds,
        } => cmd_monitor_baseline(f, window, out.as_deref(), *slice, thresholds),
        Command::MonitorDetect {
            baseline,
            window,
            slice,
            thresholds,
        } => cmd_monitor_detect(f, baseline, window, *slice, thresholds),
        Command::Simulate {
            preset,
            config,
            seed,
            threshold,
            joint,
            out,
        } => cmd_simulate(
            f,
            SimulateArgs {
                preset: preset.as_deref(),
                config: config.as_deref(),
                seed: *seed,
                threshold: *threshold,
                joint: *joint,
                out: out.as_deref(),
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Findings) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}
