use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::probe::{deficits, signature_key, DEFICIT_DEFINITION};
use super::stream::{generate_stream, StreamRecord};
use super::{
    CascadeResult, ErrorCounts, FaultKind, InjectedFault, MonitorOutcome, PipelineConfig, PipelineStage, RngStream,
    SimError, StageOutcome, TrackedEvent, TrackedRole,
};
use crate::chain::TraceLog;
use crate::coverage::Architecture;
use crate::delegation::{ConstraintCheck, DelegationRecord, OutcomeProvenance, RationaleRecord};
use crate::evidence::{
    feature_vector_digest, AgentClock, BoundaryContract, DecisionEvent, EscalationTrigger, EvidenceTier, LogicType,
    ModelInference, RuleRef,
};
use crate::monitor::{detect, fit_baseline, AlarmKind, SignalReport};

const T0_NANOS: i64 = 1_790_000_000_000_000_000;
const LATENCY_STEP: usize = 100;
pub(super) const MAIN_AGENT: &str = "risk-pipeline";
const FETCH_AGENT: &str = "feature-fetch-agent";
const SCORING_AGENT: &str = "scoring-agent";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Automated {
    Approve,
    Refer,
    Decline,
}

impl Automated {
    fn path(self) -> Vec<String> {
        let band = match self {
            Automated::Approve => "below_review",
            Automated::Refer => "review_band",
            Automated::Decline => "block_band",
        };
        vec!["score_gate".to_owned(), band.to_owned()]
    }
}

/// One transaction after every stage, as the pipeline saw it.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct Txn {
    pub features: Vec<f64>,
    pub score: f64,
    pub rule_score: f64,
    pub automated: Automated,
    pub reviewed: bool,
    pub decline: bool,
    pub override_occurred: bool,
}

/// Draws shared by the clean and faulted runs.
pub(super) struct Draws {
    review: Vec<f64>,
    appeal: Vec<f64>,
    /// Event id, two sub-agent event ids and two correlation ids per record.
    ids: Vec<[String; 5]>,
    timestamps: Vec<i64>,
}

impl Draws {
    pub(super) fn new(config: &PipelineConfig) -> Self {
        let n = config.event_count;
        let mut review_rng = RngStream::Review.rng(config.seed);
        let mut review = Vec::with_capacity(n);
        let mut appeal = Vec::with_capacity(n);
        for _ in 0..n {
            review.push(review_rng.random::<f64>());
            appeal.push(review_rng.random::<f64>());
        }
        let mut id_rng = RngStream::Identity.rng(config.seed);
        let mut ids = Vec::with_capacity(n);
        let mut timestamps = Vec::with_capacity(n);
        for i in 0..n {
            ids.push(std::array::from_fn(|_| format!("{:032x}", id_rng.random::<u128>())));
            timestamps.push(T0_NANOS + i as i64 * 1_000_000_000 + id_rng.random_range(0..500_000_000));
        }
        Draws {
            review,
            appeal,
            ids,
            timestamps,
        }
    }
}

/// Applies a fault kind to `values[onset..]`, returning how many changed.
fn corrupt(values: &mut [f64], kind: FaultKind, onset: usize, rng: &mut impl Rng) -> usize {
    let before = values[onset..].to_vec();
    let window = &mut values[onset..];
    match kind {
        FaultKind::StaleFeature => {
            let frozen = window[0];
            window.fill(frozen);
        }
        FaultKind::MissingActivity => window.fill(0.0),
        FaultKind::DistributionPreservingPermutation => window.shuffle(rng),
    }
    window.iter().zip(before).filter(|(a, b)| **a != *b).count()
}

fn corrupt_column(rows: &mut [Vec<f64>], j: usize, kind: FaultKind, onset: usize, rng: &mut impl Rng) -> usize {
    let mut column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
    let changed = corrupt(&mut column, kind, onset, rng);
    for (row, v) in rows.iter_mut().zip(column) {
        row[j] = v;
    }
    changed
}

/// Runs every transaction through the four stages.
pub(super) fn simulate(
    config: &PipelineConfig,
    stream: &[StreamRecord],
    draws: &Draws,
    fault: Option<&InjectedFault>,
) -> (Vec<Txn>, usize) {
    let mut fault_rng = RngStream::Faults.rng(config.seed);
    let mut injected = 0;
    let stage_fault = |stage: PipelineStage| fault.filter(|f| f.stage == stage);

    let mut archived: Vec<Vec<f64>> = stream.iter().map(|r| r.clean_features.clone()).collect();
    if let Some(f) = stage_fault(PipelineStage::FeatureEngineering) {
        let j = config.feature_index(&f.target_feature).expect("validated");
        injected = corrupt_column(&mut archived, j, f.kind, f.onset_index, &mut fault_rng);
    }

    let scores: Vec<f64> = match stage_fault(PipelineStage::ModelInference) {
        Some(f) => {
            let mut served = archived.clone();
            let j = config.feature_index(&f.target_feature).expect("validated");
            injected = corrupt_column(&mut served, j, f.kind, f.onset_index, &mut fault_rng);
            served.iter().map(|x| config.score(x)).collect()
        }
        None => archived.iter().map(|x| config.score(x)).collect(),
    };

    let mut rule_scores = scores.clone();
    if let Some(f) = stage_fault(PipelineStage::PostProcessing) {
        injected = corrupt(&mut rule_scores, f.kind, f.onset_index, &mut fault_rng);
    }

    let rubber_stamp_from = stage_fault(PipelineStage::HumanReview).map(|f| f.onset_index);
    let mut txns = Vec::with_capacity(stream.len());
    for (i, record) in stream.iter().enumerate() {
        let s = rule_scores[i];
        let automated = if config.block_threshold.is_some_and(|b| s >= b) {
            Automated::Decline
        } else if s >= config.review_threshold {
            Automated::Refer
        } else {
            Automated::Approve
        };
        let (reviewed, decline) = match automated {
            Automated::Approve => (false, false),
            Automated::Decline => (false, true),
            Automated::Refer if rubber_stamp_from.is_some_and(|onset| i >= onset) => {
                injected += 1;
                (true, true)
            }
            // The reviewer reaches the right call with probability
            // review_accuracy and otherwise defers to the model.
            Automated::Refer if draws.review[i] < config.review_accuracy => (true, record.latent_label),
            Automated::Refer => (true, true),
        };
        txns.push(Txn {
            features: archived[i].clone(),
            score: scores[i],
            rule_score: s,
            automated,
            reviewed,
            decline,
            override_occurred: reviewed && !decline,
        });
    }
    (txns, injected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Errors {
    false_negative: bool,
    unappealed_false_positive: bool,
}

fn errors(config: &PipelineConfig, record: &StreamRecord, txn: &Txn, appeal_draw: f64) -> Errors {
    let false_positive = txn.decline && !record.latent_label;
    Errors {
        false_negative: record.latent_label && !txn.decline,
        unappealed_false_positive: false_positive && appeal_draw >= config.appeal_rate,
    }
}

fn loss(config: &PipelineConfig, stream: &[StreamRecord], txns: &[Txn], draws: &Draws) -> usize {
    stream
        .iter()
        .zip(txns)
        .zip(&draws.appeal)
        .map(|((r, t), a)| {
            let e = errors(config, r, t, *a);
            e.false_negative as usize + e.unappealed_false_positive as usize
        })
        .sum()
}

/// The per-agent trace logs of an agentic run.
#[derive(Debug, Clone, Serialize)]
pub struct AgentLog {
    pub agent_id: String,
    #[serde(skip)]
    pub log: TraceLog,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// The pipeline's decision log (the orchestrator's, for agentic runs).
    pub trace_log: TraceLog,
    /// Sub-agent logs; empty unless the architecture is agentic.
    pub agent_logs: Vec<AgentLog>,
    pub delegations: Vec<DelegationRecord>,
    pub provenance: Vec<OutcomeProvenance>,
    pub result: CascadeResult,
}

struct Emitter<'a> {
    config: &'a PipelineConfig,
    names: Vec<String>,
    draws: &'a Draws,
}

impl Emitter<'_> {
    fn decision_event(&self, i: usize, txn: &Txn) -> DecisionEvent {
        let c = self.config;
        let [event_id, _, _, fetch_corr, score_corr] = &self.draws.ids[i];
        let logic_type = match c.architecture {
            Architecture::DeterministicRules => LogicType::RuleBased,
            Architecture::ClassicalMlHitl => LogicType::MlInference,
            Architecture::HybridMlRules => LogicType::Hybrid,
            Architecture::AgenticAi => LogicType::AgenticDelegation,
        };
        let label = if txn.decline { "decline" } else { "approve" };
        let mut e = DecisionEvent::new(event_id.clone(), EvidenceTier::Full, logic_type, label);

        let features: BTreeMap<String, f64> = self.names.iter().cloned().zip(txn.features.iter().copied()).collect();
        let digest = feature_vector_digest(&features).expect("features are finite");
        e.context.input_refs = vec![format!("payment/{i:08}")];
        e.context.feature_vector = features;
        e.context.provenance_refs = vec!["feature-store/snapshot-v7".into(), "model-registry/risk-scorer@3.2.0".into()];
        e.context.context_summary = Some("card-not-present payment risk assessment".into());

        let confidence = txn.score.max(1.0 - txn.score);
        let rules = vec![RuleRef {
            rule_id: "risk-band".into(),
            rule_version: "2.1.0".into(),
            evaluation_path: txn.automated.path(),
        }];
        let model = ModelInference {
            model_id: "risk-scorer".into(),
            model_version: "3.2.0".into(),
            feature_vector_hash: digest,
            confidence,
        };
        match logic_type {
            LogicType::RuleBased => e.logic.rule_refs = rules,
            LogicType::MlInference => e.logic.model_inference = Some(model),
            LogicType::Hybrid => {
                e.logic.rule_refs = rules;
                e.logic.model_inference = Some(model);
            }
            LogicType::AgenticDelegation => {
                e.logic.rule_refs = rules;
                e.logic.rationale = Some(RationaleRecord {
                    mandate_ref: "mandate/payment-risk".into(),
                    constraints_evaluated: vec![ConstraintCheck {
                        constraint_id: "decision-space:approve|decline".into(),
                        result: true,
                    }],
                    selection_justification: "fixed decomposition: fetch features, then score".into(),
                    anchor_refs: vec!["gate/output-schema".into()],
                });
                e.boundary.outbound_correlation_ids = vec![fetch_corr.clone(), score_corr.clone()];
            }
        }

        e.boundary.thresholds.insert("review".into(), c.review_threshold);
        if let Some(b) = c.block_threshold {
            e.boundary.thresholds.insert("block".into(), b);
        }
        e.boundary.upstream_decisions = vec!["kyc-screening".into(), "sanctions-screening".into()];
        e.boundary.downstream_consumers = vec!["payment-switch".into(), "case-management".into()];
        e.boundary.boundary_contracts = vec![BoundaryContract {
            interface_id: "payment-switch/v2".into(),
            contract_descriptor: "approve|decline within 150 ms".into(),
        }];

        e.quality.score = Some(txn.score);
        e.quality.confidence = Some(confidence);
        e.quality.uncertainty = Some(txn.score * (1.0 - txn.score));
        e.quality.calibration_ref = Some("calibration/platt-2026q3".into());

        e.override_record.override_occurred = Some(txn.override_occurred);
        if txn.reviewed {
            e.override_record.trigger = Some(EscalationTrigger {
                rule_id: "review-band".into(),
                threshold_exceeded: c.review_threshold,
                risk_category: "payment-fraud".into(),
                authority: "fraud-operations".into(),
            });
        }

        e.temporal.event_timestamp = Some(self.draws.timestamps[i]);
        e.temporal.agent_clock = Some(AgentClock {
            agent_id: MAIN_AGENT.into(),
            counter: i as u64,
        });
        e
    }

    /// Feature-fetch and scoring sub-agent events for one transaction.
    fn sub_agent_events(&self, i: usize, txn: &Txn) -> [DecisionEvent; 2] {
        let [_, fetch_id, score_id, fetch_corr, score_corr] = &self.draws.ids[i];
        let features: BTreeMap<String, f64> = self.names.iter().cloned().zip(txn.features.iter().copied()).collect();
        let digest = feature_vector_digest(&features).expect("features are finite");
        let ts = self.draws.timestamps[i];

        let mut fetch = DecisionEvent::new(fetch_id.clone(), EvidenceTier::Sampled, LogicType::RuleBased, "features-ready");
        fetch.context.feature_vector = features;
        fetch.context.context_summary = Some("assemble payment features from the feature store".into());
        fetch.logic.rule_refs = vec![RuleRef {
            rule_id: "feature-fetch".into(),
            rule_version: "1.4.0".into(),
            evaluation_path: vec!["lookup".into(), "normalize".into()],
        }];
        fetch.boundary.inbound_correlation_id = Some(fetch_corr.clone());
        fetch.temporal.event_timestamp = Some(ts + 1);
        fetch.temporal.agent_clock = Some(AgentClock {
            agent_id: FETCH_AGENT.into(),
            counter: i as u64,
        });

        let mut scoring = DecisionEvent::new(score_id.clone(), EvidenceTier::Sampled, LogicType::MlInference, "scored");
        scoring.context.context_summary = Some("score assembled payment features".into());
        scoring.logic.model_inference = Some(ModelInference {
            model_id: "risk-scorer".into(),
            model_version: "3.2.0".into(),
            feature_vector_hash: digest,
            confidence: txn.score.max(1.0 - txn.score),
        });
        scoring.quality.score = Some(txn.score);
        scoring.boundary.inbound_correlation_id = Some(score_corr.clone());
        scoring.temporal.event_timestamp = Some(ts + 2);
        scoring.temporal.agent_clock = Some(AgentClock {
            agent_id: SCORING_AGENT.into(),
            counter: i as u64,
        });
        [fetch, scoring]
    }

    fn delegation_records(&self, i: usize) -> ([DelegationRecord; 2], [OutcomeProvenance; 2]) {
        let [parent, fetch_id, score_id, fetch_corr, score_corr] = &self.draws.ids[i];
        let record = |corr: &String, child: &String, task: &str, boundary: &str| DelegationRecord {
            correlation_id: corr.clone(),
            parent_event_id: parent.clone(),
            child_event_id: Some(child.clone()),
            task: task.into(),
            delegation_parameters: BTreeMap::from([("timeout_ms".to_owned(), "50".to_owned())]),
            mandate_boundary: vec![boundary.into()],
        };
        let provenance = |component: &str, producer: &String| OutcomeProvenance {
            component_id: format!("payment/{i:08}/{component}"),
            producer_event_id: producer.clone(),
            composition_note: String::new(),
        };
        (
            [
                record(fetch_corr, fetch_id, "fetch features", "read:feature-store"),
                record(score_corr, score_id, "score features", "invoke:risk-scorer"),
            ],
            [provenance("features", fetch_id), provenance("score", score_id)],
        )
    }
}

pub fn run_pipeline(config: &PipelineConfig, fault: Option<&InjectedFault>) -> Result<PipelineRun, SimError> {
    run_tracked(config, fault, &[])
}

pub(super) fn run_tracked(
    config: &PipelineConfig,
    fault: Option<&InjectedFault>,
    tracked: &[(TrackedRole, usize)],
) -> Result<PipelineRun, SimError> {
    let stream = generate_stream(config)?;
    if let Some(f) = fault {
        config.validate_fault(f)?;
    }
    let draws = Draws::new(config);
    let (clean, _) = simulate(config, &stream, &draws, None);
    let (faulted, injected) = match fault {
        Some(f) => simulate(config, &stream, &draws, Some(f)),
        None => (clean.clone(), 0),
    };

    let emitter = Emitter {
        config,
        names: config.feature_names(),
        draws: &draws,
    };
    let mut trace_log = TraceLog::new();
    let agentic = config.architecture == Architecture::AgenticAi;
    let mut fetch_log = TraceLog::new();
    let mut scoring_log = TraceLog::new();
    let mut delegations = Vec::new();
    let mut provenance = Vec::new();
    for (i, txn) in faulted.iter().enumerate() {
        trace_log
            .append(emitter.decision_event(i, txn))
            .expect("simulator emits valid events");
        if agentic {
            let [fetch, scoring] = emitter.sub_agent_events(i, txn);
            fetch_log.append(fetch).expect("simulator emits valid events");
            scoring_log.append(scoring).expect("simulator emits valid events");
            let (records, components) = emitter.delegation_records(i);
            delegations.extend(records);
            provenance.extend(components);
        }
    }
    let agent_logs = if agentic {
        vec![
            AgentLog {
                agent_id: FETCH_AGENT.into(),
                log: fetch_log,
            },
            AgentLog {
                agent_id: SCORING_AGENT.into(),
                log: scoring_log,
            },
        ]
    } else {
        Vec::new()
    };

    let errs_faulted: Vec<Errors> = (0..stream.len())
        .map(|i| errors(config, &stream[i], &faulted[i], draws.appeal[i]))
        .collect();
    let errs_clean: Vec<Errors> = (0..stream.len())
        .map(|i| errors(config, &stream[i], &clean[i], draws.appeal[i]))
        .collect();
    let induced_fn: Vec<usize> = (0..stream.len())
        .filter(|&i| errs_faulted[i].false_negative && !errs_clean[i].false_negative)
        .collect();
    let induced_ufp = (0..stream.len())
        .filter(|&i| errs_faulted[i].unappealed_false_positive && !errs_clean[i].unappealed_false_positive)
        .count();

    let mut result = CascadeResult {
        seed: config.seed,
        fault: fault.cloned(),
        per_stage: BTreeMap::new(),
        cumulative_loss: loss(config, &stream, &faulted, &draws),
        baseline_loss: loss(config, &stream, &clean, &draws),
        compounding: deficits(&clean, &faulted),
        deficit_definition: DEFICIT_DEFINITION,
        monitor: None,
        monitor_skipped: None,
        tracked_events: Vec::new(),
    };

    if let Some(f) = fault {
        let entries = trace_log.entries();
        let genuine_negatives: HashSet<String> = (0..stream.len())
            .filter(|&i| !stream[i].latent_label && !faulted[i].decline)
            .map(|i| signature_key(&entries[i]))
            .collect();
        let indistinguishable = induced_fn
            .iter()
            .all(|&i| genuine_negatives.contains(&signature_key(&entries[i])));

        let post_clean: Vec<DecisionEvent> = (f.onset_index..stream.len())
            .map(|i| emitter.decision_event(i, &clean[i]))
            .collect();
        let (monitor, skipped) = run_monitor(config, &post_clean, entries, f.onset_index);
        let (monitor_fired, latency) = match &monitor {
            Some(m) if feature_alarm(&m.paired) => {
                (true, detection_latency(config, &post_clean, &entries[f.onset_index..]))
            }
            _ => (false, None),
        };
        result.monitor = monitor;
        result.monitor_skipped = skipped;
        result.per_stage.insert(
            f.stage,
            StageOutcome {
                faults_injected: injected,
                errors_induced: ErrorCounts {
                    false_negatives: induced_fn.len(),
                    unappealed_false_positives: induced_ufp,
                },
                traces_indistinguishable: indistinguishable,
                monitor_fired,
                detection_latency_events: latency,
            },
        );
    }

    result.tracked_events = tracked
        .iter()
        .map(|&(role, i)| TrackedEvent {
            role,
            index: i,
            event_id: trace_log.entries()[i].event_id.clone(),
            latent_label: stream[i].latent_label,
            clean_score: clean[i].score,
            served_score: faulted[i].rule_score,
            review_threshold: config.review_threshold,
            reviewed: faulted[i].reviewed,
            final_decision: if faulted[i].decline { "decline" } else { "approve" }.into(),
            induced_false_negative: induced_fn.binary_search(&i).is_ok(),
        })
        .collect();

    Ok(PipelineRun {
        trace_log,
        agent_logs,
        delegations,
        provenance,
        result,
    })
}

/// Alarms from detectors over the feature distribution. Override-rate and
/// score signals are reported alongside but are not feature monitors.
fn feature_alarm(report: &SignalReport) -> bool {
    report
        .alarms
        .iter()
        .any(|a| a.kind.is_univariate() || a.kind == AlarmKind::CorrelationDrift)
}

fn run_monitor(
    config: &PipelineConfig,
    post_clean: &[DecisionEvent],
    entries: &[DecisionEvent],
    onset: usize,
) -> (Option<MonitorOutcome>, Option<String>) {
    let cfg = &config.monitor;
    let post_fault = &entries[onset..];
    let paired = match fit_baseline(post_clean, cfg).and_then(|b| detect(post_fault, &b, cfg)) {
        Ok(r) => r,
        Err(e) => return (None, Some(e.to_string())),
    };
    let pre_post = fit_baseline(&entries[..onset], cfg)
        .and_then(|b| detect(post_fault, &b, cfg))
        .ok();
    (Some(MonitorOutcome { paired, pre_post }), None)
}

/// Events after onset until a prefix window first raises a feature alarm,
/// scanning prefixes of the post-onset window in steps of 100.
fn detection_latency(config: &PipelineConfig, post_clean: &[DecisionEvent], post_fault: &[DecisionEvent]) -> Option<usize> {
    let cfg = &config.monitor;
    let baseline = fit_baseline(post_clean, cfg).ok()?;
    let n = post_fault.len();
    let mut sizes: Vec<usize> = (cfg.min_window.max(1)..n).step_by(LATENCY_STEP).collect();
    sizes.push(n);
    sizes
        .into_iter()
        .find(|&len| detect(&post_fault[..len], &baseline, cfg).is_ok_and(|r| feature_alarm(&r)))
}
