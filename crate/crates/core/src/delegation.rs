//! Delegation-aware trace protocol.
//!
//! Each agent keeps its own hash-chained log. A composite decision is the
//! union of those logs plus sidecar [`DelegationRecord`]s (one per
//! parent→child hand-off) and [`OutcomeProvenance`] entries. [`assemble`]
//! stitches them into a [`TraceGraph`] by event id and correlation id; it
//! never rehashes across logs.
//!
//! Events link into the protocol through
//! `boundary.inbound_correlation_id` (the delegation that produced the
//! event) and `boundary.outbound_correlation_ids`. A node without an inbound
//! id is a root. A node whose inbound delegation cannot be resolved is
//! detached from every root and attribution through it is impossible.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::evidence::{DecisionEvent, LogicType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintCheck {
    pub constraint_id: String,
    pub result: bool,
}

/// Structured account of why an agent acted: the mandate it operated
/// under and the checks it ran. Not a transcript of model reasoning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationaleRecord {
    pub mandate_ref: String,
    #[serde(default)]
    pub constraints_evaluated: Vec<ConstraintCheck>,
    pub selection_justification: String,
    /// Deterministic execution proofs (constraint-check events, gate outcomes).
    #[serde(default)]
    pub anchor_refs: Vec<String>,
}

impl RationaleRecord {
    pub fn is_anchored(&self) -> bool {
        !self.anchor_refs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelegationRecord {
    pub correlation_id: String,
    pub parent_event_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child_event_id: Option<String>,
    pub task: String,
    #[serde(default)]
    pub delegation_parameters: BTreeMap<String, String>,
    #[serde(default)]
    pub mandate_boundary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeProvenance {
    pub component_id: String,
    pub producer_event_id: String,
    #[serde(default)]
    pub composition_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("CYCLIC_TRACE: delegation edges form a cycle through {0:?}")]
    CyclicTrace(Vec<String>),
    #[error("DUPLICATE_EVENT_ID: {0}")]
    DuplicateEventId(String),
    #[error("DUPLICATE_CORRELATION_ID: {0}")]
    DuplicateCorrelationId(String),
    #[error("CORRELATION_MISMATCH: child {child_event_id} does not carry inbound correlation id {correlation_id}")]
    CorrelationMismatch {
        correlation_id: String,
        child_event_id: String,
    },
    #[error("UNCORRELATED_AGENTIC_EVENT: {0} carries no correlation identifier")]
    UncorrelatedAgenticEvent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttributionError {
    #[error("UNKNOWN_COMPONENT: no provenance entry for {0}")]
    UnknownComponent(String),
    #[error("BROKEN_PROVENANCE: producer {producer_event_id} of {component_id} is not in the graph")]
    BrokenProvenance {
        component_id: String,
        producer_event_id: String,
    },
    #[error("ATTRIBUTION_IMPOSSIBLE: no delegation path connects {producer_event_id} to a root")]
    AttributionImpossible { producer_event_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub missing_child_traces: Vec<String>,
    pub unanchored_rationales: Vec<String>,
    pub broken_provenance: Vec<String>,
    pub orphan_events: Vec<String>,
}

impl GapReport {
    pub fn is_complete(&self) -> bool {
        self.missing_child_traces.is_empty()
            && self.unanchored_rationales.is_empty()
            && self.broken_provenance.is_empty()
            && self.orphan_events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionHop {
    pub event_id: String,
    /// Delegation that produced this hop; `None` for the root.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mandate_ref: Option<String>,
    pub delegation_parameters: BTreeMap<String, String>,
    pub mandate_boundary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionPath {
    pub component_id: String,
    /// Root first, producer last.
    pub chain: Vec<AttributionHop>,
    pub nodes_visited: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossAgentOrder {
    /// Every `(a, b)` with `a` strictly before `b`.
    pub order: Vec<(String, String)>,
    pub concurrent_pairs: Vec<(String, String)>,
    /// Pairs where delegation and agent-local sequence disagree.
    pub conflicting_pairs: Vec<(String, String)>,
}

impl CrossAgentOrder {
    pub fn precedes(&self, a: &str, b: &str) -> bool {
        self.order.iter().any(|(x, y)| x == a && y == b)
    }
}

/// Assembled delegation DAG for one composite decision.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceGraph {
    nodes: BTreeMap<String, DecisionEvent>,
    edges: Vec<DelegationRecord>,
    resolved: Vec<bool>,
    roots: Vec<String>,
    provenance: Vec<OutcomeProvenance>,
}

/// Builds the graph. Delegations whose child (or parent) trace is absent
/// stay unresolved; that is a gap for [`detect_gaps`], not an error.
pub fn assemble(
    events: Vec<DecisionEvent>,
    delegations: Vec<DelegationRecord>,
    provenance: Vec<OutcomeProvenance>,
) -> Result<TraceGraph, GraphError> {
    let mut nodes = BTreeMap::new();
    for event in events {
        if nodes.contains_key(&event.event_id) {
            return Err(GraphError::DuplicateEventId(event.event_id));
        }
        nodes.insert(event.event_id.clone(), event);
    }

    let mut edges = delegations;
    edges.sort_by(|a, b| a.correlation_id.cmp(&b.correlation_id));
    for pair in edges.windows(2) {
        if pair[0].correlation_id == pair[1].correlation_id {
            return Err(GraphError::DuplicateCorrelationId(pair[0].correlation_id.clone()));
        }
    }

    for (id, event) in &nodes {
        let b = &event.boundary;
        if event.logic.logic_type == Some(LogicType::AgenticDelegation)
            && b.inbound_correlation_id.is_none()
            && b.outbound_correlation_ids.is_empty()
        {
            return Err(GraphError::UncorrelatedAgenticEvent(id.clone()));
        }
    }

    let mut resolved = Vec::with_capacity(edges.len());
    for edge in &edges {
        let child = edge.child_event_id.as_ref().and_then(|c| nodes.get(c));
        let is_resolved = match child {
            Some(child) if nodes.contains_key(&edge.parent_event_id) => {
                if child.boundary.inbound_correlation_id.as_deref() != Some(edge.correlation_id.as_str()) {
                    return Err(GraphError::CorrelationMismatch {
                        correlation_id: edge.correlation_id.clone(),
                        child_event_id: child.event_id.clone(),
                    });
                }
                true
            }
            _ => false,
        };
        resolved.push(is_resolved);
    }

    let roots = nodes
        .values()
        .filter(|e| e.boundary.inbound_correlation_id.is_none())
        .map(|e| e.event_id.clone())
        .collect();

    let graph = TraceGraph {
        nodes,
        edges,
        resolved,
        roots,
        provenance,
    };
    graph.check_acyclic()?;
    Ok(graph)
}

impl TraceGraph {
    pub fn nodes(&self) -> &BTreeMap<String, DecisionEvent> {
        &self.nodes
    }

    pub fn node(&self, event_id: &str) -> Option<&DecisionEvent> {
        self.nodes.get(event_id)
    }

    /// Delegation records sorted by correlation id.
    pub fn edges(&self) -> &[DelegationRecord] {
        &self.edges
    }

    pub fn roots(&self) -> &[String] {
        &self.roots
    }

    pub fn provenance(&self) -> &[OutcomeProvenance] {
        &self.provenance
    }

    pub fn is_resolved(&self, correlation_id: &str) -> bool {
        self.edges
            .binary_search_by(|e| e.correlation_id.as_str().cmp(correlation_id))
            .map(|i| self.resolved[i])
            .unwrap_or(false)
    }

    pub fn resolved_edges(&self) -> impl Iterator<Item = &DelegationRecord> {
        self.edges
            .iter()
            .zip(&self.resolved)
            .filter(|(_, r)| **r)
            .map(|(e, _)| e)
    }

    fn child_of(edge: &DelegationRecord) -> &str {
        edge.child_event_id.as_deref().expect("resolved edges have a child")
    }

    /// Resolved children of `event_id`, in ascending correlation id order.
    fn children(&self) -> BTreeMap<&str, Vec<&DelegationRecord>> {
        let mut out: BTreeMap<&str, Vec<&DelegationRecord>> = BTreeMap::new();
        for edge in self.resolved_edges() {
            out.entry(edge.parent_event_id.as_str()).or_default().push(edge);
        }
        out
    }

    fn check_acyclic(&self) -> Result<(), GraphError> {
        let order = self.topological_order();
        if order.len() == self.nodes.len() {
            return Ok(());
        }
        let sorted: BTreeSet<&str> = order.into_iter().collect();
        let cycle = self
            .nodes
            .keys()
            .filter(|id| !sorted.contains(id.as_str()))
            .cloned()
            .collect();
        Err(GraphError::CyclicTrace(cycle))
    }

    /// Kahn's algorithm over resolved edges; shorter than the node count iff
    /// the edges contain a cycle.
    pub fn topological_order(&self) -> Vec<&str> {
        let mut indegree: BTreeMap<&str, usize> = self.nodes.keys().map(|k| (k.as_str(), 0)).collect();
        for edge in self.resolved_edges() {
            *indegree.get_mut(Self::child_of(edge)).expect("resolved child") += 1;
        }
        let children = self.children();
        let mut queue: VecDeque<&str> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(k, _)| *k)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = queue.pop_front() {
            order.push(id);
            for edge in children.get(id).into_iter().flatten() {
                let child = Self::child_of(edge);
                let d = indegree.get_mut(child).expect("resolved child");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(child);
                }
            }
        }
        order
    }

    /// Nodes reachable from some root through resolved edges.
    fn reachable_from_roots(&self) -> BTreeSet<&str> {
        let children = self.children();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack: Vec<&str> = self.roots.iter().map(String::as_str).collect();
        while let Some(id) = stack.pop() {
            if seen.insert(id) {
                for edge in children.get(id).into_iter().flatten() {
                    stack.push(Self::child_of(edge));
                }
            }
        }
        seen
    }

    /// Event ids that delegate work: parents named by a record plus present
    /// nodes announcing outbound delegations. Absent parents are included.
    pub fn delegating_event_ids(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.edges.iter().map(|e| e.parent_event_id.as_str()).collect();
        out.extend(
            self.nodes
                .values()
                .filter(|e| !e.boundary.outbound_correlation_ids.is_empty())
                .map(|e| e.event_id.as_str()),
        );
        out
    }

    /// Correlation ids announced by a present parent but never recorded.
    fn unrecorded_delegations(&self) -> Vec<&str> {
        let recorded: BTreeSet<&str> = self.edges.iter().map(|e| e.correlation_id.as_str()).collect();
        let mut out: Vec<&str> = self
            .nodes
            .values()
            .flat_map(|e| e.boundary.outbound_correlation_ids.iter())
            .map(String::as_str)
            .filter(|c| !recorded.contains(c))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn is_anchored(event: &DecisionEvent) -> bool {
    event.logic.rationale.as_ref().is_some_and(RationaleRecord::is_anchored)
}

pub fn detect_gaps(graph: &TraceGraph) -> GapReport {
    let mut missing: Vec<String> = graph
        .edges
        .iter()
        .filter(|e| {
            e.child_event_id
                .as_ref()
                .is_none_or(|c| !graph.nodes.contains_key(c))
        })
        .map(|e| e.correlation_id.clone())
        .collect();
    missing.extend(graph.unrecorded_delegations().into_iter().map(str::to_owned));
    missing.sort();
    missing.dedup();

    let unanchored = graph
        .delegating_event_ids()
        .into_iter()
        .filter_map(|id| graph.nodes.get(id))
        .filter(|e| !is_anchored(e))
        .map(|e| e.event_id.clone())
        .collect();

    let mut broken: Vec<String> = graph
        .provenance
        .iter()
        .filter(|p| !graph.nodes.contains_key(&p.producer_event_id))
        .map(|p| p.component_id.clone())
        .collect();
    broken.sort();

    let reachable = graph.reachable_from_roots();
    let orphans = graph
        .nodes
        .keys()
        .filter(|id| !reachable.contains(id.as_str()))
        .cloned()
        .collect();

    GapReport {
        missing_child_traces: missing,
        unanchored_rationales: unanchored,
        broken_provenance: broken,
        orphan_events: orphans,
    }
}

/// Root-to-producer chain for `component_id`.
///
/// Roots are searched in ascending event id order and children in ascending
/// correlation id order; `nodes_visited` counts nodes entered by that
/// depth-first search up to and including the producer.
pub fn attribute(graph: &TraceGraph, component_id: &str) -> Result<AttributionPath, AttributionError> {
    let entry = graph
        .provenance
        .iter()
        .find(|p| p.component_id == component_id)
        .ok_or_else(|| AttributionError::UnknownComponent(component_id.to_owned()))?;
    let producer = entry.producer_event_id.as_str();
    if !graph.nodes.contains_key(producer) {
        return Err(AttributionError::BrokenProvenance {
            component_id: component_id.to_owned(),
            producer_event_id: producer.to_owned(),
        });
    }

    let children = graph.children();
    let mut visited = 0usize;
    // (node, inbound edge, depth)
    let mut stack: Vec<(&str, Option<&DelegationRecord>, usize)> = graph
        .roots
        .iter()
        .rev()
        .map(|r| (r.as_str(), None, 0))
        .collect();
    let mut path: Vec<(&str, Option<&DelegationRecord>)> = Vec::new();
    while let Some((id, via, depth)) = stack.pop() {
        path.truncate(depth);
        path.push((id, via));
        visited += 1;
        if id == producer {
            let chain = path
                .iter()
                .map(|(event_id, via)| AttributionHop {
                    event_id: (*event_id).to_owned(),
                    correlation_id: via.map(|e| e.correlation_id.clone()),
                    mandate_ref: graph.nodes[*event_id]
                        .logic
                        .rationale
                        .as_ref()
                        .map(|r| r.mandate_ref.clone()),
                    delegation_parameters: via.map(|e| e.delegation_parameters.clone()).unwrap_or_default(),
                    mandate_boundary: via.map(|e| e.mandate_boundary.clone()).unwrap_or_default(),
                })
                .collect();
            return Ok(AttributionPath {
                component_id: component_id.to_owned(),
                chain,
                nodes_visited: visited,
            });
        }
        for edge in children.get(id).into_iter().flatten().rev() {
            stack.push((TraceGraph::child_of(edge), Some(edge), depth + 1));
        }
    }
    Err(AttributionError::AttributionImpossible {
        producer_event_id: producer.to_owned(),
    })
}

/// Happens-before over events: delegation edges plus agent-local sequence
/// order, transitively closed. Wall-clock timestamps are never consulted.
pub fn cross_agent_order(graph: &TraceGraph) -> CrossAgentOrder {
    let ids: Vec<&str> = graph.nodes.keys().map(String::as_str).collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = ids.len();
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];

    for edge in graph.resolved_edges() {
        successors[index[edge.parent_event_id.as_str()]].push(index[TraceGraph::child_of(edge)]);
    }

    let mut per_agent: BTreeMap<&str, Vec<(u64, usize)>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let temporal = &graph.nodes[*id].temporal;
        if let (Some(clock), Some(seq)) = (&temporal.agent_clock, temporal.sequence_number) {
            per_agent.entry(clock.agent_id.as_str()).or_default().push((seq, i));
        }
    }
    for events in per_agent.values_mut() {
        events.sort_unstable();
        for pair in events.windows(2) {
            if pair[0].0 < pair[1].0 {
                successors[pair[0].1].push(pair[1].1);
            }
        }
    }

    let words = n.div_ceil(64);
    let mut reach = vec![vec![0u64; words]; n];
    for (start, row) in reach.iter_mut().enumerate() {
        let mut queue: VecDeque<usize> = successors[start].iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            let (w, bit) = (v / 64, 1u64 << (v % 64));
            if row[w] & bit == 0 {
                row[w] |= bit;
                queue.extend(successors[v].iter().copied());
            }
        }
    }
    let reaches = |a: usize, b: usize| reach[a][b / 64] & (1u64 << (b % 64)) != 0;

    let mut out = CrossAgentOrder::default();
    for a in 0..n {
        for b in 0..n {
            if a != b && reaches(a, b) {
                if reaches(b, a) {
                    if a < b {
                        out.conflicting_pairs.push((ids[a].to_owned(), ids[b].to_owned()));
                    }
                } else {
                    out.order.push((ids[a].to_owned(), ids[b].to_owned()));
                }
            }
            if a < b && !reaches(a, b) && !reaches(b, a) {
                out.concurrent_pairs.push((ids[a].to_owned(), ids[b].to_owned()));
            }
        }
    }
    out
}

/// Generators for complete delegation trees, used by tests and benchmarks.
pub mod synthetic {
    use rand::Rng;

    use super::*;
    use crate::chain::seal;
    use crate::chain::GENESIS_HASH;
    use crate::evidence::{AgentClock, EvidenceTier};

    #[derive(Debug, Clone)]
    pub struct SyntheticTree {
        pub events: Vec<DecisionEvent>,
        pub delegations: Vec<DelegationRecord>,
        pub provenance: Vec<OutcomeProvenance>,
        pub root: String,
        /// Depth of each event (root = 0).
        pub depth_of: BTreeMap<String, usize>,
    }

    impl SyntheticTree {
        /// Removes the given child events; their delegation records remain.
        pub fn without_events(&self, dropped: &BTreeSet<String>) -> Vec<DecisionEvent> {
            self.events
                .iter()
                .filter(|e| !dropped.contains(&e.event_id))
                .cloned()
                .collect()
        }

        pub fn leaves(&self) -> Vec<String> {
            let parents: BTreeSet<&str> = self.delegations.iter().map(|d| d.parent_event_id.as_str()).collect();
            self.events
                .iter()
                .filter(|e| !parents.contains(e.event_id.as_str()))
                .map(|e| e.event_id.clone())
                .collect()
        }

        pub fn graph(&self) -> TraceGraph {
            assemble(self.events.clone(), self.delegations.clone(), self.provenance.clone())
                .expect("synthetic trees are well formed")
        }
    }

    pub fn random_id<R: Rng + ?Sized>(rng: &mut R) -> String {
        format!("{:032x}", rng.random::<u128>())
    }

    /// Complete `branching`-ary tree of the given depth with random ids.
    /// Every node is its own agent and carries an anchored rationale; every
    /// node produces one provenanced component. A lone root (depth 0) is an
    /// agentic event with no correlation and does not assemble.
    pub fn complete_tree<R: Rng + ?Sized>(depth: usize, branching: usize, rng: &mut R) -> SyntheticTree {
        let mut events = Vec::new();
        let mut delegations = Vec::new();
        let mut provenance = Vec::new();
        let mut depth_of = BTreeMap::new();

        let root = random_id(rng);
        let mut frontier = vec![(root.clone(), None::<String>)];
        for level in 0..=depth {
            let mut next = Vec::new();
            for (event_id, inbound) in frontier {
                let outbound: Vec<String> = if level < depth {
                    (0..branching).map(|_| random_id(rng)).collect()
                } else {
                    Vec::new()
                };
                for correlation_id in &outbound {
                    let child = random_id(rng);
                    delegations.push(DelegationRecord {
                        correlation_id: correlation_id.clone(),
                        parent_event_id: event_id.clone(),
                        child_event_id: Some(child.clone()),
                        task: format!("subtask at depth {}", level + 1),
                        delegation_parameters: BTreeMap::from([("max_depth".to_owned(), depth.to_string())]),
                        mandate_boundary: vec!["read:features".to_owned(), "emit:score".to_owned()],
                    });
                    next.push((child, Some(correlation_id.clone())));
                }
                let mut event = DecisionEvent::new(
                    event_id.clone(),
                    EvidenceTier::Lightweight,
                    LogicType::AgenticDelegation,
                    "delegated",
                );
                event.temporal.event_timestamp = Some(1_700_000_000_000_000_000 + level as i64);
                event.temporal.agent_clock = Some(AgentClock {
                    agent_id: format!("agent-{event_id}"),
                    counter: 0,
                });
                event.boundary.inbound_correlation_id = inbound;
                event.boundary.outbound_correlation_ids = outbound;
                event.logic.rationale = Some(RationaleRecord {
                    mandate_ref: format!("mandate/{level}"),
                    constraints_evaluated: vec![ConstraintCheck {
                        constraint_id: "scope".into(),
                        result: true,
                    }],
                    selection_justification: "lowest-cost capable sub-agent".into(),
                    anchor_refs: vec![format!("gate/{event_id}")],
                });
                provenance.push(OutcomeProvenance {
                    component_id: format!("component/{event_id}"),
                    producer_event_id: event_id.clone(),
                    composition_note: String::new(),
                });
                depth_of.insert(event_id.clone(), level);
                events.push(seal(event, 0, GENESIS_HASH).expect("finite"));
            }
            frontier = next;
        }
        SyntheticTree {
            events,
            delegations,
            provenance,
            root,
            depth_of,
        }
    }
}
