//! Structural sufficiency scores.
//!
//! These measure whether an archive could support reconstruction of a
//! decision, never whether the decision was right. Nothing here takes an
//! outcome label as input; every report carries [`EPISTEMIC_FLAG`].

use serde::Serialize;

use crate::delegation::TraceGraph;
use crate::evidence::{required_fields, DecisionEvent, EvidenceTier};
use crate::scalar::Scalar;

pub const EPISTEMIC_FLAG: &str = "structural-completeness-only";

/// Serialize-only: a report read back from disk could have lost its flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyReport<S = f64> {
    pub field_population: S,
    pub delegation_coverage: Option<S>,
    pub rationale_coverage: Option<S>,
    pub provenance_coverage: Option<S>,
    /// Zero means every coverage above is vacuous.
    pub node_count: usize,
    epistemic_flag: String,
}

impl<S: Scalar> SufficiencyReport<S> {
    fn new(
        field_population: S,
        delegation_coverage: Option<S>,
        rationale_coverage: Option<S>,
        provenance_coverage: Option<S>,
        node_count: usize,
    ) -> Self {
        Self {
            field_population,
            delegation_coverage,
            rationale_coverage,
            provenance_coverage,
            node_count,
            epistemic_flag: EPISTEMIC_FLAG.to_owned(),
        }
    }

    pub fn epistemic_flag(&self) -> &str {
        &self.epistemic_flag
    }

    pub fn is_vacuous(&self) -> bool {
        self.node_count == 0
    }

    pub fn to_f64(&self) -> SufficiencyReport<f64> {
        SufficiencyReport::new(
            self.field_population.to_f64_lossy(),
            self.delegation_coverage.as_ref().map(S::to_f64_lossy),
            self.rationale_coverage.as_ref().map(S::to_f64_lossy),
            self.provenance_coverage.as_ref().map(S::to_f64_lossy),
            self.node_count,
        )
    }
}

/// Populated / required over the event's tier. An event with no tier is
/// held to the lightweight set, where the missing tier itself costs a slot.
pub fn field_population_score<S: Scalar>(event: &DecisionEvent) -> S {
    let (populated, required) = field_population_counts(event);
    S::ratio(populated, required)
}

pub fn field_population_counts(event: &DecisionEvent) -> (usize, usize) {
    let fields = required_fields(event.tier.unwrap_or(EvidenceTier::Lightweight));
    let populated = fields.iter().filter(|f| f.is_populated(event)).count();
    (populated, fields.len())
}

/// Scores for a whole archive of single events (no delegation structure).
pub fn archive_sufficiency<S: Scalar>(events: &[DecisionEvent]) -> SufficiencyReport<S> {
    SufficiencyReport::new(mean_population(events.iter()), None, None, None, events.len())
}

/// Coverage ratios over an assembled graph. A zero denominator counts as
/// complete (there was nothing to cover); `node_count` tells callers when
/// the whole report is vacuous.
pub fn graph_sufficiency<S: Scalar>(graph: &TraceGraph) -> SufficiencyReport<S> {
    let nodes = graph.nodes();
    let field_population = mean_population(nodes.values());

    let edges = graph.edges();
    let resolved = graph.resolved_edges().count();
    let delegation = S::ratio_or_one(resolved, edges.len());

    // Delegating events, including parents whose own trace is absent, so a
    // newly arriving trace can only add to the numerator.
    let delegating = graph.delegating_event_ids();
    let anchored = delegating
        .iter()
        .filter_map(|id| graph.node(id))
        .filter(|e| e.logic.rationale.as_ref().is_some_and(|r| r.is_anchored()))
        .count();
    let rationale = S::ratio_or_one(anchored, delegating.len());

    let provenance = graph.provenance();
    let resolvable = provenance
        .iter()
        .filter(|p| graph.node(&p.producer_event_id).is_some())
        .count();
    let provenance_coverage = S::ratio_or_one(resolvable, provenance.len());

    SufficiencyReport::new(
        field_population,
        Some(delegation),
        Some(rationale),
        Some(provenance_coverage),
        nodes.len(),
    )
}

fn mean_population<'a, S: Scalar>(events: impl Iterator<Item = &'a DecisionEvent>) -> S {
    let mut total = S::zero();
    let mut n = 0usize;
    for event in events {
        total = total + field_population_score::<S>(event);
        n += 1;
    }
    if n == 0 {
        S::one()
    } else {
        total * S::ratio(1, n)
    }
}

trait RatioOrOne: Scalar {
    fn ratio_or_one(num: usize, den: usize) -> Self {
        if den == 0 {
            Self::one()
        } else {
            Self::ratio(num, den)
        }
    }
}

impl<S: Scalar> RatioOrOne for S {}
