//! Architecture × evidence-property feasibility matrix.
//!
//! Ratings say whether an architecture produces the evidence for a property
//! by construction. Scores computed here rank that by-construction
//! availability; they are not a measure of governance adequacy, and every
//! rendered report carries [`DISCLAIMER`] to say so.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub const DISCLAIMER: &str = "Scores rank evidence an architecture produces by construction; \
they do not measure whether governance built on that evidence is adequate.";

pub const SUPPLEMENTARY_NOTE: &str = "supplementary instrumentation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Fillable,
    PartiallyFillable,
    Unfillable,
    Opaque,
}

impl Rating {
    pub const ALL: [Rating; 4] = [
        Rating::Fillable,
        Rating::PartiallyFillable,
        Rating::Unfillable,
        Rating::Opaque,
    ];

    /// Ordinal weight in halves, so sums stay integral.
    pub fn weight_halves(self) -> i64 {
        match self {
            Rating::Fillable => 2,
            Rating::PartiallyFillable => 1,
            Rating::Unfillable | Rating::Opaque => 0,
        }
    }

    pub fn ordinal_weight<S: Scalar>(self) -> S {
        S::ratio(self.weight_halves() as usize, 2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rating::Fillable => "fillable",
            Rating::PartiallyFillable => "partially_fillable",
            Rating::Unfillable => "unfillable",
            Rating::Opaque => "opaque",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Rating::PartiallyFillable => "partially",
            other => other.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    DeterministicRules,
    ClassicalMlHitl,
    HybridMlRules,
    AgenticAi,
}

impl Architecture {
    /// Column order of the published table.
    pub const ALL: [Architecture; 4] = [
        Architecture::DeterministicRules,
        Architecture::ClassicalMlHitl,
        Architecture::HybridMlRules,
        Architecture::AgenticAi,
    ];

    /// Expected strict ordering, highest coverage first.
    pub const GRADIENT: [Architecture; 4] = [
        Architecture::DeterministicRules,
        Architecture::HybridMlRules,
        Architecture::ClassicalMlHitl,
        Architecture::AgenticAi,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::DeterministicRules => "deterministic_rules",
            Architecture::ClassicalMlHitl => "classical_ml_hitl",
            Architecture::HybridMlRules => "hybrid_ml_rules",
            Architecture::AgenticAi => "agentic_ai",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Architecture::DeterministicRules => "Deterministic",
            Architecture::ClassicalMlHitl => "Classical ML + HITL",
            Architecture::HybridMlRules => "Hybrid ML+Rules",
            Architecture::AgenticAi => "Agentic AI",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesProperty {
    DecisionContext,
    DecisionLogic,
    DecisionBoundary,
    DecisionQualityIndicators,
    OverrideEscalationRecord,
    TemporalMetadata,
}

impl DesProperty {
    pub const ALL: [DesProperty; 6] = [
        DesProperty::DecisionContext,
        DesProperty::DecisionLogic,
        DesProperty::DecisionBoundary,
        DesProperty::DecisionQualityIndicators,
        DesProperty::OverrideEscalationRecord,
        DesProperty::TemporalMetadata,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DesProperty::DecisionContext => "decision_context",
            DesProperty::DecisionLogic => "decision_logic",
            DesProperty::DecisionBoundary => "decision_boundary",
            DesProperty::DecisionQualityIndicators => "decision_quality_indicators",
            DesProperty::OverrideEscalationRecord => "override_escalation_record",
            DesProperty::TemporalMetadata => "temporal_metadata",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub rating: Rating,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatrixError {
    #[error("MISSING_CELL: {0}/{1}")]
    MissingCell(&'static str, &'static str),
    #[error("DUPLICATE_CELL: {0}/{1}")]
    DuplicateCell(&'static str, &'static str),
}

/// All 24 cells, indexed by architecture then property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMatrix {
    cells: [[Cell; 6]; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellEntry {
    architecture: Architecture,
    property: DesProperty,
    rating: Rating,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rationale: Option<String>,
}

impl Serialize for CoverageMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<CellEntry> = self
            .iter()
            .map(|(architecture, property, cell)| CellEntry {
                architecture,
                property,
                rating: cell.rating,
                rationale: cell.rationale.clone(),
            })
            .collect();
        #[derive(Serialize)]
        struct Doc {
            cells: Vec<CellEntry>,
        }
        Doc { cells: entries }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoverageMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            cells: Vec<CellEntry>,
        }
        let doc = Doc::deserialize(deserializer)?;
        let mut slots: [[Option<Cell>; 6]; 4] = Default::default();
        for entry in doc.cells {
            let slot = &mut slots[entry.architecture.index()][entry.property.index()];
            if slot.is_some() {
                return Err(serde::de::Error::custom(MatrixError::DuplicateCell(
                    entry.architecture.as_str(),
                    entry.property.as_str(),
                )));
            }
            *slot = Some(Cell {
                rating: entry.rating,
                rationale: entry.rationale,
            });
        }
        for arch in Architecture::ALL {
            for prop in DesProperty::ALL {
                if slots[arch.index()][prop.index()].is_none() {
                    return Err(serde::de::Error::custom(MatrixError::MissingCell(
                        arch.as_str(),
                        prop.as_str(),
                    )));
                }
            }
        }
        Ok(CoverageMatrix {
            cells: slots.map(|column| column.map(|c| c.expect("checked above"))),
        })
    }
}

impl CoverageMatrix {
    pub fn uniform(rating: Rating) -> Self {
        let cell = Cell { rating, rationale: None };
        CoverageMatrix {
            cells: std::array::from_fn(|_| std::array::from_fn(|_| cell.clone())),
        }
    }

    pub fn cell(&self, arch: Architecture, prop: DesProperty) -> &Cell {
        &self.cells[arch.index()][prop.index()]
    }

    pub fn rating(&self, arch: Architecture, prop: DesProperty) -> Rating {
        self.cell(arch, prop).rating
    }

    pub fn set(&mut self, arch: Architecture, prop: DesProperty, rating: Rating, rationale: Option<String>) {
        self.cells[arch.index()][prop.index()] = Cell { rating, rationale };
    }

    pub fn iter(&self) -> impl Iterator<Item = (Architecture, DesProperty, &Cell)> {
        Architecture::ALL.into_iter().flat_map(move |a| {
            DesProperty::ALL
                .into_iter()
                .map(move |p| (a, p, self.cell(a, p)))
        })
    }

    pub fn count(&self, arch: Architecture, rating: Rating) -> usize {
        self.cells[arch.index()].iter().filter(|c| c.rating == rating).count()
    }

    /// Sum of ordinal weights for a column, in halves.
    fn ordinal_halves(&self, arch: Architecture) -> i64 {
        self.cells[arch.index()].iter().map(|c| c.rating.weight_halves()).sum()
    }
}

/// The published coding of the four reference architectures.
pub fn default_matrix() -> CoverageMatrix {
    use Architecture::*;
    use DesProperty::*;
    use Rating::*;

    let coding: [(Architecture, DesProperty, Rating, &str); 24] = [
        (DeterministicRules, DecisionContext, Fillable, "rule inputs fix the context"),
        (DeterministicRules, DecisionLogic, Fillable, "versioned rules are the logic"),
        (DeterministicRules, DecisionBoundary, Fillable, "thresholds are written into the rules"),
        (DeterministicRules, DecisionQualityIndicators, Fillable, "rules emit exact pass/fail outcomes"),
        (DeterministicRules, OverrideEscalationRecord, Fillable, "escalation paths are structured; override flag is mandatory"),
        (DeterministicRules, TemporalMetadata, PartiallyFillable, "hash chain and sequence numbers need extra logging"),
        (ClassicalMlHitl, DecisionContext, PartiallyFillable, "input provenance needs extra logging"),
        (ClassicalMlHitl, DecisionLogic, Fillable, "weights and inference code are versioned and reproducible"),
        (ClassicalMlHitl, DecisionBoundary, PartiallyFillable, "attribution tools only approximate the learned surface"),
        (ClassicalMlHitl, DecisionQualityIndicators, PartiallyFillable, "model confidence is uncalibrated unless instrumented"),
        (ClassicalMlHitl, OverrideEscalationRecord, PartiallyFillable, "override flag present but reviewer criteria are discretionary"),
        (ClassicalMlHitl, TemporalMetadata, PartiallyFillable, "hash chain and sequence numbers need extra logging"),
        (HybridMlRules, DecisionContext, PartiallyFillable, "rule context explicit; feature provenance instrumented"),
        (HybridMlRules, DecisionLogic, Fillable, "both rules and model weights are versioned"),
        (HybridMlRules, DecisionBoundary, Fillable, "thresholds sit in auditable rules at the seam"),
        (HybridMlRules, DecisionQualityIndicators, PartiallyFillable, "rule signals exact, model signals need calibration"),
        (HybridMlRules, OverrideEscalationRecord, Fillable, "rules raise escalations with rule, threshold, category and authority"),
        (HybridMlRules, TemporalMetadata, PartiallyFillable, "hash chain and sequence numbers need extra logging"),
        (AgenticAi, DecisionContext, PartiallyFillable, "context is split across agent-local state"),
        (AgenticAi, DecisionLogic, Opaque, "stochastic model reasoning is not externalizable"),
        (AgenticAi, DecisionBoundary, Unfillable, "no boundary artifact exists; surfaces emerge across steps"),
        (AgenticAi, DecisionQualityIndicators, Opaque, "per-agent signals stay internal; no cross-agent aggregate"),
        (AgenticAi, OverrideEscalationRecord, Unfillable, "delegation chains carry no mandate boundaries"),
        (AgenticAi, TemporalMetadata, PartiallyFillable, "ordering across agents must be reconstructed"),
    ];
    let mut m = CoverageMatrix::uniform(Unfillable);
    for (arch, prop, rating, why) in coding {
        m.set(arch, prop, rating, Some(why.to_owned()));
    }
    m
}

pub fn fillable_ratio<S: Scalar>(m: &CoverageMatrix, arch: Architecture) -> S {
    S::ratio(m.count(arch, Rating::Fillable), 6)
}

pub fn opaque_ratio<S: Scalar>(m: &CoverageMatrix, arch: Architecture) -> S {
    S::ratio(m.count(arch, Rating::Opaque), 6)
}

pub fn ordinal_score<S: Scalar>(m: &CoverageMatrix, arch: Architecture) -> S {
    S::ratio(m.ordinal_halves(arch) as usize, 12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Fillable,
    Ordinal,
}

impl ScoreKind {
    /// Integer numerator of the score (denominator 6 or 12).
    fn numerator(self, m: &CoverageMatrix, arch: Architecture) -> i64 {
        match self {
            ScoreKind::Fillable => m.count(arch, Rating::Fillable) as i64,
            ScoreKind::Ordinal => m.ordinal_halves(arch),
        }
    }

    fn cell_value(self, rating: Rating) -> i64 {
        match self {
            ScoreKind::Fillable => (rating == Rating::Fillable) as i64,
            ScoreKind::Ordinal => rating.weight_halves(),
        }
    }

    fn denominator(self) -> i64 {
        match self {
            ScoreKind::Fillable => 6,
            ScoreKind::Ordinal => 12,
        }
    }

    pub fn score(self, m: &CoverageMatrix, arch: Architecture) -> Ratio<i64> {
        Ratio::new(self.numerator(m, arch), self.denominator())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    Tie,
    Inversion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradientViolation {
    pub higher: Architecture,
    pub lower: Architecture,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub score: ScoreKind,
    pub holds: bool,
    pub violations: Vec<GradientViolation>,
}

/// Strict decrease over each adjacent pair of [`Architecture::GRADIENT`].
pub fn gradient_check(m: &CoverageMatrix, score: ScoreKind) -> GradientCheck {
    let violations: Vec<GradientViolation> = Architecture::GRADIENT
        .windows(2)
        .filter_map(|pair| {
            let (hi, lo) = (score.numerator(m, pair[0]), score.numerator(m, pair[1]));
            let kind = match hi.cmp(&lo) {
                std::cmp::Ordering::Greater => return None,
                std::cmp::Ordering::Equal => ViolationKind::Tie,
                std::cmp::Ordering::Less => ViolationKind::Inversion,
            };
            Some(GradientViolation {
                higher: pair[0],
                lower: pair[1],
                kind,
            })
        })
        .collect();
    GradientCheck {
        score,
        holds: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEdit {
    pub architecture: Architecture,
    pub property: DesProperty,
    pub from: Rating,
    pub to: Rating,
}

/// Minimum recoding sizes found by exhaustive search. `None` means no
/// recoding of up to [`ROBUSTNESS_MAX_EDITS`] cells meets the condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustnessScan {
    pub score: ScoreKind,
    pub min_edits_break_det_first: Option<usize>,
    pub min_agentic_upgrades_to_tie_classical: Option<usize>,
    pub min_hybrid_downgrades_to_tie_classical: Option<usize>,
    pub min_hybrid_downgrades_to_invert_classical: Option<usize>,
    /// One smallest recoding that ends deterministic-first, in search order.
    pub det_first_witness: Vec<CellEdit>,
}

pub const ROBUSTNESS_MAX_EDITS: usize = 4;

/// Robustness of the gradient under fillable-ratio scoring.
pub fn robustness_scan(m: &CoverageMatrix) -> RobustnessScan {
    robustness_scan_with(m, ScoreKind::Fillable)
}

pub fn robustness_scan_with(m: &CoverageMatrix, score: ScoreKind) -> RobustnessScan {
    use Architecture::*;

    let all_cells: Vec<(Architecture, DesProperty)> = Architecture::ALL
        .into_iter()
        .flat_map(|a| DesProperty::ALL.into_iter().map(move |p| (a, p)))
        .collect();
    let column = |arch: Architecture| -> Vec<(Architecture, DesProperty)> {
        DesProperty::ALL.into_iter().map(|p| (arch, p)).collect()
    };
    let any_other = |_: Rating, _: Rating| true;
    let upgrade = |from: Rating, to: Rating| score.cell_value(to) > score.cell_value(from);
    let downgrade = |from: Rating, to: Rating| score.cell_value(to) < score.cell_value(from);

    let (det_first, witness) = min_edits(m, score, &all_cells, any_other, |s| {
        Architecture::ALL
            .into_iter()
            .filter(|a| *a != DeterministicRules)
            .any(|a| s[a.index()] >= s[DeterministicRules.index()])
    })
    .map_or((None, Vec::new()), |(k, w)| (Some(k), w));

    let agentic_tie = min_edits(m, score, &column(AgenticAi), upgrade, |s| {
        s[AgenticAi.index()] >= s[ClassicalMlHitl.index()]
    })
    .map(|(k, _)| k);
    let hybrid_tie = min_edits(m, score, &column(HybridMlRules), downgrade, |s| {
        s[HybridMlRules.index()] <= s[ClassicalMlHitl.index()]
    })
    .map(|(k, _)| k);
    let hybrid_invert = min_edits(m, score, &column(HybridMlRules), downgrade, |s| {
        s[HybridMlRules.index()] < s[ClassicalMlHitl.index()]
    })
    .map(|(k, _)| k);

    RobustnessScan {
        score,
        min_edits_break_det_first: det_first,
        min_agentic_upgrades_to_tie_classical: agentic_tie,
        min_hybrid_downgrades_to_tie_classical: hybrid_tie,
        min_hybrid_downgrades_to_invert_classical: hybrid_invert,
        det_first_witness: witness,
    }
}

/// Smallest k such that recoding some k of `cells` (each to an allowed
/// rating) satisfies `target`. Cells are tried in the given order and
/// ratings in [`Rating::ALL`] order, so the witness is deterministic.
fn min_edits(
    m: &CoverageMatrix,
    score: ScoreKind,
    cells: &[(Architecture, DesProperty)],
    allowed: impl Fn(Rating, Rating) -> bool,
    target: impl Fn(&[i64; 4]) -> bool,
) -> Option<(usize, Vec<CellEdit>)> {
    let base: [i64; 4] = Architecture::ALL.map(|a| score.numerator(m, a));
    if target(&base) {
        return Some((0, Vec::new()));
    }
    let options: Vec<Vec<CellEdit>> = cells
        .iter()
        .map(|&(architecture, property)| {
            let from = m.rating(architecture, property);
            Rating::ALL
                .into_iter()
                .filter(|&to| to != from && allowed(from, to))
                .map(|to| CellEdit {
                    architecture,
                    property,
                    from,
                    to,
                })
                .collect()
        })
        .collect();

    struct Search<'a, T> {
        score: ScoreKind,
        options: &'a [Vec<CellEdit>],
        target: T,
        path: Vec<CellEdit>,
    }

    impl<T: Fn(&[i64; 4]) -> bool> Search<'_, T> {
        fn go(&mut self, start: usize, remaining: usize, scores: [i64; 4]) -> bool {
            if remaining == 0 {
                return (self.target)(&scores);
            }
            for i in start..self.options.len() {
                for edit in &self.options[i] {
                    let mut next = scores;
                    next[edit.architecture.index()] +=
                        self.score.cell_value(edit.to) - self.score.cell_value(edit.from);
                    self.path.push(edit.clone());
                    if self.go(i + 1, remaining - 1, next) {
                        return true;
                    }
                    self.path.pop();
                }
            }
            false
        }
    }

    let mut search = Search {
        score,
        options: &options,
        target,
        path: Vec::new(),
    };
    for k in 1..=ROBUSTNESS_MAX_EDITS.min(cells.len()) {
        if search.go(0, k, base) {
            return Some((k, search.path));
        }
    }
    None
}

/// Agentic column after adding delegation-aware tracing: every upgraded or
/// strengthened cell is capped at partially fillable because the evidence
/// comes from added instrumentation rather than by construction.
pub fn apply_agentic_extensions(m: &CoverageMatrix) -> CoverageMatrix {
    use DesProperty::*;
    let mut out = m.clone();
    let arch = Architecture::AgenticAi;
    let notes = [
        (DecisionContext, "delegation parameters and anchored rationale records"),
        (TemporalMetadata, "cross-agent ordering reconstructed from correlated logs"),
        (OverrideEscalationRecord, "mandate boundaries recorded per delegation"),
        (DecisionQualityIndicators, "self-reported signals anchored by external calibration"),
    ];
    for (prop, how) in notes {
        let rating = match m.rating(arch, prop) {
            Rating::Fillable => Rating::Fillable,
            _ => Rating::PartiallyFillable,
        };
        out.set(arch, prop, rating, Some(format!("{SUPPLEMENTARY_NOTE}: {how}")));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureProfile {
    pub fillable: usize,
    pub partially_fillable: usize,
    pub unfillable: usize,
    pub opaque: usize,
}

pub fn profile(m: &CoverageMatrix, arch: Architecture) -> ArchitectureProfile {
    ArchitectureProfile {
        fillable: m.count(arch, Rating::Fillable),
        partially_fillable: m.count(arch, Rating::PartiallyFillable),
        unfillable: m.count(arch, Rating::Unfillable),
        opaque: m.count(arch, Rating::Opaque),
    }
}

/// Everything the CLI prints about a matrix, with scores rounded half-up to
/// two decimals.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub matrix: CoverageMatrix,
    pub fillable_ratio: Vec<(Architecture, f64)>,
    pub opaque_ratio: Vec<(Architecture, f64)>,
    pub ordinal_score: Vec<(Architecture, f64)>,
    pub gradient_fillable: GradientCheck,
    pub gradient_ordinal: GradientCheck,
    pub robustness: RobustnessScan,
    pub disclaimer: &'static str,
}

impl CoverageReport {
    pub fn new(matrix: CoverageMatrix) -> Self {
        let rounded = |f: fn(&CoverageMatrix, Architecture) -> Ratio<i64>| -> Vec<(Architecture, f64)> {
            Architecture::ALL
                .into_iter()
                .map(|a| (a, f(&matrix, a).round_half_up(2)))
                .collect()
        };
        CoverageReport {
            fillable_ratio: rounded(fillable_ratio::<Ratio<i64>>),
            opaque_ratio: rounded(opaque_ratio::<Ratio<i64>>),
            ordinal_score: rounded(ordinal_score::<Ratio<i64>>),
            gradient_fillable: gradient_check(&matrix, ScoreKind::Fillable),
            gradient_ordinal: gradient_check(&matrix, ScoreKind::Ordinal),
            robustness: robustness_scan(&matrix),
            disclaimer: DISCLAIMER,
            matrix,
        }
    }

    pub fn gradient_holds(&self) -> bool {
        self.gradient_fillable.holds && self.gradient_ordinal.holds
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = 30;
        write!(f, "{:<width$}", "property")?;
        for a in Architecture::ALL {
            write!(f, "{:>22}", a.label())?;
        }
        writeln!(f)?;
        for p in DesProperty::ALL {
            write!(f, "{:<width$}", p.as_str())?;
            for a in Architecture::ALL {
                write!(f, "{:>22}", self.matrix.rating(a, p).short())?;
            }
            writeln!(f)?;
        }
        for (name, row) in [
            ("Fillable ratio", &self.fillable_ratio),
            ("Opaque ratio", &self.opaque_ratio),
            ("Ordinal score", &self.ordinal_score),
        ] {
            write!(f, "{name:<width$}")?;
            for (_, v) in row {
                write!(f, "{v:>22.2}")?;
            }
            writeln!(f)?;
        }
        for check in [&self.gradient_fillable, &self.gradient_ordinal] {
            write!(f, "gradient ({:?}): {}", check.score, if check.holds { "holds" } else { "violated" })?;
            for v in &check.violations {
                write!(f, " [{:?} {} vs {}]", v.kind, v.higher.as_str(), v.lower.as_str())?;
            }
            writeln!(f)?;
        }
        let show = |k: Option<usize>| k.map_or_else(|| format!(">{ROBUSTNESS_MAX_EDITS}"), |k| k.to_string());
        writeln!(
            f,
            "robustness (fillable): det-first breaks at {} edits; agentic ties classical after {} upgrades; \
             hybrid ties classical after {} downgrades and inverts after {}",
            show(self.robustness.min_edits_break_det_first),
            show(self.robustness.min_agentic_upgrades_to_tie_classical),
            show(self.robustness.min_hybrid_downgrades_to_tie_classical),
            show(self.robustness.min_hybrid_downgrades_to_invert_classical),
        )?;
        writeln!(f, "note: {}", self.disclaimer)
    }
}
