//! Label-free drift monitoring over archived decision events.
//!
//! Only what the archive records is read: feature vectors, quality scores,
//! override flags and timestamps. The default detector set is per-feature
//! and univariate (PSI, variance collapse, zero inflation) plus an override
//! rate test; a correlation-matrix detector is available but off by default.
//!
//! Marginal statistics are computed from sorted copies of each column, so
//! any reordering of a column leaves them bit-for-bit unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::evidence::DecisionEvent;
use crate::scalar::Real;

pub const BIN_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MonitorError {
    #[error("WINDOW_TOO_SMALL: {got} events, need at least {need}")]
    WindowTooSmall { got: usize, need: usize },
    #[error("FEATURE_MISSING: event {index} has no value for {feature}")]
    FeatureMissing { index: usize, feature: String },
    #[error("NO_FEATURES: baseline window has no feature vector")]
    NoFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct MonitorConfig<F = f64> {
    pub min_window: usize,
    pub psi_warn: F,
    pub psi_alarm: F,
    pub variance_collapse_ratio: F,
    pub zero_inflation_delta: F,
    pub correlation_drift_norm: F,
    pub override_p_value: F,
    /// Substituted for empty bins inside PSI.
    pub smoothing: F,
    pub joint_detector: bool,
    /// Raise an alarm on quality-score PSI (reported either way).
    pub score_alarm: bool,
}

impl<F: Real> Default for MonitorConfig<F> {
    fn default() -> Self {
        let c = |x: f64| F::from_f64(x).expect("representable constant");
        MonitorConfig {
            min_window: 1000,
            psi_warn: c(0.10),
            psi_alarm: c(0.25),
            variance_collapse_ratio: c(0.1),
            zero_inflation_delta: c(0.2),
            correlation_drift_norm: c(0.3),
            override_p_value: c(0.01),
            smoothing: c(1e-6),
            joint_detector: false,
            score_alarm: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ColumnStats<F = f64> {
    /// Lower edge of each bin; the first is the baseline minimum.
    pub quantile_bin_edges: Vec<F>,
    pub bin_frequencies: Vec<F>,
    pub mean: F,
    pub variance: F,
    pub zero_fraction: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Moments<F = f64> {
    pub mean: F,
    pub variance: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct CorrelationMatrix<F = f64> {
    pub features: Vec<String>,
    pub values: Vec<Vec<F>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Baseline<F = f64> {
    pub per_feature: BTreeMap<String, ColumnStats<F>>,
    /// Present only when every baseline event carries `quality.score`.
    pub score_histogram: Option<ColumnStats<F>>,
    pub override_rate: F,
    pub override_count: usize,
    pub latency_stats: Option<Moments<F>>,
    pub correlation_matrix: CorrelationMatrix<F>,
    pub window_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlarmKind {
    PsiShift,
    VarianceCollapse,
    ZeroInflation,
    OverrideDrift,
    CorrelationDrift,
    ScoreShift,
}

impl AlarmKind {
    /// Per-feature marginal detectors.
    pub fn is_univariate(self) -> bool {
        matches!(self, AlarmKind::PsiShift | AlarmKind::VarianceCollapse | AlarmKind::ZeroInflation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warn,
    Alarm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Alarm<F = f64> {
    pub kind: AlarmKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    pub severity: Severity,
    pub value: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct OverrideDrift<F = f64> {
    pub baseline_rate: F,
    pub window_rate: F,
    pub delta: F,
    pub z: F,
    pub p_value: F,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct SignalReport<F = f64> {
    pub per_feature_psi: BTreeMap<String, F>,
    /// `None` where the baseline variance is zero.
    pub variance_ratios: BTreeMap<String, Option<F>>,
    pub zero_inflation_deltas: BTreeMap<String, F>,
    pub score_psi: Option<F>,
    pub override_rate_drift: OverrideDrift<F>,
    /// Frobenius norm of the correlation difference; `None` when the joint
    /// detector is disabled.
    pub correlation_drift: Option<F>,
    pub alarms: Vec<Alarm<F>>,
    pub window_size: usize,
    pub thresholds: MonitorConfig<F>,
}

impl<F: Real> SignalReport<F> {
    pub fn fired(&self) -> bool {
        !self.alarms.is_empty()
    }

    pub fn has(&self, kind: AlarmKind, feature: &str) -> bool {
        self.alarms
            .iter()
            .any(|a| a.kind == kind && a.feature.as_deref() == Some(feature))
    }

    pub fn univariate_alarms(&self) -> impl Iterator<Item = &Alarm<F>> {
        self.alarms.iter().filter(|a| a.kind.is_univariate())
    }
}

/// Columns pulled out of a window of events.
struct Window<F> {
    features: BTreeMap<String, Vec<F>>,
    scores: Option<Vec<F>>,
    overrides: usize,
    timestamps: Vec<i64>,
    len: usize,
}

fn cast<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("finite f64 converts")
}

fn extract<F: Real>(events: &[DecisionEvent], names: Option<&[String]>) -> Result<Window<F>, MonitorError> {
    let names: Vec<String> = match names {
        Some(n) => n.to_vec(),
        None => events
            .first()
            .map(|e| e.context.feature_vector.keys().cloned().collect())
            .unwrap_or_default(),
    };
    let mut features: BTreeMap<String, Vec<F>> = names
        .iter()
        .map(|n| (n.clone(), Vec::with_capacity(events.len())))
        .collect();
    let mut scores = Some(Vec::with_capacity(events.len()));
    let mut overrides = 0;
    let mut timestamps = Vec::new();
    for (index, event) in events.iter().enumerate() {
        for (name, column) in features.iter_mut() {
            let v = event
                .context
                .feature_vector
                .get(name)
                .ok_or_else(|| MonitorError::FeatureMissing {
                    index,
                    feature: name.clone(),
                })?;
            column.push(cast(*v));
        }
        match (event.quality.score, scores.as_mut()) {
            (Some(s), Some(col)) => col.push(cast(s)),
            _ => scores = None,
        }
        if event.override_record.override_occurred == Some(true) {
            overrides += 1;
        }
        if let Some(t) = event.temporal.event_timestamp {
            timestamps.push(t);
        }
    }
    Ok(Window {
        features,
        scores,
        overrides,
        timestamps,
        len: events.len(),
    })
}

fn sorted<F: Real>(values: &[F]) -> Vec<F> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    v
}

/// Mean and population variance, order-independent because the input is
/// sorted first.
fn moments<F: Real>(values: &[F]) -> Moments<F> {
    if values.is_empty() {
        return Moments {
            mean: F::zero(),
            variance: F::zero(),
        };
    }
    let s = sorted(values);
    let n = F::from_usize(s.len()).expect("length fits");
    let mean = s.iter().fold(F::zero(), |acc, x| acc + *x) / n;
    let mut dev: Vec<F> = s.iter().map(|x| (*x - mean) * (*x - mean)).collect();
    dev.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let variance = dev.into_iter().fold(F::zero(), |acc, d| acc + d) / n;
    Moments { mean, variance }
}

fn zero_fraction<F: Real>(values: &[F]) -> F {
    let zeros = values.iter().filter(|v| v.is_zero()).count();
    F::ratio(zeros, values.len().max(1))
}

/// Largest bin whose lower edge is at or below `x`; values under the first
/// edge fall into bin 0.
pub fn bin_index<F: Real>(edges: &[F], x: F) -> usize {
    edges.partition_point(|e| *e <= x).saturating_sub(1)
}

pub fn bin_frequencies<F: Real>(edges: &[F], values: &[F]) -> Vec<F> {
    let mut counts = vec![0usize; edges.len()];
    for v in values {
        counts[bin_index(edges, *v)] += 1;
    }
    counts
        .into_iter()
        .map(|c| F::ratio(c, values.len().max(1)))
        .collect()
}

fn column_stats<F: Real>(values: &[F]) -> ColumnStats<F> {
    let s = sorted(values);
    let n = s.len();
    let edges: Vec<F> = (0..BIN_COUNT).map(|i| s[i * n / BIN_COUNT]).collect();
    let m = moments(values);
    ColumnStats {
        bin_frequencies: bin_frequencies(&edges, values),
        quantile_bin_edges: edges,
        mean: m.mean,
        variance: m.variance,
        zero_fraction: zero_fraction(values),
    }
}

/// Population stability index between two frequency vectors over the same
/// bins. Empty bins are replaced by `smoothing` on either side.
pub fn psi<F: Real>(expected: &[F], actual: &[F], smoothing: F) -> F {
    expected
        .iter()
        .zip(actual)
        .map(|(e, a)| {
            let e = if e.is_zero() { smoothing } else { *e };
            let a = if a.is_zero() { smoothing } else { *a };
            (a - e) * (a / e).ln()
        })
        .fold(F::zero(), |acc, x| acc + x)
}

fn correlation<F: Real>(window: &Window<F>) -> CorrelationMatrix<F> {
    let names: Vec<String> = window.features.keys().cloned().collect();
    let cols: Vec<&Vec<F>> = window.features.values().collect();
    let stats: Vec<Moments<F>> = cols.iter().map(|c| moments(c)).collect();
    let n = F::from_usize(window.len.max(1)).expect("length fits");
    let k = cols.len();
    let mut values = vec![vec![F::zero(); k]; k];
    for i in 0..k {
        values[i][i] = F::one();
        for j in (i + 1)..k {
            let denom = (stats[i].variance * stats[j].variance).sqrt();
            let r = if denom.is_zero() {
                F::zero()
            } else {
                let cov = cols[i]
                    .iter()
                    .zip(cols[j].iter())
                    .map(|(x, y)| (*x - stats[i].mean) * (*y - stats[j].mean))
                    .fold(F::zero(), |acc, v| acc + v)
                    / n;
                cov / denom
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    CorrelationMatrix { features: names, values }
}

fn check_window(len: usize, min: usize) -> Result<(), MonitorError> {
    if len < min {
        return Err(MonitorError::WindowTooSmall { got: len, need: min });
    }
    Ok(())
}

pub fn fit_baseline<F: Real>(events: &[DecisionEvent], config: &MonitorConfig<F>) -> Result<Baseline<F>, MonitorError> {
    check_window(events.len(), config.min_window.max(1))?;
    let window = extract::<F>(events, None)?;
    if window.features.is_empty() {
        return Err(MonitorError::NoFeatures);
    }
    let deltas: Vec<F> = window
        .timestamps
        .windows(2)
        .map(|w| cast::<F>((w[1] - w[0]) as f64))
        .collect();
    Ok(Baseline {
        per_feature: window
            .features
            .iter()
            .map(|(name, col)| (name.clone(), column_stats(col)))
            .collect(),
        score_histogram: window.scores.as_deref().map(column_stats),
        override_rate: F::ratio(window.overrides, window.len),
        override_count: window.overrides,
        latency_stats: (!deltas.is_empty()).then(|| moments(&deltas)),
        correlation_matrix: correlation(&window),
        window_size: window.len,
    })
}

/// Two-sided pooled two-proportion z-test.
fn override_drift<F: Real>(baseline: &Baseline<F>, window: &Window<F>, p_threshold: F) -> OverrideDrift<F> {
    let (x1, n1) = (baseline.override_count as f64, baseline.window_size as f64);
    let (x2, n2) = (window.overrides as f64, window.len as f64);
    let (p1, p2) = (x1 / n1, x2 / n2);
    let pooled = (x1 + x2) / (n1 + n2);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
    let (z, p) = if se > 0.0 {
        let z = (p2 - p1) / se;
        (z, libm::erfc(z.abs() / std::f64::consts::SQRT_2))
    } else {
        (0.0, 1.0)
    };
    let p_value = cast::<F>(p);
    OverrideDrift {
        baseline_rate: baseline.override_rate,
        window_rate: F::ratio(window.overrides, window.len),
        delta: F::ratio(window.overrides, window.len) - baseline.override_rate,
        z: cast(z),
        p_value,
        significant: p_value < p_threshold,
    }
}

pub fn detect<F: Real>(
    events: &[DecisionEvent],
    baseline: &Baseline<F>,
    config: &MonitorConfig<F>,
) -> Result<SignalReport<F>, MonitorError> {
    check_window(events.len(), config.min_window.max(1))?;
    let names: Vec<String> = baseline.per_feature.keys().cloned().collect();
    let window = extract::<F>(events, Some(&names))?;

    let mut alarms = Vec::new();
    let mut per_feature_psi = BTreeMap::new();
    let mut variance_ratios = BTreeMap::new();
    let mut zero_inflation_deltas = BTreeMap::new();

    for (name, base) in &baseline.per_feature {
        let col = &window.features[name];
        let freq = bin_frequencies(&base.quantile_bin_edges, col);
        let value = psi(&base.bin_frequencies, &freq, config.smoothing);
        let severity = if value >= config.psi_alarm {
            Some(Severity::Alarm)
        } else if value >= config.psi_warn {
            Some(Severity::Warn)
        } else {
            None
        };
        if let Some(severity) = severity {
            alarms.push(Alarm {
                kind: AlarmKind::PsiShift,
                feature: Some(name.clone()),
                severity,
                value,
            });
        }
        per_feature_psi.insert(name.clone(), value);

        let m = moments(col);
        let ratio = (!base.variance.is_zero()).then(|| m.variance / base.variance);
        if let Some(r) = ratio.filter(|r| *r < config.variance_collapse_ratio) {
            alarms.push(Alarm {
                kind: AlarmKind::VarianceCollapse,
                feature: Some(name.clone()),
                severity: Severity::Alarm,
                value: r,
            });
        }
        variance_ratios.insert(name.clone(), ratio);

        let delta = zero_fraction(col) - base.zero_fraction;
        if delta > config.zero_inflation_delta {
            alarms.push(Alarm {
                kind: AlarmKind::ZeroInflation,
                feature: Some(name.clone()),
                severity: Severity::Alarm,
                value: delta,
            });
        }
        zero_inflation_deltas.insert(name.clone(), delta);
    }

    let score_psi = match (&baseline.score_histogram, &window.scores) {
        (Some(base), Some(scores)) => {
            let value = psi(
                &base.bin_frequencies,
                &bin_frequencies(&base.quantile_bin_edges, scores),
                config.smoothing,
            );
            if config.score_alarm && value >= config.psi_warn {
                alarms.push(Alarm {
                    kind: AlarmKind::ScoreShift,
                    feature: None,
                    severity: if value >= config.psi_alarm { Severity::Alarm } else { Severity::Warn },
                    value,
                });
            }
            Some(value)
        }
        _ => None,
    };

    let override_rate_drift = override_drift(baseline, &window, config.override_p_value);
    if override_rate_drift.significant {
        alarms.push(Alarm {
            kind: AlarmKind::OverrideDrift,
            feature: None,
            severity: Severity::Alarm,
            value: override_rate_drift.delta,
        });
    }

    let correlation_drift = config.joint_detector.then(|| {
        let current = correlation(&window);
        let norm = baseline
            .correlation_matrix
            .values
            .iter()
            .flatten()
            .zip(current.values.iter().flatten())
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .fold(F::zero(), |acc, x| acc + x)
            .sqrt();
        if norm > config.correlation_drift_norm {
            alarms.push(Alarm {
                kind: AlarmKind::CorrelationDrift,
                feature: None,
                severity: Severity::Alarm,
                value: norm,
            });
        }
        norm
    });

    Ok(SignalReport {
        per_feature_psi,
        variance_ratios,
        zero_inflation_deltas,
        score_psi,
        override_rate_drift,
        correlation_drift,
        alarms,
        window_size: window.len,
        thresholds: config.clone(),
    })
}
