//! Shared domain vocabulary: objectives, budget schedules, the meta-algorithm
//! state, evaluation logs and regret reports.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest number of grid points any brute-force sweep will enumerate.
pub const GRID_POINT_LIMIT: u128 = 10_000_000;

/// Slack allowed by [`validate_regularity`] on top of `L * dist(x, y)`.
pub const REGULARITY_SLACK: f64 = 1e-12;

/// The norm inducing the metric in the regularity condition
/// `|f(x) - f(y)| <= L * ||x - y||`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Infinity,
    Euclidean,
    One,
}

impl NormKind {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            NormKind::Infinity => diffs.fold(0.0, f64::max),
            NormKind::Euclidean => diffs.map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::One => diffs.sum(),
        }
    }

    /// Norm of a vector with `components` entries all equal to `side`.
    pub fn uniform_vector_norm(self, components: usize, side: f64) -> f64 {
        match self {
            NormKind::Infinity => {
                if components == 0 {
                    0.0
                } else {
                    side
                }
            }
            NormKind::Euclidean => (components as f64).sqrt() * side,
            NormKind::One => components as f64 * side,
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormKind::Infinity => "infinity",
            NormKind::Euclidean => "euclidean",
            NormKind::One => "one",
        };
        f.write_str(s)
    }
}

pub type ObjectiveFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A black-box function on `[0,1]^d` together with its regularity data.
#[derive(Clone)]
pub struct ObjectiveSpec {
    pub name: String,
    pub dimension: usize,
    evaluate: Arc<ObjectiveFn>,
    pub lipschitz_constant: f64,
    pub norm_kind: NormKind,
    pub known_minimum: Option<f64>,
}

impl ObjectiveSpec {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        lipschitz_constant: f64,
        evaluate: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::domain("objective dimension must be at least 1"));
        }
        if !(lipschitz_constant >= 0.0) || !lipschitz_constant.is_finite() {
            return Err(Error::domain(format!(
                "Lipschitz constant must be finite and nonnegative, got {lipschitz_constant}"
            )));
        }
        Ok(Self {
            name: name.into(),
            dimension,
            evaluate: Arc::new(evaluate),
            lipschitz_constant,
            norm_kind: NormKind::default(),
            known_minimum: None,
        })
    }

    pub fn with_norm(mut self, norm_kind: NormKind) -> Self {
        self.norm_kind = norm_kind;
        self
    }

    pub fn with_known_minimum(mut self, f_star: f64) -> Self {
        self.known_minimum = Some(f_star);
        self
    }

    /// Pulls a function defined on the box `lower..upper` back onto the unit
    /// cube. The Lipschitz constant is rescaled by the longest edge.
    pub fn from_box(
        name: impl Into<String>,
        lower: &[f64],
        upper: &[f64],
        lipschitz_constant: f64,
        evaluate: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::domain("box bounds have different lengths"));
        }
        if lower.iter().zip(upper).any(|(lo, hi)| !(hi > lo)) {
            return Err(Error::domain("box must have positive extent on every axis"));
        }
        let lower = lower.to_vec();
        let edges: Vec<f64> = upper.iter().zip(&lower).map(|(hi, lo)| hi - lo).collect();
        let longest = edges.iter().copied().fold(0.0, f64::max);
        let dim = lower.len();
        Self::new(
            name,
            dim,
            lipschitz_constant * longest,
            move |u: &[f64]| {
                let x: Vec<f64> = u
                    .iter()
                    .zip(lower.iter().zip(&edges))
                    .map(|(ui, (lo, e))| lo + ui * e)
                    .collect();
                evaluate(&x)
            },
        )
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.evaluate)(x)
    }

    /// Restricts the objective to its free coordinates, holding the leading
    /// `prefix` coordinates fixed.
    pub fn restrict(&self, prefix: &[f64]) -> Result<ObjectiveSpec> {
        if prefix.len() >= self.dimension {
            return Err(Error::contract(format!(
                "prefix of length {} leaves no free coordinate in dimension {}",
                prefix.len(),
                self.dimension
            )));
        }
        let inner = Arc::clone(&self.evaluate);
        let prefix = prefix.to_vec();
        let free = self.dimension - prefix.len();
        let mut spec = Self::new(
            format!("{}|prefix", self.name),
            free,
            self.lipschitz_constant,
            move |z: &[f64]| {
                let mut x = prefix.clone();
                x.extend_from_slice(z);
                inner(&x)
            },
        )?;
        spec.norm_kind = self.norm_kind;
        Ok(spec)
    }
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("lipschitz_constant", &self.lipschitz_constant)
            .field("norm_kind", &self.norm_kind)
            .field("known_minimum", &self.known_minimum)
            .finish_non_exhaustive()
    }
}

/// One grid pair breaking the regularity condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `|f(x) - f(y)|`
    pub gap: f64,
    /// `L * dist(x, y)`
    pub allowed: f64,
}

/// Decodes grid index `index` into per-axis indices, first axis most
/// significant.
pub(crate) fn grid_digits(
    mut index: usize,
    resolution: usize,
    dimension: usize,
    out: &mut [usize],
) {
    for slot in out[..dimension].iter_mut().rev() {
        *slot = index % resolution;
        index /= resolution;
    }
}

pub(crate) fn checked_grid_size(resolution: usize, dimension: usize) -> Result<usize> {
    let mut points: u128 = 1;
    for _ in 0..dimension {
        points = points.saturating_mul(resolution as u128);
        if points > GRID_POINT_LIMIT {
            return Err(Error::GridTooLarge {
                points: (resolution as u128).saturating_pow(dimension as u32),
                limit: GRID_POINT_LIMIT,
            });
        }
    }
    Ok(points as usize)
}

/// Checks the regularity condition on every pair of points of the grid
/// `{0, 1/(r-1), ..., 1}^d`. An empty result means the check passed; it is
/// advisory only, a black box can still misbehave between grid points.
pub fn validate_regularity(objective: &ObjectiveSpec, resolution: usize) -> Result<Vec<Violation>> {
    if resolution < 2 {
        return Err(Error::domain(
            "regularity grid needs at least 2 points per axis",
        ));
    }
    let d = objective.dimension;
    let n = checked_grid_size(resolution, d)?;
    let step = 1.0 / (resolution - 1) as f64;
    let points: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut digits = vec![0; d];
            grid_digits(k, resolution, d, &mut digits);
            digits.iter().map(|&i| i as f64 * step).collect()
        })
        .collect();
    let values: Vec<f64> = points.par_iter().map(|p| objective.evaluate(p)).collect();
    let l = objective.lipschitz_constant;
    let norm = objective.norm_kind;

    let violations = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (points, values) = (&points, &values);
            (i + 1..n).filter_map(move |j| {
                let gap = (values[i] - values[j]).abs();
                let allowed = l * norm.distance(&points[i], &points[j]);
                // NaN gaps count as violations.
                if gap.is_nan() || gap > allowed + REGULARITY_SLACK {
                    Some(Violation {
                        x: points[i].clone(),
                        y: points[j].clone(),
                        gap,
                        allowed,
                    })
                } else {
                    None
                }
            })
        })
        .collect();
    Ok(violations)
}

/// Per-dimension budgets `T_1 <= ... <= T_d` and noise bounds `eps_i` handed
/// to the meta algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSchedule {
    budgets: Vec<usize>,
    noise_bounds: Vec<f64>,
}

impl BudgetSchedule {
    /// Budgets with the default noise bounds: exact evaluations in the
    /// innermost dimension, unbounded everywhere else.
    pub fn new(budgets: Vec<usize>) -> Result<Self> {
        let d = budgets.len();
        let noise = (0..d)
            .map(|i| if i + 1 == d { 0.0 } else { f64::INFINITY })
            .collect();
        Self::with_noise_bounds(budgets, noise)
    }

    pub fn with_noise_bounds(budgets: Vec<usize>, noise_bounds: Vec<f64>) -> Result<Self> {
        if budgets.is_empty() {
            return Err(Error::domain(
                "budget schedule needs at least one dimension",
            ));
        }
        if budgets.contains(&0) {
            return Err(Error::domain("per-dimension budgets must be positive"));
        }
        if budgets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain(format!(
                "budgets must be nondecreasing (T_1 <= ... <= T_d), got {budgets:?}"
            )));
        }
        if noise_bounds.len() != budgets.len() {
            return Err(Error::domain(format!(
                "{} noise bounds given for {} dimensions",
                noise_bounds.len(),
                budgets.len()
            )));
        }
        if noise_bounds.iter().any(|e| e.is_nan() || *e < 0.0) {
            return Err(Error::domain("noise bounds must be nonnegative"));
        }
        budgets
            .iter()
            .try_fold(1usize, |acc, &b| acc.checked_mul(b))
            .ok_or_else(|| Error::domain("product of budgets overflows"))?;
        Ok(Self {
            budgets,
            noise_bounds,
        })
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    pub fn noise_bounds(&self) -> &[f64] {
        &self.noise_bounds
    }

    pub fn dimension(&self) -> usize {
        self.budgets.len()
    }

    /// Number of evaluations a full run performs, `prod T_i`.
    pub fn total(&self) -> usize {
        self.budgets.iter().product()
    }
}

/// Mutable state of one meta-algorithm run. Dimensions are 0-based here;
/// counters are 1-based as in the index formula.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaState {
    pub counters: Vec<usize>,
    /// Queries of the current inner instance of each dimension.
    pub histories: Vec<Vec<f64>>,
    /// `cond_min[i][j]`: smallest evaluation seen while `histories[i][j]`
    /// was the active dimension-`i` coordinate.
    pub cond_min: Vec<Vec<f64>>,
}

impl MetaState {
    pub fn new(dimension: usize) -> Self {
        Self {
            counters: vec![1; dimension],
            histories: vec![Vec::new(); dimension],
            cond_min: vec![Vec::new(); dimension],
        }
    }

    pub fn dimension(&self) -> usize {
        self.counters.len()
    }

    /// The point currently addressed by the counters.
    pub fn current_point(&self) -> Vec<f64> {
        self.counters
            .iter()
            .zip(&self.histories)
            .map(|(&tau, h)| h[tau - 1])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub t: usize,
    pub counters: Vec<usize>,
    pub point: Vec<f64>,
    pub value: f64,
}

/// Ordered evaluations of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationLog {
    pub records: Vec<EvaluationRecord>,
}

/// Writes an `f64` with 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

struct Sig17(f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = serde_json::value::RawValue::from_string(format_sig17(self.0))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Serialize)]
struct JsonRecordOut<'a> {
    t: usize,
    tau: &'a [usize],
    x: Vec<Sig17>,
    f: Sig17,
}

#[derive(Deserialize)]
struct JsonRecordIn {
    t: usize,
    tau: Vec<usize>,
    x: Vec<f64>,
    f: f64,
}

impl EvaluationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.records.first().map(|r| r.point.len())
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn csv_header(dimension: usize) -> Vec<String> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=dimension).map(|i| format!("tau_{i}")));
        header.extend((1..=dimension).map(|i| format!("x_{i}")));
        header.push("f".to_string());
        header
    }

    /// CSV with header `t,tau_1..tau_d,x_1..x_d,f`.
    pub fn write_csv<W: Write>(&self, dimension: usize, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::csv_header(dimension))?;
        for r in &self.records {
            let mut row = Vec::with_capacity(2 * dimension + 2);
            row.push(r.t.to_string());
            row.extend(r.counters.iter().map(|c| c.to_string()));
            row.extend(r.point.iter().map(|&x| format_sig17(x)));
            row.push(format_sig17(r.value));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, dimension: usize) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(dimension, &mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 4 || header.len() % 2 != 0 {
            return Err(Error::Config(format!(
                "evaluation log header has {} columns",
                header.len()
            )));
        }
        let d = (header.len() - 2) / 2;
        let expected = Self::csv_header(d);
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Config(format!(
                "unexpected evaluation log header, expected {}",
                expected.join(",")
            )));
        }
        let parse_err = |field: &str| Error::Config(format!("malformed log field `{field}`"));
        let mut records = Vec::new();
        for row in r.records() {
            let row = row?;
            let t = row[0].parse().map_err(|_| parse_err(&row[0]))?;
            let counters = (1..=d)
                .map(|k| row[k].parse().map_err(|_| parse_err(&row[k])))
                .collect::<Result<Vec<usize>>>()?;
            let point = (d + 1..=2 * d)
                .map(|k| row[k].parse().map_err(|_| parse_err(&row[k])))
                .collect::<Result<Vec<f64>>>()?;
            let value = row[2 * d + 1]
                .parse()
                .map_err(|_| parse_err(&row[2 * d + 1]))?;
            records.push(EvaluationRecord {
                t,
                counters,
                point,
                value,
            });
        }
        Ok(Self { records })
    }

    /// JSON array of `{t, tau, x, f}` records.
    pub fn to_json_string(&self) -> Result<String> {
        let out: Vec<JsonRecordOut<'_>> = self
            .records
            .iter()
            .map(|r| JsonRecordOut {
                t: r.t,
                tau: &r.counters,
                x: r.point.iter().map(|&v| Sig17(v)).collect(),
                f: Sig17(r.value),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&out)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let parsed: Vec<JsonRecordIn> = serde_json::from_str(s)?;
        Ok(Self {
            records: parsed
                .into_iter()
                .map(|r| EvaluationRecord {
                    t: r.t,
                    counters: r.tau,
                    point: r.x,
                    value: r.f,
                })
                .collect(),
        })
    }
}

/// Robustness coefficients of a univariate optimizer at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessProfile {
    /// Regret growth per unit of noise.
    pub alpha: f64,
    /// Pseudo-regret growth per unit of noise.
    pub beta: f64,
    /// Noise-free average regret.
    pub base_regret: f64,
}

impl RobustnessProfile {
    pub fn new(alpha: f64, beta: f64, base_regret: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::domain(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(beta >= 1.0) {
            return Err(Error::domain(format!("beta must be >= 1, got {beta}")));
        }
        if !(base_regret >= 0.0) {
            return Err(Error::domain(format!(
                "base regret must be >= 0, got {base_regret}"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            base_regret,
        })
    }

    /// The weak profile implied by a strong one: `beta = alpha + 1`.
    pub fn implied_weak(&self) -> Self {
        Self {
            beta: self.alpha + 1.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub bound: f64,
    pub measured: f64,
    pub satisfied: bool,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, bound: f64, measured: f64) -> Self {
        Self {
            name: name.into(),
            bound,
            measured,
            satisfied: measured <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub horizon: usize,
    pub average_regret: f64,
    pub average_pseudo_regret: f64,
    pub cumulative_regret: f64,
    /// Absent for one-dimensional runs.
    pub noise_gap: Option<f64>,
    pub bound_checks: Vec<BoundCheck>,
}

impl RegretReport {
    /// Builds a report from true values `f(x_t)` and the values the optimizer
    /// observed (`f(x_t)` plus nonnegative noise).
    pub fn from_values(values: &[f64], observed: &[f64], f_star: f64) -> Result<Self> {
        if values.len() != observed.len() {
            return Err(Error::contract(
                "true and observed value lists differ in length",
            ));
        }
        let average_regret = crate::audit::average_regret(values, f_star)?;
        let average_pseudo_regret = crate::audit::pseudo_regret(observed, f_star)?;
        let cumulative_regret = values.iter().map(|v| v - f_star).sum();
        Ok(Self {
            horizon: values.len(),
            average_regret,
            average_pseudo_regret,
            cumulative_regret,
            noise_gap: None,
            bound_checks: Vec::new(),
        })
    }
}
