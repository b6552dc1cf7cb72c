//! Univariate optimizers behind the `x_t = Gamma^t_{T,eps}(history)` contract.
//!
//! Two policies are provided:
//!
//! * [`OptimizerKind::PiyavskiiShubert`] queries `0`, then `1`, then always the
//!   global minimizer of the lower envelope
//!   `F(x) = max_k ( h(x_k) - L |x - x_k| )` built from the observations so far.
//! * [`OptimizerKind::UniformGrid`] ignores observations and queries the cell
//!   centers `(2t - 1) / (2T)`.
//!
//! Both are pure functions of `(config, history, t)`. The noise bound carried
//! by [`OptimizerConfig`] does not change any proposal; it only feeds audits.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audit::{average_regret, pseudo_regret};
use crate::error::{Error, Result};
use crate::types::{ObjectiveSpec, RobustnessProfile};

/// Number of points in envelope dumps and envelope validity sweeps.
pub const ENVELOPE_GRID_POINTS: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    #[serde(alias = "ps")]
    PiyavskiiShubert,
    #[serde(alias = "grid")]
    UniformGrid,
}

impl OptimizerKind {
    pub fn short_name(self) -> &'static str {
        match self {
            OptimizerKind::PiyavskiiShubert => "ps",
            OptimizerKind::UniformGrid => "grid",
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ps" | "piyavskii_shubert" => Ok(OptimizerKind::PiyavskiiShubert),
            "grid" | "uniform_grid" => Ok(OptimizerKind::UniformGrid),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub horizon: usize,
    pub noise_bound: f64,
    pub lipschitz_constant: f64,
    pub kind: OptimizerKind,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, horizon: usize, lipschitz_constant: f64) -> Self {
        Self {
            horizon,
            noise_bound: 0.0,
            lipschitz_constant,
            kind,
        }
    }

    pub fn with_noise_bound(mut self, noise_bound: f64) -> Self {
        self.noise_bound = noise_bound;
        self
    }
}

/// Queries and observed (possibly noise-inflated) values of one 1D run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UnivariateHistory {
    queries: Vec<f64>,
    values: Vec<f64>,
}

impl UnivariateHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut h = Self::new();
        for &(x, v) in pairs {
            h.push(x, v)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, x: f64, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::contract(format!("query {x} outside [0,1]")));
        }
        self.queries.push(x);
        self.values.push(value);
        Ok(())
    }

    pub fn queries(&self) -> &[f64] {
        &self.queries
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Next query of a univariate optimizer at step `t` (1-based).
pub fn propose(config: &OptimizerConfig, history: &UnivariateHistory, t: usize) -> Result<f64> {
    propose_from(config, &history.queries, &history.values, t)
}

/// Slice form of [`propose`], used by the meta engine to avoid copying the
/// per-dimension tables.
pub fn propose_from(
    config: &OptimizerConfig,
    queries: &[f64],
    values: &[f64],
    t: usize,
) -> Result<f64> {
    if queries.len() != values.len() {
        return Err(Error::contract(
            "history queries and values differ in length",
        ));
    }
    if t != queries.len() + 1 {
        return Err(Error::contract(format!(
            "step {t} does not follow a history of {} queries",
            queries.len()
        )));
    }
    if t > config.horizon {
        return Err(Error::contract(format!(
            "step {t} exceeds horizon {}",
            config.horizon
        )));
    }
    match config.kind {
        OptimizerKind::UniformGrid => Ok((2 * t - 1) as f64 / (2 * config.horizon) as f64),
        OptimizerKind::PiyavskiiShubert => match t {
            1 => Ok(0.0),
            2 => Ok(1.0),
            _ => Ok(envelope_min_from(queries, values, config.lipschitz_constant)?.x),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeMinimum {
    pub x: f64,
    pub value: f64,
}

/// Distinct queries in increasing order; repeated queries keep their largest
/// value, which is the one that shapes the envelope.
fn sorted_support(queries: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = queries
        .iter()
        .copied()
        .zip(values.iter().copied())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|later, kept| {
        if later.0 == kept.0 {
            kept.1 = kept.1.max(later.1);
            true
        } else {
            false
        }
    });
    pts
}

/// Global minimizer of the lower envelope, computed exactly over its
/// breakpoints. Ties go to the smallest `x`.
pub fn envelope_min(
    history: &UnivariateHistory,
    lipschitz_constant: f64,
) -> Result<EnvelopeMinimum> {
    envelope_min_from(&history.queries, &history.values, lipschitz_constant)
}

pub fn envelope_min_from(queries: &[f64], values: &[f64], l: f64) -> Result<EnvelopeMinimum> {
    check_lipschitz(l)?;
    envelope_min_sorted(&sorted_support(queries, values), l)
}

fn check_lipschitz(l: f64) -> Result<()> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::domain(format!(
            "Lipschitz constant must be positive and finite, got {l}"
        )));
    }
    Ok(())
}

/// Indices of a growing query table kept sorted by query, so that repeated
/// envelope minimizations avoid re-sorting the whole table.
#[derive(Debug, Clone, Default)]
pub(crate) struct QueryOrder {
    idx: Vec<usize>,
}

impl QueryOrder {
    /// Registers `queries[k]`, the newest entry of `queries`.
    pub(crate) fn insert(&mut self, queries: &[f64], k: usize) {
        let x = queries[k];
        let at = self.idx.partition_point(|&j| queries[j] <= x);
        self.idx.insert(at, k);
    }

    pub(crate) fn clear(&mut self) {
        self.idx.clear();
    }

    fn support(&self, queries: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.idx.len());
        for &j in &self.idx {
            let (x, h) = (queries[j], values[j]);
            match pts.last_mut() {
                Some(last) if last.0 == x => last.1 = last.1.max(h),
                _ => pts.push((x, h)),
            }
        }
        pts
    }
}

/// [`propose_from`] with a precomputed [`QueryOrder`] over `queries`.
pub(crate) fn propose_ordered(
    config: &OptimizerConfig,
    queries: &[f64],
    values: &[f64],
    order: &QueryOrder,
    t: usize,
) -> Result<f64> {
    if config.kind == OptimizerKind::PiyavskiiShubert
        && t >= 3
        && t == queries.len() + 1
        && t <= config.horizon
    {
        debug_assert_eq!(order.idx.len(), queries.len());
        check_lipschitz(config.lipschitz_constant)?;
        if values.len() != queries.len() {
            return Err(Error::contract(
                "history queries and values differ in length",
            ));
        }
        return Ok(envelope_min_sorted(
            &order.support(queries, values),
            config.lipschitz_constant,
        )?
        .x);
    }
    propose_from(config, queries, values, t)
}

fn envelope_min_sorted(pts: &[(f64, f64)], l: f64) -> Result<EnvelopeMinimum> {
    if pts.len() < 2 {
        return Err(Error::contract(
            "envelope needs at least two distinct queries",
        ));
    }
    let n = pts.len();

    // On [x_i, x_{i+1}] cones left of the interval decrease with slope -L and
    // cones right of it increase with slope +L, so F = max(A_i - Lx, B_{i+1} + Lx).
    let mut left = Vec::with_capacity(n);
    let mut acc = f64::NEG_INFINITY;
    for &(x, h) in pts {
        acc = acc.max(h + l * x);
        left.push(acc);
    }
    let mut right = vec![f64::NEG_INFINITY; n];
    let mut acc = f64::NEG_INFINITY;
    for (i, &(x, h)) in pts.iter().enumerate().rev() {
        acc = acc.max(h - l * x);
        right[i] = acc;
    }

    let mut best: Option<EnvelopeMinimum> = None;
    let mut consider = |x: f64, value: f64| {
        if best.is_none_or(|b| value < b.value) {
            best = Some(EnvelopeMinimum { x, value });
        }
    };

    if pts[0].0 > 0.0 {
        consider(0.0, right[0]);
    }
    for i in 0..n - 1 {
        let (lo, hi) = (pts[i].0, pts[i + 1].0);
        let (a, b) = (left[i], right[i + 1]);
        let x = ((a - b) / (2.0 * l)).clamp(lo, hi);
        consider(x, (a - l * x).max(b + l * x));
    }
    if pts[n - 1].0 < 1.0 {
        consider(1.0, left[n - 1] - l);
    }
    Ok(best.expect("at least one interval"))
}

/// `F(x) = max_k ( h(x_k) - L |x - x_k| )`; `-inf` on an empty history.
pub fn envelope_value(history: &UnivariateHistory, lipschitz_constant: f64, x: f64) -> f64 {
    history
        .queries
        .iter()
        .zip(&history.values)
        .map(|(&xk, &hk)| hk - lipschitz_constant * (x - xk).abs())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The envelope sampled at [`ENVELOPE_GRID_POINTS`] evenly spaced points.
pub fn envelope_samples(history: &UnivariateHistory, lipschitz_constant: f64) -> Vec<(f64, f64)> {
    let last = (ENVELOPE_GRID_POINTS - 1) as f64;
    (0..ENVELOPE_GRID_POINTS)
        .map(|k| {
            let x = k as f64 / last;
            (x, envelope_value(history, lipschitz_constant, x))
        })
        .collect()
}

/// CSV dump `x,F(x)` for plotting.
pub fn write_envelope_csv<W: Write>(
    history: &UnivariateHistory,
    lipschitz_constant: f64,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "F(x)"])?;
    for (x, fx) in envelope_samples(history, lipschitz_constant) {
        w.write_record([
            crate::types::format_sig17(x),
            crate::types::format_sig17(fx),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A full 1D run: true values and the values the optimizer observed.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateTrace {
    pub queries: Vec<f64>,
    pub values: Vec<f64>,
    pub observed: Vec<f64>,
}

/// Runs a univariate optimizer for `config.horizon` steps on a 1D objective.
/// `noise(t)` is added to the observation at step `t` (1-based).
pub fn run_univariate(
    config: &OptimizerConfig,
    objective: &ObjectiveSpec,
    noise: impl Fn(usize) -> f64,
) -> Result<UnivariateTrace> {
    if objective.dimension != 1 {
        return Err(Error::contract(format!(
            "univariate run on a {}-dimensional objective",
            objective.dimension
        )));
    }
    let mut history = UnivariateHistory::new();
    let mut values = Vec::with_capacity(config.horizon);
    for t in 1..=config.horizon {
        let x = propose(config, &history, t)?;
        let fx = objective.evaluate(&[x]);
        if !fx.is_finite() {
            return Err(Error::domain(format!("objective returned {fx} at x={x}")));
        }
        values.push(fx);
        history.push(x, fx + noise(t))?;
    }
    Ok(UnivariateTrace {
        queries: history.queries,
        values,
        observed: history.values,
    })
}

/// Deterministic adversarial noise sequences used to probe robustness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePattern {
    /// `eps` on every step.
    Constant,
    /// `eps` on odd steps, `0` on even steps.
    Alternating,
    /// `eps` on the first `ceil(T/2)` steps, `0` afterwards.
    FrontLoaded,
}

impl NoisePattern {
    pub const ALL: [NoisePattern; 3] = [
        NoisePattern::Constant,
        NoisePattern::Alternating,
        NoisePattern::FrontLoaded,
    ];

    pub fn noise(self, eps: f64, t: usize, horizon: usize) -> f64 {
        match self {
            NoisePattern::Constant => eps,
            NoisePattern::Alternating => {
                if t % 2 == 1 {
                    eps
                } else {
                    0.0
                }
            }
            NoisePattern::FrontLoaded => {
                if t <= horizon.div_ceil(2) {
                    eps
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessEstimate {
    pub horizon: usize,
    pub noise_bound: f64,
    pub profile: RobustnessProfile,
    /// Largest `(r(eps) - r(0)) / eps` before clamping at 0.
    pub raw_alpha: f64,
    /// Largest `(r~(eps) - r(0)) / eps` before clamping at 1.
    pub raw_beta: f64,
    /// Set when `eps = 0`, where the ratios are undefined.
    pub undefined: bool,
}

/// Estimates `alpha_T` and `beta_T` at each horizon by running the optimizer
/// under every [`NoisePattern`] with amplitude `config.noise_bound`.
pub fn measure_robustness(
    config: &OptimizerConfig,
    objective: &ObjectiveSpec,
    horizons: &[usize],
) -> Result<Vec<RobustnessEstimate>> {
    let f_star = objective
        .known_minimum
        .ok_or_else(|| Error::contract("robustness probe needs an objective with known minimum"))?;
    let eps = config.noise_bound;
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::domain(format!(
            "robustness probe needs a finite nonnegative noise bound, got {eps}"
        )));
    }
    horizons
        .iter()
        .map(|&horizon| {
            if horizon == 0 {
                return Err(Error::domain("horizon must be positive"));
            }
            let cfg = OptimizerConfig { horizon, ..*config };
            let clean = run_univariate(&cfg, objective, |_| 0.0)?;
            let base = average_regret(&clean.values, f_star)?.max(0.0);
            if eps == 0.0 {
                return Ok(RobustnessEstimate {
                    horizon,
                    noise_bound: eps,
                    profile: RobustnessProfile::new(0.0, 1.0, base)?,
                    raw_alpha: 0.0,
                    raw_beta: 1.0,
                    undefined: true,
                });
            }
            let mut raw_alpha = f64::NEG_INFINITY;
            let mut raw_beta = f64::NEG_INFINITY;
            for pattern in NoisePattern::ALL {
                let noisy = run_univariate(&cfg, objective, |t| pattern.noise(eps, t, horizon))?;
                let r = average_regret(&noisy.values, f_star)?;
                let r_tilde = pseudo_regret(&noisy.observed, f_star)?;
                raw_alpha = raw_alpha.max((r - base) / eps);
                raw_beta = raw_beta.max((r_tilde - base) / eps);
            }
            Ok(RobustnessEstimate {
                horizon,
                noise_bound: eps,
                profile: RobustnessProfile::new(raw_alpha.max(0.0), raw_beta.max(1.0), base)?,
                raw_alpha,
                raw_beta,
                undefined: false,
            })
        })
        .collect()
}

/// Worst case of [`measure_robustness`] over a family of 1D objectives: the
/// largest alpha, beta and base regret at each horizon.
pub fn worst_case_robustness(
    config: &OptimizerConfig,
    family: &[ObjectiveSpec],
    horizons: &[usize],
) -> Result<Vec<RobustnessEstimate>> {
    if family.is_empty() {
        return Err(Error::contract("empty objective family"));
    }
    let mut worst: Option<Vec<RobustnessEstimate>> = None;
    for objective in family {
        let est = measure_robustness(config, objective, horizons)?;
        worst = Some(match worst {
            None => est,
            Some(prev) => prev
                .into_iter()
                .zip(est)
                .map(|(a, b)| RobustnessEstimate {
                    horizon: a.horizon,
                    noise_bound: a.noise_bound,
                    profile: RobustnessProfile {
                        alpha: a.profile.alpha.max(b.profile.alpha),
                        beta: a.profile.beta.max(b.profile.beta),
                        base_regret: a.profile.base_regret.max(b.profile.base_regret),
                    },
                    raw_alpha: a.raw_alpha.max(b.raw_alpha),
                    raw_beta: a.raw_beta.max(b.raw_beta),
                    undefined: a.undefined || b.undefined,
                })
                .collect(),
        });
    }
    Ok(worst.expect("nonempty family"))
}
