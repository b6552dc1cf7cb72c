//! Regret quantities, the closed-form regret bounds, and empirical audits of
//! the block decomposition behind them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::budgeting::floor_root;
use crate::error::{Error, Result};
use crate::oracle::{ConditionalOracle, OracleValue};
use crate::types::EvaluationLog;

/// Absolute slack for inequality audits.
pub const AUDIT_SLACK: f64 = 1e-9;

/// An audit is inconclusive once the oracle error exceeds this fraction of
/// the right-hand side.
pub const INCONCLUSIVE_RATIO: f64 = 1e-3;

fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::contract("regret of an empty value list"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// `(1/T) sum f(x_t) - f_*`.
pub fn average_regret(values: &[f64], f_star: f64) -> Result<f64> {
    Ok(mean(values)? - f_star)
}

/// Average regret measured on the noisy observations.
pub fn pseudo_regret(noisy_values: &[f64], f_star: f64) -> Result<f64> {
    Ok(mean(noisy_values)? - f_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessKind {
    Strong,
    Weak,
}

/// The dimension factor `F(d, T_1)` multiplying the 1D regret.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFactor {
    pub kind: RobustnessKind,
    pub d: usize,
    pub t1: usize,
    /// `alpha_{T_1}` for strong, `beta_{T_1}` for weak.
    pub coefficient: f64,
}

impl BoundFactor {
    pub fn strong(d: usize, t1: usize, alpha: f64) -> Self {
        Self {
            kind: RobustnessKind::Strong,
            d,
            t1,
            coefficient: alpha,
        }
    }

    pub fn weak(d: usize, t1: usize, beta: f64) -> Self {
        Self {
            kind: RobustnessKind::Weak,
            d,
            t1,
            coefficient: beta,
        }
    }

    /// `d (1 + alpha)^(d-1)` or `(d + 1) d beta^(d-1) / 2`.
    pub fn value(&self) -> f64 {
        let d = self.d as f64;
        let exp = self.d.saturating_sub(1) as i32;
        match self.kind {
            RobustnessKind::Strong => d * (1.0 + self.coefficient).powi(exp),
            RobustnessKind::Weak => 0.5 * (d + 1.0) * d * self.coefficient.powi(exp),
        }
    }
}

pub fn strong_bound(d: usize, alpha_t1: f64, r1_t1: f64) -> f64 {
    BoundFactor::strong(d, 0, alpha_t1).value() * r1_t1
}

pub fn weak_bound(d: usize, beta_t1: f64, r1_t1: f64) -> f64 {
    BoundFactor::weak(d, 0, beta_t1).value() * r1_t1
}

/// Cumulative regret bound `2 T F(d, floor(T^(1/d))) r1`. The factor and
/// `r1` should be measured at `floor(T^(1/d))`.
pub fn cumulative_bound(t: u64, d: usize, factor: &BoundFactor, r1_at_floor: f64) -> f64 {
    debug_assert_eq!(factor.d, d, "factor built for another dimension");
    2.0 * t as f64 * factor.value() * r1_at_floor
}

/// Average regret bound under the doubling trick,
/// `2 log2(2T) F(d, floor(T^(1/d))) r1`.
pub fn unknown_horizon_bound(t: u64, d: usize, factor: &BoundFactor, r1_at_floor: f64) -> f64 {
    debug_assert_eq!(factor.d, d, "factor built for another dimension");
    2.0 * (2.0 * t as f64).log2() * factor.value() * r1_at_floor
}

/// `floor(T^(1/d))`, the horizon at which the 1D quantities in the
/// arbitrary-horizon bounds are measured.
pub fn floor_horizon(t: u64, d: usize) -> usize {
    floor_root(t, d as u32) as usize
}

/// Records sharing the outer `split` counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub prefix: Vec<f64>,
    pub values: Vec<f64>,
}

impl Block {
    pub fn best(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Splits a log into consecutive blocks over the first `split` dimensions.
pub fn blocks(log: &EvaluationLog, split: usize) -> Result<Vec<Block>> {
    let d = log
        .dimension()
        .ok_or_else(|| Error::contract("empty evaluation log"))?;
    if split == 0 || split >= d {
        return Err(Error::contract(format!(
            "split {split} must separate a {d}-dimensional log into outer and inner parts"
        )));
    }
    let mut out: Vec<(Vec<usize>, Block)> = Vec::new();
    for r in &log.records {
        let key = &r.counters[..split];
        match out.last_mut() {
            Some((k, b)) if k.as_slice() == key => b.values.push(r.value),
            _ => out.push((
                key.to_vec(),
                Block {
                    prefix: r.point[..split].to_vec(),
                    values: vec![r.value],
                },
            )),
        }
    }
    Ok(out.into_iter().map(|(_, b)| b).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseGap {
    /// `max_n (best value in block n - min over the block's free coordinates)`.
    pub value: f64,
    pub oracle_error: f64,
}

/// Worst shortfall over outer blocks between the best inner evaluation and
/// the true conditional minimum.
pub fn noise_gap(
    log: &EvaluationLog,
    oracle: &dyn ConditionalOracle,
    split: usize,
) -> Result<NoiseGap> {
    if log.dimension().is_some_and(|d| d < 2) {
        return Err(Error::contract(
            "noise gap is undefined for one-dimensional runs",
        ));
    }
    let mut value = f64::NEG_INFINITY;
    let mut oracle_error: f64 = 0.0;
    for b in blocks(log, split)? {
        let c = oracle.conditional_minimum(&b.prefix)?;
        value = value.max(b.best() - c.value);
        oracle_error = oracle_error.max(c.error_bound);
    }
    Ok(NoiseGap {
        value,
        oracle_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One audited inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub bound_name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub margin: f64,
    pub oracle_error: f64,
    pub verdict: Verdict,
}

impl AuditReport {
    pub fn new(bound_name: impl Into<String>, lhs: f64, rhs: f64, oracle_error: f64) -> Self {
        let holds = lhs <= rhs + AUDIT_SLACK;
        let verdict = if oracle_error > INCONCLUSIVE_RATIO * rhs.abs() {
            Verdict::Inconclusive
        } else if holds {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        Self {
            bound_name: bound_name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            oracle_error,
            verdict,
        }
    }

    /// Whether `lhs <= rhs + AUDIT_SLACK` numerically, whatever the verdict.
    pub fn inequality_holds(&self) -> bool {
        self.lhs <= self.rhs + AUDIT_SLACK
    }
}

/// Both sides of the block decomposition of the average regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerms {
    /// Average regret of the whole run.
    pub lhs: f64,
    /// `max_n (block mean - conditional minimum)`.
    pub inner_term: f64,
    /// `mean_n (conditional minimum) - f_*`.
    pub outer_term: f64,
    pub blocks: usize,
}

/// Checks `r <= max_n (mean_n - c_n) + (mean_n c_n - f_*)` on a complete run,
/// with `c_n` the conditional minimum over the inner coordinates of block `n`.
pub fn audit_block_decomposition(
    log: &EvaluationLog,
    f_star: OracleValue,
    oracle: &dyn ConditionalOracle,
    split: usize,
) -> Result<(AuditReport, DecompositionTerms)> {
    let blocks = blocks(log, split)?;
    let size = blocks[0].values.len();
    if blocks.iter().any(|b| b.values.len() != size) {
        return Err(Error::contract(
            "decomposition audit needs equally sized (complete) blocks",
        ));
    }
    let lhs = average_regret(&log.values(), f_star.value)?;
    let mut inner_term = f64::NEG_INFINITY;
    let mut cond_sum = 0.0;
    let mut oracle_error = f_star.error_bound;
    for b in &blocks {
        let c = oracle.conditional_minimum(&b.prefix)?;
        inner_term = inner_term.max(b.mean() - c.value);
        cond_sum += c.value;
        oracle_error = oracle_error.max(c.error_bound + f_star.error_bound);
    }
    let outer_term = cond_sum / blocks.len() as f64 - f_star.value;
    let report = AuditReport::new(
        "block_decomposition",
        lhs,
        inner_term + outer_term,
        oracle_error,
    );
    Ok((
        report,
        DecompositionTerms {
            lhs,
            inner_term,
            outer_term,
            blocks: blocks.len(),
        },
    ))
}

/// Measured average regret at a sequence of horizons, with a flag telling
/// whether it happened to be nonincreasing. Reported, never asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub horizon: u64,
    pub budgets: Vec<usize>,
    pub average_regret: f64,
}

impl TrendReport {
    pub fn from_rows(rows: Vec<TrendRow>) -> Self {
        let nonincreasing = rows
            .windows(2)
            .all(|w| w[1].average_regret <= w[0].average_regret);
        Self {
            rows,
            nonincreasing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_examples() {
        assert_eq!(average_regret(&[0.3], 0.3).unwrap(), 0.0);
        assert_eq!(average_regret(&[1.0, 0.5, 1.5, 1.0], 0.0).unwrap(), 1.0);
        assert_eq!(average_regret(&[2.0; 5], 0.5).unwrap(), 1.5);
        assert!(average_regret(&[], 0.0).is_err());
        assert!(pseudo_regret(&[], 0.0).is_err());
        assert_eq!(pseudo_regret(&[1.0, 0.5], 0.0).unwrap(), 0.75);
        assert!((pseudo_regret(&[1.1, 0.5], 0.0).unwrap() - 0.8).abs() < 1e-15);
        let r = average_regret(&[0.2, 0.4], 0.0).unwrap();
        let rt = pseudo_regret(&[0.2 + 0.25, 0.4 + 0.25], 0.0).unwrap();
        assert!((rt - (r + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(strong_bound(1, 7.0, 0.25), 0.25);
        assert!((strong_bound(2, 0.5, 0.1) - 0.3).abs() < 1e-15);
        assert_eq!(strong_bound(3, 0.0, 0.2), 3.0 * 0.2);
        assert_eq!(weak_bound(1, 5.0, 0.25), 0.25);
        assert!((weak_bound(2, 1.0, 0.1) - 0.3).abs() < 1e-15);
        assert!((weak_bound(2, 2.0, 0.1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn horizon_bound_examples() {
        let f = BoundFactor::strong(1, 0, 0.0);
        assert_eq!(cumulative_bound(9, 1, &f, 0.5), 9.0);
        let f2 = BoundFactor::strong(2, 5, 0.5);
        assert!((cumulative_bound(30, 2, &f2, 0.1) - 18.0).abs() < 1e-12);
        assert_eq!(cumulative_bound(30, 2, &f2, 0.0), 0.0);
        assert_eq!(
            unknown_horizon_bound(1, 2, &f2, 0.1),
            2.0 * f2.value() * 0.1
        );
        assert_eq!(unknown_horizon_bound(8, 1, &f, 0.5), 8.0 * 0.5);
        assert_eq!(unknown_horizon_bound(8, 1, &f, 0.0), 0.0);
        assert_eq!(floor_horizon(30, 2), 5);
    }

    #[test]
    fn verdicts() {
        assert_eq!(AuditReport::new("x", 1.0, 1.0, 0.0).verdict, Verdict::Holds);
        assert_eq!(
            AuditReport::new("x", 1.1, 1.0, 0.0).verdict,
            Verdict::Violated
        );
        let r = AuditReport::new("x", 0.5, 1.0, 0.01);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.inequality_holds());
        let json = serde_json::to_value(&r).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(
            keys,
            [
                "bound_name",
                "lhs",
                "margin",
                "oracle_error",
                "rhs",
                "verdict"
            ]
        );
        assert_eq!(json["verdict"], "inconclusive");
    }
}
