//! Orchestration shared by the CLI and the test suites: robustness probes on
//! catalog objectives, regret reports with bound comparisons, audits and
//! regret-vs-horizon trends.

use serde::{Deserialize, Serialize};

use crate::audit::{
    audit_block_decomposition, average_regret, cumulative_bound, floor_horizon, noise_gap,
    strong_bound, unknown_horizon_bound, weak_bound, AuditReport, BoundFactor, DecompositionTerms,
    NoiseGap, TrendReport, TrendRow,
};
use crate::budgeting::split_budget;
use crate::error::{Error, Result};
use crate::meta::{run, EpochRun};
use crate::oracle::{CatalogEntry, ConditionalOracle, GridOracle, OracleValue};
use crate::types::{BoundCheck, BudgetSchedule, EvaluationLog, RegretReport};
use crate::univariate::{
    worst_case_robustness, OptimizerConfig, OptimizerKind, RobustnessEstimate,
};

/// Noise amplitude used to probe robustness coefficients.
pub const DEFAULT_PROBE_NOISE: f64 = 0.05;

/// Horizons of the regret-vs-T trend table.
pub const TREND_HORIZONS: [u64; 4] = [4, 16, 64, 256];

/// Oracle used for conditional minima in audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// Closed form from the catalog entry.
    Analytic,
    /// Cell-center grid with this many points per free axis.
    Grid(usize),
}

pub fn build_oracle<'a>(
    entry: &'a CatalogEntry,
    choice: OracleChoice,
) -> Result<Box<dyn ConditionalOracle + 'a>> {
    match choice {
        OracleChoice::Analytic => entry
            .analytic_oracle()
            .map(|o| Box::new(o) as Box<dyn ConditionalOracle>)
            .ok_or_else(|| Error::Config(format!("`{}` has no closed-form oracle", entry.name))),
        OracleChoice::Grid(r) => Ok(Box::new(GridOracle::new(&entry.objective, r))),
    }
}

/// `f_*` from the entry when known, otherwise from the oracle.
pub fn f_star(entry: &CatalogEntry, oracle: &dyn ConditionalOracle) -> Result<OracleValue> {
    match entry.objective.known_minimum {
        Some(v) => Ok(OracleValue::exact(v)),
        None => oracle.global_minimum(),
    }
}

/// Worst-case robustness of the univariate optimizer over the entry's axis
/// profiles at horizon `t1`.
pub fn probe_robustness(
    entry: &CatalogEntry,
    kind: OptimizerKind,
    t1: usize,
    probe_noise: f64,
) -> Result<RobustnessEstimate> {
    if entry.axis_profiles.is_empty() {
        return Err(Error::Config(format!(
            "`{}` has no axis profiles to probe",
            entry.name
        )));
    }
    let cfg = OptimizerConfig::new(kind, t1, entry.objective.lipschitz_constant)
        .with_noise_bound(probe_noise);
    Ok(worst_case_robustness(&cfg, &entry.axis_profiles, &[t1])?
        .pop()
        .expect("one horizon requested"))
}

/// Strong and weak average-regret bounds for a schedule, with the measured
/// coefficients at `T_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretBounds {
    pub t1: usize,
    pub estimate: RobustnessEstimate,
    pub strong: f64,
    pub weak: f64,
}

pub fn regret_bounds(
    entry: &CatalogEntry,
    budgets: &[usize],
    kind: OptimizerKind,
    probe_noise: f64,
) -> Result<RegretBounds> {
    let d = budgets.len();
    let t1 = *budgets
        .first()
        .ok_or_else(|| Error::contract("empty budgets"))?;
    let estimate = probe_robustness(entry, kind, t1, probe_noise)?;
    let p = estimate.profile;
    Ok(RegretBounds {
        t1,
        estimate,
        strong: strong_bound(d, p.alpha, p.base_regret),
        weak: weak_bound(d, p.beta, p.base_regret),
    })
}

/// Report for one known-horizon run. `requested` is the total budget the
/// schedule was split from, when there was one.
pub fn known_horizon_report(
    entry: &CatalogEntry,
    budgets: &[usize],
    kind: OptimizerKind,
    log: &EvaluationLog,
    requested: Option<u64>,
    oracle: &dyn ConditionalOracle,
    probe_noise: f64,
) -> Result<RegretReport> {
    let star = f_star(entry, oracle)?;
    let values = log.values();
    let mut report = RegretReport::from_values(&values, &values, star.value)?;
    let d = budgets.len();
    if d >= 2 {
        report.noise_gap = Some(noise_gap(log, oracle, 1)?.value);
    }
    let bounds = regret_bounds(entry, budgets, kind, probe_noise)?;
    report.bound_checks.push(BoundCheck::new(
        "strong_bound",
        bounds.strong,
        report.average_regret,
    ));
    report.bound_checks.push(BoundCheck::new(
        "weak_bound",
        bounds.weak,
        report.average_regret,
    ));

    if let Some(t) = requested {
        let floor = floor_horizon(t, d);
        let est = probe_robustness(entry, kind, floor, probe_noise)?;
        let factor = BoundFactor::strong(d, floor, est.profile.alpha);
        let bound = cumulative_bound(t, d, &factor, est.profile.base_regret);
        let n = (t as usize).min(values.len());
        let measured: f64 = values[..n].iter().map(|v| v - star.value).sum();
        report
            .bound_checks
            .push(BoundCheck::new("cumulative_bound", bound, measured));
    }
    Ok(report)
}

/// Report for an unknown-horizon run over all its epochs.
pub fn unknown_horizon_report(
    entry: &CatalogEntry,
    horizon: u64,
    kind: OptimizerKind,
    epochs: &[EpochRun],
    oracle: &dyn ConditionalOracle,
    probe_noise: f64,
) -> Result<RegretReport> {
    let star = f_star(entry, oracle)?;
    let values: Vec<f64> = epochs.iter().flat_map(|e| e.log.values()).collect();
    let mut report = RegretReport::from_values(&values, &values, star.value)?;
    let d = entry.objective.dimension;
    let floor = floor_horizon(horizon, d);
    let est = probe_robustness(entry, kind, floor, probe_noise)?;
    let factor = BoundFactor::strong(d, floor, est.profile.alpha);
    report.bound_checks.push(BoundCheck::new(
        "unknown_horizon_bound",
        unknown_horizon_bound(horizon, d, &factor, est.profile.base_regret),
        report.average_regret,
    ));
    Ok(report)
}

/// Everything `audit` emits for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditBundle {
    pub objective: String,
    pub budgets: Vec<usize>,
    pub optimizer: OptimizerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<AuditReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition_terms: Option<DecompositionTerms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_gap: Option<NoiseGap>,
    pub bounds: Vec<AuditReport>,
    pub robustness: RobustnessEstimate,
    pub trend: TrendReport,
}

pub fn audit_run(
    entry: &CatalogEntry,
    budgets: &[usize],
    kind: OptimizerKind,
    log: &EvaluationLog,
    oracle: &dyn ConditionalOracle,
    probe_noise: f64,
) -> Result<AuditBundle> {
    let d = budgets.len();
    let star = f_star(entry, oracle)?;
    let (decomposition, decomposition_terms, gap) = if d >= 2 {
        let (report, terms) = audit_block_decomposition(log, star, oracle, 1)?;
        (Some(report), Some(terms), Some(noise_gap(log, oracle, 1)?))
    } else {
        (None, None, None)
    };
    let r = average_regret(&log.values(), star.value)?;
    let bounds = regret_bounds(entry, budgets, kind, probe_noise)?;
    let err = star.error_bound;
    let reports = vec![
        AuditReport::new("strong_bound", r, bounds.strong, err),
        AuditReport::new("weak_bound", r, bounds.weak, err),
    ];
    Ok(AuditBundle {
        objective: entry.name.clone(),
        budgets: budgets.to_vec(),
        optimizer: kind,
        decomposition,
        decomposition_terms,
        noise_gap: gap,
        bounds: reports,
        robustness: bounds.estimate,
        trend: regret_trend(entry, kind, &TREND_HORIZONS, oracle)?,
    })
}

/// Average regret of full runs at each total horizon, split per dimension.
pub fn regret_trend(
    entry: &CatalogEntry,
    kind: OptimizerKind,
    horizons: &[u64],
    oracle: &dyn ConditionalOracle,
) -> Result<TrendReport> {
    let star = f_star(entry, oracle)?;
    let rows = horizons
        .iter()
        .map(|&t| {
            let budgets = split_budget(t, entry.objective.dimension)?;
            let log = run(
                &entry.objective,
                &BudgetSchedule::new(budgets.clone())?,
                kind,
            )?;
            Ok(TrendRow {
                horizon: t,
                budgets,
                average_regret: average_regret(&log.values(), star.value)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrendReport::from_rows(rows))
}

/// Recovers per-dimension budgets of a complete log from its counters.
pub fn budgets_from_log(log: &EvaluationLog) -> Result<Vec<usize>> {
    let d = log
        .dimension()
        .ok_or_else(|| Error::Config("empty evaluation log".into()))?;
    let budgets: Vec<usize> = (0..d)
        .map(|i| log.records.iter().map(|r| r.counters[i]).max().unwrap_or(1))
        .collect();
    if budgets.iter().product::<usize>() != log.len() {
        return Err(Error::Config(format!(
            "log with {} records is not a complete run over budgets {budgets:?}",
            log.len()
        )));
    }
    Ok(budgets)
}
