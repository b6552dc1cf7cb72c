//! The dimension-recursive meta algorithm.
//!
//! Dimension 1 is the outermost loop. For every query of dimension `i` the
//! engine runs a fresh univariate optimizer over dimension `i + 1` for
//! `T_{i+1}` steps. The optimizer of dimension `i` observes `h^i`, the best
//! full evaluation seen while each of its queries was active. Those values
//! overestimate the true conditional minima, which is the nonnegative noise
//! the univariate optimizers must tolerate.
//!
//! Dimensions are 0-based in this module; counters stay 1-based.

use serde::{Deserialize, Serialize};

use crate::budgeting::{doubling_epochs, split_budget};
use crate::error::{Error, Result};
use crate::types::{BudgetSchedule, EvaluationLog, EvaluationRecord, MetaState, ObjectiveSpec};
use crate::univariate::{
    propose_from, propose_ordered, OptimizerConfig, OptimizerKind, QueryOrder,
};

/// `t = 1 + sum_i (tau_i - 1) * prod_{j > i} T_j`.
pub fn time_index(counters: &[usize], budgets: &[usize]) -> Result<usize> {
    if counters.len() != budgets.len() {
        return Err(Error::contract(format!(
            "{} counters for {} budgets",
            counters.len(),
            budgets.len()
        )));
    }
    let mut t = 0usize;
    for (i, (&tau, &cap)) in counters.iter().zip(budgets).enumerate() {
        if tau < 1 || tau > cap {
            return Err(Error::contract(format!(
                "counter tau_{} = {tau} outside 1..={cap}",
                i + 1
            )));
        }
        t = t * cap + (tau - 1);
    }
    Ok(t + 1)
}

/// Inverse of [`time_index`].
pub fn counters_at(t: usize, budgets: &[usize]) -> Result<Vec<usize>> {
    let total: usize = budgets.iter().product();
    if t < 1 || t > total {
        return Err(Error::contract(format!(
            "time index {t} outside 1..={total}"
        )));
    }
    let mut rest = t - 1;
    let mut counters = vec![0; budgets.len()];
    for (slot, &cap) in counters.iter_mut().zip(budgets).rev() {
        *slot = rest % cap + 1;
        rest /= cap;
    }
    Ok(counters)
}

/// Increments the innermost counter and carries. Returns the deepest
/// dimension whose counter is not 1 afterwards: dimensions below it were
/// reset and need fresh initial queries, it needs a new proposal.
pub fn advance(state: &mut MetaState, budgets: &[usize]) -> Result<usize> {
    let d = budgets.len();
    if state.counters.len() != d {
        return Err(Error::contract("state and budgets disagree on dimension"));
    }
    if state
        .counters
        .iter()
        .zip(budgets)
        .all(|(&tau, &cap)| tau == cap)
    {
        return Err(Error::contract(
            "cannot advance past the final configuration",
        ));
    }
    let counters = &mut state.counters;
    counters[d - 1] += 1;
    for i in (1..d).rev() {
        if counters[i] > budgets[i] {
            counters[i] = 1;
            counters[i - 1] += 1;
        }
    }
    debug_assert!(counters[0] <= budgets[0]);
    let depth = (0..d)
        .rev()
        .find(|&i| counters[i] != 1)
        .expect("a non-final advance leaves some counter above 1");
    Ok(depth)
}

/// Stepwise driver of one meta-algorithm run.
pub struct MetaEngine<'a> {
    objective: &'a ObjectiveSpec,
    budgets: Vec<usize>,
    configs: Vec<OptimizerConfig>,
    state: MetaState,
    /// Per-dimension sort order of `state.histories`, kept in step with it.
    orders: Vec<QueryOrder>,
    t: usize,
    total: usize,
}

impl<'a> MetaEngine<'a> {
    pub fn new(
        objective: &'a ObjectiveSpec,
        schedule: &BudgetSchedule,
        kind: OptimizerKind,
    ) -> Result<Self> {
        let d = schedule.dimension();
        if d != objective.dimension {
            return Err(Error::contract(format!(
                "schedule has {d} dimensions, objective has {}",
                objective.dimension
            )));
        }
        let l = objective.lipschitz_constant;
        if kind == OptimizerKind::PiyavskiiShubert && !(l > 0.0) {
            return Err(Error::domain(
                "the envelope optimizer needs a positive Lipschitz constant",
            ));
        }
        let configs = schedule
            .budgets()
            .iter()
            .zip(schedule.noise_bounds())
            .map(|(&horizon, &eps)| OptimizerConfig::new(kind, horizon, l).with_noise_bound(eps))
            .collect();
        Ok(Self {
            objective,
            budgets: schedule.budgets().to_vec(),
            configs,
            state: MetaState::new(d),
            orders: vec![QueryOrder::default(); d],
            t: 0,
            total: schedule.total(),
        })
    }

    pub fn state(&self) -> &MetaState {
        &self.state
    }

    pub fn configs(&self) -> &[OptimizerConfig] {
        &self.configs
    }

    /// Steps taken so far.
    pub fn steps_taken(&self) -> usize {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.t == self.total
    }

    fn push_query(&mut self, dim: usize, x: f64) {
        let h = &mut self.state.histories[dim];
        h.push(x);
        self.orders[dim].insert(h, h.len() - 1);
    }

    fn initial_query(&self, dim: usize) -> Result<f64> {
        propose_from(&self.configs[dim], &[], &[], 1)
    }

    /// Performs one evaluation; `None` once all `prod T_i` steps are done.
    pub fn step(&mut self) -> Result<Option<EvaluationRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let d = self.budgets.len();
        let depth = if self.t == 0 {
            for i in 0..d {
                let x = self.initial_query(i)?;
                self.push_query(i, x);
            }
            0
        } else {
            let depth = advance(&mut self.state, &self.budgets)?;
            for i in depth + 1..d {
                self.state.histories[i].clear();
                self.state.cond_min[i].clear();
                self.orders[i].clear();
                let x = self.initial_query(i)?;
                self.push_query(i, x);
            }
            let step = self.state.counters[depth];
            let x = propose_ordered(
                &self.configs[depth],
                &self.state.histories[depth],
                &self.state.cond_min[depth],
                &self.orders[depth],
                step,
            )?;
            self.push_query(depth, x);
            depth
        };

        self.t += 1;
        debug_assert_eq!(
            time_index(&self.state.counters, &self.budgets).ok(),
            Some(self.t)
        );
        let point = self.state.current_point();
        let value = self.objective.evaluate(&point);
        let record = EvaluationRecord {
            t: self.t,
            counters: self.state.counters.clone(),
            point,
            value,
        };
        if !value.is_finite() {
            return Err(Error::NonFinite {
                record: Box::new(record),
            });
        }

        // Fresh queries (dimension `depth` and everything below it) start
        // their table entry at f_t; enclosing dimensions keep a running min.
        for i in depth..d {
            self.state.cond_min[i].push(value);
        }
        for i in 0..depth {
            let slot = &mut self.state.cond_min[i][self.state.counters[i] - 1];
            *slot = slot.min(value);
        }
        Ok(Some(record))
    }

    /// Runs to completion, or until `limit` evaluations, and returns the log
    /// together with the final state.
    pub fn run_to_end(mut self, limit: Option<usize>) -> Result<(EvaluationLog, MetaState)> {
        let cap = limit.unwrap_or(self.total).min(self.total);
        let mut log = EvaluationLog::new();
        log.records.reserve(cap);
        while log.len() < cap {
            match self.step()? {
                Some(record) => log.records.push(record),
                None => break,
            }
        }
        Ok((log, self.state))
    }
}

/// A complete run: exactly `prod T_i` evaluations.
pub fn run(
    objective: &ObjectiveSpec,
    schedule: &BudgetSchedule,
    kind: OptimizerKind,
) -> Result<EvaluationLog> {
    Ok(MetaEngine::new(objective, schedule, kind)?
        .run_to_end(None)?
        .0)
}

/// One epoch of an unknown-horizon run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRun {
    pub epoch_len: u64,
    pub budgets: Vec<usize>,
    pub log: EvaluationLog,
}

/// Doubling-trick driver: each epoch restarts the meta algorithm with the
/// split of its own length and stops after exactly that many evaluations.
pub fn run_unknown_horizon(
    objective: &ObjectiveSpec,
    horizon: u64,
    kind: OptimizerKind,
) -> Result<Vec<EpochRun>> {
    let schedule = doubling_epochs(horizon)?;
    schedule
        .epochs
        .iter()
        .map(|&epoch_len| {
            let budgets = split_budget(epoch_len, objective.dimension)?;
            let sched = BudgetSchedule::new(budgets.clone())?;
            let limit = usize::try_from(epoch_len).map_err(|_| Error::domain("epoch too long"))?;
            let (log, _) = MetaEngine::new(objective, &sched, kind)?.run_to_end(Some(limit))?;
            Ok(EpochRun {
                epoch_len,
                budgets,
                log,
            })
        })
        .collect()
}

/// Summary of a run kept next to its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub budgets: Vec<usize>,
    pub evaluations: usize,
    pub best_value: f64,
    pub best_point: Vec<f64>,
}

impl RunSummary {
    pub fn from_log(budgets: &[usize], log: &EvaluationLog) -> Option<Self> {
        let best = log
            .records
            .iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))?;
        Some(Self {
            budgets: budgets.to_vec(),
            evaluations: log.len(),
            best_value: best.value,
            best_point: best.point.clone(),
        })
    }
}
