//! Recursive composition of univariate global optimizers for minimizing
//! d-dimensional functions on the unit cube, plus the tooling to audit the
//! regret of the composed search against its theoretical bounds.
//!
//! The engine in [`meta`] treats dimension 1 as the outermost loop. Each
//! coordinate is driven by its own univariate optimizer (see [`univariate`]),
//! which only ever sees the best value found so far in the subtree below it.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod budgeting;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod meta;
pub mod oracle;
pub mod types;
pub mod univariate;

pub use budgeting::{doubling_epochs, split_budget, EpochSchedule};
pub use error::{Error, Result};
pub use meta::{run, run_unknown_horizon, MetaEngine};
pub use oracle::{catalog, lookup, CatalogEntry, ConditionalOracle, OracleValue};
pub use types::{
    BudgetSchedule, EvaluationLog, EvaluationRecord, MetaState, NormKind, ObjectiveSpec,
    RegretReport, RobustnessProfile,
};
pub use univariate::{OptimizerConfig, OptimizerKind};
