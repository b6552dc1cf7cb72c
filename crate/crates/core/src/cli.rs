//! Command-line front end.
//!
//! Every subcommand resolves an [`ExperimentConfig`] from three layers:
//! built-in defaults, an optional TOML file (`--config`), and flags, with
//! flags winning. Outputs are plain CSV/JSON files under `--out`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::average_regret;
use crate::budgeting::{doubling_epochs, split_budget};
use crate::error::{Error, Result};
use crate::experiment::{
    audit_run, budgets_from_log, build_oracle, known_horizon_report, regret_bounds,
    unknown_horizon_report, OracleChoice, DEFAULT_PROBE_NOISE, TREND_HORIZONS,
};
use crate::meta::{run_unknown_horizon, MetaEngine, RunSummary};
use crate::oracle::{catalog, lookup, CatalogEntry, OracleCache, OracleValue, ORACLE_CACHE_ENV};
use crate::types::{BudgetSchedule, EvaluationLog};
use crate::univariate::{
    run_univariate, write_envelope_csv, OptimizerConfig, OptimizerKind, UnivariateHistory,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NON_FINITE: i32 = 3;

const DEFAULT_OBJECTIVE: &str = "cone_2";
const DEFAULT_BUDGET: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HorizonMode {
    #[default]
    Known,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Ps,
    Grid,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(a: OptimizerArg) -> Self {
        match a {
            OptimizerArg::Ps => OptimizerKind::PiyavskiiShubert,
            OptimizerArg::Grid => OptimizerKind::UniformGrid,
        }
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<usize>>,
    pub optimizer: OptimizerKind,
    pub horizon: HorizonMode,
    /// Per-dimension noise bounds handed to the univariate optimizers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_bounds: Option<Vec<f64>>,
    /// Grid oracle resolution per free axis; the closed form is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_resolution: Option<usize>,
    pub out: PathBuf,
    pub probe_noise: f64,
    pub t_list: Vec<u64>,
    /// Existing log to audit instead of a fresh run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            objective: DEFAULT_OBJECTIVE.into(),
            dims: None,
            budget: None,
            budgets: None,
            optimizer: OptimizerKind::default(),
            horizon: HorizonMode::default(),
            noise_bounds: None,
            oracle_resolution: None,
            out: PathBuf::from("out"),
            probe_noise: DEFAULT_PROBE_NOISE,
            t_list: TREND_HORIZONS.to_vec(),
            log: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Catalog entry named by the config, checked against `dims`.
    pub fn entry(&self) -> Result<CatalogEntry> {
        let entry = lookup(&self.objective)?;
        if let Some(d) = self.dims {
            if d != entry.objective.dimension {
                return Err(Error::Config(format!(
                    "`{}` is {}-dimensional, not {d}",
                    entry.name, entry.objective.dimension
                )));
            }
        }
        Ok(entry)
    }

    /// Total horizon: explicit, or the product of explicit budgets.
    pub fn total_budget(&self) -> u64 {
        match (&self.budget, &self.budgets) {
            (Some(t), _) => *t,
            (None, Some(b)) => b.iter().map(|&x| x as u64).product(),
            (None, None) => DEFAULT_BUDGET,
        }
    }

    /// Per-dimension budgets for a known-horizon run.
    pub fn resolve_budgets(&self, d: usize) -> Result<Vec<usize>> {
        let budgets = match &self.budgets {
            Some(b) => {
                if b.len() != d {
                    return Err(Error::Config(format!(
                        "{} budgets given for dimension {d}",
                        b.len()
                    )));
                }
                b.clone()
            }
            None => split_budget(self.total_budget(), d).map_err(as_config)?,
        };
        self.schedule(budgets.clone())?;
        Ok(budgets)
    }

    pub fn schedule(&self, budgets: Vec<usize>) -> Result<BudgetSchedule> {
        match &self.noise_bounds {
            Some(eps) => BudgetSchedule::with_noise_bounds(budgets, eps.clone()),
            None => BudgetSchedule::new(budgets),
        }
        .map_err(as_config)
    }

    pub fn oracle_choice(&self, entry: &CatalogEntry) -> OracleChoice {
        match self.oracle_resolution {
            Some(r) => OracleChoice::Grid(r),
            None if entry.analytic_oracle().is_some() => OracleChoice::Analytic,
            None => OracleChoice::Grid(1024),
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) | Error::Contract(m) => Error::Config(m),
        other => other,
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownObjective(_) | Error::Config(_) => EXIT_INVALID,
        Error::NonFinite { .. } => EXIT_NON_FINITE,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dimcurse",
    version,
    about = "Recursive univariate optimization on the unit cube"
)]
pub struct Cli {
    /// Print the objective catalog and exit.
    #[arg(long, global = true)]
    list_objectives: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the meta algorithm and write the log and regret report.
    Run(ConfigArgs),
    /// Audit a run (fresh or from --log) against the regret decomposition and bounds.
    Audit(ConfigArgs),
    /// Run a list of horizons and write a merged CSV.
    Sweep(ConfigArgs),
    /// Dump the lower envelope after a one-dimensional run.
    Envelope(ConfigArgs),
    /// Print the objective catalog.
    ListObjectives,
}

#[derive(Debug, Default, Args)]
struct ConfigArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    dims: Option<usize>,
    /// Total budget T, split across dimensions.
    #[arg(long)]
    budget: Option<u64>,
    /// Explicit per-dimension budgets.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long, value_enum)]
    horizon: Option<HorizonMode>,
    /// Comma-separated per-dimension noise bounds; `inf` allowed.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    noise_bounds: Option<Vec<f64>>,
    #[arg(long)]
    oracle_resolution: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise amplitude used to measure robustness coefficients.
    #[arg(long)]
    probe_noise: Option<f64>,
    /// Horizons for `sweep`.
    #[arg(long, value_delimiter = ',')]
    t_list: Option<Vec<u64>>,
    /// Evaluation log (CSV or JSON) for `audit`.
    #[arg(long)]
    log: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.objective {
            c.objective = v;
        }
        if self.dims.is_some() {
            c.dims = self.dims;
        }
        // An explicit budget on the command line supersedes budgets from the
        // file and vice versa.
        if self.budget.is_some() {
            c.budget = self.budget;
            c.budgets = None;
        }
        if self.budgets.is_some() {
            c.budgets = self.budgets;
            c.budget = None;
        }
        if let Some(v) = self.optimizer {
            c.optimizer = v.into();
        }
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if self.noise_bounds.is_some() {
            c.noise_bounds = self.noise_bounds;
        }
        if self.oracle_resolution.is_some() {
            c.oracle_resolution = self.oracle_resolution;
        }
        if let Some(v) = self.out {
            c.out = v;
        }
        if let Some(v) = self.probe_noise {
            c.probe_noise = v;
        }
        if let Some(v) = self.t_list {
            c.t_list = v;
        }
        if self.log.is_some() {
            c.log = self.log;
        }
        Ok(c)
    }
}

/// Parses `std::env::args`, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("dimcurse: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if cli.list_objectives {
        return cmd_list_objectives();
    }
    match cli.command {
        None | Some(Command::ListObjectives) => cmd_list_objectives(),
        Some(Command::Run(a)) => cmd_run(&a.resolve()?),
        Some(Command::Audit(a)) => cmd_audit(&a.resolve()?),
        Some(Command::Sweep(a)) => cmd_sweep(&a.resolve()?),
        Some(Command::Envelope(a)) => cmd_envelope(&a.resolve()?),
    }
}

fn cmd_list_objectives() -> Result<()> {
    for e in catalog() {
        println!(
            "{:<10} d={} L={} f*={}  {}",
            e.name,
            e.objective.dimension,
            e.objective.lipschitz_constant,
            e.analytic_minimum
                .map_or("?".to_string(), |v| v.to_string()),
            e.notes
        );
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_log(dir: &Path, stem: &str, log: &EvaluationLog, d: usize) -> Result<()> {
    log.write_csv(
        d,
        BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?),
    )?;
    fs::write(dir.join(format!("{stem}.json")), log.to_json_string()?)?;
    Ok(())
}

/// Grid minimum through the sidecar cache named by the environment, if any.
fn cached_grid_minimum(entry: &CatalogEntry, resolution: usize) -> Result<OracleValue> {
    match std::env::var_os(ORACLE_CACHE_ENV) {
        Some(path) => {
            let path = PathBuf::from(path);
            let mut cache = OracleCache::load(&path)?;
            let v = cache.grid_minimum(&entry.objective, resolution)?;
            cache.save(&path)?;
            Ok(v)
        }
        None => {
            let m = crate::oracle::grid_minimum(&entry.objective, resolution)?;
            Ok(OracleValue {
                value: m.value,
                error_bound: m.error_bound,
            })
        }
    }
}

pub fn cmd_run(config: &ExperimentConfig) -> Result<()> {
    let entry = config.entry()?;
    let d = entry.objective.dimension;
    fs::create_dir_all(&config.out)?;
    let choice = config.oracle_choice(&entry);
    let oracle = build_oracle(&entry, choice)?;
    if let Some(r) = config.oracle_resolution {
        write_json(
            &config.out.join("oracle.json"),
            &cached_grid_minimum(&entry, r)?,
        )?;
    }

    match config.horizon {
        HorizonMode::Known => {
            let budgets = config.resolve_budgets(d)?;
            println!("budgets {budgets:?}");
            let schedule = config.schedule(budgets.clone())?;
            let (log, _) =
                MetaEngine::new(&entry.objective, &schedule, config.optimizer)?.run_to_end(None)?;
            write_log(&config.out, "log", &log, d)?;
            let requested = if config.budgets.is_none() {
                Some(config.total_budget())
            } else {
                None
            };
            let report = known_horizon_report(
                &entry,
                &budgets,
                config.optimizer,
                &log,
                requested,
                oracle.as_ref(),
                config.probe_noise,
            )?;
            write_json(&config.out.join("report.json"), &report)?;
            if let Some(summary) = RunSummary::from_log(&budgets, &log) {
                write_json(&config.out.join("summary.json"), &summary)?;
            }
            println!(
                "{} evaluations, average regret {}",
                log.len(),
                report.average_regret
            );
        }
        HorizonMode::Unknown => {
            if config.noise_bounds.is_some() {
                return Err(Error::Config(
                    "--noise-bounds applies to known-horizon runs only".into(),
                ));
            }
            let t = config.total_budget();
            let schedule = doubling_epochs(t).map_err(as_config)?;
            println!("epochs {:?}", schedule.epochs);
            let epochs = run_unknown_horizon(&entry.objective, t, config.optimizer)?;
            let mut combined = EvaluationLog::new();
            for (k, e) in epochs.iter().enumerate() {
                write_log(&config.out, &format!("epoch_{}", k + 1), &e.log, d)?;
                combined.records.extend(e.log.records.iter().cloned());
            }
            let report = unknown_horizon_report(
                &entry,
                t,
                config.optimizer,
                &epochs,
                oracle.as_ref(),
                config.probe_noise,
            )?;
            write_json(&config.out.join("report.json"), &report)?;
            let budgets: Vec<&Vec<usize>> = epochs.iter().map(|e| &e.budgets).collect();
            write_json(&config.out.join("epochs.json"), &budgets)?;
            println!(
                "{} evaluations, average regret {}",
                combined.len(),
                report.average_regret
            );
        }
    }
    Ok(())
}

fn read_log(path: &Path) -> Result<EvaluationLog> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        EvaluationLog::from_json_str(&fs::read_to_string(path)?)
    } else {
        EvaluationLog::read_csv(File::open(path)?)
    }
}

pub fn cmd_audit(config: &ExperimentConfig) -> Result<()> {
    let entry = config.entry()?;
    let d = entry.objective.dimension;
    let (budgets, log) = match &config.log {
        Some(path) => {
            let log = read_log(path)?;
            if log.dimension() != Some(d) {
                return Err(Error::Config(format!(
                    "log dimension does not match `{}`",
                    entry.name
                )));
            }
            (budgets_from_log(&log)?, log)
        }
        None => {
            let budgets = config.resolve_budgets(d)?;
            let schedule = config.schedule(budgets.clone())?;
            let (log, _) =
                MetaEngine::new(&entry.objective, &schedule, config.optimizer)?.run_to_end(None)?;
            (budgets, log)
        }
    };
    let oracle = build_oracle(&entry, config.oracle_choice(&entry))?;
    let bundle = audit_run(
        &entry,
        &budgets,
        config.optimizer,
        &log,
        oracle.as_ref(),
        config.probe_noise,
    )?;
    fs::create_dir_all(&config.out)?;
    write_json(&config.out.join("audit.json"), &bundle)?;
    if let Some(l1) = &bundle.decomposition {
        println!(
            "decomposition lhs={} rhs={} verdict={:?}",
            l1.lhs, l1.rhs, l1.verdict
        );
    }
    for b in &bundle.bounds {
        println!(
            "{} lhs={} rhs={} verdict={:?}",
            b.bound_name, b.lhs, b.rhs, b.verdict
        );
    }
    Ok(())
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub horizon: u64,
    pub r: f64,
    pub r_tilde: f64,
    #[serde(rename = "R")]
    pub cumulative: f64,
    pub bound_strong: f64,
    pub bound_weak: f64,
}

pub fn sweep_rows(
    config: &ExperimentConfig,
) -> Result<Vec<(SweepRow, crate::types::RegretReport)>> {
    if config.t_list.is_empty() {
        return Err(Error::Config("empty horizon list".into()));
    }
    let entry = config.entry()?;
    let d = entry.objective.dimension;
    let choice = config.oracle_choice(&entry);
    let mut list = config.t_list.clone();
    list.sort_unstable();
    list.dedup();
    list.par_iter()
        .map(|&t| {
            let budgets = split_budget(t, d).map_err(as_config)?;
            let schedule = BudgetSchedule::new(budgets.clone())?;
            let log = crate::meta::run(&entry.objective, &schedule, config.optimizer)?;
            let oracle = build_oracle(&entry, choice)?;
            let report = known_horizon_report(
                &entry,
                &budgets,
                config.optimizer,
                &log,
                Some(t),
                oracle.as_ref(),
                config.probe_noise,
            )?;
            let bounds = regret_bounds(&entry, &budgets, config.optimizer, config.probe_noise)?;
            let row = SweepRow {
                horizon: t,
                r: report.average_regret,
                r_tilde: report.average_pseudo_regret,
                cumulative: report.cumulative_regret,
                bound_strong: bounds.strong,
                bound_weak: bounds.weak,
            };
            Ok((row, report))
        })
        .collect()
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let rows = sweep_rows(config)?;
    let reports_dir = config.out.join("reports");
    fs::create_dir_all(&reports_dir)?;
    let mut w = csv::Writer::from_path(config.out.join("sweep.csv"))?;
    for (row, report) in &rows {
        w.serialize(row)?;
        write_json(
            &reports_dir.join(format!("report_T{}.json", row.horizon)),
            report,
        )?;
        println!(
            "T={} r={} bound_strong={}",
            row.horizon, row.r, row.bound_strong
        );
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_envelope(config: &ExperimentConfig) -> Result<()> {
    let entry = config.entry()?;
    if entry.objective.dimension != 1 {
        return Err(Error::Config(
            "envelope dumps need a one-dimensional objective".into(),
        ));
    }
    let t = usize::try_from(config.total_budget())
        .map_err(|_| Error::Config("budget too large".into()))?;
    let l = entry.objective.lipschitz_constant;
    let cfg = OptimizerConfig::new(OptimizerKind::PiyavskiiShubert, t, l);
    let trace = run_univariate(&cfg, &entry.objective, |_| 0.0)?;
    let pairs: Vec<(f64, f64)> = trace
        .queries
        .iter()
        .copied()
        .zip(trace.observed.iter().copied())
        .collect();
    let history = UnivariateHistory::from_pairs(&pairs)?;
    fs::create_dir_all(&config.out)?;
    write_envelope_csv(
        &history,
        l,
        BufWriter::new(File::create(config.out.join("envelope.csv"))?),
    )?;
    let star = entry.objective.known_minimum.unwrap_or(f64::NAN);
    println!(
        "{t} queries, average regret {}",
        average_regret(&trace.values, star)?
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_is_idempotent() {
        let text = r#"
objective = "pyramid_2"
budgets = [4, 5]
optimizer = "uniform_grid"
noise_bounds = [inf, 0.0]
out = "results"
"#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.budgets, Some(vec![4, 5]));
        assert!(c.noise_bounds.as_ref().unwrap()[0].is_infinite());
        let once = c.to_toml_string().unwrap();
        let again = ExperimentConfig::from_toml_str(&once)
            .unwrap()
            .to_toml_string()
            .unwrap();
        assert_eq!(once, again);
        assert_eq!(ExperimentConfig::from_toml_str(&once).unwrap(), c);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ExperimentConfig::from_toml_str("objective = \"vee\"\nbudgit = 3\n").unwrap_err();
        assert_eq!(exit_code(&err), EXIT_INVALID);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(
            &path,
            "objective = \"cone_3\"\nbudgets = [2, 2, 2]\nprobe_noise = 0.1\n",
        )
        .unwrap();
        let args = ConfigArgs {
            config: Some(path),
            objective: Some("cone_2".into()),
            budget: Some(30),
            ..ConfigArgs::default()
        };
        let c = args.resolve().unwrap();
        assert_eq!(c.objective, "cone_2");
        assert_eq!(c.budget, Some(30));
        assert_eq!(c.budgets, None);
        assert_eq!(c.probe_noise, 0.1);
        assert_eq!(c.resolve_budgets(2).unwrap(), vec![5, 6]);
    }

    #[test]
    fn budget_errors_are_invalid_input() {
        let c = ExperimentConfig {
            budget: Some(0),
            ..ExperimentConfig::default()
        };
        assert_eq!(exit_code(&c.resolve_budgets(2).unwrap_err()), EXIT_INVALID);
        let c = ExperimentConfig {
            budgets: Some(vec![3, 2]),
            ..ExperimentConfig::default()
        };
        assert_eq!(exit_code(&c.resolve_budgets(2).unwrap_err()), EXIT_INVALID);
    }
}
