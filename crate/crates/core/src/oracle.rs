//! Test objectives with known minima and brute-force grid oracles.
//!
//! Grid oracles evaluate cell centers `(k + 1/2) / r` on every free axis.
//! Every point of the cube lies within half a cell of some center, so for an
//! `L`-regular objective the grid minimum `m` satisfies
//! `m - L * |half cell| <= f_* <= m`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{checked_grid_size, grid_digits, ObjectiveSpec};

/// Environment variable naming the oracle sidecar cache.
pub const ORACLE_CACHE_ENV: &str = "DIMCURSE_ORACLE_CACHE";

/// An oracle estimate with a one-sided guarantee:
/// `value - error_bound <= true minimum <= value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub error_bound: f64,
}

impl OracleValue {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            error_bound: 0.0,
        }
    }
}

/// Conditional minima `min_z f([prefix z])`.
pub trait ConditionalOracle {
    fn conditional_minimum(&self, prefix: &[f64]) -> Result<OracleValue>;

    fn global_minimum(&self) -> Result<OracleValue> {
        self.conditional_minimum(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMinimum {
    pub value: f64,
    pub error_bound: f64,
    pub argmin: Vec<f64>,
}

/// Minimum over the cell-center grid of `[0,1]^free` with `prefix` prepended.
fn grid_sweep(objective: &ObjectiveSpec, prefix: &[f64], resolution: usize) -> Result<GridMinimum> {
    let d = objective.dimension;
    if prefix.len() >= d {
        return Err(Error::contract(format!(
            "prefix of length {} leaves no free coordinate in dimension {d}",
            prefix.len()
        )));
    }
    if resolution == 0 {
        return Err(Error::domain("oracle resolution must be positive"));
    }
    let free = d - prefix.len();
    let n = checked_grid_size(resolution, free)?;
    let inv = 1.0 / resolution as f64;

    let point_at = |k: usize, digits: &mut Vec<usize>, point: &mut Vec<f64>| {
        grid_digits(k, resolution, free, digits);
        point.truncate(prefix.len());
        point.extend(digits.iter().map(|&i| (i as f64 + 0.5) * inv));
    };

    let (value, index) = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0; free], prefix.to_vec()),
            |(digits, point), k| {
                point_at(k, digits, point);
                (objective.evaluate(point), k)
            },
        )
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| match a.0.total_cmp(&b.0) {
                std::cmp::Ordering::Less => a,
                std::cmp::Ordering::Greater => b,
                std::cmp::Ordering::Equal => {
                    if a.1 <= b.1 {
                        a
                    } else {
                        b
                    }
                }
            },
        );
    let mut digits = vec![0; free];
    let mut argmin = prefix.to_vec();
    point_at(index, &mut digits, &mut argmin);
    let half_cell = objective.norm_kind.uniform_vector_norm(free, 0.5 * inv);
    Ok(GridMinimum {
        value,
        error_bound: objective.lipschitz_constant * half_cell,
        argmin,
    })
}

/// Brute-force minimum over the cell-center grid with `resolution` points per
/// axis, refusing grids above [`crate::types::GRID_POINT_LIMIT`].
pub fn grid_minimum(objective: &ObjectiveSpec, resolution: usize) -> Result<GridMinimum> {
    grid_sweep(objective, &[], resolution)
}

/// Grid minimum over the free coordinates with the leading `prefix`
/// coordinates held fixed.
pub fn conditional_minimum(
    objective: &ObjectiveSpec,
    prefix: &[f64],
    resolution: usize,
) -> Result<OracleValue> {
    let m = grid_sweep(objective, prefix, resolution)?;
    Ok(OracleValue {
        value: m.value,
        error_bound: m.error_bound,
    })
}

/// [`ConditionalOracle`] backed by grid sweeps.
#[derive(Debug, Clone)]
pub struct GridOracle<'a> {
    pub objective: &'a ObjectiveSpec,
    pub resolution: usize,
}

impl<'a> GridOracle<'a> {
    pub fn new(objective: &'a ObjectiveSpec, resolution: usize) -> Self {
        Self {
            objective,
            resolution,
        }
    }
}

impl ConditionalOracle for GridOracle<'_> {
    fn conditional_minimum(&self, prefix: &[f64]) -> Result<OracleValue> {
        conditional_minimum(self.objective, prefix, self.resolution)
    }
}

pub type ConditionalMinFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// [`ConditionalOracle`] from a closed form; error bound zero.
#[derive(Clone)]
pub struct AnalyticOracle {
    dimension: usize,
    min_fn: Arc<ConditionalMinFn>,
}

impl AnalyticOracle {
    pub fn new(dimension: usize, min_fn: Arc<ConditionalMinFn>) -> Self {
        Self { dimension, min_fn }
    }
}

impl fmt::Debug for AnalyticOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticOracle")
            .field("dimension", &self.dimension)
            .finish_non_exhaustive()
    }
}

impl ConditionalOracle for AnalyticOracle {
    fn conditional_minimum(&self, prefix: &[f64]) -> Result<OracleValue> {
        if prefix.len() >= self.dimension {
            return Err(Error::contract("prefix leaves no free coordinate"));
        }
        Ok(OracleValue::exact((self.min_fn)(prefix)))
    }
}

/// A catalog objective with its known structure.
#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub objective: ObjectiveSpec,
    pub analytic_minimum: Option<f64>,
    pub argmin: Option<Vec<f64>>,
    pub notes: String,
    conditional_min: Option<Arc<ConditionalMinFn>>,
    /// `g_i(x) = min f` over all coordinates except axis `i`, as 1D objectives.
    pub axis_profiles: Vec<ObjectiveSpec>,
}

impl CatalogEntry {
    /// Closed-form conditional minima, when the entry has them.
    pub fn analytic_oracle(&self) -> Option<AnalyticOracle> {
        self.conditional_min
            .as_ref()
            .map(|f| AnalyticOracle::new(self.objective.dimension, Arc::clone(f)))
    }
}

impl fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("objective", &self.objective)
            .field("analytic_minimum", &self.analytic_minimum)
            .field("argmin", &self.argmin)
            .field("notes", &self.notes)
            .finish_non_exhaustive()
    }
}

fn vee_spec(name: &str, c: f64, l: f64) -> ObjectiveSpec {
    ObjectiveSpec::new(name, 1, l, move |x: &[f64]| (x[0] - c).abs())
        .expect("valid vee")
        .with_known_minimum(0.0)
}

fn vee(c: f64) -> CatalogEntry {
    let objective = vee_spec("vee", c, 1.0);
    CatalogEntry {
        name: "vee".into(),
        analytic_minimum: Some(0.0),
        argmin: Some(vec![c]),
        notes: format!("|x - {c}|, L = 1"),
        conditional_min: Some(Arc::new(|_: &[f64]| 0.0)),
        axis_profiles: vec![objective.clone()],
        objective,
    }
}

/// `0.5 |x - 1/2| + (1 - cos 4 pi x) / 8`; `|f'| <= 1/2 + pi/2`.
pub fn ripple_value(x: f64) -> f64 {
    0.5 * (x - 0.5).abs() + 0.25 * (1.0 - (4.0 * PI * x).cos()) / 2.0
}

pub const RIPPLE_LIPSCHITZ: f64 = 0.5 + PI / 2.0;

fn ripple() -> CatalogEntry {
    let objective = ObjectiveSpec::new("ripple", 1, RIPPLE_LIPSCHITZ, |x: &[f64]| {
        ripple_value(x[0])
    })
    .expect("valid ripple")
    .with_known_minimum(0.0);
    CatalogEntry {
        name: "ripple".into(),
        analytic_minimum: Some(0.0),
        argmin: Some(vec![0.5]),
        notes: "0.5|x-0.5| + 0.25(1-cos 4 pi x)/2, L = 0.5 + pi/2; both terms vanish only at 0.5"
            .into(),
        conditional_min: Some(Arc::new(|_: &[f64]| 0.0)),
        axis_profiles: vec![objective.clone()],
        objective,
    }
}

fn pyramid(centers: Vec<f64>) -> CatalogEntry {
    let d = centers.len();
    let name = format!("pyramid_{d}");
    let c = centers.clone();
    let objective = ObjectiveSpec::new(name.clone(), d, 1.0, move |x: &[f64]| {
        x.iter()
            .zip(&c)
            .map(|(xi, ci)| (xi - ci).abs())
            .fold(0.0, f64::max)
    })
    .expect("valid pyramid")
    .with_known_minimum(0.0);
    let c = centers.clone();
    let conditional = move |prefix: &[f64]| {
        prefix
            .iter()
            .zip(&c)
            .map(|(xi, ci)| (xi - ci).abs())
            .fold(0.0, f64::max)
    };
    let axis_profiles = centers
        .iter()
        .map(|&ci| vee_spec(&format!("{name}/axis"), ci, 1.0))
        .collect();
    CatalogEntry {
        notes: format!("max_i |x_i - c_i| with c = {centers:?}, L = 1 in the sup-norm"),
        name,
        objective,
        analytic_minimum: Some(0.0),
        argmin: Some(centers),
        conditional_min: Some(Arc::new(conditional)),
        axis_profiles,
    }
}

fn cone(centers: Vec<f64>) -> CatalogEntry {
    let d = centers.len();
    let name = format!("cone_{d}");
    let l = d as f64;
    let c = centers.clone();
    let objective = ObjectiveSpec::new(name.clone(), d, l, move |x: &[f64]| {
        x.iter().zip(&c).map(|(xi, ci)| (xi - ci).abs()).sum()
    })
    .expect("valid cone")
    .with_known_minimum(0.0);
    let c = centers.clone();
    let conditional =
        move |prefix: &[f64]| prefix.iter().zip(&c).map(|(xi, ci)| (xi - ci).abs()).sum();
    let axis_profiles = centers
        .iter()
        .map(|&ci| vee_spec(&format!("{name}/axis"), ci, l))
        .collect();
    CatalogEntry {
        notes: format!("sum_i |x_i - c_i| with c = {centers:?}, L = {d} in the sup-norm"),
        name,
        objective,
        analytic_minimum: Some(0.0),
        argmin: Some(centers),
        conditional_min: Some(Arc::new(conditional)),
        axis_profiles,
    }
}

/// All built-in objectives.
pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        vee(0.5),
        ripple(),
        pyramid(vec![0.3, 0.7]),
        pyramid(vec![0.3, 0.7, 0.45]),
        cone(vec![0.25, 0.75]),
        cone(vec![0.25, 0.75, 0.4]),
    ]
}

pub fn lookup(name: &str) -> Result<CatalogEntry> {
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownObjective(name.to_string()))
}

/// JSON sidecar of grid-oracle results keyed by `name@resolution`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleCache {
    entries: BTreeMap<String, OracleValue>,
}

impl OracleCache {
    fn key(name: &str, resolution: usize) -> String {
        format!("{name}@{resolution}")
    }

    /// Loads the cache; a missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn get(&self, name: &str, resolution: usize) -> Option<OracleValue> {
        self.entries.get(&Self::key(name, resolution)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Grid minimum of `objective`, reusing a cached value when present.
    pub fn grid_minimum(
        &mut self,
        objective: &ObjectiveSpec,
        resolution: usize,
    ) -> Result<OracleValue> {
        let key = Self::key(&objective.name, resolution);
        if let Some(v) = self.entries.get(&key) {
            return Ok(*v);
        }
        let m = grid_minimum(objective, resolution)?;
        let v = OracleValue {
            value: m.value,
            error_bound: m.error_bound,
        };
        self.entries.insert(key, v);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vee_at_two_centers() {
        let e = lookup("vee").unwrap();
        let m = grid_minimum(&e.objective, 2).unwrap();
        assert_eq!(m.value, 0.25);
        assert_eq!(m.error_bound, 0.25);
        assert_eq!(m.argmin, vec![0.25]);
        assert!(m.value - m.error_bound <= 0.0 && 0.0 <= m.value);
    }

    #[test]
    fn constant_function_is_exact_at_any_resolution() {
        let f = ObjectiveSpec::new("const", 2, 1.0, |_: &[f64]| 3.5).unwrap();
        for r in [1, 2, 7, 64] {
            assert_eq!(grid_minimum(&f, r).unwrap().value, 3.5);
        }
    }

    #[test]
    fn cone_grid_minimum_at_64() {
        let e = lookup("cone_2").unwrap();
        let m = grid_minimum(&e.objective, 64).unwrap();
        // Nearest centers sit 1/128 off 0.25 and 0.75 on each axis.
        assert_eq!(m.value, 2.0 / 128.0);
        assert_eq!(m.error_bound, 2.0 / 128.0);
        // Ties resolve to the smallest grid index.
        assert_eq!(m.argmin, vec![15.5 / 64.0, 47.5 / 64.0]);
    }

    #[test]
    fn cone_conditional_minima() {
        let e = lookup("cone_2").unwrap();
        let a = e.analytic_oracle().unwrap();
        assert_eq!(a.conditional_minimum(&[0.0]).unwrap().value, 0.25);
        assert_eq!(a.conditional_minimum(&[1.0]).unwrap().value, 0.75);
        for (prefix, exact) in [(0.0, 0.25), (1.0, 0.75), (0.25, 0.0)] {
            let g = conditional_minimum(&e.objective, &[prefix], 4096).unwrap();
            assert!(
                g.value >= exact && g.value - g.error_bound <= exact + 1e-15,
                "{g:?}"
            );
        }
        assert!(conditional_minimum(&e.objective, &[0.1, 0.2], 8).is_err());
    }

    #[test]
    fn empty_prefix_is_grid_minimum() {
        for e in catalog() {
            let r = if e.objective.dimension == 3 { 16 } else { 128 };
            let g = grid_minimum(&e.objective, r).unwrap();
            let c = conditional_minimum(&e.objective, &[], r).unwrap();
            assert_eq!(
                (g.value, g.error_bound),
                (c.value, c.error_bound),
                "{}",
                e.name
            );
        }
    }

    #[test]
    fn grid_too_large_is_refused() {
        let e = lookup("cone_3").unwrap();
        assert!(matches!(
            grid_minimum(&e.objective, 512),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(lookup("nope"), Err(Error::UnknownObjective(_))));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oracle.json");
        let e = lookup("cone_2").unwrap();
        let mut cache = OracleCache::load(&path).unwrap();
        assert!(cache.is_empty());
        let v = cache.grid_minimum(&e.objective, 64).unwrap();
        cache.save(&path).unwrap();
        let again = OracleCache::load(&path).unwrap();
        assert_eq!(again.get("cone_2", 64), Some(v));
        assert_eq!(again.get("cone_2", 32), None);
    }
}
