//! Run configuration.  Every table rejects unknown keys.

use std::collections::BTreeSet;

use fdcurve::analyzer::Region;
use fdcurve::inequalities::InequalityGrid;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub map: Option<MapConfig>,
    #[serde(default)]
    pub form: Option<FormConfig>,
    #[serde(default, rename = "task")]
    pub tasks: Vec<TaskConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub id: String,
    /// affine: rows of A.
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    /// lusin_*: construction parameters.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub depth: Option<usize>,
}

/// Either a named bounded form or constant terms; the standard form of the
/// map's dimensions when the table is absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormConfig {
    #[serde(default)]
    pub named: Option<String>,
    #[serde(default)]
    pub ambient_dim: Option<usize>,
    #[serde(default)]
    pub terms: Option<Vec<FormTerm>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormTerm {
    /// 1-based, strictly increasing.
    pub index: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum RegionConfig {
    Ball { center: Vec<f64>, radius: f64 },
    Rectangle { lo: Vec<f64>, hi: Vec<f64> },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
}

impl RegionConfig {
    pub fn to_region(&self) -> Region {
        match self.clone() {
            RegionConfig::Ball { center, radius } => Region::Ball { center, radius },
            RegionConfig::Rectangle { lo, hi } => Region::Rectangle { lo, hi },
            RegionConfig::Annulus { center, inner, outer } => Region::Annulus { center, inner, outer },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskConfig {
    Threshold(ThresholdTask),
    ExpIntegral(ExpIntegralTask),
    HigherInt(HigherIntTask),
    Distortion(DistortionTask),
    ReverseHolder(ReverseHolderTask),
    Osc(OscTask),
    ModulusTail(ModulusTailTask),
    ConstructU(ConstructUTask),
    ConstructLusin(ConstructLusinTask),
    VerifyInequalities(VerifyInequalitiesTask),
    DScan(DScanTask),
}

pub const TASK_KINDS: &[(&str, &str)] = &[
    ("threshold", "bisect the exponent lambda at which exp(lambda K) stops being integrable"),
    ("exp-integral", "integral of exp(lambda K) over a region, with the shell verdict"),
    ("higher-int", "critical a with J log^a(e + J) integrable, J = star f^* omega"),
    ("distortion", "pointwise |Df|, star f^* omega, comass and K at random points"),
    ("reverse-holder", "averaged J over B/2 against (K J)^{n/(n+1)} over B for a ladder of balls"),
    ("osc", "weak monotonicity: osc over a disc against osc over its boundary"),
    ("modulus-tail", "int_L^inf P^{-1}(t) t^{-(n+1)/n} dt for a list of L"),
    ("construct-u", "radial bump: shell radii, unit masses, Orlicz energies, gradient bound"),
    ("construct-lusin", "Lusin construction: radii per level and the sampled evidence"),
    ("verify-inequalities", "sampled checks of the two-variable lemmas and the product inequality"),
    ("d-scan", "quadtree search for blow-up points of the dominant minor (heuristic)"),
];

fn unit_ball() -> RegionConfig {
    RegionConfig::Ball { center: vec![0.0, 0.0], radius: 1.0 }
}
fn lambda_bracket() -> [f64; 2] {
    [1.0, 3.0]
}
fn exponent_bracket() -> [f64; 2] {
    [0.5, 4.0]
}
fn bisect_tol() -> f64 {
    0.01
}
fn rel_tol() -> f64 {
    1e-9
}
fn shells() -> usize {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdTask {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "unit_ball")]
    pub region: RegionConfig,
    #[serde(default = "lambda_bracket")]
    pub bracket: [f64; 2],
    #[serde(default = "bisect_tol")]
    pub tol: f64,
    #[serde(default = "rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "shells")]
    pub shells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpIntegralTask {
    #[serde(default)]
    pub name: Option<String>,
    pub lambda: f64,
    #[serde(default = "unit_ball")]
    pub region: RegionConfig,
    #[serde(default = "rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "shells")]
    pub shells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HigherIntTask {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "unit_ball")]
    pub region: RegionConfig,
    #[serde(default = "exponent_bracket")]
    pub bracket: [f64; 2],
    #[serde(default = "bisect_tol")]
    pub tol: f64,
    #[serde(default = "rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "shells")]
    pub shells: usize,
}

fn distortion_samples() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionTask {
    #[serde(default)]
    pub name: Option<String>,
    /// Points are drawn uniformly from the region.
    #[serde(default = "unit_ball")]
    pub region: RegionConfig,
    #[serde(default = "distortion_samples")]
    pub samples: usize,
}

fn origin() -> Vec<f64> {
    vec![0.0, 0.0]
}
fn octaves() -> Vec<f64> {
    vec![0.5, 0.25, 0.125, 0.0625]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReverseHolderTask {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "origin")]
    pub center: Vec<f64>,
    #[serde(default = "octaves")]
    pub radii: Vec<f64>,
}

fn half() -> f64 {
    0.5
}
fn boundary_samples() -> usize {
    720
}
fn interior_samples() -> usize {
    20_000
}
fn bump_depth() -> usize {
    12
}

/// `field` is one of loglog_third, orlicz_bump_u, coordinate (of the run's map) or linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscTask {
    #[serde(default)]
    pub name: Option<String>,
    pub field: String,
    /// coordinate: 1-based component of the map.
    #[serde(default)]
    pub index: Option<usize>,
    /// linear: a . x + b
    #[serde(default)]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default)]
    pub offset: Option<f64>,
    #[serde(default = "origin")]
    pub center: Vec<f64>,
    #[serde(default = "half")]
    pub radius: f64,
    #[serde(default = "boundary_samples")]
    pub boundary_samples: usize,
    #[serde(default = "interior_samples")]
    pub interior_samples: usize,
    #[serde(default = "bump_depth")]
    pub bump_depth: usize,
}

fn two() -> usize {
    2
}
fn tail_lowers() -> Vec<f64> {
    vec![1e2, 1e3, 1e4]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusTailTask {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "two")]
    pub n: usize,
    pub a: f64,
    #[serde(default = "tail_lowers")]
    pub lower: Vec<f64>,
}

fn quad_tol() -> f64 {
    1e-12
}
fn radius_samples() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructUTask {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default = "bump_depth")]
    pub depth: usize,
    #[serde(default = "quad_tol")]
    pub quad_tol: f64,
    /// Level-index samples for the gradient bound below the smallness threshold.
    #[serde(default = "radius_samples")]
    pub radius_samples: usize,
}

fn one() -> f64 {
    1.0
}
fn quarter() -> f64 {
    0.25
}
fn lusin_depth() -> usize {
    5
}
fn segment_samples() -> usize {
    100_000
}
fn ring_samples() -> usize {
    400
}
fn lusin_distortion_samples() -> usize {
    10_000
}
fn graph_samples() -> usize {
    2001
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructLusinTask {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "quarter")]
    pub epsilon: f64,
    #[serde(default = "lusin_depth")]
    pub depth: usize,
    #[serde(default = "bump_depth")]
    pub bump_depth: usize,
    #[serde(default = "segment_samples")]
    pub segment_samples: usize,
    #[serde(default = "ring_samples")]
    pub ring_samples: usize,
    #[serde(default = "lusin_distortion_samples")]
    pub distortion_samples: usize,
    /// Points of (F, G) along the segment written to `<task>_graph.csv`.
    #[serde(default = "graph_samples")]
    pub graph_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyInequalitiesTask {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "grid_n")]
    pub n: Vec<usize>,
    #[serde(default = "grid_a")]
    pub a: Vec<f64>,
    #[serde(default = "grid_b")]
    pub b: Vec<f64>,
    #[serde(default = "grid_kappa")]
    pub kappa: Vec<f64>,
    #[serde(default = "grid_samples")]
    pub samples: usize,
}

fn grid_n() -> Vec<usize> {
    InequalityGrid::default().n
}
fn grid_a() -> Vec<f64> {
    InequalityGrid::default().a
}
fn grid_b() -> Vec<f64> {
    InequalityGrid::default().b
}
fn grid_kappa() -> Vec<f64> {
    InequalityGrid::default().kappa
}
fn grid_samples() -> usize {
    InequalityGrid::default().samples
}

fn scan_lo() -> [f64; 2] {
    [-1.0, -1.0]
}
fn scan_hi() -> [f64; 2] {
    [1.0, 1.0]
}
fn scan_levels() -> usize {
    24
}
fn scan_keep() -> usize {
    32
}
fn scan_growth() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DScanTask {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "scan_lo")]
    pub lo: [f64; 2],
    #[serde(default = "scan_hi")]
    pub hi: [f64; 2],
    #[serde(default = "scan_levels")]
    pub levels: usize,
    #[serde(default = "scan_keep")]
    pub keep: usize,
    #[serde(default = "scan_growth")]
    pub growth: f64,
}

impl TaskConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskConfig::Threshold(_) => "threshold",
            TaskConfig::ExpIntegral(_) => "exp-integral",
            TaskConfig::HigherInt(_) => "higher-int",
            TaskConfig::Distortion(_) => "distortion",
            TaskConfig::ReverseHolder(_) => "reverse-holder",
            TaskConfig::Osc(_) => "osc",
            TaskConfig::ModulusTail(_) => "modulus-tail",
            TaskConfig::ConstructU(_) => "construct-u",
            TaskConfig::ConstructLusin(_) => "construct-lusin",
            TaskConfig::VerifyInequalities(_) => "verify-inequalities",
            TaskConfig::DScan(_) => "d-scan",
        }
    }

    /// Output stem: the explicit name, else the kind.
    pub fn name(&self) -> &str {
        let name = match self {
            TaskConfig::Threshold(t) => &t.name,
            TaskConfig::ExpIntegral(t) => &t.name,
            TaskConfig::HigherInt(t) => &t.name,
            TaskConfig::Distortion(t) => &t.name,
            TaskConfig::ReverseHolder(t) => &t.name,
            TaskConfig::Osc(t) => &t.name,
            TaskConfig::ModulusTail(t) => &t.name,
            TaskConfig::ConstructU(t) => &t.name,
            TaskConfig::ConstructLusin(t) => &t.name,
            TaskConfig::VerifyInequalities(t) => &t.name,
            TaskConfig::DScan(t) => &t.name,
        };
        name.as_deref().unwrap_or(self.kind())
    }

    pub fn needs_map(&self) -> bool {
        match self {
            TaskConfig::Threshold(_)
            | TaskConfig::ExpIntegral(_)
            | TaskConfig::HigherInt(_)
            | TaskConfig::Distortion(_)
            | TaskConfig::ReverseHolder(_)
            | TaskConfig::DScan(_) => true,
            TaskConfig::Osc(t) => t.field == "coordinate",
            _ => false,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = key_of(e.message()).unwrap_or("config").to_string();
            CliError::config(&key, e.to_string().trim_end())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks that do not need anything built.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut names = BTreeSet::new();
        for t in &self.tasks {
            let name = t.name();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(CliError::config("task.name", format!("`{name}` is not a valid file stem")));
            }
            if !names.insert(name.to_string()) {
                return Err(CliError::config("task.name", format!("duplicate task name `{name}`; set `name` to tell them apart")));
            }
            if t.needs_map() && self.map.is_none() {
                return Err(CliError::config("map", format!("task `{name}` needs a [map] table")));
            }
            t.validate().map_err(|(key, msg)| CliError::config(&format!("task.{name}.{key}"), msg))?;
        }
        if let Some(m) = &self.map {
            if let Some(l) = m.lambda {
                if !(l > 0.0 && l < 2.0) {
                    return Err(CliError::config("map.lambda", format!("must lie in (0, 2), got {l}")));
                }
            }
        }
        Ok(())
    }
}

type Invalid = (&'static str, String);

fn positive(key: &'static str, v: f64) -> Result<(), Invalid> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err((key, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(key: &'static str, v: usize, min: usize) -> Result<(), Invalid> {
    if v >= min {
        Ok(())
    } else {
        Err((key, format!("must be at least {min}, got {v}")))
    }
}

fn bracket(key: &'static str, b: [f64; 2]) -> Result<(), Invalid> {
    if b[0] > 0.0 && b[0] < b[1] && b[1].is_finite() {
        Ok(())
    } else {
        Err((key, format!("need 0 < lo < hi, got {b:?}")))
    }
}

impl TaskConfig {
    fn validate(&self) -> Result<(), Invalid> {
        match self {
            TaskConfig::Threshold(t) => {
                bracket("bracket", t.bracket)?;
                positive("tol", t.tol)?;
                positive("rel_tol", t.rel_tol)?;
                at_least("shells", t.shells, 8)
            }
            TaskConfig::ExpIntegral(t) => {
                positive("lambda", t.lambda)?;
                positive("rel_tol", t.rel_tol)?;
                at_least("shells", t.shells, 8)
            }
            TaskConfig::HigherInt(t) => {
                bracket("bracket", t.bracket)?;
                positive("tol", t.tol)?;
                positive("rel_tol", t.rel_tol)?;
                at_least("shells", t.shells, 8)
            }
            TaskConfig::Distortion(t) => at_least("samples", t.samples, 1),
            TaskConfig::ReverseHolder(t) => {
                if t.radii.is_empty() {
                    return Err(("radii", "need at least one radius".into()));
                }
                t.radii.iter().try_for_each(|r| positive("radii", *r))
            }
            TaskConfig::Osc(t) => {
                match t.field.as_str() {
                    "loglog_third" | "orlicz_bump_u" => {}
                    "coordinate" => {
                        if !matches!(t.index, Some(i) if i >= 1) {
                            return Err(("index", "coordinate fields need a 1-based `index`".into()));
                        }
                    }
                    "linear" => {
                        if t.coeffs.as_ref().is_none_or(|c| c.len() != 2) {
                            return Err(("coeffs", "linear fields need two coefficients".into()));
                        }
                    }
                    other => {
                        return Err((
                            "field",
                            format!("unknown field `{other}`; expected loglog_third, orlicz_bump_u, coordinate or linear"),
                        ))
                    }
                }
                if t.center.len() != 2 {
                    return Err(("center", "discs live in R^2".into()));
                }
                positive("radius", t.radius)?;
                at_least("boundary_samples", t.boundary_samples, 3)?;
                at_least("bump_depth", t.bump_depth, 2)
            }
            TaskConfig::ModulusTail(t) => {
                at_least("n", t.n, 1)?;
                if !(t.a > t.n as f64) || !t.a.is_finite() {
                    return Err(("a", format!("the tail is finite only for a > n = {}, got {}", t.n, t.a)));
                }
                if t.lower.is_empty() || t.lower.iter().any(|l| !(*l >= 1.0) || !l.is_finite()) {
                    return Err(("lower", "need a nonempty list of L >= 1".into()));
                }
                Ok(())
            }
            TaskConfig::ConstructU(t) => {
                at_least("n", t.n, 2)?;
                at_least("depth", t.depth, 2)?;
                if t.depth > 40 {
                    return Err(("depth", format!("at most 40 shells, got {}", t.depth)));
                }
                positive("quad_tol", t.quad_tol)?;
                at_least("radius_samples", t.radius_samples, 2)
            }
            TaskConfig::ConstructLusin(t) => {
                if !(t.lambda > 0.0 && t.lambda < 2.0) {
                    return Err(("lambda", format!("must lie in (0, 2), got {}", t.lambda)));
                }
                if !(t.epsilon > 0.0 && t.epsilon <= 1.0) {
                    return Err(("epsilon", format!("must lie in (0, 1], got {}", t.epsilon)));
                }
                if !(1..=fdcurve::lusin::MAX_DEPTH).contains(&t.depth) {
                    return Err(("depth", format!("must lie in 1..={}, got {}", fdcurve::lusin::MAX_DEPTH, t.depth)));
                }
                at_least("bump_depth", t.bump_depth, 2)?;
                at_least("segment_samples", t.segment_samples, 2)?;
                at_least("graph_samples", t.graph_samples, 2)
            }
            TaskConfig::VerifyInequalities(t) => {
                at_least("samples", t.samples, 1)?;
                if t.n.contains(&0) {
                    return Err(("n", "dimensions must be positive".into()));
                }
                if let Some(a) = t.a.iter().find(|a| !(**a > -1.0)) {
                    return Err(("a", format!("need a > -1, got {a}")));
                }
                t.b.iter().try_for_each(|b| positive("b", *b))?;
                t.kappa.iter().try_for_each(|k| positive("kappa", *k))
            }
            TaskConfig::DScan(t) => {
                if !(t.lo[0] < t.hi[0] && t.lo[1] < t.hi[1]) {
                    return Err(("hi", "need lo < hi in both coordinates".into()));
                }
                at_least("levels", t.levels, 1)?;
                at_least("keep", t.keep, 1)?;
                positive("growth", t.growth)
            }
        }
    }
}

/// The offending key in a toml/serde message ("unknown field `x`", "missing field `x`").
fn key_of(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}
