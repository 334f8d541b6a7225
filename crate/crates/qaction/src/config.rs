//! JSON run configurations, one per command.
//!
//! Every record rejects unknown fields so that typos surface as config
//! errors rather than silently falling back to defaults.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use qaction_core::model::{ActionSpec, Point, PolynomialPotential};
use qaction_core::propagator::Grid;
use qaction_core::qfit::{pairs_1d, pairs_2d, symmetric_points, AnsatzTerm, FitOptions};
use serde::{Deserialize, Serialize};

/// One monomial `coef * x^a [y^b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub exp: Vec<u32>,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub dim: usize,
    pub terms: Vec<TermConfig>,
}

/// JSON form of an action: `{"mass", "hbar", "potential": {"dim", "terms"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    pub potential: PotentialConfig,
}

fn one() -> f64 {
    1.0
}

impl ActionConfig {
    pub fn to_action(&self) -> Result<ActionSpec> {
        let terms: Vec<(&[u32], f64)> = self
            .potential
            .terms
            .iter()
            .map(|t| (t.exp.as_slice(), t.coef))
            .collect();
        let pot = PolynomialPotential::new(self.potential.dim, terms)?;
        Ok(ActionSpec::with_hbar(self.mass, self.hbar, pot)?)
    }

    pub fn from_action(a: &ActionSpec) -> Self {
        let terms = a
            .potential()
            .terms()
            .map(|(e, c)| TermConfig {
                exp: e.to_vec(),
                coef: c,
            })
            .collect();
        Self {
            mass: a.mass(),
            hbar: a.hbar(),
            potential: PotentialConfig {
                dim: a.dim(),
                terms,
            },
        }
    }
}

/// Quantum action read from a fit result file; only the action fields are
/// used.
#[derive(Debug, Clone, Deserialize)]
struct FittedAction {
    mass: f64,
    #[serde(default = "one")]
    hbar: f64,
    potential: PotentialConfig,
}

pub fn read_fitted_action(path: &Path) -> Result<ActionSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading fit result {}", path.display()))?;
    let f: FittedAction = serde_json::from_str(&text)
        .with_context(|| format!("parsing fit result {}", path.display()))?;
    ActionConfig {
        mass: f.mass,
        hbar: f.hbar,
        potential: f.potential,
    }
    .to_action()
}

/// Square (or, in 1-D, interval) grid `[-half_width, half_width]^d` with
/// `points` nodes per axis, boundaries included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn to_grid(&self, dim: usize) -> Result<Grid> {
        Ok(match dim {
            1 => Grid::one_d(self.half_width, self.points)?,
            2 => Grid::two_d(self.half_width, self.points)?,
            d => bail!("unsupported dimension {d}"),
        })
    }
}

/// Boundary-point pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairConfig {
    /// `count` evenly spaced points per axis on `[-range, range]`: all
    /// ordered pairs in 1-D, unordered pairs in 2-D.
    Grid { range: f64, count: usize },
    /// Explicit `[[xi...], [xf...]]` entries.
    Explicit { pairs: Vec<[Vec<f64>; 2]> },
    /// Spanning the region where the ground state exceeds `1e-4` of its
    /// peak.
    #[default]
    Default,
}

fn point(v: &[f64], dim: usize) -> Result<Point> {
    if v.len() != dim {
        bail!(
            "pair coordinate {v:?} has {} entries, expected {dim}",
            v.len()
        );
    }
    let mut q = [0.0; 2];
    q[..dim].copy_from_slice(v);
    Ok(q)
}

impl PairConfig {
    /// Resolves to concrete pairs; `extent` supplies the range of the
    /// default variant.
    pub fn resolve(&self, dim: usize, extent: impl FnOnce() -> f64) -> Result<Vec<(Point, Point)>> {
        let pairs = match self {
            PairConfig::Grid { range, count } => {
                if range.is_nan() || *range <= 0.0 || *count == 0 {
                    bail!("pair grid needs a positive range and count");
                }
                let axis = symmetric_points(*range, *count);
                if dim == 1 {
                    pairs_1d(&axis)
                } else {
                    pairs_2d(&axis)
                }
            }
            PairConfig::Explicit { pairs } => pairs
                .iter()
                .map(|[a, b]| Ok((point(a, dim)?, point(b, dim)?)))
                .collect::<Result<_>>()?,
            PairConfig::Default => {
                let axis = symmetric_points(extent(), if dim == 1 { 11 } else { 5 });
                if dim == 1 {
                    pairs_1d(&axis)
                } else {
                    pairs_2d(&axis)
                }
            }
        };
        if pairs.is_empty() {
            bail!("the pair list is empty");
        }
        Ok(pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    pub action: ActionConfig,
    pub grid: GridConfig,
    pub times: Vec<f64>,
    #[serde(default)]
    pub pairs: PairConfig,
    /// Levels written to the spectrum file (all computed levels if absent).
    #[serde(default)]
    pub levels: Option<usize>,
}

/// A free ansatz coefficient: a single monomial, or `x^a y^b + x^b y^a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnsatzConfig {
    Monomial { exp: Vec<u32> },
    Symmetric { exp: [u32; 2] },
}

impl AnsatzConfig {
    pub fn to_term(&self) -> Result<AnsatzTerm> {
        Ok(match self {
            AnsatzConfig::Monomial { exp } => AnsatzTerm::monomial(exp)?,
            AnsatzConfig::Symmetric { exp } => AnsatzTerm::symmetric(exp[0], exp[1])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptionsConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_evaluations")]
    pub max_evaluations: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "yes")]
    pub polish: bool,
}

fn default_tol() -> f64 {
    FitOptions::default().tol
}
fn default_evaluations() -> usize {
    FitOptions::default().max_evaluations
}
fn default_restarts() -> usize {
    FitOptions::default().restarts
}
fn yes() -> bool {
    true
}

impl Default for FitOptionsConfig {
    fn default() -> Self {
        let o = FitOptions::default();
        Self {
            tol: o.tol,
            max_evaluations: o.max_evaluations,
            restarts: o.restarts,
            polish: o.polish,
        }
    }
}

impl FitOptionsConfig {
    pub fn to_options(&self) -> Result<FitOptions> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_evaluations == 0 {
            bail!("fit tolerance and evaluation budget must be positive");
        }
        Ok(FitOptions {
            tol: self.tol,
            max_evaluations: self.max_evaluations,
            restarts: self.restarts,
            polish: self.polish,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub action: ActionConfig,
    pub grid: GridConfig,
    /// Single transition time; exclusive with `T_list`.
    #[serde(default, rename = "T")]
    pub t: Option<f64>,
    /// Ascending times for a warm-started flow.
    #[serde(default, rename = "T_list")]
    pub t_list: Option<Vec<f64>>,
    #[serde(default)]
    pub pairs: PairConfig,
    /// Free terms; the classical monomials if absent.
    #[serde(default)]
    pub ansatz: Option<Vec<AnsatzConfig>>,
    #[serde(default = "yes")]
    pub fit_mass: bool,
    #[serde(default = "default_time_nodes")]
    pub time_nodes: usize,
    #[serde(default)]
    pub options: FitOptionsConfig,
    /// Boundary pairs whose Euclidean paths under the fitted action are
    /// exported.
    #[serde(default)]
    pub export_paths: Vec<[Vec<f64>; 2]>,
}

fn default_time_nodes() -> usize {
    512
}

impl FitConfig {
    /// The times to fit, validated.
    pub fn times(&self) -> Result<Vec<f64>> {
        let times = match (&self.t, &self.t_list) {
            (Some(t), None) => vec![*t],
            (None, Some(list)) => list.clone(),
            (Some(_), Some(_)) => bail!("give either T or T_list, not both"),
            (None, None) => bail!("missing transition time (T or T_list)"),
        };
        if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            bail!("transition times must be positive");
        }
        if self.t_list.is_some() && (times.len() < 2 || times.windows(2).any(|w| w[1] < w[0])) {
            bail!("T_list must hold at least two ascending times");
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydrogenConfig {
    pub l_max: u32,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticConfig {
    /// Classical one-dimensional action for the ground-state, law and WKB
    /// outputs.
    #[serde(default)]
    pub action: Option<ActionConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Ground energy; the spectral value on `grid` if absent.
    #[serde(default)]
    pub energy: Option<f64>,
    /// Quantum action given inline.
    #[serde(default)]
    pub quantum: Option<ActionConfig>,
    /// Quantum action read from a fit result file.
    #[serde(default)]
    pub fit_result: Option<String>,
    #[serde(default)]
    pub hydrogen: Option<HydrogenConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    pub action: ActionConfig,
    /// Energies above the potential minimum, one section each.
    pub excitations: Vec<f64>,
    pub orbits: usize,
    #[serde(default)]
    pub seed: u64,
    pub max_crossings: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    #[serde(default = "default_boxes")]
    pub boxes: usize,
    /// Fit result whose quantum action gets its own sections.
    #[serde(default)]
    pub fit_result: Option<String>,
}

fn default_dt() -> f64 {
    0.01
}
fn default_max_time() -> f64 {
    1e5
}
fn default_boxes() -> usize {
    32
}

/// Reads and parses a config file.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("invalid config {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_round_trip() {
        let json = r#"{"mass": 1.0, "potential": {"dim": 2, "terms": [{"exp": [2, 0], "coef": 0.5}, {"exp": [2, 2], "coef": 0.05}]}}"#;
        let c: ActionConfig = serde_json::from_str(json).unwrap();
        let a = c.to_action().unwrap();
        assert_eq!(a.hbar(), 1.0);
        assert_eq!(a.potential().coefficient(&[2, 2]), 0.05);
        assert_eq!(ActionConfig::from_action(&a).to_action().unwrap(), a);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let json = r#"{"mass": 1.0, "potental": {"dim": 1, "terms": []}}"#;
        assert!(serde_json::from_str::<ActionConfig>(json).is_err());
    }

    #[test]
    fn pair_variants() {
        let g: PairConfig =
            serde_json::from_str(r#"{"kind": "grid", "range": 2.0, "count": 3}"#).unwrap();
        assert_eq!(g.resolve(1, || 0.0).unwrap().len(), 9);
        assert_eq!(g.resolve(2, || 0.0).unwrap().len(), 45);
        let e: PairConfig =
            serde_json::from_str(r#"{"kind": "explicit", "pairs": [[[0.0], [1.0]]]}"#).unwrap();
        assert_eq!(
            e.resolve(1, || 0.0).unwrap(),
            vec![([0.0, 0.0], [1.0, 0.0])]
        );
        assert!(e.resolve(2, || 0.0).is_err());
        let empty: PairConfig =
            serde_json::from_str(r#"{"kind": "explicit", "pairs": []}"#).unwrap();
        assert!(empty.resolve(1, || 0.0).is_err());
        assert_eq!(PairConfig::Default.resolve(1, || 2.0).unwrap().len(), 121);
    }

    #[test]
    fn fit_times() {
        let base = r#""action": {"mass": 1.0, "potential": {"dim": 1, "terms": [{"exp": [2], "coef": 0.5}]}}, "grid": {"half_width": 5.0, "points": 101}"#;
        let single: FitConfig = serde_json::from_str(&format!("{{{base}, \"T\": 2.0}}")).unwrap();
        assert_eq!(single.times().unwrap(), vec![2.0]);
        let flow: FitConfig =
            serde_json::from_str(&format!("{{{base}, \"T_list\": [1.0, 2.0]}}")).unwrap();
        assert_eq!(flow.times().unwrap().len(), 2);
        let bad: FitConfig =
            serde_json::from_str(&format!("{{{base}, \"T_list\": [2.0, 1.0]}}")).unwrap();
        assert!(bad.times().is_err());
        let none: FitConfig = serde_json::from_str(&format!("{{{base}}}")).unwrap();
        assert!(none.times().is_err());
    }
}
