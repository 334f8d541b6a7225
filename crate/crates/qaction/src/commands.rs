//! The four batch commands. Each validates its config completely, then
//! computes, then writes every output at once.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail};
use num_rational::Ratio;
use qaction_core::asymptotics::{
    ground_state_from_quantum_action, hydrogen_sector, hydrogen_sector_exact,
    invert_transformation_law, transformation_law_residual, wkb_compare, wkb_compare_profile,
    GroundStateInfo, HydrogenUnits, WkbReport,
};
use qaction_core::chaos::{
    compare_sections, generate_section, section_occupancy, section_thickness, PoincareSection,
    SectionSpec,
};
use qaction_core::model::{ActionSpec, Point};
use qaction_core::propagator::{
    discretize_hamiltonian, spectral_decompose, spectral_window, Grid, PropagatorTable,
    SpectralData,
};
use qaction_core::qfit::{
    default_ansatz, fit_flow, fit_quantum_action, ground_state_extent, FitProblem, FitResult,
};
use qaction_core::trajectory::{solve_euclidean_bvp, TrajectorySolution};
use serde::Serialize;

use crate::config::{
    self, ActionConfig, AnalyticConfig, FitConfig, PairConfig, PoincareConfig, PropagateConfig,
};
use crate::io::{check_writable, Cell, Outputs, Table, TableStyle};

/// Failure classes, mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("config error: {0:#}")]
    Config(anyhow::Error),
    #[error("numerical error: {0:#}")]
    Numerical(anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Numerical(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CommandError>;

trait Classify<T> {
    fn config(self) -> Result<T>;
    fn numerical(self) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn config(self) -> Result<T> {
        self.map_err(|e| CommandError::Config(e.into()))
    }
    fn numerical(self) -> Result<T> {
        self.map_err(|e| CommandError::Numerical(e.into()))
    }
}

/// Where and how a command writes.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub style: TableStyle,
}

/// Summary of a finished command.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn finish(outputs: Outputs, opts: &RunOptions, warnings: Vec<String>) -> Result<Report> {
    let files = outputs.write(&opts.out).config()?;
    Ok(Report { files, warnings })
}

fn confining_action(c: &ActionConfig) -> Result<ActionSpec> {
    let a = c.to_action().config()?;
    a.potential().check_confining().config()?;
    Ok(a)
}

fn check_pairs(grid: &Grid, pairs: &[(Point, Point)]) -> Result<()> {
    for (a, b) in pairs {
        if !grid.contains(a) || !grid.contains(b) {
            return Err(CommandError::Config(anyhow!(
                "pair ({a:?}, {b:?}) lies outside the grid"
            )));
        }
    }
    Ok(())
}

/// Explicit and grid pairs resolve at validation time; default pairs need
/// the spectrum.
fn early_pairs(p: &PairConfig, dim: usize, grid: &Grid) -> Result<Option<Vec<(Point, Point)>>> {
    if matches!(p, PairConfig::Default) {
        return Ok(None);
    }
    let pairs = p.resolve(dim, || 0.0).config()?;
    check_pairs(grid, &pairs)?;
    Ok(Some(pairs))
}

fn coordinate_header(dim: usize, names: [&str; 2]) -> Vec<String> {
    let mut h = vec![names[0].to_string()];
    if dim == 2 {
        h.push(names[1].to_string());
    }
    h
}

fn point_cells(q: &Point, dim: usize) -> Vec<Cell> {
    q[..dim].iter().map(|&v| v.into()).collect()
}

fn propagator_rows(table: &mut Table, t: &PropagatorTable, dim: usize) {
    for ((a, b), g) in t.pairs().iter().zip(t.amplitudes()) {
        let mut row = point_cells(a, dim);
        row.extend(point_cells(b, dim));
        row.push(t.time().into());
        row.push((*g).into());
        table.push(row);
    }
}

fn propagator_table(dim: usize) -> Table {
    let mut h = coordinate_header(dim, ["xi", "yi"]);
    h.extend(coordinate_header(dim, ["xf", "yf"]));
    h.push("T".into());
    h.push("G".into());
    Table {
        header: h,
        rows: Vec::new(),
    }
}

fn spectrum_table(s: &SpectralData, levels: Option<usize>) -> Table {
    let mut t = Table::new(&["n", "E_n"]);
    let count = levels.unwrap_or(s.len()).min(s.len());
    for (n, e) in s.eigenvalues()[..count].iter().enumerate() {
        t.push(vec![n.into(), (*e).into()]);
    }
    t
}

/// `propagate`: amplitude table over all configured times plus the spectrum.
pub fn propagate(cfg_path: &Path, opts: &RunOptions) -> Result<Report> {
    let cfg: PropagateConfig = config::load(cfg_path).config()?;
    let action = confining_action(&cfg.action)?;
    let grid = cfg.grid.to_grid(action.dim()).config()?;
    if cfg.times.is_empty() || cfg.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(CommandError::Config(anyhow!(
            "times must be a non-empty list of positive values"
        )));
    }
    if cfg.levels == Some(0) {
        return Err(CommandError::Config(anyhow!("levels must be positive")));
    }
    let pairs = early_pairs(&cfg.pairs, action.dim(), &grid)?;
    check_writable(&opts.out).config()?;

    let h = discretize_hamiltonian(&action, &grid).config()?;
    let tmin = cfg.times.iter().cloned().fold(f64::INFINITY, f64::min);
    let spectrum = spectral_window(&h, tmin).numerical()?;
    let pairs = match pairs {
        Some(p) => p,
        None => cfg
            .pairs
            .resolve(action.dim(), || ground_state_extent(&spectrum))
            .config()?,
    };
    let mut table = propagator_table(action.dim());
    for &t in &cfg.times {
        let g = spectrum.propagate(t, &pairs).numerical()?;
        propagator_rows(&mut table, &g, action.dim());
    }
    let mut out = Outputs::default();
    out.table("propagator", &table, opts.style).numerical()?;
    out.table(
        "spectrum",
        &spectrum_table(&spectrum, cfg.levels),
        opts.style,
    )
    .numerical()?;
    finish(out, opts, Vec::new())
}

/// JSON form of a fit: the quantum action plus fit diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FitRecord {
    #[serde(flatten)]
    pub action: ActionConfig,
    #[serde(rename = "logZ")]
    pub log_z: f64,
    pub rms_residual: f64,
    #[serde(rename = "T")]
    pub time: f64,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub v0: f64,
    pub converged: bool,
    pub confining: bool,
    pub constant_from_slope: bool,
    pub evaluations: usize,
    pub failed_pairs: Vec<usize>,
    pub per_pair_residuals: Vec<f64>,
    /// `2 m~ (V~ - V~_min)`, the combination the large-T limit fixes.
    pub kinetic_potential_product: crate::config::PotentialConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn fit_warnings(r: &FitResult) -> Vec<String> {
    let mut w = Vec::new();
    if !r.converged {
        w.push(format!(
            "fit at T = {} did not converge; the best point found is reported",
            r.time
        ));
    }
    if !r.confining {
        w.push(format!(
            "fitted potential at T = {} is not confining",
            r.time
        ));
    }
    if !r.failed_pairs.is_empty() {
        w.push(format!(
            "{} boundary-value problems failed at T = {}",
            r.failed_pairs.len(),
            r.time
        ));
    }
    w
}

impl FitRecord {
    pub fn new(r: &FitResult) -> Self {
        let parameters = r
            .parameter_names
            .iter()
            .cloned()
            .zip(r.parameters.iter().map(|&v| serde_json::json!(v)))
            .collect();
        let kpp =
            ActionConfig::from_action(&r.quantum.with_potential(r.kinetic_potential_product()))
                .potential;
        let warnings = fit_warnings(r);
        Self {
            action: ActionConfig::from_action(&r.quantum),
            log_z: r.log_z,
            rms_residual: r.rms_residual,
            time: r.time,
            parameters,
            v0: r.quantum.potential().constant(),
            converged: r.converged,
            confining: r.confining,
            constant_from_slope: r.constant_from_slope,
            evaluations: r.evaluations,
            failed_pairs: r.failed_pairs.clone(),
            per_pair_residuals: r.per_pair_residuals.clone(),
            kinetic_potential_product: kpp,
            warning: if warnings.is_empty() {
                None
            } else {
                Some(warnings.join("; "))
            },
        }
    }
}

const FLOW_COLUMNS: [&str; 5] = ["m", "v0", "v2", "v22", "v4"];

fn flow_table(results: &[FitResult]) -> Table {
    let mut extra: Vec<String> = Vec::new();
    for r in results {
        for n in &r.parameter_names {
            if !FLOW_COLUMNS.contains(&n.as_str()) && !extra.contains(n) {
                extra.push(n.clone());
            }
        }
    }
    let mut header = vec!["T".to_string()];
    header.extend(FLOW_COLUMNS.iter().map(|s| s.to_string()));
    header.push("rms".into());
    header.extend(extra.iter().cloned());
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for r in results {
        let mut row = vec![Cell::from(r.time)];
        for c in FLOW_COLUMNS {
            row.push(match c {
                "m" => r.mass().into(),
                _ => r.parameter(c).into(),
            });
        }
        row.push(r.rms_residual.into());
        for n in &extra {
            row.push(r.parameter(n).into());
        }
        t.push(row);
    }
    t
}

fn path_table(sol: &TrajectorySolution, mass: f64) -> Table {
    let dim = sol.dim;
    let mut h = vec!["t".to_string()];
    h.extend(coordinate_header(dim, ["x", "y"]));
    h.extend(coordinate_header(dim, ["px", "py"]));
    let mut t = Table {
        header: h,
        rows: Vec::new(),
    };
    for ((time, q), p) in sol.times.iter().zip(&sol.path).zip(sol.momenta(mass)) {
        let mut row = vec![Cell::from(*time)];
        row.extend(point_cells(q, dim));
        row.extend(point_cells(&p, dim));
        t.push(row);
    }
    t
}

/// `fit`: a single fit or a warm-started flow.
pub fn fit(cfg_path: &Path, opts: &RunOptions) -> Result<Report> {
    let cfg: FitConfig = config::load(cfg_path).config()?;
    let action = confining_action(&cfg.action)?;
    let dim = action.dim();
    let grid = cfg.grid.to_grid(dim).config()?;
    let times = cfg.times().config()?;
    let pairs = early_pairs(&cfg.pairs, dim, &grid)?;
    let ansatz = match &cfg.ansatz {
        Some(list) => list
            .iter()
            .map(|a| a.to_term())
            .collect::<anyhow::Result<Vec<_>>>()
            .config()?,
        None => default_ansatz(&action),
    };
    let fit_opts = cfg.options.to_options().config()?;
    if cfg.time_nodes < 32 {
        return Err(CommandError::Config(anyhow!(
            "time_nodes must be at least 32"
        )));
    }
    let export: Vec<(Point, Point)> = PairConfig::Explicit {
        pairs: cfg.export_paths.clone(),
    }
    .resolve(dim, || 0.0)
    .or_else(|e| {
        if cfg.export_paths.is_empty() {
            Ok(Vec::new())
        } else {
            Err(e)
        }
    })
    .config()?;
    check_writable(&opts.out).config()?;

    let h = discretize_hamiltonian(&action, &grid).config()?;
    let spectrum = spectral_window(&h, times[0]).numerical()?;
    let pairs = match pairs {
        Some(p) => p,
        None => cfg
            .pairs
            .resolve(dim, || ground_state_extent(&spectrum))
            .config()?,
    };
    let results = if times.len() == 1 {
        let problem = FitProblem::from_spectrum(
            action.clone(),
            &spectrum,
            times[0],
            &pairs,
            ansatz,
            cfg.fit_mass,
        )
        .and_then(|p| p.with_time_nodes(cfg.time_nodes))
        .config()?;
        vec![fit_quantum_action(&problem, &fit_opts).numerical()?]
    } else {
        // Problem setup errors (too few pairs for the ansatz) surface from
        // the first fit; check them up front so they classify as config.
        FitProblem::from_spectrum(
            action.clone(),
            &spectrum,
            times[0],
            &pairs,
            ansatz.clone(),
            cfg.fit_mass,
        )
        .config()?;
        fit_flow(
            &action,
            &spectrum,
            &pairs,
            &ansatz,
            cfg.fit_mass,
            &times,
            cfg.time_nodes,
            &fit_opts,
        )
        .numerical()?
    };
    let last = results.last().expect("at least one time");
    let mut out = Outputs::default();
    out.json("fit_result", &FitRecord::new(last)).numerical()?;
    if cfg.t_list.is_some() {
        out.table("flow", &flow_table(&results), opts.style)
            .numerical()?;
    }
    for (k, (a, b)) in export.iter().enumerate() {
        let sol = solve_euclidean_bvp(
            &last.quantum,
            &a[..dim],
            &b[..dim],
            last.time,
            cfg.time_nodes,
        )
        .numerical()?;
        out.table(
            &format!("path_{k}"),
            &path_table(&sol, last.quantum.mass()),
            opts.style,
        )
        .numerical()?;
    }
    let warnings = results.iter().flat_map(fit_warnings).collect();
    finish(out, opts, warnings)
}

#[derive(Debug, Clone, Serialize)]
struct WkbRecord {
    source: &'static str,
    energy: f64,
    spectral_energy: f64,
    classical_distance: f64,
    quantum_distance: f64,
    excluded_points: usize,
    turning_point: f64,
    stitch: Option<f64>,
    mismatch: Option<f64>,
}

impl WkbRecord {
    fn new(
        source: &'static str,
        r: &WkbReport,
        stitch: Option<f64>,
        mismatch: Option<f64>,
    ) -> Self {
        Self {
            source,
            energy: r.energy,
            spectral_energy: r.spectral_energy,
            classical_distance: r.classical_distance,
            quantum_distance: r.quantum_distance,
            excluded_points: r.excluded_points,
            turning_point: r.turning_point,
            stitch,
            mismatch,
        }
    }
}

fn ground_state_table(g: &GroundStateInfo) -> Table {
    let mut t = Table::new(&["x", "psi"]);
    for (x, p) in g.x.iter().zip(&g.psi) {
        t.push(vec![(*x).into(), (*p).into()]);
    }
    t
}

fn exact_ratio(v: f64) -> Option<Ratio<i128>> {
    let r = Ratio::<i128>::approximate_float(v)?;
    let back = *r.numer() as f64 / *r.denom() as f64;
    (back == v).then_some(r)
}

/// `analytic`: ground state, transformation law and WKB report for a
/// one-dimensional action, and the hydrogen table.
pub fn analytic(cfg_path: &Path, opts: &RunOptions) -> Result<Report> {
    let cfg: AnalyticConfig = config::load(cfg_path).config()?;
    if cfg.action.is_none() && cfg.hydrogen.is_none() {
        return Err(CommandError::Config(anyhow!(
            "nothing to compute: give an action, hydrogen settings, or both"
        )));
    }
    let classical = match &cfg.action {
        Some(c) => {
            let a = confining_action(c)?;
            if a.dim() != 1 {
                return Err(CommandError::Config(anyhow!(
                    "the analytic command needs a one-dimensional action"
                )));
            }
            if !a.potential().is_parity_symmetric() {
                return Err(CommandError::Config(anyhow!(
                    "the classical potential must be parity symmetric"
                )));
            }
            let grid = cfg
                .grid
                .as_ref()
                .ok_or_else(|| anyhow!("an action needs a grid"))
                .config()?
                .to_grid(1)
                .config()?;
            Some((a, grid))
        }
        None => None,
    };
    let quantum = match (&cfg.quantum, &cfg.fit_result) {
        (Some(_), Some(_)) => {
            return Err(CommandError::Config(anyhow!(
                "give either quantum or fit_result, not both"
            )))
        }
        (Some(q), None) => Some(q.to_action().config()?),
        (None, Some(p)) => Some(config::read_fitted_action(Path::new(p)).config()?),
        (None, None) => None,
    };
    if quantum.is_some() && classical.is_none() {
        return Err(CommandError::Config(anyhow!(
            "a quantum action needs the classical action it belongs to"
        )));
    }
    if let Some(q) = &quantum {
        if q.dim() != 1 {
            return Err(CommandError::Config(anyhow!(
                "the quantum action must be one-dimensional"
            )));
        }
        q.potential().check_confining().config()?;
    }
    if let Some(h) = &cfg.hydrogen {
        if h.l_max < 1 {
            return Err(CommandError::Config(anyhow!("l_max must be at least 1")));
        }
        if !(h.hbar > 0.0 && h.mass > 0.0 && h.charge > 0.0) {
            return Err(CommandError::Config(anyhow!(
                "hydrogen units must be positive"
            )));
        }
    }
    check_writable(&opts.out).config()?;

    let mut out = Outputs::default();
    if let Some((a, grid)) = &classical {
        let h = discretize_hamiltonian(a, grid).config()?;
        let spectral = spectral_decompose(&h, 1).numerical()?;
        let e = cfg.energy.unwrap_or(spectral.ground_energy());
        let profile = invert_transformation_law(a, e, grid).numerical()?;
        let mut law = Table::new(&["x", "U", "residual"]);
        let residual = profile.residual(a);
        let mut r = residual.iter().peekable();
        for (x, u) in profile.x.iter().zip(&profile.u) {
            let res = match r.peek() {
                Some((rx, v)) if rx == x => {
                    r.next();
                    Some(*v)
                }
                _ => None,
            };
            law.push(vec![(*x).into(), (*u).into(), res.into()]);
        }
        out.table("transformation_law", &law, opts.style)
            .numerical()?;
        let (state, wkb) = match &quantum {
            Some(q) => {
                let state = ground_state_from_quantum_action(q, grid).numerical()?;
                let mut qlaw = Table::new(&["x", "residual"]);
                for &x in &profile.x {
                    if let Ok(v) = transformation_law_residual(a, e, q, x) {
                        qlaw.push(vec![x.into(), v.into()]);
                    }
                }
                out.table("quantum_law", &qlaw, opts.style).numerical()?;
                let w = wkb_compare(a, q, e, grid).numerical()?;
                (state, WkbRecord::new("quantum_action", &w, None, None))
            }
            None => {
                let w = wkb_compare_profile(a, &profile, grid).numerical()?;
                (
                    profile.ground_state().numerical()?,
                    WkbRecord::new(
                        "transformation_law",
                        &w,
                        profile.stitch,
                        Some(profile.mismatch),
                    ),
                )
            }
        };
        out.table("ground_state", &ground_state_table(&state), opts.style)
            .numerical()?;
        out.json("wkb", &wkb).numerical()?;
    }
    if let Some(hc) = &cfg.hydrogen {
        let units = HydrogenUnits {
            hbar: hc.hbar,
            mass: hc.mass,
            charge: hc.charge,
        };
        let exact_units = match (
            exact_ratio(hc.hbar),
            exact_ratio(hc.mass),
            exact_ratio(hc.charge),
        ) {
            (Some(h), Some(m), Some(e)) => Some((h, m, e * e)),
            _ => None,
        };
        let mut t = Table::new(&[
            "l",
            "mu",
            "nu",
            "E_l",
            "r_min",
            "E_l_exact",
            "exact_identity",
        ]);
        for l in 1..=hc.l_max {
            let s = hydrogen_sector(l, &units).numerical()?;
            let exact = exact_units.and_then(|(h, m, e2)| hydrogen_sector_exact(l, h, m, e2).ok());
            t.push(vec![
                l.into(),
                s.mu.into(),
                s.nu.into(),
                s.energy.into(),
                s.potential_minimum_radius.into(),
                exact.as_ref().map(|x| x.energy.to_string()).into(),
                exact
                    .as_ref()
                    .map(|x| x.identities_hold().to_string())
                    .into(),
            ]);
            if exact.as_ref().is_some_and(|x| !x.identities_hold()) {
                return Err(CommandError::Numerical(anyhow!(
                    "exact hydrogen identities fail for l = {l}"
                )));
            }
        }
        out.table("hydrogen", &t, opts.style).numerical()?;
    }
    finish(out, opts, Vec::new())
}

#[derive(Debug, Clone, Serialize)]
struct SectionSummary {
    energy: f64,
    crossings: usize,
    occupancy: f64,
    energy_error: f64,
    thickness: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ComparisonRecord {
    boxes: usize,
    classical_boxes: usize,
    quantum_boxes: usize,
    symmetric_difference: usize,
    symmetric_fraction: f64,
    classical_mean_thickness: f64,
    quantum_mean_thickness: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ExcitationRecord {
    excitation: f64,
    classical: SectionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    quantum: Option<SectionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ComparisonRecord>,
}

#[derive(Debug, Clone, Serialize)]
struct PoincareReport {
    boxes: usize,
    orbits: usize,
    seed: u64,
    dt: f64,
    sections: Vec<ExcitationRecord>,
}

fn summarize(s: &PoincareSection, boxes: usize) -> anyhow::Result<SectionSummary> {
    if s.points.is_empty() {
        bail!("no orbit crossed the section plane");
    }
    Ok(SectionSummary {
        energy: s.spec.energy,
        crossings: s.points.len(),
        occupancy: section_occupancy(s, boxes)?,
        energy_error: s.energy_error(),
        thickness: section_thickness(s)?,
    })
}

fn section_table(s: &PoincareSection) -> Table {
    let mut t = Table::new(&["orbit", "x", "px"]);
    for (o, x, p) in s.coordinates() {
        t.push(vec![o.into(), x.into(), p.into()]);
    }
    t
}

/// `poincare`: classical sections per excitation and, with a fit result,
/// the quantum sections and their comparison.
pub fn poincare(cfg_path: &Path, opts: &RunOptions) -> Result<Report> {
    let cfg: PoincareConfig = config::load(cfg_path).config()?;
    let classical = confining_action(&cfg.action)?;
    if classical.dim() != 2 {
        return Err(CommandError::Config(anyhow!(
            "sections need a two-dimensional action"
        )));
    }
    if cfg.excitations.is_empty() || cfg.excitations.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(CommandError::Config(anyhow!(
            "excitations must be a non-empty list of positive energies"
        )));
    }
    if cfg.orbits == 0 || cfg.max_crossings == 0 || cfg.boxes == 0 {
        return Err(CommandError::Config(anyhow!(
            "orbits, max_crossings and boxes must be positive"
        )));
    }
    if !(cfg.dt > 0.0 && cfg.dt <= 0.1 && cfg.max_time > 0.0) {
        return Err(CommandError::Config(anyhow!(
            "dt must lie in (0, 0.1] and max_time must be positive"
        )));
    }
    let quantum = match &cfg.fit_result {
        Some(p) => {
            let q = config::read_fitted_action(Path::new(p)).config()?;
            if q.dim() != 2 {
                return Err(CommandError::Config(anyhow!(
                    "the fitted action must be two-dimensional"
                )));
            }
            Some(q)
        }
        None => None,
    };
    let specs = |a: &ActionSpec| -> Result<Vec<SectionSpec>> {
        cfg.excitations
            .iter()
            .map(|&e| {
                SectionSpec::above_minimum(
                    a,
                    e,
                    cfg.orbits,
                    cfg.seed,
                    cfg.max_crossings,
                    cfg.dt,
                    cfg.max_time,
                )
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .config()
    };
    let classical_specs = specs(&classical)?;
    let quantum_specs = quantum.as_ref().map(&specs).transpose()?;
    check_writable(&opts.out).config()?;

    let suffix = |k: usize| {
        if cfg.excitations.len() == 1 {
            String::new()
        } else {
            format!("_{k}")
        }
    };
    let mut out = Outputs::default();
    let mut records = Vec::new();
    for (k, spec) in classical_specs.iter().enumerate() {
        let c = generate_section(&classical, spec).numerical()?;
        out.table(
            &format!("classical_section{}", suffix(k)),
            &section_table(&c),
            opts.style,
        )
        .numerical()?;
        let mut rec = ExcitationRecord {
            excitation: cfg.excitations[k],
            classical: summarize(&c, cfg.boxes).numerical()?,
            quantum: None,
            comparison: None,
        };
        if let (Some(q), Some(qs)) = (&quantum, &quantum_specs) {
            let s = generate_section(q, &qs[k]).numerical()?;
            out.table(
                &format!("quantum_section{}", suffix(k)),
                &section_table(&s),
                opts.style,
            )
            .numerical()?;
            rec.quantum = Some(summarize(&s, cfg.boxes).numerical()?);
            let cmp = compare_sections(&c, &s, cfg.boxes).numerical()?;
            rec.comparison = Some(ComparisonRecord {
                boxes: cmp.boxes,
                classical_boxes: cmp.classical_boxes,
                quantum_boxes: cmp.quantum_boxes,
                symmetric_difference: cmp.symmetric_difference,
                symmetric_fraction: cmp.symmetric_fraction,
                classical_mean_thickness: cmp.classical_mean_thickness,
                quantum_mean_thickness: cmp.quantum_mean_thickness,
            });
        }
        records.push(rec);
    }
    let report = PoincareReport {
        boxes: cfg.boxes,
        orbits: cfg.orbits,
        seed: cfg.seed,
        dt: cfg.dt,
        sections: records,
    };
    out.json(
        if quantum.is_some() {
            "comparison"
        } else {
            "report"
        },
        &report,
    )
    .numerical()?;
    finish(out, opts, Vec::new())
}
