//! Acceptance suite: one line per criterion with the measured quantities,
//! the runtime and its budget. Exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_rational::Ratio;
use qaction_core::asymptotics::{
    hydrogen_sector, hydrogen_sector_exact, invert_transformation_law, transformation_law_residual,
    wkb_compare, wkb_compare_profile, GroundStateInfo, HydrogenUnits,
};
use qaction_core::chaos::{
    anharmonic_model, compare_sections, generate_section, section_occupancy, SectionSpec,
};
use qaction_core::model::{p1, ActionSpec, PolynomialPotential, ScaleTransform};
use qaction_core::propagator::{
    discretize_hamiltonian, ho_euclidean_kernel, spectral_decompose, spectral_window, Grid,
};
use qaction_core::qfit::{
    default_ansatz, default_pairs, fit_quantum_action, pairs_1d, symmetric_points,
    symmetric_quartic_ansatz, FitOptions, FitProblem, FitResult,
};
use qaction_core::trajectory::{integrate_realtime_with, PhaseState};
use serde_json::json;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn action(terms: &[(u32, f64)]) -> ActionSpec {
    ActionSpec::new(1.0, PolynomialPotential::one_d(terms).unwrap()).unwrap()
}

fn ho() -> ActionSpec {
    action(&[(2, 0.5)])
}

fn quartic() -> ActionSpec {
    action(&[(2, 0.5), (4, 0.1)])
}

fn ho_kernel() -> Outcome {
    let h = discretize_hamiltonian(&ho(), &Grid::one_d(7.5, 16385).unwrap()).unwrap();
    let s = spectral_window(&h, 0.5).unwrap();
    let pairs = pairs_1d(&symmetric_points(2.0, 11));
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0, 4.0] {
        let g = s.propagate(t, &pairs).unwrap();
        for ((a, b), v) in pairs.iter().zip(g.amplitudes()) {
            let exact = ho_euclidean_kernel(1.0, 1.0, 1.0, a[0], b[0], t).unwrap();
            worst = worst.max((v - exact).abs() / exact);
        }
    }
    let g0 = s
        .propagate(1.0, &[(p1(0.0), p1(0.0))])
        .unwrap()
        .amplitudes()[0];
    outcome(
        worst < 1e-4 && (g0 - 0.36800).abs() / 0.36800 < 1e-4,
        format!("max relative error {worst:.2e} over 121 pairs x 4 times; G(0,0;T=1) = {g0:.7}"),
    )
}

fn oscillator_fit() -> Outcome {
    let a = ho();
    let h = discretize_hamiltonian(&a, &Grid::one_d(7.5, 4097).unwrap()).unwrap();
    let s = spectral_window(&h, 8.0).unwrap();
    let pairs = pairs_1d(&symmetric_points(2.0, 11));
    let p = FitProblem::from_spectrum(a.clone(), &s, 8.0, &pairs, default_ansatz(&a), true)
        .unwrap()
        .with_time_nodes(1024)
        .unwrap();
    let r = fit_quantum_action(&p, &FitOptions::default()).unwrap();
    let (m, v2, v0) = (
        r.mass(),
        r.parameter("v2").unwrap(),
        r.parameter("v0").unwrap(),
    );
    outcome(
        (m - 1.0).abs() < 1e-3 && (v2 - 0.5).abs() < 1e-3 && (v0 - 0.5).abs() < 1e-3,
        format!(
            "T=8: m~ = {m:.7}, v2~ = {v2:.7}, v0~ = {v0:.7}, rms {:.1e}, converged {}",
            r.rms_residual, r.converged
        ),
    )
}

fn small_time_fit() -> Outcome {
    let a = quartic();
    let t = 0.05;
    let h = discretize_hamiltonian(&a, &Grid::one_d(4.0, 4097).unwrap()).unwrap();
    let s = spectral_window(&h, t).unwrap();
    let pairs: Vec<_> = pairs_1d(&symmetric_points(1.5, 11))
        .into_iter()
        .filter(|(x, y)| (x[0] - y[0]).abs() < 0.65)
        .collect();
    let p = FitProblem::from_spectrum(a.clone(), &s, t, &pairs, default_ansatz(&a), true)
        .unwrap()
        .with_time_nodes(64)
        .unwrap();
    let r = fit_quantum_action(&p, &FitOptions::default()).unwrap();
    let rel = |x: f64, y: f64| (x - y).abs() / y;
    let (m, v2, v4) = (
        r.mass(),
        r.parameter("v2").unwrap(),
        r.parameter("v4").unwrap(),
    );
    let worst = rel(m, 1.0).max(rel(v2, 0.5)).max(rel(v4, 0.1));
    outcome(
        worst < 0.02,
        format!(
            "T=0.05, {} pairs: m~ = {m:.5}, v2~ = {v2:.5}, v4~ = {v4:.5} (max deviation {:.2}%); v0~ = {:.3} not compared",
            pairs.len(),
            100.0 * worst,
            r.parameter("v0").unwrap()
        ),
    )
}

fn fit_quartic_at(t: f64, grid: &Grid) -> FitResult {
    let a = quartic();
    let h = discretize_hamiltonian(&a, grid).unwrap();
    let s = spectral_window(&h, t).unwrap();
    let pairs = pairs_1d(&symmetric_points(2.0, 9));
    let p = FitProblem::from_spectrum(a.clone(), &s, t, &pairs, default_ansatz(&a), true)
        .unwrap()
        .with_time_nodes(512)
        .unwrap();
    fit_quantum_action(&p, &FitOptions::default()).unwrap()
}

fn transformation_law() -> Outcome {
    let g = Grid::one_d(7.5, 1501).unwrap();
    let prof = invert_transformation_law(&ho(), 0.5, &g).unwrap();
    let u_err = prof
        .x
        .iter()
        .zip(&prof.u)
        .map(|(x, u)| (u - x * x).abs())
        .fold(0.0, f64::max);

    let a = quartic();
    let grid = Grid::one_d(6.0, 4097).unwrap();
    let s = spectral_decompose(&discretize_hamiltonian(&a, &grid).unwrap(), 1).unwrap();
    let gs = GroundStateInfo::from_spectrum(&s).unwrap();
    let rebuilt = invert_transformation_law(&a, gs.energy, &grid)
        .unwrap()
        .ground_state()
        .unwrap();
    let overlap = rebuilt.overlap(&gs).unwrap();

    let fit = fit_quartic_at(10.0, &grid);
    let mut law = 0.0f64;
    for k in 0..=180 {
        let x = 0.2 + 0.01 * k as f64;
        for x in [x, -x] {
            law = law.max(
                transformation_law_residual(&a, gs.energy, &fit.quantum, x)
                    .unwrap()
                    .abs(),
            );
        }
    }
    outcome(
        u_err < 1e-8 && overlap >= 1.0 - 1e-6 && law < 1e-2,
        format!(
            "HO max |U - x^2| = {u_err:.1e}; quartic overlap deficit {:.1e}; fitted T=10 law residual {law:.2e} (m~ {:.4}, v2~ {:.4}, v4~ {:.5}, v0~ {:.5})",
            1.0 - overlap,
            fit.mass(),
            fit.parameter("v2").unwrap(),
            fit.parameter("v4").unwrap(),
            fit.parameter("v0").unwrap()
        ),
    )
}

fn exact_wkb() -> Outcome {
    let grid = Grid::one_d(7.5, 8193).unwrap();
    let ho_report = wkb_compare(&ho(), &action(&[(0, 0.5), (2, 0.5)]), 0.5, &grid).unwrap();
    let mut pass = ho_report.quantum_distance < 1e-6
        && ho_report.classical_distance > ho_report.quantum_distance;
    let mut detail = format!(
        "HO quantum {:.1e} vs classical {:.2}",
        ho_report.quantum_distance, ho_report.classical_distance
    );
    let grid = Grid::one_d(6.0, 4097).unwrap();
    for (name, a) in [
        ("quartic", quartic()),
        ("pure x^4", action(&[(4, 1.0)])),
        ("sextic", action(&[(2, 1.0), (6, 0.05)])),
    ] {
        let e = spectral_decompose(&discretize_hamiltonian(&a, &grid).unwrap(), 1)
            .unwrap()
            .ground_energy();
        let prof = invert_transformation_law(&a, e, &grid).unwrap();
        let r = wkb_compare_profile(&a, &prof, &grid).unwrap();
        pass &= r.classical_distance > r.quantum_distance;
        detail.push_str(&format!(
            "; {name} {:.1e} vs {:.2}",
            r.quantum_distance, r.classical_distance
        ));
    }
    outcome(pass, detail)
}

fn hydrogen() -> Outcome {
    let one = Ratio::from_integer(1);
    let mut pass = true;
    for l in 1..=10u32 {
        let x = hydrogen_sector_exact(l, one, one, one).unwrap();
        let n = Ratio::from_integer(l as i128 + 1);
        let a0l = x.bohr_radius * Ratio::from_integer((l * (l + 1)) as i128);
        pass &= x.identities_hold()
            && x.energy == -x.ionization / (n * n)
            && x.potential_minimum_radius == a0l
            && x.wavefunction_peak_radius == a0l;
        pass &= hydrogen_sector(l, &HydrogenUnits::ATOMIC).is_ok();
    }
    outcome(pass, "l = 1..10: -nu^2/4mu = -E_I/(l+1)^2 and argmin V~_l = a0 l(l+1) = argmax phi_l, exact rationals".into())
}

fn scale_symmetry() -> Outcome {
    let a = ActionSpec::new(
        1.3,
        PolynomialPotential::one_d(&[(2, 0.5), (4, 0.2)]).unwrap(),
    )
    .unwrap();
    let grid = Grid::one_d(5.0, 2049).unwrap();
    let pairs = pairs_1d(&symmetric_points(1.5, 7));
    let t = 1.5;
    let base = spectral_window(&discretize_hamiltonian(&a, &grid).unwrap(), t)
        .unwrap()
        .propagate(t, &pairs)
        .unwrap();
    let mut prop = 0.0f64;

    let q = quartic();
    let fit_grid = Grid::one_d(6.0, 2049).unwrap();
    let fpairs = pairs_1d(&symmetric_points(2.0, 7));
    let fit = |act: &ActionSpec, time: f64| {
        let s = spectral_window(&discretize_hamiltonian(act, &fit_grid).unwrap(), time).unwrap();
        let p =
            FitProblem::from_spectrum(act.clone(), &s, time, &fpairs, default_ansatz(act), true)
                .unwrap()
                .with_time_nodes(256)
                .unwrap();
        fit_quantum_action(&p, &FitOptions::default()).unwrap()
    };
    let reference = fit(&q, 2.0);
    let mut cov = 0.0f64;
    for alpha in [0.5, 2.0] {
        let st = ScaleTransform::new(alpha).unwrap();
        let (b, tb) = st.apply(&a, t);
        let g = spectral_window(&discretize_hamiltonian(&b, &grid).unwrap(), tb)
            .unwrap()
            .propagate(tb, &pairs)
            .unwrap();
        for (x, y) in g.amplitudes().iter().zip(base.amplitudes()) {
            prop = prop.max((x - y).abs() / y);
        }
        let (qb, tq) = st.apply(&q, 2.0);
        let r = fit(&qb, tq);
        let (expected, _) = st.apply(&reference.quantum, 2.0);
        cov = cov.max((r.mass() - expected.mass()).abs() / expected.mass());
        for name in ["v2", "v4", "v0"] {
            let want = match name {
                "v0" => expected.potential().constant(),
                "v2" => expected.potential().coefficient(&[2]),
                _ => expected.potential().coefficient(&[4]),
            };
            cov = cov.max((r.parameter(name).unwrap() - want).abs() / want.abs());
        }
    }
    outcome(
        prop < 1e-6 && cov < 1e-4,
        format!("propagator max relative change {prop:.1e}; fitted parameters covariant within {cov:.1e} relative (alpha = 0.5, 2)"),
    )
}

fn chaos() -> Outcome {
    // (i) integrable ellipses
    let free = anharmonic_model(1.0, 0.5, 0.0).unwrap();
    let spec = SectionSpec::on_shell(&free, 1.0, 10, 0, 200, 0.01, 1e5).unwrap();
    let s = generate_section(&free, &spec).unwrap();
    let mut ellipse = 0.0f64;
    for c in &s.points {
        let init = spec.initial[c.orbit];
        let ex = 0.5 * init.p[0].powi(2) + 0.5 * init.q[0].powi(2);
        ellipse = ellipse.max((0.5 * c.state.p[0].powi(2) + 0.5 * c.state.q[0].powi(2) - ex).abs());
    }
    // (ii) occupancy grows with energy
    let anharmonic = anharmonic_model(1.0, 0.5, 0.05).unwrap();
    let section = |act: &ActionSpec, e: f64| {
        let spec = SectionSpec::above_minimum(act, e, 20, 0, 200, 0.01, 1e5)?;
        generate_section(act, &spec)
    };
    let low = section(&anharmonic, 1.0).unwrap();
    let high = section(&anharmonic, 50.0).unwrap();
    let (occ_low, occ_high) = (
        section_occupancy(&low, 32).unwrap(),
        section_occupancy(&high, 32).unwrap(),
    );
    // (iii) quantum action of the coupled model
    let grid = Grid::two_d(5.0, 64).unwrap();
    let spec = spectral_window(&discretize_hamiltonian(&anharmonic, &grid).unwrap(), 4.0).unwrap();
    let pairs = default_pairs(&spec);
    let p = FitProblem::from_spectrum(
        anharmonic.clone(),
        &spec,
        4.0,
        &pairs,
        symmetric_quartic_ansatz(),
        true,
    )
    .unwrap()
    .with_time_nodes(128)
    .unwrap();
    let fit = fit_quantum_action(&p, &FitOptions::default()).unwrap();
    let v22 = fit.parameter("v22").unwrap();
    let mut comparison = String::new();
    for e in [1.0, 50.0] {
        match section(&fit.quantum, e)
            .and_then(|q| compare_sections(if e == 1.0 { &low } else { &high }, &q, 32))
        {
            Ok(c) => comparison.push_str(&format!(
                " E={e}: symmetric difference {:.3}",
                c.symmetric_fraction
            )),
            Err(err) => comparison.push_str(&format!(" E={e}: no quantum section ({err})")),
        }
    }
    // (iv) long-run energy drift
    let s0 = PhaseState::new([2.0, 1.0], [2.0, 10.6f64.sqrt()]);
    let e0 = anharmonic.energy(&s0.q, &s0.p);
    let mut drift = 0.0f64;
    integrate_realtime_with(&anharmonic, s0, 1e4, 1e-3, |_, _, s| {
        drift = drift.max((anharmonic.energy(&s.q, &s.p) - e0).abs() / e0);
        std::ops::ControlFlow::Continue(())
    })
    .unwrap();
    outcome(
        ellipse < 1e-6 && occ_high > occ_low && v22 < 0.05 && drift < 1e-8,
        format!(
            "(i) ellipse deviation {ellipse:.1e}; (ii) occupancy {occ_low:.3} at E=1 -> {occ_high:.3} at E=50; \
             (iii) m~ {:.4}, v2~ {:.4}, v22~ {v22:.4} < 0.05, v4~ {:.5}, v0~ {:.4}, rms {:.1e}, confining {};{comparison}; \
             (iv) drift {drift:.1e} over 1e7 steps",
            fit.mass(),
            fit.parameter("v2").unwrap(),
            fit.parameter("v4").unwrap(),
            fit.parameter("v0").unwrap(),
            fit.rms_residual,
            fit.confining
        ),
    )
}

fn run_cli(cmd: &str, config: &Path, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_qaction"))
        .args([
            cmd,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let osc = json!({"mass": 1.0, "potential": {"dim": 1, "terms": [{"exp": [2], "coef": 0.5}, {"exp": [4], "coef": 0.1}]}});
    let coupled = json!({"mass": 1.0, "potential": {"dim": 2, "terms": [
        {"exp": [2, 0], "coef": 0.5}, {"exp": [0, 2], "coef": 0.5}, {"exp": [2, 2], "coef": 0.05}]}});
    let mut fitted = coupled.clone();
    fitted["potential"]["terms"][2]["coef"] = json!(0.04);
    let fit_path = dir.path().join("fitted.json");
    fs::write(&fit_path, serde_json::to_vec(&fitted).unwrap()).unwrap();
    let configs = [
        (
            "propagate",
            json!({"action": osc, "grid": {"half_width": 6.0, "points": 2049}, "times": [0.5, 2.0]}),
        ),
        (
            "fit",
            json!({"action": osc, "grid": {"half_width": 6.0, "points": 1025}, "T_list": [1.0, 2.0],
                       "pairs": {"kind": "grid", "range": 1.5, "count": 5}, "time_nodes": 128,
                       "export_paths": [[[0.0], [1.0]]]}),
        ),
        (
            "analytic",
            json!({"action": osc, "grid": {"half_width": 6.0, "points": 2049}, "hydrogen": {"l_max": 4}}),
        ),
        (
            "poincare",
            json!({"action": coupled, "excitations": [2.0, 20.0], "orbits": 4, "max_crossings": 60,
                            "fit_result": fit_path.to_str().unwrap()}),
        ),
    ];
    let mut compared = 0;
    for (cmd, cfg) in &configs {
        let path = dir.path().join(format!("{cmd}.json"));
        fs::write(&path, serde_json::to_vec(cfg).unwrap()).unwrap();
        let (a, b) = (
            dir.path().join(format!("{cmd}-a")),
            dir.path().join(format!("{cmd}-b")),
        );
        if !run_cli(cmd, &path, &a) || !run_cli(cmd, &path, &b) {
            return outcome(false, format!("{cmd} failed to run"));
        }
        let mut names: Vec<_> = fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for n in &names {
            if fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap() {
                return outcome(
                    false,
                    format!("{cmd}: {} differs between runs", n.to_string_lossy()),
                );
            }
            compared += 1;
        }
        if fs::read_dir(&b).unwrap().count() != names.len() {
            return outcome(false, format!("{cmd}: runs wrote different file sets"));
        }
    }
    outcome(
        true,
        format!("4 commands run twice; {compared} output files bitwise identical"),
    )
}

type Criterion = (&'static str, &'static str, f64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1", "harmonic-oscillator kernel", 10.0, ho_kernel),
        (
            "2",
            "existence case (a): oscillator fit",
            300.0,
            oscillator_fit,
        ),
        (
            "3",
            "existence case (b): small-time fit",
            300.0,
            small_time_fit,
        ),
        ("4", "transformation law", 120.0, transformation_law),
        ("5", "exact WKB", 60.0, exact_wkb),
        ("6", "hydrogen sector", 1.0, hydrogen),
        ("7", "scale symmetry", 600.0, scale_symmetry),
        ("8", "chaos pipeline", 1800.0, chaos),
        ("9", "CLI determinism", f64::INFINITY, determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = o.pass && secs < budget;
        if !pass {
            failed += 1;
        }
        let budget_text = if budget.is_finite() {
            format!("{budget} s")
        } else {
            "none".into()
        };
        println!(
            "{} criterion {id} ({name}): {} [{secs:.1} s, budget {budget_text}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
