use nalgebra::DMatrix;
use qaction_core::model::{p1, ActionSpec, PolynomialPotential, ScaleTransform};
use qaction_core::propagator::{
    discretize_hamiltonian, ho_euclidean_kernel, spectral_decompose, spectral_window, Grid,
};

fn ho() -> ActionSpec {
    ActionSpec::new(1.0, PolynomialPotential::one_d(&[(2, 0.5)]).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn line_pairs(r: f64, n: usize) -> Vec<([f64; 2], [f64; 2])> {
    let pts: Vec<f64> = (0..n)
        .map(|i| -r + 2.0 * r * i as f64 / (n - 1) as f64)
        .collect();
    pts.iter()
        .flat_map(|&a| pts.iter().map(move |&b| (p1(a), p1(b))))
        .collect()
}

#[test]
fn free_particle_diagonal_and_hopping() {
    let a = ActionSpec::new(2.0, PolynomialPotential::zero(1).unwrap()).unwrap();
    let g = Grid::one_d(3.0, 61).unwrap();
    let h = discretize_hamiltonian(&a, &g).unwrap();
    let step = g.spacing(0);
    let hop = 1.0 / (2.0 * 2.0 * step * step);
    for (r, c, v) in h.triplets() {
        let want = if r == c { 2.0 * hop } else { -hop };
        assert!(rel(v, want) < 1e-14);
        assert!(r.abs_diff(c) <= 1);
    }
}

#[test]
fn two_dimensional_operator_is_symmetric() {
    let a = ActionSpec::new(
        1.0,
        PolynomialPotential::two_d(&[((2, 0), 0.5), ((0, 2), 0.5), ((2, 2), 0.05), ((1, 0), 0.3)])
            .unwrap(),
    )
    .unwrap();
    let h = discretize_hamiltonian(&a, &Grid::two_d(3.0, 17).unwrap()).unwrap();
    let n = h.size();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (r, c, v) in h.triplets() {
        m[(r, c)] = v;
    }
    assert_eq!((&m - m.transpose()).amax(), 0.0);
}

#[test]
fn oscillator_levels() {
    let h = discretize_hamiltonian(&ho(), &Grid::one_d(10.0, 513).unwrap()).unwrap();
    let s = spectral_decompose(&h, 5).unwrap();
    assert!((s.ground_energy() - 0.5).abs() < 1e-4);
    let h = discretize_hamiltonian(&ho(), &Grid::one_d(10.0, 1025).unwrap()).unwrap();
    let s = spectral_decompose(&h, 5).unwrap();
    for (k, e) in s.eigenvalues().iter().enumerate() {
        assert!((e - (k as f64 + 0.5)).abs() < 1e-3, "level {k}: {e}");
    }
    for i in 0..5 {
        for j in 0..5 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((s.overlap(i, j) - want).abs() < 1e-10);
        }
    }
}

#[test]
fn amplitudes_symmetric_and_positive() {
    let a = ActionSpec::new(
        1.0,
        PolynomialPotential::one_d(&[(2, 0.5), (4, 0.1), (3, 0.05)]).unwrap(),
    )
    .unwrap();
    let h = discretize_hamiltonian(&a, &Grid::one_d(6.0, 1025).unwrap()).unwrap();
    let s = spectral_window(&h, 0.5).unwrap();
    for t in [0.5, 2.0, 10.0] {
        let pairs = line_pairs(2.0, 9);
        let g = s.propagate(t, &pairs).unwrap();
        assert!(g.is_positive());
        for ((x, y), v) in pairs.iter().zip(g.amplitudes()) {
            let back = g.lookup(y, x).unwrap();
            assert!(rel(back, *v) < 1e-10, "{x:?} {y:?}");
        }
    }
}

#[test]
fn semigroup_on_grid_nodes() {
    let a = ActionSpec::new(
        1.0,
        PolynomialPotential::one_d(&[(2, 0.5), (4, 0.1)]).unwrap(),
    )
    .unwrap();
    let grid = Grid::one_d(6.0, 801).unwrap();
    let h = discretize_hamiltonian(&a, &grid).unwrap();
    let s = spectral_window(&h, 0.3).unwrap();
    let (t1, t2) = (0.3, 0.7);
    let ends = [
        (p1(-1.05), p1(0.45)),
        (p1(0.0), p1(0.0)),
        (p1(1.5), p1(-0.3)),
    ];
    let nodes: Vec<f64> = grid.axis(0);
    let step = grid.spacing(0);
    let direct = s.propagate(t1 + t2, &ends).unwrap();
    for ((x, z), want) in ends.iter().zip(direct.amplitudes()) {
        let left: Vec<_> = nodes.iter().map(|&y| (*x, p1(y))).collect();
        let right: Vec<_> = nodes.iter().map(|&y| (p1(y), *z)).collect();
        let gl = s.propagate(t1, &left).unwrap();
        let gr = s.propagate(t2, &right).unwrap();
        let composed: f64 = gl
            .amplitudes()
            .iter()
            .zip(gr.amplitudes())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * step;
        assert!(rel(composed, *want) < 1e-6, "{composed} vs {want}");
    }
}

#[test]
fn scale_invariance() {
    let a = ActionSpec::new(
        1.3,
        PolynomialPotential::one_d(&[(2, 0.5), (4, 0.2)]).unwrap(),
    )
    .unwrap();
    let grid = Grid::one_d(5.0, 1025).unwrap();
    let t = 1.5;
    let pairs = line_pairs(1.5, 7);
    let base = {
        let h = discretize_hamiltonian(&a, &grid).unwrap();
        spectral_window(&h, t)
            .unwrap()
            .propagate(t, &pairs)
            .unwrap()
    };
    for alpha in [0.5, 2.0] {
        let (b, tb) = ScaleTransform::new(alpha).unwrap().apply(&a, t);
        let h = discretize_hamiltonian(&b, &grid).unwrap();
        let g = spectral_window(&h, tb)
            .unwrap()
            .propagate(tb, &pairs)
            .unwrap();
        for (x, y) in g.amplitudes().iter().zip(base.amplitudes()) {
            assert!(rel(*x, *y) < 1e-6, "alpha {alpha}: {x} vs {y}");
        }
    }
}

#[test]
fn feynman_kac_limit() {
    let a = ActionSpec::new(
        1.0,
        PolynomialPotential::one_d(&[(2, 0.5), (4, 0.1)]).unwrap(),
    )
    .unwrap();
    let h = discretize_hamiltonian(&a, &Grid::one_d(6.0, 1025).unwrap()).unwrap();
    let s = spectral_window(&h, 8.0).unwrap();
    let (t, t2) = (10.0, 8.0);
    let origin = [(p1(0.0), p1(0.0))];
    let g = s.propagate(t, &origin).unwrap().amplitudes()[0];
    let g2 = s.propagate(t2, &origin).unwrap().amplitudes()[0];
    let estimate = -(g.ln() - g2.ln()) / (t - t2);
    assert!(
        (estimate - s.ground_energy()).abs() < 1e-6,
        "{estimate} vs {}",
        s.ground_energy()
    );
}

#[test]
fn second_order_grid_convergence() {
    let (t, xi, xf) = (1.0, 0.3, -0.4);
    let exact = ho_euclidean_kernel(1.0, 1.0, 1.0, xi, xf, t).unwrap();
    let err = |n: usize| {
        let g = Grid::one_d(8.0, n).unwrap();
        let h = discretize_hamiltonian(&ho(), &g).unwrap();
        let v = spectral_window(&h, t)
            .unwrap()
            .propagate(t, &[(p1(xi), p1(xf))])
            .unwrap()
            .amplitudes()[0];
        (v - exact).abs()
    };
    // Pair coordinates fall on the nodes of all three grids.
    let e: Vec<f64> = [401, 801, 1601].iter().map(|&n| err(n)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "order {order} from {e:?}");
    }
}

#[test]
fn quartic_ground_energy_against_dense_oracle() {
    let a = ActionSpec::new(1.0, PolynomialPotential::one_d(&[(4, 1.0)]).unwrap()).unwrap();
    let e = spectral_decompose(
        &discretize_hamiltonian(&a, &Grid::one_d(4.0, 801).unwrap()).unwrap(),
        1,
    )
    .unwrap()
    .ground_energy();
    // Independent dense diagonalization at doubled resolution.
    let n = 1601;
    let step = 8.0 / (n - 1) as f64;
    let m = n - 2;
    let hop = 1.0 / (2.0 * step * step);
    let mut dense = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let x = -4.0 + (i + 1) as f64 * step;
        dense[(i, i)] = 2.0 * hop + x.powi(4);
        if i + 1 < m {
            dense[(i, i + 1)] = -hop;
            dense[(i + 1, i)] = -hop;
        }
    }
    let oracle = dense.symmetric_eigenvalues().min();
    assert!((e - oracle).abs() < 1e-3, "{e} vs {oracle}");
    assert!((oracle - 0.667_986).abs() < 1e-3);
}
