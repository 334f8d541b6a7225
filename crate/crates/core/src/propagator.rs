//! Euclidean transition amplitudes from a finite-difference spectral
//! decomposition, plus the closed-form harmonic-oscillator kernel.
//!
//! The Hamiltonian `-(hbar^2/2m) Laplacian + V` is discretized with second
//! order central differences on a uniform box with Dirichlet walls. Only the
//! interior nodes are unknowns; eigenfunctions are stored on the full grid with
//! zeros on the walls and normalized as continuum functions (`h^d sum psi^2 =
//! 1`), so `sum_n psi_n(a) psi_n(b) exp(-E_n T / hbar)` is directly the
//! position kernel.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    chebyshev_subspace, fix_sign, SubspaceOptions, SymTridiagonal, SymmetricOperator,
};
use crate::model::{ActionSpec, Point};
use crate::par;

/// Boltzmann weights below this (relative to the ground state) are dropped.
pub const TRUNCATION: f64 = 1e-14;

/// Uniform grid on `[-L, L]` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: [f64; 2],
    points: [usize; 2],
}

impl Grid {
    /// Grid with per-axis half-widths and point counts (`extent.len()` is the
    /// dimension).
    pub fn new(extent: &[(f64, usize)]) -> Result<Self> {
        let dim = extent.len();
        if dim != 1 && dim != 2 {
            return Err(invalid(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        let mut half_width = [0.0; 2];
        let mut points = [1usize; 2];
        for (a, &(l, n)) in extent.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(invalid(format!(
                    "grid half-width must be positive, got {l}"
                )));
            }
            if n < 16 {
                return Err(invalid(format!(
                    "grid needs at least 16 points per axis, got {n}"
                )));
            }
            half_width[a] = l;
            points[a] = n;
        }
        Ok(Self {
            dim,
            half_width,
            points,
        })
    }

    pub fn one_d(l: f64, n: usize) -> Result<Self> {
        Self::new(&[(l, n)])
    }

    /// Square two-dimensional grid.
    pub fn two_d(l: f64, n: usize) -> Result<Self> {
        Self::new(&[(l, n), (l, n)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self, axis: usize) -> f64 {
        self.half_width[axis]
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / (self.points[axis] - 1) as f64
    }

    /// Coordinate of node `i` along `axis`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        // Symmetric formula so that mirrored nodes are exact negatives.
        let n = self.points[axis] - 1;
        let l = self.half_width[axis];
        l * (2 * i as i64 - n as i64) as f64 / n as f64
    }

    /// Node coordinates along `axis`.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis])
            .map(|i| self.coordinate(axis, i))
            .collect()
    }

    /// Number of full-grid nodes.
    pub fn len(&self) -> usize {
        self.points[0] * if self.dim == 2 { self.points[1] } else { 1 }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^d`.
    pub fn cell(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// True when the point lies in the closed box.
    pub fn contains(&self, q: &Point) -> bool {
        (0..self.dim).all(|a| q[a].abs() <= self.half_width[a] * (1.0 + 1e-12))
    }

    /// Half-width at which the ground state of `action` has decayed below
    /// `1e-12` of its peak, estimated from the barrier integral
    /// `int sqrt(2m(V - V_min)) dx / hbar` along the axes and diagonals.
    pub fn confining_extent(action: &ActionSpec) -> Result<f64> {
        let pot = action.potential();
        pot.check_confining()?;
        let (q0, vmin) = pot.minimum();
        let target = 12.0 * core::f64::consts::LN_10 + 3.0;
        let dirs: &[Point] = if action.dim() == 1 {
            &[[1.0, 0.0], [-1.0, 0.0]]
        } else {
            &[
                [1.0, 0.0],
                [-1.0, 0.0],
                [0.0, 1.0],
                [0.0, -1.0],
                [
                    core::f64::consts::FRAC_1_SQRT_2,
                    core::f64::consts::FRAC_1_SQRT_2,
                ],
                [
                    -core::f64::consts::FRAC_1_SQRT_2,
                    -core::f64::consts::FRAC_1_SQRT_2,
                ],
            ]
        };
        let mut extent = 0.0f64;
        for d in dirs {
            let mut s = 0.0;
            let mut r = 0.0;
            let dr = 1e-3;
            while s < target && r < 1e4 {
                let q = [q0[0] + (r + 0.5 * dr) * d[0], q0[1] + (r + 0.5 * dr) * d[1]];
                s += (2.0 * action.mass() * (pot.eval(&q) - vmin))
                    .max(0.0)
                    .sqrt()
                    / action.hbar()
                    * dr;
                r += dr;
            }
            extent = extent.max(r + q0[0].abs().max(q0[1].abs()));
        }
        Ok(extent)
    }

    /// 4-point Lagrange stencil `(first node, weights)` along `axis`.
    fn stencil(&self, axis: usize, x: f64) -> (usize, [f64; 4]) {
        let n = self.points[axis];
        let s = (x + self.half_width[axis]) / self.spacing(axis);
        let i0 = (s.floor() as i64).clamp(1, n as i64 - 3) as usize;
        let t = s - i0 as f64;
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        (i0 - 1, w)
    }

    /// Interpolation weights of a full-grid function at `q`, as
    /// `(node index, weight)` pairs.
    pub fn interpolation(&self, q: &Point) -> Vec<(usize, f64)> {
        let (ix, wx) = self.stencil(0, q[0]);
        if self.dim == 1 {
            return (0..4).map(|a| (ix + a, wx[a])).collect();
        }
        let (iy, wy) = self.stencil(1, q[1]);
        let ny = self.points[1];
        let mut out = Vec::with_capacity(16);
        for a in 0..4 {
            for b in 0..4 {
                out.push(((ix + a) * ny + iy + b, wx[a] * wy[b]));
            }
        }
        out
    }

    /// Coordinates of full-grid node `k`.
    pub fn node(&self, k: usize) -> Point {
        if self.dim == 1 {
            [self.coordinate(0, k), 0.0]
        } else {
            let ny = self.points[1];
            [self.coordinate(0, k / ny), self.coordinate(1, k % ny)]
        }
    }

    fn interior_dims(&self) -> [usize; 2] {
        [
            self.points[0] - 2,
            if self.dim == 2 { self.points[1] - 2 } else { 1 },
        ]
    }

    /// Full-grid index of interior unknown `u`.
    fn interior_to_full(&self, u: usize) -> usize {
        if self.dim == 1 {
            u + 1
        } else {
            let [_, my] = self.interior_dims();
            (u / my + 1) * self.points[1] + (u % my + 1)
        }
    }
}

/// Finite-difference Hamiltonian on the interior nodes of a grid.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    grid: Grid,
    hbar: f64,
    /// `hbar^2 / (2 m h_a^2)` per axis.
    hopping: [f64; 2],
    /// Potential at the interior nodes, x-major.
    potential: Vec<f64>,
}

impl Hamiltonian {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Number of unknowns.
    pub fn size(&self) -> usize {
        self.potential.len()
    }

    pub fn diagonal(&self, u: usize) -> f64 {
        self.potential[u]
            + 2.0
                * (self.hopping[0]
                    + if self.grid.dim == 2 {
                        self.hopping[1]
                    } else {
                        0.0
                    })
    }

    /// Nonzero entries `(row, col, value)` in row order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let [mx, my] = self.grid.interior_dims();
        let mut out = Vec::new();
        for i in 0..mx {
            for j in 0..my {
                let u = i * my + j;
                if i > 0 {
                    out.push((u, u - my, -self.hopping[0]));
                }
                if self.grid.dim == 2 && j > 0 {
                    out.push((u, u - 1, -self.hopping[1]));
                }
                out.push((u, u, self.diagonal(u)));
                if self.grid.dim == 2 && j + 1 < my {
                    out.push((u, u + 1, -self.hopping[1]));
                }
                if i + 1 < mx {
                    out.push((u, u + my, -self.hopping[0]));
                }
            }
        }
        out
    }

    /// The one-dimensional operator as a tridiagonal matrix.
    pub fn tridiagonal(&self) -> Option<SymTridiagonal> {
        if self.grid.dim != 1 {
            return None;
        }
        let n = self.size();
        let kinetic = vec![2.0 * self.hopping[0]; n];
        Some(SymTridiagonal::with_diagonal_sum(
            &kinetic,
            &self.potential,
            vec![-self.hopping[0]; n - 1],
        ))
    }
}

impl SymmetricOperator for Hamiltonian {
    fn dim(&self) -> usize {
        self.size()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let [mx, my] = self.grid.interior_dims();
        let (tx, ty) = (self.hopping[0], self.hopping[1]);
        if self.grid.dim == 1 {
            let d = 2.0 * tx;
            for u in 0..mx {
                let mut s = (self.potential[u] + d) * x[u];
                if u > 0 {
                    s -= tx * x[u - 1];
                }
                if u + 1 < mx {
                    s -= tx * x[u + 1];
                }
                y[u] = s;
            }
            return;
        }
        let d = 2.0 * (tx + ty);
        for i in 0..mx {
            let row = i * my;
            for j in 0..my {
                let u = row + j;
                let mut s = (self.potential[u] + d) * x[u];
                if i > 0 {
                    s -= tx * x[u - my];
                }
                if i + 1 < mx {
                    s -= tx * x[u + my];
                }
                if j > 0 {
                    s -= ty * x[u - 1];
                }
                if j + 1 < my {
                    s -= ty * x[u + 1];
                }
                y[u] = s;
            }
        }
    }

    fn spectral_bounds(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &self.potential {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let t = self.hopping[0]
            + if self.grid.dim == 2 {
                self.hopping[1]
            } else {
                0.0
            };
        (lo, hi + 4.0 * t)
    }
}

/// Builds the finite-difference Hamiltonian of `action` on `grid`.
pub fn discretize_hamiltonian(action: &ActionSpec, grid: &Grid) -> Result<Hamiltonian> {
    if action.dim() != grid.dim {
        return Err(Error::Dimension(format!(
            "potential is {}-dimensional but the grid is {}-dimensional",
            action.dim(),
            grid.dim
        )));
    }
    let hbar = action.hbar();
    let mut hopping = [0.0; 2];
    for a in 0..grid.dim {
        let h = grid.spacing(a);
        hopping[a] = hbar * hbar / (2.0 * action.mass() * h * h);
    }
    let n = grid.interior_dims()[0] * grid.interior_dims()[1];
    let pot = action.potential();
    let potential = (0..n)
        .map(|u| pot.eval(&grid.node(grid.interior_to_full(u))))
        .collect();
    Ok(Hamiltonian {
        grid: grid.clone(),
        hbar,
        hopping,
        potential,
    })
}

/// Lowest eigenpairs of a grid Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralData {
    grid: Grid,
    hbar: f64,
    eigenvalues: Vec<f64>,
    /// Full-grid functions (zero on the walls), continuum normalized.
    eigenvectors: Vec<Vec<f64>>,
    /// Every eigenvalue below this is present.
    complete_below: f64,
    complete: bool,
}

impl SpectralData {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Trapezoidal overlap `<psi_i|psi_j>`.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        let c = self.grid.cell();
        self.eigenvectors[i]
            .iter()
            .zip(&self.eigenvectors[j])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * c
    }

    /// Eigenfunction `n` interpolated at `q`.
    pub fn value(&self, n: usize, q: &Point) -> f64 {
        self.grid
            .interpolation(q)
            .iter()
            .map(|&(k, w)| w * self.eigenvectors[n][k])
            .sum()
    }

    /// Number of levels carrying a Boltzmann weight of at least
    /// [`TRUNCATION`] at time `t`; fails when the stored levels do not reach
    /// that far.
    pub fn levels_for(&self, t: f64) -> Result<usize> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!(
                "transition time must be positive, got {t}"
            )));
        }
        let e0 = self.eigenvalues[0];
        let weight = |e: f64| (-(e - e0) * t / self.hbar).exp();
        if !self.complete && weight(self.complete_below) > TRUNCATION * (1.0 + 1e-9) {
            return Err(invalid(format!(
                "spectral data holds {} levels, too few for T = {t}",
                self.len()
            )));
        }
        Ok(self
            .eigenvalues
            .iter()
            .take_while(|&&e| weight(e) >= TRUNCATION)
            .count())
    }

    /// `G_E(b, t; a, 0)` for each pair `(a, b)`.
    pub fn propagate(&self, t: f64, pairs: &[(Point, Point)]) -> Result<PropagatorTable> {
        let levels = self.levels_for(t)?;
        for (a, b) in pairs {
            if !self.grid.contains(a) || !self.grid.contains(b) {
                return Err(Error::Domain(format!(
                    "pair ({a:?}, {b:?}) lies outside the grid"
                )));
            }
        }
        let e0 = self.eigenvalues[0];
        let scale = (-e0 * t / self.hbar).exp();
        let weights: Vec<f64> = self.eigenvalues[..levels]
            .iter()
            .map(|e| scale * (-(e - e0) * t / self.hbar).exp())
            .collect();
        let amplitudes = par::map(pairs, |(a, b)| {
            let sa = self.grid.interpolation(a);
            let sb = self.grid.interpolation(b);
            let mut g = 0.0;
            for (n, w) in weights.iter().enumerate() {
                let v = &self.eigenvectors[n];
                let pa: f64 = sa.iter().map(|&(k, c)| c * v[k]).sum();
                let pb: f64 = sb.iter().map(|&(k, c)| c * v[k]).sum();
                g += w * pa * pb;
            }
            g
        });
        Ok(PropagatorTable {
            grid: self.grid.clone(),
            time: t,
            pairs: pairs.to_vec(),
            amplitudes,
        })
    }
}

/// Lowest `k` eigenpairs of `h`.
pub fn spectral_decompose(h: &Hamiltonian, k: usize) -> Result<SpectralData> {
    if k == 0 || k > h.size() {
        return Err(invalid(format!(
            "cannot compute {k} eigenpairs of a {}-point grid",
            h.size()
        )));
    }
    let (values, vectors) = if let Some(tri) = h.tridiagonal() {
        tri.lowest(k)
    } else {
        let opts = SubspaceOptions {
            guard: 8.max(k / 3),
            ..SubspaceOptions::default()
        };
        chebyshev_subspace(h, k, None, &opts)?
    };
    let complete_below = *values.last().unwrap_or(&f64::INFINITY);
    Ok(finish(h, values, vectors, complete_below))
}

/// All eigenpairs whose Boltzmann weight relative to the ground state is at
/// least [`TRUNCATION`] at time `t`, i.e. everything needed to propagate for
/// any time `>= t`.
pub fn spectral_window(h: &Hamiltonian, t: f64) -> Result<SpectralData> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!(
            "transition time must be positive, got {t}"
        )));
    }
    let cut = -TRUNCATION.ln() * h.hbar / t;
    if let Some(tri) = h.tridiagonal() {
        let e0 = tri.eigenvalue(0);
        let k = tri.count_below(e0 + cut).max(1);
        let (values, vectors) = tri.lowest(k);
        return Ok(finish(h, values, vectors, e0 + cut));
    }
    let mut k = 8usize.min(h.size());
    let mut start: Option<Vec<Vec<f64>>> = None;
    loop {
        let opts = SubspaceOptions {
            guard: 8.max(k / 3),
            ..SubspaceOptions::default()
        };
        let (values, vectors) = chebyshev_subspace(h, k, start.as_deref(), &opts)?;
        let e0 = values[0];
        if values[k - 1] - e0 > cut || k == h.size() {
            let keep = values.iter().take_while(|&&e| e - e0 <= cut).count().max(1);
            let values: Vec<f64> = values[..keep].to_vec();
            let vectors: Vec<Vec<f64>> = vectors.into_iter().take(keep).collect();
            return Ok(finish(h, values, vectors, e0 + cut));
        }
        // Estimate the count from the spread so far, growing at least by half.
        let grow = (k as f64 * 1.5).ceil() as usize;
        let density = k as f64 / (values[k - 1] - e0).max(1e-12);
        let want = (density * cut * 1.2) as usize + 4;
        k = grow.max(want).min(h.size());
        start = Some(vectors);
    }
}

fn finish(
    h: &Hamiltonian,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    complete_below: f64,
) -> SpectralData {
    let grid = &h.grid;
    let norm = 1.0 / grid.cell().sqrt();
    let eigenvectors = vectors
        .into_iter()
        .map(|mut v| {
            fix_sign(&mut v);
            let mut full = vec![0.0; grid.len()];
            for (u, x) in v.iter().enumerate() {
                full[grid.interior_to_full(u)] = x * norm;
            }
            full
        })
        .collect();
    let complete = values.len() == h.size();
    SpectralData {
        grid: grid.clone(),
        hbar: h.hbar,
        eigenvalues: values,
        eigenvectors,
        complete_below,
        complete,
    }
}

/// Euclidean amplitudes at fixed `T` for a list of boundary-point pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorTable {
    grid: Grid,
    time: f64,
    pairs: Vec<(Point, Point)>,
    amplitudes: Vec<f64>,
}

impl PropagatorTable {
    /// Table from externally computed amplitudes.
    pub fn from_parts(
        grid: Grid,
        time: f64,
        pairs: Vec<(Point, Point)>,
        amplitudes: Vec<f64>,
    ) -> Result<Self> {
        if pairs.len() != amplitudes.len() {
            return Err(invalid("pair and amplitude counts differ"));
        }
        if !(time > 0.0) {
            return Err(invalid(format!(
                "transition time must be positive, got {time}"
            )));
        }
        Ok(Self {
            grid,
            time,
            pairs,
            amplitudes,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn pairs(&self) -> &[(Point, Point)] {
        &self.pairs
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Amplitude of the pair equal to `(a, b)`, if tabulated.
    pub fn lookup(&self, a: &Point, b: &Point) -> Option<f64> {
        self.pairs
            .iter()
            .position(|(p, q)| p == a && q == b)
            .map(|i| self.amplitudes[i])
    }

    /// True when every amplitude is strictly positive.
    pub fn is_positive(&self) -> bool {
        self.amplitudes.iter().all(|&g| g > 0.0)
    }
}

/// Euclidean amplitudes of `action` on `grid` at time `t`.
pub fn euclidean_propagate(
    action: &ActionSpec,
    grid: &Grid,
    t: f64,
    pairs: &[(Point, Point)],
) -> Result<PropagatorTable> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!(
            "transition time must be positive, got {t}"
        )));
    }
    let h = discretize_hamiltonian(action, grid)?;
    spectral_window(&h, t)?.propagate(t, pairs)
}

/// Real or imaginary (Euclidean) transition time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    Real,
    Euclidean,
}

/// Classical action of the harmonic oscillator between `xi` and `xf` in time
/// `t`. The Euclidean form is the value of `int (m/2) xdot^2 + V`.
pub fn ho_classical_action(
    m: f64,
    omega: f64,
    xi: f64,
    xf: f64,
    t: f64,
    kind: TimeKind,
) -> Result<f64> {
    let wt = omega * t;
    let (s, c) = match kind {
        TimeKind::Real => (wt.sin(), wt.cos()),
        TimeKind::Euclidean => {
            if !(t > 0.0) {
                return Err(invalid(format!("Euclidean time must be positive, got {t}")));
            }
            (wt.sinh(), wt.cosh())
        }
    };
    if s.abs() < 1e-14 * c.abs().max(1.0) {
        return Err(Error::Domain(format!("caustic at omega T = {wt}")));
    }
    Ok(m * omega / (2.0 * s) * ((xf * xf + xi * xi) * c - 2.0 * xi * xf))
}

/// Closed-form harmonic-oscillator propagator. The real-time kernel is
/// `sqrt(m w / (2 pi i hbar sin wT)) exp(i S_cl / hbar)` on the principal
/// branch; the Euclidean kernel is real and returned with zero imaginary part.
pub fn ho_exact_propagator(
    m: f64,
    omega: f64,
    hbar: f64,
    xi: f64,
    xf: f64,
    t: f64,
    kind: TimeKind,
) -> Result<Complex64> {
    let s = ho_classical_action(m, omega, xi, xf, t, kind)?;
    let two_pi = 2.0 * core::f64::consts::PI;
    match kind {
        TimeKind::Euclidean => {
            let z = (m * omega / (two_pi * hbar * (omega * t).sinh())).sqrt();
            Ok(Complex64::new(z * (-s / hbar).exp(), 0.0))
        }
        TimeKind::Real => {
            let denom = Complex64::new(0.0, two_pi * hbar * (omega * t).sin());
            let z = (Complex64::new(m * omega, 0.0) / denom).sqrt();
            Ok(z * Complex64::new(0.0, s / hbar).exp())
        }
    }
}

/// Euclidean harmonic-oscillator kernel as a real number.
pub fn ho_euclidean_kernel(m: f64, omega: f64, hbar: f64, xi: f64, xf: f64, t: f64) -> Result<f64> {
    ho_exact_propagator(m, omega, hbar, xi, xf, t, TimeKind::Euclidean).map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{p1, PolynomialPotential};

    fn ho(m: f64, k: f64) -> ActionSpec {
        ActionSpec::new(m, PolynomialPotential::one_d(&[(2, 0.5 * k)]).unwrap()).unwrap()
    }

    #[test]
    fn free_particle_stencil() {
        let a = ActionSpec::new(1.0, PolynomialPotential::zero(1).unwrap()).unwrap();
        let g = Grid::one_d(1.0, 33).unwrap();
        let h = discretize_hamiltonian(&a, &g).unwrap();
        let hh = g.spacing(0);
        for (r, c, v) in h.triplets() {
            if r == c {
                assert!((v - 1.0 / (hh * hh)).abs() < 1e-12 * v);
            } else {
                assert!((v + 0.5 / (hh * hh)).abs() < 1e-12 * v.abs());
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::one_d(1.0, 15).is_err());
        assert!(Grid::one_d(0.0, 64).is_err());
        let g = Grid::one_d(2.0, 17).unwrap();
        assert_eq!(g.coordinate(0, 0), -2.0);
        assert_eq!(g.coordinate(0, 16), 2.0);
        assert_eq!(g.coordinate(0, 8), 0.0);
        assert_eq!(g.coordinate(0, 3), -g.coordinate(0, 13));
    }

    #[test]
    fn harmonic_ground_level() {
        let g = Grid::one_d(10.0, 513).unwrap();
        let h = discretize_hamiltonian(&ho(1.0, 1.0), &g).unwrap();
        let s = spectral_decompose(&h, 4).unwrap();
        assert!((s.eigenvalues()[0] - 0.5).abs() < 1e-4);
        for i in 0..4 {
            for j in 0..4 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((s.overlap(i, j) - d).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_d_hamiltonian_is_symmetric() {
        let pot =
            PolynomialPotential::two_d(&[((2, 0), 0.5), ((0, 2), 0.5), ((2, 2), 0.05)]).unwrap();
        let a = ActionSpec::new(1.0, pot).unwrap();
        let g = Grid::two_d(6.0, 64).unwrap();
        let h = discretize_hamiltonian(&a, &g).unwrap();
        let trip = h.triplets();
        let mut map = std::collections::HashMap::new();
        for &(r, c, v) in &trip {
            map.insert((r, c), v);
        }
        let worst = trip
            .iter()
            .map(|&(r, c, v)| (v - map[&(c, r)]).abs())
            .fold(0.0, f64::max);
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn two_d_uncoupled_levels() {
        let pot = PolynomialPotential::two_d(&[((2, 0), 0.5), ((0, 2), 0.5)]).unwrap();
        let a = ActionSpec::new(1.0, pot).unwrap();
        let g = Grid::two_d(5.0, 160).unwrap();
        let h = discretize_hamiltonian(&a, &g).unwrap();
        let s = spectral_decompose(&h, 3).unwrap();
        for (e, x) in s.eigenvalues().iter().zip([1.0, 2.0, 2.0]) {
            assert!((e - x).abs() < 1e-3, "{e}");
        }
        assert!(s.overlap(1, 2).abs() < 1e-10);
    }

    #[test]
    fn euclidean_kernel_closed_form() {
        let g = ho_euclidean_kernel(1.0, 1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let sinh1 = (core::f64::consts::E - 1.0 / core::f64::consts::E) / 2.0;
        assert!((g - 1.0 / (2.0 * core::f64::consts::PI * sinh1).sqrt()).abs() < 1e-15);
        assert!((g - 0.36800).abs() < 1e-4);
        assert_eq!(
            ho_classical_action(1.0, 1.0, 0.0, 0.0, 3.7, TimeKind::Euclidean).unwrap(),
            0.0
        );
        let t = 1e-6;
        let small = ho_euclidean_kernel(1.0, 1.0, 1.0, 0.0, 0.0, t).unwrap();
        let free = (1.0 / (2.0 * core::f64::consts::PI * t)).sqrt();
        assert!((small / free - 1.0).abs() < 1e-9);
        assert!(matches!(
            ho_exact_propagator(
                1.0,
                1.0,
                1.0,
                0.0,
                1.0,
                core::f64::consts::PI,
                TimeKind::Real
            ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn real_time_kernel_satisfies_short_time_limit() {
        // |K|^2 = m / (2 pi hbar |sin wT|)
        let k = ho_exact_propagator(1.0, 1.0, 1.0, 0.3, -0.2, 0.7, TimeKind::Real).unwrap();
        let expect = 1.0 / (2.0 * core::f64::consts::PI * 0.7f64.sin());
        assert!((k.norm_sqr() - expect).abs() < 1e-12);
    }

    #[test]
    fn propagate_rejects_bad_input() {
        let g = Grid::one_d(4.0, 257).unwrap();
        let a = ho(1.0, 1.0);
        assert!(euclidean_propagate(&a, &g, 0.0, &[(p1(0.0), p1(0.0))]).is_err());
        assert!(matches!(
            euclidean_propagate(&a, &g, 1.0, &[(p1(0.0), p1(5.0))]),
            Err(Error::Domain(_))
        ));
        let g2 = Grid::two_d(4.0, 32).unwrap();
        assert!(matches!(
            discretize_hamiltonian(&a, &g2),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn kernel_symmetry_and_origin_value() {
        let g = Grid::one_d(8.0, 4097).unwrap();
        let a = ActionSpec::new(
            1.0,
            PolynomialPotential::one_d(&[(2, 0.5), (4, 0.1), (1, 0.2)]).unwrap(),
        )
        .unwrap();
        let pairs = [(p1(0.3), p1(-1.1)), (p1(-1.1), p1(0.3))];
        let t = euclidean_propagate(&a, &g, 0.8, &pairs).unwrap();
        assert!((t.amplitudes()[0] - t.amplitudes()[1]).abs() < 1e-10);
        assert!(t.is_positive());
        let t = euclidean_propagate(&ho(1.0, 1.0), &g, 1.0, &[(p1(0.0), p1(0.0))]).unwrap();
        assert!((t.amplitudes()[0] - 0.36800).abs() < 1e-4);
    }

    #[test]
    fn window_refuses_shorter_times() {
        let g = Grid::one_d(8.0, 1025).unwrap();
        let h = discretize_hamiltonian(&ho(1.0, 1.0), &g).unwrap();
        let s = spectral_window(&h, 2.0).unwrap();
        assert!(s.propagate(4.0, &[(p1(0.0), p1(0.0))]).is_ok());
        assert!(s.propagate(0.5, &[(p1(0.0), p1(0.0))]).is_err());
    }
}
