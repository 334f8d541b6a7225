//! Eigensolvers and banded solvers used by the propagator and the boundary
//! value problems.
//!
//! * Symmetric tridiagonal matrices: Sturm-sequence bisection for eigenvalues,
//!   inverse iteration for eigenvectors.
//! * Large sparse symmetric operators: Chebyshev-filtered subspace iteration
//!   with Rayleigh-Ritz projection. The block form resolves degenerate levels,
//!   which a single-vector Krylov method would miss.
//! * Block tridiagonal symmetric positive definite systems with 1x1 or 2x2
//!   blocks (block Cholesky).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// Rounding error of `diag`: the exact diagonal is `diag + diag_tail`.
    diag_tail: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        let diag_tail = vec![0.0; diag.len()];
        Self {
            diag,
            off,
            diag_tail,
        }
    }

    /// Matrix whose diagonal is the exact sum `a_i + b_i`, kept to double-double
    /// precision for eigenvector refinement.
    pub fn with_diagonal_sum(a: &[f64], b: &[f64], off: Vec<f64>) -> Self {
        let (diag, diag_tail) = a.iter().zip(b).map(|(&x, &y)| dd::two_sum(x, y)).unzip();
        let mut t = Self::new(diag, off);
        t.diag_tail = diag_tail;
        t
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let (lo, hi) = self.gershgorin();
        self.sturm(x, f64::MIN_POSITIVE.sqrt() * (hi - lo).abs().max(1.0))
    }

    fn sturm(&self, x: f64, tiny: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            q = self.diag[i]
                - x
                - if i > 0 {
                    self.off[i - 1] * self.off[i - 1] / q
                } else {
                    0.0
                };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `j`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.lowest_eigenvalues(j + 1, 2.0 * f64::EPSILON)[j]
    }

    /// The `k` smallest eigenvalues by bisection to an absolute tolerance of
    /// `rel` times the spectral width (plus rounding). Brackets are shared, so
    /// every Sturm count narrows all intervals it bounds.
    pub fn lowest_eigenvalues(&self, k: usize, rel: f64) -> Vec<f64> {
        let k = k.min(self.len());
        let (glo, ghi) = self.gershgorin();
        let width = (ghi - glo).abs().max(1.0);
        let tiny = f64::MIN_POSITIVE.sqrt() * width;
        let pad = 1e-12 * width;
        let mut lower = vec![glo - pad; k];
        let mut upper = vec![ghi + pad; k];
        for j in 0..k {
            if j > 0 {
                lower[j] = lower[j].max(lower[j - 1]);
            }
            for _ in 0..200 {
                let (lo, hi) = (lower[j], upper[j]);
                let mid = 0.5 * (lo + hi);
                if mid <= lo
                    || mid >= hi
                    || hi - lo <= rel * width + 2.0 * f64::EPSILON * lo.abs().max(hi.abs())
                {
                    break;
                }
                let c = self.sturm(mid, tiny);
                for u in upper.iter_mut().take(c.min(k)) {
                    *u = u.min(mid);
                }
                for l in lower.iter_mut().skip(c) {
                    *l = l.max(mid);
                }
            }
        }
        lower
            .iter()
            .zip(&upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Solves `(A - shift I) x = b` by Gaussian elimination with partial
    /// pivoting. Zero pivots are replaced by a tiny multiple of the norm, which
    /// is what inverse iteration wants.
    fn shifted_solve(&self, shift: f64, b: &mut [f64]) {
        let n = self.len();
        if n == 0 {
            return;
        }
        let (glo, ghi) = self.gershgorin();
        let tiny = f64::EPSILON * glo.abs().max(ghi.abs()).max(1.0);
        let mut d: Vec<f64> = self.diag.iter().map(|a| a - shift).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut dl: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -f;
                }
                swap[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        for i in 0..n.saturating_sub(1) {
            if swap[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= dl[i] * b[i];
        }
        b[n - 1] /= d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
    }

    /// Eigenvector of the eigenvalue `lambda` by inverse iteration,
    /// orthogonalized against `previous` (vectors of nearby eigenvalues).
    pub fn eigenvector(&self, lambda: f64, previous: &[&[f64]]) -> Vec<f64> {
        let n = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ n as u64);
        let mut x: Vec<f64> = (0..n).map(|_| 1.0 + 0.5 * uniform(&mut rng)).collect();
        for _ in 0..4 {
            self.shifted_solve(lambda, &mut x);
            for p in previous {
                let c = dot(p, &x);
                axpy(-c, p, &mut x);
            }
            let nrm = dot(&x, &x).sqrt();
            if nrm == 0.0 || !nrm.is_finite() {
                break;
            }
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        x
    }

    /// Two steps of Rayleigh-quotient inverse iteration in double-double
    /// arithmetic. In plain double precision eigenvectors of fine-grid
    /// Hamiltonians carry errors of order `eps |T| / gap`, which swamp the
    /// exponentially small far-off-diagonal kernel values.
    pub fn refine(&self, lambda: f64, v: &[f64]) -> (f64, Vec<f64>) {
        use dd::Dd;
        let n = self.len();
        let diag: Vec<Dd> = self
            .diag
            .iter()
            .zip(&self.diag_tail)
            .map(|(&a, &b)| Dd::new(a, b))
            .collect();
        let mut x: Vec<Dd> = v.iter().map(|&a| Dd::from(a)).collect();
        let mut sigma = Dd::from(lambda);
        for _ in 0..2 {
            dd::shifted_solve(&diag, &self.off, sigma, &mut x);
            dd::normalize(&mut x);
            sigma = dd::rayleigh(&diag, &self.off, &x);
        }
        let mut out: Vec<f64> = x.iter().map(|d| d.hi).collect();
        if dot(&out, v) < 0.0 {
            out.iter_mut().for_each(|a| *a = -*a);
        }
        debug_assert_eq!(out.len(), n);
        (sigma.hi, out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// The `k` lowest eigenpairs; eigenvectors have unit Euclidean norm.
    pub fn lowest(&self, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let k = k.min(self.len());
        let mut values = self.lowest_eigenvalues(k, 1e-13);
        let (lo, hi) = self.gershgorin();
        let width = (hi - lo).abs().max(1.0);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for j in 0..k {
            let lam = values[j];
            let near: Vec<&[f64]> = (0..j)
                .filter(|&i| (values[i] - lam).abs() < 1e-9 * width)
                .map(|i| vectors[i].as_slice())
                .collect();
            let v0 = self.eigenvector(lam, &near);
            let (lam, mut v) = self.refine(lam, &v0);
            values[j] = lam;
            // Inverse iteration leaves overlaps of order eps * |T| / gap; one
            // Gram-Schmidt sweep over the neighbourhood removes them.
            for i in (0..j).filter(|&i| (values[i] - lam).abs() < 1e-3 * width) {
                let c = dot(&vectors[i], &v);
                axpy(-c, &vectors[i], &mut v);
            }
            let nrm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            fix_sign(&mut v);
            vectors.push(v);
        }
        (values, vectors)
    }
}

/// Minimal double-double arithmetic (Dekker/Knuth error-free transforms).
mod dd {
    use alloc::vec::Vec;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn split(a: f64) -> (f64, f64) {
        let t = 134_217_729.0 * a;
        let hi = t - (t - a);
        (hi, a - hi)
    }

    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        let (ah, al) = split(a);
        let (bh, bl) = split(b);
        (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
    }

    impl Dd {
        pub fn new(hi: f64, lo: f64) -> Self {
            quick_two_sum(hi, lo)
        }
        pub fn add(self, o: Dd) -> Dd {
            let (s, e) = two_sum(self.hi, o.hi);
            let (t, f) = two_sum(self.lo, o.lo);
            let r = quick_two_sum(s, e + t);
            quick_two_sum(r.hi, r.lo + f)
        }
        pub fn neg(self) -> Dd {
            Dd {
                hi: -self.hi,
                lo: -self.lo,
            }
        }
        pub fn sub(self, o: Dd) -> Dd {
            self.add(o.neg())
        }
        pub fn mul(self, o: Dd) -> Dd {
            let (p, e) = two_prod(self.hi, o.hi);
            quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
        }
        pub fn div(self, o: Dd) -> Dd {
            let q1 = self.hi / o.hi;
            let r = self.sub(o.mul(Dd::from(q1)));
            let q2 = r.hi / o.hi;
            let r = r.sub(o.mul(Dd::from(q2)));
            let q3 = r.hi / o.hi;
            Dd::new(q1, q2).add(Dd::from(q3))
        }
        pub fn abs(self) -> Dd {
            if self.hi < 0.0 {
                self.neg()
            } else {
                self
            }
        }
        pub fn sqrt(self) -> Dd {
            if self.hi <= 0.0 {
                return Dd::from(0.0);
            }
            let x = Dd::from(num_traits::Float::sqrt(self.hi));
            // One Newton step: x + (a - x^2) / 2x.
            x.add(self.sub(x.mul(x)).div(x.add(x)))
        }
    }

    impl From<f64> for Dd {
        fn from(hi: f64) -> Self {
            Dd { hi, lo: 0.0 }
        }
    }

    /// Solves `(T - sigma) x = b` in place with partial pivoting.
    pub fn shifted_solve(diag: &[Dd], off: &[f64], sigma: Dd, b: &mut [Dd]) {
        let n = diag.len();
        if n == 0 {
            return;
        }
        let scale = diag.iter().map(|d| d.hi.abs()).fold(0.0, f64::max).max(1.0);
        let tiny = Dd::from(1e-30 * scale);
        let mut d: Vec<Dd> = diag.iter().map(|&a| a.sub(sigma)).collect();
        let mut du: Vec<Dd> = off.iter().map(|&a| Dd::from(a)).collect();
        let mut dl: Vec<Dd> = du.clone();
        let mut du2 = alloc::vec![Dd::from(0.0); n.saturating_sub(2)];
        let mut swap = alloc::vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs().hi >= dl[i].abs().hi {
                if d[i].hi == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i].div(d[i]);
                dl[i] = f;
                d[i + 1] = d[i + 1].sub(f.mul(du[i]));
            } else {
                let f = d[i].div(dl[i]);
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp.sub(f.mul(d[i + 1]));
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = f.mul(du[i + 1]).neg();
                }
                swap[i] = true;
            }
        }
        if d[n - 1].hi == 0.0 {
            d[n - 1] = tiny;
        }
        for i in 0..n.saturating_sub(1) {
            if swap[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] = b[i + 1].sub(dl[i].mul(b[i]));
        }
        b[n - 1] = b[n - 1].div(d[n - 1]);
        if n > 1 {
            b[n - 2] = b[n - 2].sub(du[n - 2].mul(b[n - 1])).div(d[n - 2]);
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = b[i]
                .sub(du[i].mul(b[i + 1]))
                .sub(du2[i].mul(b[i + 2]))
                .div(d[i]);
        }
    }

    pub fn normalize(x: &mut [Dd]) {
        let mut s = Dd::from(0.0);
        for v in x.iter() {
            s = s.add(v.mul(*v));
        }
        let inv = Dd::from(1.0).div(s.sqrt());
        x.iter_mut().for_each(|v| *v = v.mul(inv));
    }

    /// `x^T T x` for a unit vector `x`.
    pub fn rayleigh(diag: &[Dd], off: &[f64], x: &[Dd]) -> Dd {
        let mut s = Dd::from(0.0);
        for i in 0..x.len() {
            s = s.add(diag[i].mul(x[i]).mul(x[i]));
            if i + 1 < x.len() {
                let c = Dd::from(2.0 * off[i]);
                s = s.add(c.mul(x[i]).mul(x[i + 1]));
            }
        }
        s
    }
}

/// Makes the largest-magnitude component positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best * (1.0 + 1e-12) {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// A real symmetric linear operator.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// An interval containing the whole spectrum.
    fn spectral_bounds(&self) -> (f64, f64);
}

impl SymmetricOperator for SymTridiagonal {
    fn dim(&self) -> usize {
        self.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        SymTridiagonal::apply(self, x, y)
    }
    fn spectral_bounds(&self) -> (f64, f64) {
        self.gershgorin()
    }
}

/// Settings for [`chebyshev_subspace`].
#[derive(Debug, Clone)]
pub struct SubspaceOptions {
    /// Relative residual `|Hx - theta x| / max(1, |theta|)` required of every
    /// wanted pair.
    pub tol: f64,
    pub max_iterations: usize,
    /// Chebyshev filter degree.
    pub degree: usize,
    /// Extra block vectors beyond the wanted count.
    pub guard: usize,
    pub seed: u64,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 400,
            degree: 24,
            guard: 8,
            seed: 17,
        }
    }
}

/// Lowest `k` eigenpairs of a symmetric operator by Chebyshev-filtered
/// subspace iteration. `start` optionally seeds the block.
pub fn chebyshev_subspace<O: SymmetricOperator>(
    op: &O,
    k: usize,
    start: Option<&[Vec<f64>]>,
    opts: &SubspaceOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.dim();
    if k == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if k > n {
        return Err(Error::Invalid(alloc::format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let p = (k + opts.guard.max(k / 4)).min(n);
    let (_, upper) = op.spectral_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut block: Vec<Vec<f64>> = Vec::with_capacity(p);
    if let Some(s) = start {
        for v in s.iter().take(p) {
            block.push(v.clone());
        }
    }
    while block.len() < p {
        block.push((0..n).map(|_| uniform(&mut rng)).collect());
    }
    orthonormalize(&mut block);
    let (mut theta, mut hx) = rayleigh_ritz(op, &mut block);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        worst = residuals(&block, &hx, &theta, k);
        if worst < opts.tol {
            return Ok((theta[..k].to_vec(), block.into_iter().take(k).collect()));
        }
        let cut = theta[p - 1];
        let low = theta[0];
        if !(cut < upper) {
            // Whole spectrum already inside the block.
            break;
        }
        chebyshev_filter(op, &mut block, opts.degree, cut, upper, low);
        orthonormalize(&mut block);
        let rr = rayleigh_ritz(op, &mut block);
        theta = rr.0;
        hx = rr.1;
    }
    worst = worst.min(residuals(&block, &hx, &theta, k));
    if worst < opts.tol {
        return Ok((theta[..k].to_vec(), block.into_iter().take(k).collect()));
    }
    Err(Error::NoConvergence {
        what: "subspace eigensolver",
        residual: worst,
    })
}

fn residuals(block: &[Vec<f64>], hx: &[Vec<f64>], theta: &[f64], k: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..k {
        let r: f64 = hx[i]
            .iter()
            .zip(&block[i])
            .map(|(h, x)| {
                let d = h - theta[i] * x;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r / theta[i].abs().max(1.0));
    }
    worst
}

/// Replaces the block by the scaled Chebyshev filter of degree `degree`
/// damping the interval `[cut, upper]`; `low` estimates the lowest eigenvalue.
fn chebyshev_filter<O: SymmetricOperator>(
    op: &O,
    block: &mut [Vec<f64>],
    degree: usize,
    cut: f64,
    upper: f64,
    low: f64,
) {
    let n = op.dim();
    let e = 0.5 * (upper - cut);
    let c = 0.5 * (upper + cut);
    let sigma0 = e / (low - c);
    let mut tmp = vec![0.0; n];
    for x in block.iter_mut() {
        let mut sigma = sigma0;
        let mut prev = x.clone();
        op.apply(&prev, &mut tmp);
        let mut cur: Vec<f64> = tmp
            .iter()
            .zip(&prev)
            .map(|(h, v)| (h - c * v) * sigma / e)
            .collect();
        for _ in 1..degree {
            let sigma_next = 1.0 / (2.0 / sigma0 - sigma);
            op.apply(&cur, &mut tmp);
            let next: Vec<f64> = tmp
                .iter()
                .zip(&cur)
                .zip(&prev)
                .map(|((h, y), xo)| 2.0 * sigma_next / e * (h - c * y) - sigma * sigma_next * xo)
                .collect();
            prev = core::mem::replace(&mut cur, next);
            sigma = sigma_next;
        }
        *x = cur;
    }
}

/// Modified Gram-Schmidt, applied twice.
pub(crate) fn orthonormalize(block: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for i in 0..block.len() {
            let (done, rest) = block.split_at_mut(i);
            let v = &mut rest[0];
            for u in done.iter() {
                let c = dot(u, v);
                axpy(-c, u, v);
            }
            let nrm = dot(v, v).sqrt();
            if nrm > 0.0 {
                v.iter_mut().for_each(|x| *x /= nrm);
            }
        }
    }
}

/// Rotates an orthonormal block onto Ritz vectors; returns ascending Ritz
/// values and the operator applied to the rotated block.
fn rayleigh_ritz<O: SymmetricOperator>(
    op: &O,
    block: &mut [Vec<f64>],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = block.len();
    let n = op.dim();
    let mut hb: Vec<Vec<f64>> = Vec::with_capacity(p);
    for v in block.iter() {
        let mut y = vec![0.0; n];
        op.apply(v, &mut y);
        hb.push(y);
    }
    let mut g = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let s = 0.5 * (dot(&block[i], &hb[j]) + dot(&block[j], &hb[i]));
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    let eig = g.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let rotate = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
        order
            .iter()
            .map(|&col| {
                let mut out = vec![0.0; n];
                for (r, v) in src.iter().enumerate() {
                    axpy(eig.eigenvectors[(r, col)], v, &mut out);
                }
                out
            })
            .collect()
    };
    let x = rotate(block);
    let hx = rotate(&hb);
    for (dst, src) in block.iter_mut().zip(x) {
        *dst = src;
    }
    (theta, hx)
}

/// Symmetric block tridiagonal matrix with `d x d` blocks (`d` = 1 or 2),
/// stored row-major in `[f64; 4]`.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    pub d: usize,
    pub diag: Vec<[f64; 4]>,
    /// `lower[i]` couples unknown `i + 1` to unknown `i`.
    pub lower: Vec<[f64; 4]>,
}

/// Returned when a pivot block is not positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite;

impl BlockTridiagonal {
    /// Solves `A x = b` in place by block Cholesky. Fails unless `A` is
    /// positive definite.
    pub fn solve_spd(&self, b: &mut [f64]) -> core::result::Result<(), NotPositiveDefinite> {
        let d = self.d;
        let n = self.diag.len();
        // Cholesky factors: L_ii (lower triangular), L_{i+1,i}.
        let mut lii: Vec<[f64; 4]> = Vec::with_capacity(n);
        let mut lsub: Vec<[f64; 4]> = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let mut a = self.diag[i];
            if i > 0 {
                let c = lsub[i - 1];
                // a -= C C^T
                a = sub(&a, &mul_abt(&c, &c, d), d);
            }
            let l = chol(&a, d).ok_or(NotPositiveDefinite)?;
            if i + 1 < n {
                // C = B L^{-T}, B = lower[i]
                lsub.push(solve_right_lt(&self.lower[i], &l, d));
            }
            lii.push(l);
        }
        // Forward: L y = b
        for i in 0..n {
            let mut r = [0.0; 2];
            r[..d].copy_from_slice(&b[i * d..i * d + d]);
            if i > 0 {
                let c = lsub[i - 1];
                let prev = [
                    b[(i - 1) * d],
                    if d == 2 { b[(i - 1) * d + 1] } else { 0.0 },
                ];
                for row in 0..d {
                    for col in 0..d {
                        r[row] -= c[row * 2 + col] * prev[col];
                    }
                }
            }
            let l = lii[i];
            let y0 = r[0] / l[0];
            b[i * d] = y0;
            if d == 2 {
                b[i * d + 1] = (r[1] - l[2] * y0) / l[3];
            }
        }
        // Backward: L^T x = y
        for i in (0..n).rev() {
            let mut r = [0.0; 2];
            r[..d].copy_from_slice(&b[i * d..i * d + d]);
            if i + 1 < n {
                let c = lsub[i];
                let next = [
                    b[(i + 1) * d],
                    if d == 2 { b[(i + 1) * d + 1] } else { 0.0 },
                ];
                // r -= C^T next
                for row in 0..d {
                    for col in 0..d {
                        r[row] -= c[col * 2 + row] * next[col];
                    }
                }
            }
            let l = lii[i];
            if d == 2 {
                let x1 = r[1] / l[3];
                let x0 = (r[0] - l[2] * x1) / l[0];
                b[i * d] = x0;
                b[i * d + 1] = x1;
            } else {
                b[i] = r[0] / l[0];
            }
        }
        Ok(())
    }
}

fn sub(a: &[f64; 4], b: &[f64; 4], d: usize) -> [f64; 4] {
    let mut o = *a;
    for r in 0..d {
        for c in 0..d {
            o[r * 2 + c] -= b[r * 2 + c];
        }
    }
    o
}

/// `A B^T` for `d x d` blocks.
fn mul_abt(a: &[f64; 4], b: &[f64; 4], d: usize) -> [f64; 4] {
    let mut o = [0.0; 4];
    for r in 0..d {
        for c in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[r * 2 + k] * b[c * 2 + k];
            }
            o[r * 2 + c] = s;
        }
    }
    o
}

fn chol(a: &[f64; 4], d: usize) -> Option<[f64; 4]> {
    if !(a[0] > 0.0) {
        return None;
    }
    let l00 = a[0].sqrt();
    if d == 1 {
        return Some([l00, 0.0, 0.0, 0.0]);
    }
    let l10 = a[2] / l00;
    let s = a[3] - l10 * l10;
    if !(s > 0.0) {
        return None;
    }
    Some([l00, 0.0, l10, s.sqrt()])
}

/// Solves `X L^T = B` for `X`, with `L` lower triangular.
fn solve_right_lt(b: &[f64; 4], l: &[f64; 4], d: usize) -> [f64; 4] {
    if d == 1 {
        return [b[0] / l[0], 0.0, 0.0, 0.0];
    }
    // X L^T = B  <=>  L X^T = B^T, row by row of X.
    let mut x = [0.0; 4];
    for r in 0..2 {
        let x0 = b[r * 2] / l[0];
        let x1 = (b[r * 2 + 1] - l[2] * x0) / l[3];
        x[r * 2] = x0;
        x[r * 2 + 1] = x1;
    }
    x
}
