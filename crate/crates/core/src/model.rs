//! Potentials, action specifications and the scale transformation.
//!
//! Potentials are sparse polynomials in one or two coordinates. Coordinates are
//! carried as [`Point`] (`[x, y]`); one-dimensional code ignores `y`.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Add;

use crate::error::{invalid, Error, Result};

/// A coordinate tuple. One-dimensional models use `[x, 0.0]`.
pub type Point = [f64; 2];

/// Exponents of a monomial `x^e0 y^e1`; `e1` is always zero in one dimension.
pub type Exponent = [u32; 2];

/// Highest total degree accepted in a single monomial.
pub const MAX_DEGREE: u32 = 16;

/// Shorthand for a one-dimensional point.
pub const fn p1(x: f64) -> Point {
    [x, 0.0]
}

/// A polynomial potential `V = sum_k c_k x^a_k y^b_k` in one or two dimensions.
///
/// Terms are kept sorted lexicographically by exponent with duplicates merged,
/// which is also the canonical serialization order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    dim: usize,
    terms: Vec<(Exponent, f64)>,
}

impl PolynomialPotential {
    /// Builds a potential from `(exponents, coefficient)` pairs.
    ///
    /// Every exponent slice must have exactly `dim` entries.
    pub fn new<'a, I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [u32], f64)>,
    {
        if dim != 1 && dim != 2 {
            return Err(invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        let mut out: Vec<(Exponent, f64)> = Vec::new();
        for (exp, coef) in terms {
            if exp.len() != dim {
                return Err(Error::Arity {
                    expected: dim,
                    found: exp.len(),
                });
            }
            if !coef.is_finite() {
                return Err(invalid("potential coefficients must be finite"));
            }
            let mut e = [0u32; 2];
            e[..dim].copy_from_slice(exp);
            if e[0] + e[1] > MAX_DEGREE {
                return Err(invalid(format!("monomial degree exceeds {MAX_DEGREE}")));
            }
            out.push((e, coef));
        }
        Ok(Self::from_sorted(dim, out))
    }

    /// One-dimensional potential from `(power, coefficient)` pairs.
    pub fn one_d(terms: &[(u32, f64)]) -> Result<Self> {
        let exps: Vec<[u32; 1]> = terms.iter().map(|&(p, _)| [p]).collect();
        Self::new(1, exps.iter().zip(terms).map(|(e, &(_, c))| (&e[..], c)))
    }

    /// Two-dimensional potential from `((px, py), coefficient)` pairs.
    pub fn two_d(terms: &[((u32, u32), f64)]) -> Result<Self> {
        let exps: Vec<[u32; 2]> = terms.iter().map(|&((a, b), _)| [a, b]).collect();
        Self::new(2, exps.iter().zip(terms).map(|(e, &(_, c))| (&e[..], c)))
    }

    /// Like [`PolynomialPotential::new`] but fails unless the result is confining.
    pub fn confining<'a, I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [u32], f64)>,
    {
        let p = Self::new(dim, terms)?;
        p.check_confining()?;
        Ok(p)
    }

    /// The zero potential.
    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(dim, core::iter::empty())
    }

    fn from_sorted(dim: usize, mut terms: Vec<(Exponent, f64)>) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(Exponent, f64)> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => merged.push((e, c)),
            }
        }
        Self { dim, terms: merged }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Terms in canonical order; exponent slices have length `dim`.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.terms.iter().map(move |(e, c)| (&e[..self.dim], *c))
    }

    /// Coefficient of the monomial with the given exponents (zero if absent).
    pub fn coefficient(&self, exp: &[u32]) -> f64 {
        let mut e = [0u32; 2];
        let n = exp.len().min(2);
        e[..n].copy_from_slice(&exp[..n]);
        self.terms
            .iter()
            .find(|(k, _)| *k == e)
            .map_or(0.0, |t| t.1)
    }

    /// The constant term.
    pub fn constant(&self) -> f64 {
        self.coefficient(&[0, 0])
    }

    fn max_powers(&self) -> [usize; 2] {
        let mut m = [0usize; 2];
        for (e, _) in &self.terms {
            m[0] = m[0].max(e[0] as usize);
            m[1] = m[1].max(e[1] as usize);
        }
        m
    }

    /// `V(point)` with an arity check.
    pub fn value(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim {
            return Err(Error::Arity {
                expected: self.dim,
                found: point.len(),
            });
        }
        let mut q = [0.0; 2];
        q[..self.dim].copy_from_slice(point);
        Ok(self.eval(&q))
    }

    /// `V(q)` without arity checks.
    pub fn eval(&self, q: &Point) -> f64 {
        let [mx, my] = self.max_powers();
        let px = powers(q[0], mx);
        let py = powers(q[1], my);
        self.terms
            .iter()
            .map(|(e, c)| c * px[e[0] as usize] * py[e[1] as usize])
            .sum()
    }

    /// Gradient `(dV/dx, dV/dy)`.
    pub fn gradient(&self, q: &Point) -> Point {
        let [mx, my] = self.max_powers();
        let px = powers(q[0], mx);
        let py = powers(q[1], my);
        let mut g = [0.0; 2];
        for (e, c) in &self.terms {
            let (a, b) = (e[0] as usize, e[1] as usize);
            if a > 0 {
                g[0] += c * a as f64 * px[a - 1] * py[b];
            }
            if b > 0 {
                g[1] += c * b as f64 * px[a] * py[b - 1];
            }
        }
        g
    }

    /// Hessian `[[Vxx, Vxy], [Vxy, Vyy]]`.
    pub fn hessian(&self, q: &Point) -> [[f64; 2]; 2] {
        let [mx, my] = self.max_powers();
        let px = powers(q[0], mx);
        let py = powers(q[1], my);
        let mut h = [[0.0; 2]; 2];
        for (e, c) in &self.terms {
            let (a, b) = (e[0] as usize, e[1] as usize);
            if a > 1 {
                h[0][0] += c * (a * (a - 1)) as f64 * px[a - 2] * py[b];
            }
            if b > 1 {
                h[1][1] += c * (b * (b - 1)) as f64 * px[a] * py[b - 2];
            }
            if a > 0 && b > 0 {
                h[0][1] += c * (a * b) as f64 * px[a - 1] * py[b - 1];
            }
        }
        h[1][0] = h[0][1];
        h
    }

    /// Third derivative `d^3V/dx^3` of a one-dimensional potential.
    pub fn third_derivative_1d(&self, x: f64) -> f64 {
        let [mx, _] = self.max_powers();
        let px = powers(x, mx);
        self.terms
            .iter()
            .filter(|(e, _)| e[0] > 2)
            .map(|(e, c)| {
                let a = e[0] as usize;
                c * (a * (a - 1) * (a - 2)) as f64 * px[a - 3]
            })
            .sum()
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            terms: self.terms.iter().map(|&(e, c)| (e, c * factor)).collect(),
        }
    }

    /// The potential plus a constant.
    pub fn shifted(&self, c: f64) -> Self {
        let mut terms = self.terms.clone();
        terms.push(([0, 0], c));
        Self::from_sorted(self.dim, terms)
    }

    /// The potential without its constant term.
    pub fn without_constant(&self) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|(e, _)| *e != [0, 0])
                .collect(),
        }
    }

    /// True when no monomial is odd in any coordinate.
    pub fn is_parity_symmetric(&self) -> bool {
        self.terms
            .iter()
            .all(|(e, c)| *c == 0.0 || (e[0] % 2 == 0 && e[1] % 2 == 0))
    }

    /// Along each coordinate axis the highest-degree non-vanishing term must be
    /// of even degree with a strictly positive coefficient.
    pub fn is_confining(&self) -> bool {
        self.check_confining().is_ok()
    }

    /// Like [`Self::is_confining`], with the offending axis in the error.
    pub fn check_confining(&self) -> Result<()> {
        for axis in 0..self.dim {
            let other = 1 - axis;
            let lead = self
                .terms
                .iter()
                .filter(|(e, c)| e[other] == 0 && e[axis] > 0 && *c != 0.0)
                .max_by_key(|(e, _)| e[axis]);
            match lead {
                Some((e, c)) if e[axis] % 2 == 0 && *c > 0.0 => {}
                Some((e, c)) => {
                    return Err(Error::NotConfining(format!(
                        "leading term along axis {axis} has degree {} and coefficient {c}",
                        e[axis]
                    )))
                }
                None => {
                    return Err(Error::NotConfining(format!(
                        "no growing term along axis {axis}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Global minimum `(argmin, min)` found by sampling a box of half-width
    /// `radius` followed by Newton refinement.
    pub fn minimum_within(&self, radius: f64) -> (Point, f64) {
        let n = if self.dim == 1 { 4001 } else { 241 };
        let mut best = ([0.0; 2], self.eval(&[0.0; 2]));
        let step = 2.0 * radius / (n - 1) as f64;
        let ny = if self.dim == 1 { 1 } else { n };
        for i in 0..n {
            for j in 0..ny {
                let q = [
                    -radius + i as f64 * step,
                    if self.dim == 1 {
                        0.0
                    } else {
                        -radius + j as f64 * step
                    },
                ];
                let v = self.eval(&q);
                if v < best.1 {
                    best = (q, v);
                }
            }
        }
        // Newton polish; only accepted while it keeps lowering V.
        let mut q = best.0;
        for _ in 0..50 {
            let g = self.gradient(&q);
            let h = self.hessian(&q);
            let step = if self.dim == 1 {
                if h[0][0] <= 0.0 {
                    break;
                }
                [g[0] / h[0][0], 0.0]
            } else {
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                if det <= 0.0 || h[0][0] <= 0.0 {
                    break;
                }
                [
                    (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                    (h[0][0] * g[1] - h[1][0] * g[0]) / det,
                ]
            };
            let next = [q[0] - step[0], q[1] - step[1]];
            let v = self.eval(&next);
            if v > self.eval(&q) {
                break;
            }
            q = next;
            if step[0].abs() + step[1].abs() < 1e-15 * (1.0 + q[0].abs() + q[1].abs()) {
                break;
            }
        }
        let v = self.eval(&q);
        if v <= best.1 {
            (q, v)
        } else {
            best
        }
    }

    /// Global minimum of a confining potential, with an automatically grown
    /// search box.
    pub fn minimum(&self) -> (Point, f64) {
        let mut radius = 2.0;
        loop {
            let (q, v) = self.minimum_within(radius);
            if q[0].abs().max(q[1].abs()) < 0.8 * radius || radius > 1e3 {
                return (q, v);
            }
            radius *= 4.0;
        }
    }
}

impl Add for &PolynomialPotential {
    type Output = Result<PolynomialPotential>;

    fn add(self, rhs: Self) -> Self::Output {
        if self.dim != rhs.dim {
            return Err(Error::Dimension(format!("{} vs {}", self.dim, rhs.dim)));
        }
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&rhs.terms);
        Ok(PolynomialPotential::from_sorted(self.dim, terms))
    }
}

fn powers(x: f64, max: usize) -> [f64; MAX_DEGREE as usize + 1] {
    let mut p = [0.0; MAX_DEGREE as usize + 1];
    p[0] = 1.0;
    for k in 1..=max {
        p[k] = p[k - 1] * x;
    }
    p
}

/// Mass, potential and `hbar` of a classical or quantum action
/// `S = int dt (m/2) |dx/dt|^2 -/+ V(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    pub(crate) mass: f64,
    pub(crate) hbar: f64,
    pub(crate) potential: PolynomialPotential,
}

impl ActionSpec {
    /// Action with `hbar = 1`.
    pub fn new(mass: f64, potential: PolynomialPotential) -> Result<Self> {
        Self::with_hbar(mass, 1.0, potential)
    }

    pub fn with_hbar(mass: f64, hbar: f64, potential: PolynomialPotential) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid(format!("mass must be positive, got {mass}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self {
            mass,
            hbar,
            potential,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn potential(&self) -> &PolynomialPotential {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.potential.dim
    }

    /// Hamiltonian `|p|^2 / 2m + V(q)`.
    pub fn energy(&self, q: &Point, p: &Point) -> f64 {
        (p[0] * p[0] + p[1] * p[1]) / (2.0 * self.mass) + self.potential.eval(q)
    }

    /// Same mass and `hbar`, different potential.
    pub fn with_potential(&self, potential: PolynomialPotential) -> Self {
        Self {
            mass: self.mass,
            hbar: self.hbar,
            potential,
        }
    }
}

/// The rescaling `m -> m/alpha`, `V -> alpha V`, `T -> T/alpha` under which
/// Euclidean amplitudes and classical actions are invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleTransform {
    alpha: f64,
}

impl ScaleTransform {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!(
                "scale factor must be positive, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn inverse(&self) -> Self {
        Self {
            alpha: 1.0 / self.alpha,
        }
    }

    /// Transforms an action and its transition time.
    pub fn apply(&self, action: &ActionSpec, time: f64) -> (ActionSpec, f64) {
        let a = self.alpha;
        (
            ActionSpec {
                mass: action.mass / a,
                hbar: action.hbar,
                potential: action.potential.scaled(a),
            },
            time / a,
        )
    }
}

/// Free-function form of [`PolynomialPotential::value`].
pub fn evaluate_potential(p: &PolynomialPotential, point: &[f64]) -> Result<f64> {
    p.value(point)
}

/// Free-function form of [`ScaleTransform::apply`].
pub fn apply_scale_transform(a: &ActionSpec, time: f64, s: ScaleTransform) -> (ActionSpec, f64) {
    s.apply(a, time)
}
