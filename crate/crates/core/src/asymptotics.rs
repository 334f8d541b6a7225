//! Large-`T` consequences of the quantum action in one dimension: the ground
//! state from the quantum potential, the transformation law linking
//! `2m(V - E_gr)` to `U = 2m~(V~ - V~_min)`, its inversion for `U`, the
//! exact-WKB comparison and the closed-form hydrogen radial sector.
//!
//! With `W = sqrt(U)` the ground state is `psi = N exp(-int_0^|x| W / hbar)`
//! and the Schrodinger equation becomes the Riccati equation
//!
//! ```text
//! W^2 - hbar W' sgn(x) = 2m (V - E_gr),   W(0) = 0.
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{Float, Zero};

use crate::error::{invalid, Error, Result};
use crate::model::{p1, ActionSpec, PolynomialPotential};
use crate::propagator::{discretize_hamiltonian, spectral_decompose, Grid, SpectralData};

/// Where a ground state came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundStateSource {
    Spectral,
    QuantumAction,
    TransformationLaw,
}

/// A one-dimensional ground state sampled on grid nodes, normalized with the
/// trapezoidal rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateInfo {
    pub energy: f64,
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    pub source: GroundStateSource,
}

fn trapezoid(x: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    (1..x.len())
        .map(|i| 0.5 * (x[i] - x[i - 1]) * (f(i) + f(i - 1)))
        .sum()
}

impl GroundStateInfo {
    fn normalized(
        energy: f64,
        x: Vec<f64>,
        mut psi: Vec<f64>,
        source: GroundStateSource,
    ) -> Result<Self> {
        let n2 = trapezoid(&x, |i| psi[i] * psi[i]);
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::Domain("ground state cannot be normalized".into()));
        }
        let s = 1.0 / n2.sqrt();
        psi.iter_mut().for_each(|p| *p *= s);
        Ok(Self {
            energy,
            x,
            psi,
            source,
        })
    }

    /// Lowest level of a one-dimensional spectral decomposition.
    pub fn from_spectrum(s: &SpectralData) -> Result<Self> {
        if s.grid().dim() != 1 {
            return Err(Error::Dimension(
                "ground-state export is one-dimensional".into(),
            ));
        }
        let v = &s.eigenvectors()[0];
        let sign = if v.iter().sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        // Nodeless; clamp roundoff-level negatives near the walls.
        let psi = v.iter().map(|p| (sign * p).max(0.0)).collect();
        Self::normalized(
            s.ground_energy(),
            s.grid().axis(0),
            psi,
            GroundStateSource::Spectral,
        )
    }

    pub fn norm(&self) -> f64 {
        trapezoid(&self.x, |i| self.psi[i] * self.psi[i])
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.x != other.x {
            return Err(invalid("ground states live on different grids"));
        }
        Ok(())
    }

    /// `|<self|other>|`.
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        self.same_grid(other)?;
        Ok(trapezoid(&self.x, |i| self.psi[i] * other.psi[i]).abs())
    }

    /// L2 distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.same_grid(other)?;
        Ok(trapezoid(&self.x, |i| (self.psi[i] - other.psi[i]).powi(2)).sqrt())
    }

    /// Node where `psi` peaks.
    pub fn argmax(&self) -> f64 {
        let k = (0..self.psi.len()).fold(0, |b, i| if self.psi[i] > self.psi[b] { i } else { b });
        self.x[k]
    }
}

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature.
fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Cumulative `int_{x0}^{x_i} g` for every node, with `x0` inside the node
/// range (so the integrand's kink at `x0` is always an interval endpoint).
fn cumulative_from(x: &[f64], x0: f64, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let tol = 1e-13;
    let n = x.len();
    let j = x.iter().position(|&v| v >= x0).unwrap_or(n);
    let mut out = vec![0.0; n];
    if j < n {
        out[j] = integrate(&g, x0, x[j], tol);
        for i in j..n - 1 {
            out[i + 1] = out[i] + integrate(&g, x[i], x[i + 1], tol);
        }
    }
    if j > 0 {
        out[j - 1] = integrate(&g, x[j - 1], x0, tol);
        for i in (1..j).rev() {
            out[i - 1] = out[i] + integrate(&g, x[i - 1], x[i], tol);
        }
    }
    out
}

fn one_d(a: &ActionSpec, what: &str) -> Result<()> {
    if a.dim() != 1 {
        return Err(Error::Dimension(format!("{what} must be one-dimensional")));
    }
    Ok(())
}

/// Ground state from the quantum potential: `E_gr = min V~` and
/// `psi ~ exp(-int sqrt(2m~(V~ - V~_min)) dx / hbar)` measured from the
/// minimum.
pub fn ground_state_from_quantum_action(q: &ActionSpec, grid: &Grid) -> Result<GroundStateInfo> {
    one_d(q, "the quantum action")?;
    if grid.dim() != 1 {
        return Err(Error::Dimension("grid must be one-dimensional".into()));
    }
    let pot = q.potential();
    pot.check_confining()?;
    let xs = grid.axis(0);
    let h = grid.spacing(0);
    let v = |x: f64| pot.eval(&p1(x));
    let k = (0..xs.len()).fold(0, |b, i| if v(xs[i]) < v(xs[b]) { i } else { b });
    let mut xm = xs[k];
    if k > 0 && k + 1 < xs.len() {
        let (a, b, c) = (v(xs[k - 1]), v(xs[k]), v(xs[k + 1]));
        let den = a - 2.0 * b + c;
        if den > 0.0 {
            xm = xs[k] + 0.5 * h * (a - c) / den;
        }
    }
    for _ in 0..30 {
        let g = pot.gradient(&p1(xm))[0];
        let c = pot.hessian(&p1(xm))[0][0];
        if !(c > 0.0) {
            break;
        }
        let step = g / c;
        if (xm - step - xs[k]).abs() > 1.5 * h {
            break;
        }
        xm -= step;
        if step.abs() <= 1e-15 * (1.0 + xm.abs()) {
            break;
        }
    }
    if v(xm) > v(xs[k]) {
        xm = xs[k];
    }
    let vmin = v(xm);
    let (m2, hbar) = (2.0 * q.mass(), q.hbar());
    let integral = cumulative_from(&xs, xm, |x| (m2 * (v(x) - vmin)).max(0.0).sqrt() / hbar);
    let psi = integral.iter().map(|s| (-s).exp()).collect();
    GroundStateInfo::normalized(vmin, xs, psi, GroundStateSource::QuantumAction)
}

/// Requires a parity-symmetric potential whose global minimum is at the
/// origin; returns `V(0)`.
fn single_well_at_origin(p: &PolynomialPotential, what: &str) -> Result<f64> {
    if !p.is_parity_symmetric() {
        return Err(Error::Domain(format!(
            "{what} is not parity symmetric; only single wells centred at the origin are supported"
        )));
    }
    let v0 = p.eval(&p1(0.0));
    if p.is_confining() {
        let (q, v) = p.minimum();
        if v < v0 - 1e-12 * (1.0 + v0.abs()) {
            return Err(Error::Domain(format!(
                "{what} has its minimum at x = {}, not at the origin",
                q[0]
            )));
        }
    }
    Ok(v0)
}

/// Left side minus right side of the transformation law at `x`:
/// `2m(V - E_gr) - [U - (hbar/2) U' / sqrt(U) sgn(x)]` with
/// `U = 2m~(V~ - V~_min)`.
pub fn transformation_law_residual(
    classical: &ActionSpec,
    e_gr: f64,
    quantum: &ActionSpec,
    x: f64,
) -> Result<f64> {
    one_d(classical, "the classical action")?;
    one_d(quantum, "the quantum action")?;
    if classical.hbar() != quantum.hbar() {
        return Err(invalid("classical and quantum actions use different hbar"));
    }
    let qp = quantum.potential();
    let vmin = single_well_at_origin(qp, "the quantum potential")?;
    let m2 = 2.0 * quantum.mass();
    let u = m2 * (qp.eval(&p1(x)) - vmin);
    if x == 0.0 || !(u > 0.0) {
        return Err(Error::Domain(format!(
            "the transformation law is singular at x = {x}"
        )));
    }
    let du = m2 * qp.gradient(&p1(x))[0];
    let lhs = 2.0 * classical.mass() * (classical.potential().eval(&p1(x)) - e_gr);
    Ok(lhs - (u - 0.5 * quantum.hbar() * du / u.sqrt() * x.signum()))
}

/// `U(x) = 2m~(V~ - V~_min)` reconstructed from the classical potential and
/// the ground energy.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationProfile {
    pub energy: f64,
    pub hbar: f64,
    pub x: Vec<f64>,
    /// `W = sqrt(U)`.
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    /// `int_0^|x| W dx`.
    pub integral: Vec<f64>,
    /// Where the blend of the outward solution from the origin hands over
    /// fully to the inward one from the far field (absent when the outward solution never
    /// becomes unstable on the grid).
    pub stitch: Option<f64>,
    /// Inward minus outward `W` at the stitch point.
    pub mismatch: f64,
}

impl TransformationProfile {
    /// `psi ~ exp(-int_0^|x| W / hbar)`.
    pub fn ground_state(&self) -> Result<GroundStateInfo> {
        let psi = self
            .integral
            .iter()
            .map(|s| (-s / self.hbar).exp())
            .collect();
        GroundStateInfo::normalized(
            self.energy,
            self.x.clone(),
            psi,
            GroundStateSource::TransformationLaw,
        )
    }

    /// Transformation-law residual of the reconstructed `U`, with `U'` from
    /// fourth-order central differences. Nodes next to the origin and the
    /// grid ends are skipped.
    pub fn residual(&self, classical: &ActionSpec) -> Vec<(f64, f64)> {
        let n = self.x.len();
        let h = self.x[1] - self.x[0];
        let m2 = 2.0 * classical.mass();
        let mut out = Vec::new();
        for i in 2..n.saturating_sub(2) {
            let x = self.x[i];
            if x.abs() < 2.5 * h || !(self.u[i] > 0.0) {
                continue;
            }
            let du = (-self.u[i + 2] + 8.0 * self.u[i + 1] - 8.0 * self.u[i - 1] + self.u[i - 2])
                / (12.0 * h);
            let lhs = m2 * (classical.potential().eval(&p1(x)) - self.energy);
            out.push((
                x,
                lhs - (self.u[i] - 0.5 * self.hbar * du / self.u[i].sqrt() * x.signum()),
            ));
        }
        out
    }
}

/// One RK4 step of `W' = (W^2 - f) / hbar` for `x >= 0` with signed `dx`,
/// plus the increment of `int W`.
fn riccati_step(f: &impl Fn(f64) -> f64, hbar: f64, x: f64, w: f64, dx: f64) -> (f64, f64) {
    let rhs = |x: f64, w: f64| (w * w - f(x)) / hbar;
    let k1 = rhs(x, w);
    let k2 = rhs(x + 0.5 * dx, w + 0.5 * dx * k1);
    let k3 = rhs(x + 0.5 * dx, w + 0.5 * dx * k2);
    let k4 = rhs(x + dx, w + dx * k3);
    let w1 = w + dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // Hermite rule for the running integral of W.
    let k_end = rhs(x + dx, w1);
    (w1, 0.5 * dx * (w + w1) + dx * dx / 12.0 * (k1 - k_end))
}

fn riccati_dx(w: f64, hbar: f64, remaining: f64) -> f64 {
    let h = 1e-3 / (2.0 * w.abs() / hbar).max(1.0);
    remaining.abs().min(h) * remaining.signum()
}

/// Solves the transformation law for `U` on the grid, given the ground
/// energy. The Riccati equation is unstable marching outward once
/// `int 2W/hbar` grows, so the solution from `W(0) = 0` is only used up to
/// the point where that integral reaches 1; beyond it the solution is
/// integrated inward from the far-field asymptote `W ~ sqrt(f) + hbar f'/(4f)`,
/// where errors decay, and the two are blended smoothly inside the stitch
/// point. A mismatch between the two at the stitch point, or a
/// negative `W`, means `e_gr` is not the ground energy.
pub fn invert_transformation_law(
    classical: &ActionSpec,
    e_gr: f64,
    grid: &Grid,
) -> Result<TransformationProfile> {
    one_d(classical, "the classical action")?;
    if grid.dim() != 1 {
        return Err(Error::Dimension("grid must be one-dimensional".into()));
    }
    let pot = classical.potential();
    single_well_at_origin(pot, "the classical potential")?;
    let (m2, hbar) = (2.0 * classical.mass(), classical.hbar());
    let f = |x: f64| m2 * (pot.eval(&p1(x)) - e_gr);
    let xs = grid.axis(0);
    let n = xs.len();
    // Non-negative half, ascending; node i mirrors node n-1-i.
    let half: Vec<usize> = (0..n).filter(|&i| xs[i] >= 0.0).collect();
    let hx: Vec<f64> = half.iter().map(|&i| xs[i]).collect();
    let mut w = vec![0.0; hx.len()];
    let mut integral = vec![0.0; hx.len()];
    let negative = |w: f64, scale: f64| w < -1e-6 * (1.0 + scale);

    let (mut x, mut wc, mut ic, mut amp) = (0.0, 0.0, 0.0, 0.0);
    let mut wmax = 0.0f64;
    let mut stitch_at = None;
    let confining = pot.is_confining();
    for (j, &target) in hx.iter().enumerate() {
        while x < target {
            let dx = riccati_dx(wc, hbar, target - x);
            let (w1, di) = riccati_step(&f, hbar, x, wc, dx);
            amp += (wc + w1) / hbar * dx;
            wc = w1;
            ic += di;
            x += dx;
            if !wc.is_finite() || negative(wc, wmax) {
                return Err(Error::Domain(format!(
                    "W turned negative near x = {x:.4}; E_gr = {e_gr} is not a ground-state energy of this potential"
                )));
            }
            wmax = wmax.max(wc);
        }
        w[j] = wc;
        integral[j] = ic;
        if confining && amp >= 1.0 && j + 1 < hx.len() {
            stitch_at = Some(j);
            break;
        }
    }

    let mut mismatch = 0.0;
    if let Some(js) = stitch_at {
        let edge = *hx.last().expect("non-empty half grid");
        // Far start: the inward solution forgets its start value at rate
        // 2W/hbar, so go out until that integral has reached 60.
        let mut far = edge;
        let mut damp = 0.0;
        let df = 1e-3 * (1.0 + edge);
        while damp < 60.0 && far < 1e6 {
            damp += 2.0 * f(far + 0.5 * df).max(0.0).sqrt() / hbar * df;
            far += df;
        }
        let fp = |x: f64| m2 * pot.gradient(&p1(x))[0];
        let ff = f(far);
        if !(ff > 0.0) {
            return Err(Error::Domain(
                "potential does not rise above E_gr in the far field".into(),
            ));
        }
        let (mut x, mut wc, mut ic) = (far, ff.sqrt() + hbar * fp(far) / (4.0 * ff), 0.0);
        let mut inward = vec![(0.0, 0.0); hx.len()];
        for j in (0..hx.len()).rev() {
            let target = hx[j];
            while x > target {
                let dx = riccati_dx(wc, hbar, target - x);
                let (w1, di) = riccati_step(&f, hbar, x, wc, dx);
                wc = w1;
                ic += di;
                x += dx;
                if !wc.is_finite() {
                    return Err(Error::Domain(format!(
                        "inward solution diverged near x = {x:.4}"
                    )));
                }
            }
            if j >= js && negative(wc, wmax) {
                return Err(Error::Domain(format!(
                    "W turned negative near x = {x:.4}; E_gr = {e_gr} is not a ground-state energy of this potential"
                )));
            }
            inward[j] = (wc, ic);
        }
        mismatch = inward[js].0 - w[js];
        if mismatch.abs() > 1e-3 * (1.0 + w[js].abs()) {
            return Err(Error::Domain(format!(
                "outward and inward solutions disagree by {mismatch:e} at x = {}; E_gr = {e_gr} is not the ground-state energy",
                hx[js]
            )));
        }
        // `ic` runs from the far start and decreases inward; anchor it at the
        // first node. Inside the stitch point the two solutions are blended
        // with a smoothstep so that W stays differentiable.
        let shift = integral[0] - inward[0].1;
        for j in 0..hx.len() {
            let (wi, ii) = (inward[j].0, inward[j].1 + shift);
            let s = if j >= js {
                1.0
            } else {
                let t = hx[j] / hx[js];
                t * t * (3.0 - 2.0 * t)
            };
            w[j] = (1.0 - s) * w[j] + s * wi;
            integral[j] = (1.0 - s) * integral[j] + s * ii;
        }
    }

    let mut full_w = vec![0.0; n];
    let mut full_i = vec![0.0; n];
    for (j, &i) in half.iter().enumerate() {
        full_w[i] = w[j];
        full_i[i] = integral[j];
        full_w[n - 1 - i] = w[j];
        full_i[n - 1 - i] = integral[j];
    }
    Ok(TransformationProfile {
        energy: e_gr,
        hbar,
        u: full_w.iter().map(|v| v * v).collect(),
        w: full_w,
        integral: full_i,
        x: xs,
        stitch: stitch_at.map(|j| hx[j]),
        mismatch,
    })
}

/// L2 distances of two WKB-type ground states from the spectral one.
#[derive(Debug, Clone, PartialEq)]
pub struct WkbReport {
    /// Energy used in the classical WKB form.
    pub energy: f64,
    pub spectral_energy: f64,
    /// Classical WKB with the `(2m(V - E))^(-1/4)` prefactor, optimally
    /// scaled, over the nodes away from the turning points.
    pub classical_distance: f64,
    /// Quantum-substituted exponential with constant prefactor, over every
    /// node.
    pub quantum_distance: f64,
    pub excluded_points: usize,
    pub turning_point: f64,
}

/// Compares the classical WKB ground state and the one obtained from the
/// quantum action with the spectral ground state on `grid`.
pub fn wkb_compare(
    classical: &ActionSpec,
    quantum: &ActionSpec,
    e_gr: f64,
    grid: &Grid,
) -> Result<WkbReport> {
    let state = ground_state_from_quantum_action(quantum, grid)?;
    wkb_against(classical, e_gr, &state, grid)
}

/// As [`wkb_compare`], with the quantum-substituted state taken from an
/// inverted transformation law.
pub fn wkb_compare_profile(
    classical: &ActionSpec,
    profile: &TransformationProfile,
    grid: &Grid,
) -> Result<WkbReport> {
    let state = profile.ground_state()?;
    wkb_against(classical, profile.energy, &state, grid)
}

fn wkb_against(
    classical: &ActionSpec,
    e_gr: f64,
    state: &GroundStateInfo,
    grid: &Grid,
) -> Result<WkbReport> {
    one_d(classical, "the classical action")?;
    let pot = classical.potential();
    pot.check_confining()?;
    let v0 = single_well_at_origin(pot, "the classical potential")?;
    if !(e_gr > v0) {
        return Err(Error::Domain(format!(
            "E_gr = {e_gr} has no classically allowed region"
        )));
    }
    let reference = GroundStateInfo::from_spectrum(&spectral_decompose(
        &discretize_hamiltonian(classical, grid)?,
        1,
    )?)?;
    let quantum_distance = reference.distance(state)?;

    let (m2, hbar) = (2.0 * classical.mass(), classical.hbar());
    let f = |x: f64| m2 * (pot.eval(&p1(x)) - e_gr);
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if f(mid) > 0.0 {
            up = mid;
        } else {
            lo = mid;
        }
        if up - lo <= 1e-15 * up {
            break;
        }
    }
    let xt = 0.5 * (lo + up);
    let xs = &reference.x;
    let ax: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    let phase = |r: f64| {
        if r >= xt {
            integrate(&|s| f(s).max(0.0).sqrt() / hbar, xt, r, 1e-12)
        } else {
            integrate(&|s| (-f(s)).max(0.0).sqrt() / hbar, r, xt, 1e-12)
        }
    };
    let mut num = 0.0;
    let mut den = 0.0;
    let mut wkb = vec![0.0; xs.len()];
    let mut keep = vec![false; xs.len()];
    for i in 0..xs.len() {
        let fx = f(xs[i]);
        if fx.abs() < 1e-3 {
            continue;
        }
        let r = ax[i];
        wkb[i] = if r >= xt {
            fx.powf(-0.25) * (-phase(r)).exp()
        } else {
            2.0 * (-fx).powf(-0.25) * (phase(r) - core::f64::consts::FRAC_PI_4).cos()
        };
        keep[i] = true;
        num += wkb[i] * reference.psi[i];
        den += wkb[i] * wkb[i];
    }
    let scale = if den > 0.0 { num / den } else { 0.0 };
    let h = grid.spacing(0);
    let classical_distance = ((0..xs.len())
        .filter(|&i| keep[i])
        .map(|i| (scale * wkb[i] - reference.psi[i]).powi(2))
        .sum::<f64>()
        * h)
        .sqrt();
    Ok(WkbReport {
        energy: e_gr,
        spectral_energy: reference.energy,
        classical_distance,
        quantum_distance,
        excluded_points: keep.iter().filter(|k| !**k).count(),
        turning_point: xt,
    })
}

/// Units for the hydrogen sector; `charge` is `e` in Gaussian units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydrogenUnits {
    pub hbar: f64,
    pub mass: f64,
    pub charge: f64,
}

impl HydrogenUnits {
    /// `hbar = m = e = 1`.
    pub const ATOMIC: Self = Self {
        hbar: 1.0,
        mass: 1.0,
        charge: 1.0,
    };
}

/// Quantum potential `V~_l(r) = mu/r^2 - nu/r` of the lowest state with
/// angular momentum `l` (principal number `n = l + 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydrogenSector {
    pub l: u32,
    pub mu: f64,
    pub nu: f64,
    pub energy: f64,
    pub bohr_radius: f64,
    pub ionization: f64,
    /// `argmin V~_l = 2 mu / nu`.
    pub potential_minimum_radius: f64,
    /// `argmax r^l exp(-r / ((l+1) a0)) = l (l+1) a0`.
    pub wavefunction_peak_radius: f64,
}

impl HydrogenSector {
    pub fn quantum_potential(&self, r: f64) -> f64 {
        self.mu / (r * r) - self.nu / r
    }

    /// Unnormalized radial function `r^l exp(-r / ((l+1) a0))`.
    pub fn radial_state(&self, r: f64) -> f64 {
        r.powi(self.l as i32) * (-r / ((self.l + 1) as f64 * self.bohr_radius)).exp()
    }
}

/// Floating-point hydrogen sector. Fails if the closed-form identities do
/// not hold to `1e-12` relative (they always should).
pub fn hydrogen_sector(l: u32, units: &HydrogenUnits) -> Result<HydrogenSector> {
    if l < 1 {
        return Err(invalid("hydrogen sector needs l >= 1"));
    }
    let HydrogenUnits { hbar, mass, charge } = *units;
    if !(hbar > 0.0 && mass > 0.0 && charge > 0.0) {
        return Err(invalid("hbar, mass and charge must be positive"));
    }
    let lf = l as f64;
    let e2 = charge * charge;
    let mu = hbar * hbar / (2.0 * mass) * lf * lf;
    let nu = e2 * lf / (lf + 1.0);
    let ionization = mass * e2 * e2 / (2.0 * hbar * hbar);
    let bohr_radius = hbar * hbar / (mass * e2);
    let energy = -ionization / ((lf + 1.0) * (lf + 1.0));
    let s = HydrogenSector {
        l,
        mu,
        nu,
        energy,
        bohr_radius,
        ionization,
        potential_minimum_radius: 2.0 * mu / nu,
        wavefunction_peak_radius: lf * (lf + 1.0) * bohr_radius,
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if !close(-nu * nu / (4.0 * mu), energy)
        || !close(s.potential_minimum_radius, s.wavefunction_peak_radius)
    {
        return Err(Error::Domain(format!(
            "hydrogen identities fail for l = {l}"
        )));
    }
    Ok(s)
}

/// Hydrogen sector in exact rational arithmetic. Units enter through
/// `hbar`, `m` and `e^2`, all rational.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactHydrogen {
    pub l: u32,
    pub mu: Ratio<i128>,
    pub nu: Ratio<i128>,
    pub energy: Ratio<i128>,
    pub bohr_radius: Ratio<i128>,
    pub ionization: Ratio<i128>,
    pub potential_minimum_radius: Ratio<i128>,
    pub wavefunction_peak_radius: Ratio<i128>,
}

impl ExactHydrogen {
    /// `-nu^2/(4 mu) == E_l` and `2 mu / nu == l (l+1) a0`, and the latter
    /// is the stationary point of `l ln r - r/((l+1) a0)`.
    pub fn identities_hold(&self) -> bool {
        let l = Ratio::from_integer(self.l as i128);
        let four = Ratio::from_integer(4);
        let stationary = l / self.wavefunction_peak_radius - (l + 1).recip() / self.bohr_radius;
        -(self.nu * self.nu) / (four * self.mu) == self.energy
            && self.potential_minimum_radius == self.wavefunction_peak_radius
            && stationary.is_zero()
    }
}

pub fn hydrogen_sector_exact(
    l: u32,
    hbar: Ratio<i128>,
    mass: Ratio<i128>,
    charge_squared: Ratio<i128>,
) -> Result<ExactHydrogen> {
    if l < 1 {
        return Err(invalid("hydrogen sector needs l >= 1"));
    }
    let zero = Ratio::from_integer(0);
    if hbar <= zero || mass <= zero || charge_squared <= zero {
        return Err(invalid("hbar, mass and e^2 must be positive"));
    }
    let li = Ratio::from_integer(l as i128);
    let one = Ratio::from_integer(1);
    let two = Ratio::from_integer(2);
    let mu = hbar * hbar / (two * mass) * li * li;
    let nu = charge_squared * li / (li + one);
    let ionization = mass * charge_squared * charge_squared / (two * hbar * hbar);
    let bohr_radius = hbar * hbar / (mass * charge_squared);
    let s = ExactHydrogen {
        l,
        mu,
        nu,
        energy: -ionization / ((li + one) * (li + one)),
        bohr_radius,
        ionization,
        potential_minimum_radius: two * mu / nu,
        wavefunction_peak_radius: li * (li + one) * bohr_radius,
    };
    if !s.identities_hold() {
        return Err(Error::Domain(format!(
            "hydrogen identities fail for l = {l}"
        )));
    }
    Ok(s)
}
