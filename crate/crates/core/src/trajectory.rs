//! Classical paths of an action: Euclidean two-point boundary-value problems
//! and real-time initial-value problems.
//!
//! The Euclidean problem minimizes the discrete action
//!
//! ```text
//! S = sum_k m |x_{k+1} - x_k|^2 / (2 dt) + dt (V(x_k) + V(x_{k+1})) / 2
//! ```
//!
//! over the interior nodes. Its stationarity conditions are the central
//! difference Euler-Lagrange equations `m (x_{k+1} - 2 x_k + x_{k-1}) / dt^2 =
//! grad V(x_k)`. The Hessian is block tridiagonal, so each damped Newton step
//! costs `O(N_t)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use num_traits::Float;

use crate::error::{invalid, Result};
use crate::linalg::BlockTridiagonal;
use crate::model::{ActionSpec, Point};

/// Position and momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub q: Point,
    pub p: Point,
}

impl PhaseState {
    pub fn new(q: Point, p: Point) -> Self {
        Self { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

/// Which Lagrangian [`evaluate_action`] integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    /// `(m/2) xdot^2 - V`
    Real,
    /// `(m/2) xdot^2 + V`
    Euclidean,
}

/// A discretized Euclidean extremal path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySolution {
    pub dim: usize,
    pub times: Vec<f64>,
    pub path: Vec<Point>,
    /// Discrete Euclidean action of the path.
    pub action: f64,
    /// Mean Euclidean energy `-T_kin + V` over the interior nodes.
    pub euclidean_energy: f64,
    /// Node-wise Euclidean energy (endpoints copy their neighbours).
    pub energy_profile: Vec<f64>,
    pub converged: bool,
    /// Largest Euler-Lagrange defect, in units of the path scale (see
    /// [`BvpOptions::tol`]).
    pub residual: f64,
    pub newton_iterations: usize,
    /// Number of halvings of `T` the continuation needed.
    pub continuation_levels: usize,
    /// `Some(true)` when a perturbed start converged to a different path.
    pub multiple: Option<bool>,
}

impl TrajectorySolution {
    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Largest deviation of the node energies from their mean.
    pub fn energy_spread(&self) -> f64 {
        self.energy_profile
            .iter()
            .map(|e| (e - self.euclidean_energy).abs())
            .fold(0.0, f64::max)
    }

    /// Momenta `m dx/dt` from central differences (one-sided at the ends).
    pub fn momenta(&self, mass: f64) -> Vec<Point> {
        let n = self.path.len();
        let dt = self.dt();
        (0..n)
            .map(|k| {
                let (a, b, w) = if k == 0 {
                    (0, 1, dt)
                } else if k + 1 == n {
                    (n - 2, n - 1, dt)
                } else {
                    (k - 1, k + 1, 2.0 * dt)
                };
                [
                    mass * (self.path[b][0] - self.path[a][0]) / w,
                    mass * (self.path[b][1] - self.path[a][1]) / w,
                ]
            })
            .collect()
    }
}

/// Settings for [`solve_euclidean_bvp_with`].
#[derive(Debug, Clone)]
pub struct BvpOptions {
    /// Convergence threshold on `max_k |x_{k+1} - 2 x_k + x_{k-1} - dt^2
    /// grad V(x_k) / m| / X`, where `X` is the largest coordinate magnitude on
    /// the path (or the boundary separation, if larger).
    pub tol: f64,
    pub max_newton: usize,
    /// Maximum number of halvings of `T` tried when Newton fails directly.
    pub max_continuation: usize,
    /// Also solve from a perturbed start and flag distinct extremals.
    pub check_multiplicity: bool,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 60,
            max_continuation: 10,
            check_multiplicity: false,
        }
    }
}

/// Euclidean extremal path from `xi` at time 0 to `xf` at time `t` with
/// `nt` nodes (including both endpoints), using default options.
pub fn solve_euclidean_bvp(
    a: &ActionSpec,
    xi: &[f64],
    xf: &[f64],
    t: f64,
    nt: usize,
) -> Result<TrajectorySolution> {
    solve_euclidean_bvp_with(a, xi, xf, t, nt, &BvpOptions::default())
}

/// As [`solve_euclidean_bvp`] with explicit options. Invalid input is an
/// error; failure to converge is reported through `converged = false`.
pub fn solve_euclidean_bvp_with(
    a: &ActionSpec,
    xi: &[f64],
    xf: &[f64],
    t: f64,
    nt: usize,
    opts: &BvpOptions,
) -> Result<TrajectorySolution> {
    let d = a.dim();
    if xi.len() != d || xf.len() != d {
        return Err(crate::Error::Arity {
            expected: d,
            found: if xi.len() != d { xi.len() } else { xf.len() },
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!(
            "transition time must be positive, got {t}"
        )));
    }
    if nt < 32 {
        return Err(invalid(format!(
            "at least 32 time nodes are required, got {nt}"
        )));
    }
    let mut qa = [0.0; 2];
    let mut qb = [0.0; 2];
    qa[..d].copy_from_slice(xi);
    qb[..d].copy_from_slice(xf);
    let problem = Bvp {
        action: a,
        d,
        qa,
        qb,
        nt,
    };

    let line = problem.straight_line();
    let mut x = line.clone();
    let mut out = problem.newton(&mut x, t, opts);
    let mut levels = 0;
    if !out.converged {
        // Continuation: solve at T / 2^k, then reuse each path as the start at
        // twice the time.
        'outer: for k in 1..=opts.max_continuation {
            let mut y = line.clone();
            let mut ok = true;
            for j in (0..=k).rev() {
                let tj = t / (1u64 << j) as f64;
                let r = problem.newton(&mut y, tj, opts);
                if !r.converged {
                    ok = false;
                    break;
                }
                if j == 0 {
                    x = y;
                    out = r;
                    levels = k;
                    break 'outer;
                }
            }
            if !ok && k == opts.max_continuation {
                break;
            }
        }
    }
    let mut sol = problem.finish(&x, t, out, levels);
    if opts.check_multiplicity {
        let mut y = problem.perturbed_line();
        let r = problem.newton(&mut y, t, opts);
        if r.converged && sol.converged {
            let scale = problem.scale(&x).max(1e-12);
            let diff = x
                .iter()
                .zip(&y)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            sol.multiple = Some(diff > 1e-6 * scale);
        } else {
            sol.multiple = Some(false);
        }
    }
    Ok(sol)
}

struct NewtonOutcome {
    converged: bool,
    residual: f64,
    iterations: usize,
}

struct Bvp<'a> {
    action: &'a ActionSpec,
    d: usize,
    qa: Point,
    qb: Point,
    nt: usize,
}

impl Bvp<'_> {
    /// Interior unknowns, node-major, `d` per node.
    fn straight_line(&self) -> Vec<f64> {
        let n = self.nt - 2;
        let mut x = Vec::with_capacity(n * self.d);
        for k in 1..=n {
            let s = k as f64 / (self.nt - 1) as f64;
            for c in 0..self.d {
                x.push(self.qa[c] + s * (self.qb[c] - self.qa[c]));
            }
        }
        x
    }

    fn perturbed_line(&self) -> Vec<f64> {
        let span = self.span().max(1.0);
        let mut x = self.straight_line();
        let n = self.nt - 2;
        for k in 0..n {
            let s = (k + 1) as f64 / (self.nt - 1) as f64;
            let bump = 0.5 * span * (core::f64::consts::PI * s).sin();
            for c in 0..self.d {
                x[k * self.d + c] += bump * if c == 0 { 1.0 } else { -0.5 };
            }
        }
        x
    }

    fn span(&self) -> f64 {
        ((self.qb[0] - self.qa[0]).powi(2) + (self.qb[1] - self.qa[1]).powi(2)).sqrt()
    }

    fn node(&self, x: &[f64], k: usize) -> Point {
        if k == 0 {
            self.qa
        } else if k == self.nt - 1 {
            self.qb
        } else {
            let i = (k - 1) * self.d;
            if self.d == 1 {
                [x[i], 0.0]
            } else {
                [x[i], x[i + 1]]
            }
        }
    }

    fn scale(&self, x: &[f64]) -> f64 {
        let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ends = self
            .qa
            .iter()
            .chain(&self.qb)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        m.max(ends).max(self.span())
    }

    fn action_value(&self, x: &[f64], t: f64) -> f64 {
        let dt = t / (self.nt - 1) as f64;
        let m = self.action.mass();
        let pot = self.action.potential();
        let mut s = 0.0;
        let mut prev = self.node(x, 0);
        let mut vprev = pot.eval(&prev);
        for k in 1..self.nt {
            let q = self.node(x, k);
            let v = pot.eval(&q);
            let dx = [q[0] - prev[0], q[1] - prev[1]];
            s += m * (dx[0] * dx[0] + dx[1] * dx[1]) / (2.0 * dt) + 0.5 * dt * (v + vprev);
            prev = q;
            vprev = v;
        }
        s
    }

    /// Gradient of the discrete action with respect to the interior unknowns
    /// and the scaled residual.
    fn gradient(&self, x: &[f64], t: f64) -> (Vec<f64>, f64) {
        let dt = t / (self.nt - 1) as f64;
        let m = self.action.mass();
        let pot = self.action.potential();
        let mut g = vec![0.0; x.len()];
        let mut worst = 0.0f64;
        for k in 1..self.nt - 1 {
            let (a, q, b) = (self.node(x, k - 1), self.node(x, k), self.node(x, k + 1));
            let f = pot.gradient(&q);
            for c in 0..self.d {
                let second = b[c] - 2.0 * q[c] + a[c];
                let defect = second - dt * dt * f[c] / m;
                g[(k - 1) * self.d + c] = -m * defect / dt;
                worst = worst.max(defect.abs());
            }
        }
        let scale = self.scale(x);
        (
            g,
            if worst == 0.0 {
                0.0
            } else {
                worst / scale.max(f64::MIN_POSITIVE)
            },
        )
    }

    fn hessian(&self, x: &[f64], t: f64, damping: f64) -> BlockTridiagonal {
        let dt = t / (self.nt - 1) as f64;
        let m = self.action.mass();
        let pot = self.action.potential();
        let n = self.nt - 2;
        let kin = m / dt;
        let diag = (1..=n)
            .map(|k| {
                let h = pot.hessian(&self.node(x, k));
                let c = 2.0 * kin * (1.0 + damping);
                if self.d == 1 {
                    [c + dt * h[0][0], 0.0, 0.0, 0.0]
                } else {
                    [
                        c + dt * h[0][0],
                        dt * h[0][1],
                        dt * h[1][0],
                        c + dt * h[1][1],
                    ]
                }
            })
            .collect();
        let lower = vec![
            if self.d == 1 {
                [-kin, 0.0, 0.0, 0.0]
            } else {
                [-kin, 0.0, 0.0, -kin]
            };
            n.saturating_sub(1)
        ];
        BlockTridiagonal {
            d: self.d,
            diag,
            lower,
        }
    }

    /// Damped Newton iteration on the discrete action, in place.
    fn newton(&self, x: &mut Vec<f64>, t: f64, opts: &BvpOptions) -> NewtonOutcome {
        let mut s = self.action_value(x, t);
        let mut damping = 0.0f64;
        let mut residual;
        let mut hit_tol = false;
        for it in 0..opts.max_newton {
            let (g, r) = self.gradient(x, t);
            residual = r;
            if !residual.is_finite() || !s.is_finite() {
                return NewtonOutcome {
                    converged: false,
                    residual: f64::INFINITY,
                    iterations: it,
                };
            }
            if residual < opts.tol {
                if hit_tol || residual < 16.0 * f64::EPSILON {
                    return NewtonOutcome {
                        converged: true,
                        residual,
                        iterations: it,
                    };
                }
                // One more step to settle at rounding level.
                hit_tol = true;
            }
            let mut step = g.iter().map(|v| -v).collect::<Vec<f64>>();
            let mut tries = 0;
            loop {
                let h = self.hessian(x, t, damping);
                let mut rhs = step.clone();
                if h.solve_spd(&mut rhs).is_ok() {
                    step = rhs;
                    break;
                }
                damping = if damping == 0.0 { 1e-6 } else { damping * 10.0 };
                tries += 1;
                if tries > 30 {
                    return NewtonOutcome {
                        converged: false,
                        residual,
                        iterations: it,
                    };
                }
            }
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            let mut alpha = 1.0;
            let mut accepted = false;
            let mut trial = x.clone();
            for _ in 0..40 {
                for ((y, xv), dv) in trial.iter_mut().zip(x.iter()).zip(&step) {
                    *y = xv + alpha * dv;
                }
                let st = self.action_value(&trial, t);
                if st.is_finite()
                    && st <= s + 1e-4 * alpha * slope.min(0.0) + 8.0 * f64::EPSILON * s.abs()
                {
                    s = st;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                if hit_tol {
                    return NewtonOutcome {
                        converged: true,
                        residual,
                        iterations: it,
                    };
                }
                damping = if damping == 0.0 { 1e-4 } else { damping * 10.0 };
                if damping > 1e8 {
                    return NewtonOutcome {
                        converged: false,
                        residual,
                        iterations: it,
                    };
                }
                continue;
            }
            core::mem::swap(x, &mut trial);
            if alpha == 1.0 {
                damping *= 0.1;
                if damping < 1e-12 {
                    damping = 0.0;
                }
            }
            let size = step.iter().fold(0.0f64, |m, v| m.max(v.abs())) * alpha;
            if size <= 1e-15 * self.scale(x).max(f64::MIN_POSITIVE) {
                let (_, r) = self.gradient(x, t);
                return NewtonOutcome {
                    converged: r < opts.tol,
                    residual: r,
                    iterations: it + 1,
                };
            }
        }
        let (_, r) = self.gradient(x, t);
        NewtonOutcome {
            converged: r < opts.tol,
            residual: r,
            iterations: opts.max_newton,
        }
    }

    fn finish(&self, x: &[f64], t: f64, out: NewtonOutcome, levels: usize) -> TrajectorySolution {
        let dt = t / (self.nt - 1) as f64;
        let path: Vec<Point> = (0..self.nt).map(|k| self.node(x, k)).collect();
        let times = (0..self.nt)
            .map(|k| if k == self.nt - 1 { t } else { k as f64 * dt })
            .collect();
        let energy_profile = node_energies(self.action, &path, dt);
        let interior = &energy_profile[1..self.nt - 1];
        let euclidean_energy = interior.iter().sum::<f64>() / interior.len() as f64;
        TrajectorySolution {
            dim: self.d,
            times,
            action: self.action_value(x, t),
            euclidean_energy,
            energy_profile,
            converged: out.converged,
            residual: out.residual,
            newton_iterations: out.iterations,
            continuation_levels: levels,
            multiple: None,
            path,
        }
    }
}

/// Euclidean energy `-(m/2)|v|^2 + V` at the nodes, with the central velocity
/// and the leading `dt^2` correction of the central-difference scheme, which
/// makes it conserved to `O(dt^4)` along discrete extremals.
fn node_energies(a: &ActionSpec, path: &[Point], dt: f64) -> Vec<f64> {
    let n = path.len();
    let m = a.mass();
    let pot = a.potential();
    let mut e = vec![0.0; n];
    for k in 1..n - 1 {
        let q = path[k];
        let v = [
            (path[k + 1][0] - path[k - 1][0]) / (2.0 * dt),
            (path[k + 1][1] - path[k - 1][1]) / (2.0 * dt),
        ];
        let g = pot.gradient(&q);
        let h = pot.hessian(&q);
        let vhv =
            v[0] * (h[0][0] * v[0] + h[0][1] * v[1]) + v[1] * (h[1][0] * v[0] + h[1][1] * v[1]);
        let g2 = g[0] * g[0] + g[1] * g[1];
        e[k] = pot.eval(&q) - 0.5 * m * (v[0] * v[0] + v[1] * v[1])
            + dt * dt * (vhv / 12.0 + g2 / (24.0 * m));
    }
    e[0] = e[1];
    e[n - 1] = e[n - 2];
    e
}

/// Trapezoidal action of a solution's path: kinetic term from the piecewise
/// linear interpolant, potential by the trapezoidal rule.
pub fn evaluate_action(a: &ActionSpec, sol: &TrajectorySolution, kind: ActionKind) -> f64 {
    let m = a.mass();
    let pot = a.potential();
    let sign = match kind {
        ActionKind::Euclidean => 1.0,
        ActionKind::Real => -1.0,
    };
    let mut s = 0.0;
    for k in 1..sol.path.len() {
        let dt = sol.times[k] - sol.times[k - 1];
        let (p, q) = (sol.path[k - 1], sol.path[k]);
        let dx = [q[0] - p[0], q[1] - p[1]];
        s += m * (dx[0] * dx[0] + dx[1] * dx[1]) / (2.0 * dt)
            + sign * 0.5 * dt * (pot.eval(&p) + pot.eval(&q));
    }
    s
}

/// Velocity of a one-dimensional large-time path from the energy relation,
/// `dx/dt = +-sqrt(2 (V(x) - eps) / m)`. The sign comes from the two
/// monotone segments of the path: descent toward the node nearest the
/// potential minimum, then ascent away from it.
pub fn large_time_velocity(a: &ActionSpec, sol: &TrajectorySolution) -> Result<Vec<f64>> {
    if sol.dim != 1 {
        return Err(invalid(
            "the velocity relation applies to one-dimensional paths",
        ));
    }
    if sol.path.len() < 3 {
        return Err(invalid("path needs at least three nodes"));
    }
    let pot = a.potential();
    let v: Vec<f64> = sol.path.iter().map(|q| pot.eval(q)).collect();
    let mut plateau = 0;
    for k in 1..v.len() {
        if v[k] < v[plateau] {
            plateau = k;
        }
    }
    let n = sol.path.len();
    let centre = sol.path[plateau][0];
    let descent = (centre - sol.path[0][0]).signum();
    let ascent = (sol.path[n - 1][0] - centre).signum();
    let eps = sol.euclidean_energy;
    Ok(v.iter()
        .enumerate()
        .map(|(k, &vk)| {
            let speed = (2.0 * (vk - eps).max(0.0) / a.mass()).sqrt();
            speed * if k <= plateau { descent } else { ascent }
        })
        .collect())
}

// Yoshida's fourth-order triple-jump coefficients.
const CBRT2: f64 = 1.259_921_049_894_873_2;
const W1: f64 = 1.0 / (2.0 - CBRT2);
const W0: f64 = -CBRT2 / (2.0 - CBRT2);

/// Fourth-order symplectic integrator for `H = |p|^2 / 2m + V(q)`: a
/// triple-jump composition of velocity Verlet.
#[derive(Debug, Clone)]
pub struct Yoshida4<'a> {
    action: &'a ActionSpec,
    dt: f64,
}

impl<'a> Yoshida4<'a> {
    pub fn new(action: &'a ActionSpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { action, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `s` by one step of size `dt` (negative `dt` runs backwards).
    pub fn step_by(&self, s: &mut PhaseState, dt: f64) {
        let m = self.action.mass();
        let pot = self.action.potential();
        let d = self.action.dim();
        let kick = |s: &mut PhaseState, h: f64| {
            let g = pot.gradient(&s.q);
            for c in 0..d {
                s.p[c] -= h * g[c];
            }
        };
        let coeff = [W1, W0, W1];
        // Kick-drift-kick with the adjacent half kicks merged.
        let mut pending = 0.5 * coeff[0] * dt;
        for (i, w) in coeff.iter().enumerate() {
            kick(s, pending);
            let h = w * dt;
            for c in 0..d {
                s.q[c] += h * s.p[c] / m;
            }
            pending = 0.5 * h
                + if i + 1 < coeff.len() {
                    0.5 * coeff[i + 1] * dt
                } else {
                    0.0
                };
        }
        kick(s, pending);
    }

    pub fn step(&self, s: &mut PhaseState) {
        self.step_by(s, self.dt)
    }
}

/// Integrates from `s0` over `[0, t]` and returns every state, including the
/// initial one. The step is shrunk to `t / ceil(t / dt)` so the last state is
/// exactly at `t`.
pub fn integrate_realtime(
    a: &ActionSpec,
    s0: PhaseState,
    t: f64,
    dt: f64,
) -> Result<Vec<PhaseState>> {
    let mut out = vec![s0];
    integrate_realtime_with(a, s0, t, dt, |_, _, s| {
        out.push(*s);
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Streaming form of [`integrate_realtime`]: calls `visit(step, time, state)`
/// after every step and stops early on `ControlFlow::Break`. Returns the last
/// state.
pub fn integrate_realtime_with<F>(
    a: &ActionSpec,
    s0: PhaseState,
    t: f64,
    dt: f64,
    mut visit: F,
) -> Result<PhaseState>
where
    F: FnMut(usize, f64, &PhaseState) -> ControlFlow<()>,
{
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!(
            "integration time must be non-negative, got {t}"
        )));
    }
    if !s0.is_finite() {
        return Err(invalid("initial state is not finite"));
    }
    let steps = (t / dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(s0);
    }
    let h = t / steps as f64;
    let integ = Yoshida4::new(a, h)?;
    let mut s = s0;
    for k in 1..=steps {
        integ.step(&mut s);
        if visit(k, k as f64 * h, &s).is_break() {
            break;
        }
    }
    Ok(s)
}
