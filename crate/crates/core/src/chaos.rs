//! Poincaré sections of two-dimensional actions and simple box-counting
//! comparisons between them.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::model::{ActionSpec, Point, PolynomialPotential};
use crate::par;
use crate::trajectory::{PhaseState, Yoshida4};

/// Initial conditions must satisfy `H = E` to this (relative) accuracy.
pub const SHELL_TOLERANCE: f64 = 1e-10;

/// Where and how orbits are cut.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSpec {
    /// Coordinate held fixed on the section (1 cuts at `y = value`).
    pub axis: usize,
    pub value: f64,
    /// Sign of the crossing velocity that counts (+1 keeps `ydot > 0`).
    pub orientation: f64,
    pub energy: f64,
    pub initial: Vec<PhaseState>,
    pub max_crossings: usize,
    pub dt: f64,
    /// Integration stops after this time even if fewer crossings were found.
    pub max_time: f64,
}

/// Local minimum of the potential reached by Newton iteration from the
/// origin. Fitted quantum potentials may be unbounded below far away, so the
/// global minimum is not what a section energy is measured from.
pub fn local_minimum(pot: &PolynomialPotential) -> (Point, f64) {
    let mut q = [0.0; 2];
    for _ in 0..50 {
        let g = pot.gradient(&q);
        let h = pot.hessian(&q);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(det > 0.0 && h[0][0] > 0.0) {
            return pot.minimum_within(2.0);
        }
        let step = [
            (h[1][1] * g[0] - h[0][1] * g[1]) / det,
            (h[0][0] * g[1] - h[1][0] * g[0]) / det,
        ];
        q = [q[0] - step[0], q[1] - step[1]];
        if step[0].abs() + step[1].abs() < 1e-15 {
            break;
        }
    }
    (q, pot.eval(&q))
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `x` interval on the section line where `V <= e`, by doubling and
/// bisection outward from the origin.
fn allowed_interval(a: &ActionSpec, axis: usize, value: f64, e: f64) -> Result<(f64, f64)> {
    let other = 1 - axis;
    let v = |x: f64| {
        let mut q = [0.0; 2];
        q[axis] = value;
        q[other] = x;
        a.potential().eval(&q)
    };
    if !(v(0.0) < e) {
        return Err(invalid(format!(
            "energy {e} does not exceed the potential at the section origin"
        )));
    }
    let edge = |dir: f64| -> Result<f64> {
        let mut hi = 1.0;
        while v(dir * hi) < e {
            hi *= 2.0;
            if hi > 1e8 {
                return Err(Error::NotConfining(
                    "the section line is not bounded at this energy".into(),
                ));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if v(dir * mid) < e {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(dir * lo)
    };
    Ok((edge(-1.0)?, edge(1.0)?))
}

impl SectionSpec {
    /// Validates explicit initial conditions against the energy shell.
    pub fn new(
        action: &ActionSpec,
        energy: f64,
        initial: Vec<PhaseState>,
        max_crossings: usize,
        dt: f64,
        max_time: f64,
    ) -> Result<Self> {
        let spec = Self {
            axis: 1,
            value: 0.0,
            orientation: 1.0,
            energy,
            initial,
            max_crossings,
            dt,
            max_time,
        };
        spec.validate(action)?;
        Ok(spec)
    }

    pub fn validate(&self, action: &ActionSpec) -> Result<()> {
        if action.dim() != 2 {
            return Err(Error::Dimension(
                "sections need a two-dimensional action".into(),
            ));
        }
        if self.axis > 1 || !(self.orientation == 1.0 || self.orientation == -1.0) {
            return Err(invalid(
                "section axis must be 0 or 1 and orientation +1 or -1",
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite())
            || !(self.max_time > 0.0)
            || self.max_crossings == 0
        {
            return Err(invalid("dt, max_time and max_crossings must be positive"));
        }
        if self.initial.is_empty() {
            return Err(invalid("no initial conditions"));
        }
        let (_, vmin) = local_minimum(action.potential());
        if !(self.energy > vmin) {
            return Err(invalid(format!(
                "section energy {} is not above the potential minimum {vmin}",
                self.energy
            )));
        }
        for (i, s) in self.initial.iter().enumerate() {
            let h = action.energy(&s.q, &s.p);
            if (h - self.energy).abs() > SHELL_TOLERANCE * self.energy.abs().max(1.0) {
                return Err(invalid(format!(
                    "initial condition {i} has H = {h}, not {}",
                    self.energy
                )));
            }
        }
        Ok(())
    }

    /// `count` initial conditions on the section plane at energy `energy`,
    /// placed by the Halton sequence (bases 2 and 3, skipping the first
    /// `seed` points) over the allowed `(x, p_x)` region, with the remaining
    /// energy in the crossing momentum.
    pub fn on_shell(
        action: &ActionSpec,
        energy: f64,
        count: usize,
        seed: u64,
        max_crossings: usize,
        dt: f64,
        max_time: f64,
    ) -> Result<Self> {
        if action.dim() != 2 {
            return Err(Error::Dimension(
                "sections need a two-dimensional action".into(),
            ));
        }
        if count == 0 {
            return Err(invalid("no initial conditions requested"));
        }
        let (axis, other, value, orientation) = (1usize, 0usize, 0.0, 1.0);
        let m = action.mass();
        let (xl, xr) = allowed_interval(action, axis, value, energy)?;
        let line = |x: f64| {
            let mut q = [0.0; 2];
            q[axis] = value;
            q[other] = x;
            q
        };
        let (_, vline) = {
            let mut best = (0.0, f64::INFINITY);
            for k in 0..=2000 {
                let x = xl + (xr - xl) * k as f64 / 2000.0;
                let v = action.potential().eval(&line(x));
                if v < best.1 {
                    best = (x, v);
                }
            }
            best
        };
        let pmax = (2.0 * m * (energy - vline)).sqrt();
        let mut initial = Vec::with_capacity(count);
        let mut i = seed + 1;
        while initial.len() < count {
            if i > seed + 1 + 1000 * count as u64 {
                return Err(invalid(
                    "could not place initial conditions on the energy shell",
                ));
            }
            let x = xl + (xr - xl) * halton(i, 2);
            let px = pmax * (2.0 * halton(i, 3) - 1.0);
            i += 1;
            let q = line(x);
            let rest = energy - action.potential().eval(&q) - px * px / (2.0 * m);
            if rest <= 1e-6 * energy.abs().max(1.0) {
                continue;
            }
            let mut p = [0.0; 2];
            p[other] = px;
            p[axis] = orientation * (2.0 * m * rest).sqrt();
            initial.push(PhaseState::new(q, p));
        }
        let spec = Self {
            axis,
            value,
            orientation,
            energy,
            initial,
            max_crossings,
            dt,
            max_time,
        };
        spec.validate(action)?;
        Ok(spec)
    }

    /// As [`Self::on_shell`], at `excitation` above the local potential
    /// minimum.
    pub fn above_minimum(
        action: &ActionSpec,
        excitation: f64,
        count: usize,
        seed: u64,
        max_crossings: usize,
        dt: f64,
        max_time: f64,
    ) -> Result<Self> {
        let (_, vmin) = local_minimum(action.potential());
        Self::on_shell(
            action,
            vmin + excitation,
            count,
            seed,
            max_crossings,
            dt,
            max_time,
        )
    }

    /// Energy above the local potential minimum of `action`.
    pub fn excitation(&self, action: &ActionSpec) -> f64 {
        self.energy - local_minimum(action.potential()).1
    }
}

/// One recorded crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub orbit: usize,
    pub time: f64,
    pub state: PhaseState,
}

/// Crossings of every orbit, ordered by orbit id and then time.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareSection {
    pub points: Vec<Crossing>,
    pub spec: SectionSpec,
    pub action_used: ActionSpec,
}

impl PoincareSection {
    /// In-plane coordinate and momentum `(x, p_x)` of each crossing.
    pub fn coordinates(&self) -> Vec<(usize, f64, f64)> {
        let o = 1 - self.spec.axis;
        self.points
            .iter()
            .map(|c| (c.orbit, c.state.q[o], c.state.p[o]))
            .collect()
    }

    pub fn orbit_count(&self) -> usize {
        self.spec.initial.len()
    }

    /// Largest `|H - E| / max(|E|, 1)` over the crossings.
    pub fn energy_error(&self) -> f64 {
        let e = self.spec.energy;
        self.points
            .iter()
            .map(|c| (self.action_used.energy(&c.state.q, &c.state.p) - e).abs())
            .fold(0.0, f64::max)
            / e.abs().max(1.0)
    }
}

/// Moves `s` onto the plane by one RK4 step with the plane coordinate as the
/// independent variable, returning the elapsed time.
fn henon_step(a: &ActionSpec, axis: usize, s: &PhaseState, target: f64) -> (PhaseState, f64) {
    let m = a.mass();
    let pot = a.potential();
    // State (q0, q1, p0, p1, t); derivatives with respect to q[axis].
    let deriv = |y: &[f64; 5]| -> [f64; 5] {
        let q = [y[0], y[1]];
        let g = pot.gradient(&q);
        let inv = m / y[2 + axis];
        [
            y[2] / m * inv,
            y[3] / m * inv,
            -g[0] * inv,
            -g[1] * inv,
            inv,
        ]
    };
    let y0 = [s.q[0], s.q[1], s.p[0], s.p[1], 0.0];
    let h = target - s.q[axis];
    let add = |y: &[f64; 5], k: &[f64; 5], c: f64| -> [f64; 5] {
        core::array::from_fn(|i| y[i] + c * k[i])
    };
    let k1 = deriv(&y0);
    let k2 = deriv(&add(&y0, &k1, 0.5 * h));
    let k3 = deriv(&add(&y0, &k2, 0.5 * h));
    let k4 = deriv(&add(&y0, &k3, h));
    let y: [f64; 5] =
        core::array::from_fn(|i| y0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let mut q = [y[0], y[1]];
    q[axis] = target;
    (PhaseState::new(q, [y[2], y[3]]), y[4])
}

fn orbit_crossings(
    a: &ActionSpec,
    spec: &SectionSpec,
    orbit: usize,
    s0: &PhaseState,
) -> Vec<Crossing> {
    let k = spec.axis;
    let sgn = spec.orientation;
    let side = |s: &PhaseState| sgn * (s.q[k] - spec.value);
    let integ = Yoshida4::new(a, spec.dt).expect("validated time step");
    let mut out = Vec::new();
    let mut prev = *s0;
    // A start on the plane moving the right way is itself a crossing; a
    // further one is only recorded after the orbit has gone back through.
    let mut armed = side(s0) < 0.0;
    if side(s0) == 0.0 && sgn * s0.p[k] > 0.0 {
        out.push(Crossing {
            orbit,
            time: 0.0,
            state: *s0,
        });
    }
    let steps = (spec.max_time / spec.dt).ceil() as usize;
    let mut s = *s0;
    for n in 1..=steps {
        if out.len() >= spec.max_crossings {
            break;
        }
        integ.step(&mut s);
        if !s.is_finite() || s.q[0].abs().max(s.q[1].abs()) > 1e6 {
            break;
        }
        let (g0, g1) = (side(&prev), side(&s));
        if g0 > 0.0 && g1 <= 0.0 {
            armed = true;
        } else if armed && g0 < 0.0 && g1 >= 0.0 {
            // Start the plane-coordinate step from the closer endpoint.
            let (from, t_from) = if g0.abs() <= g1.abs() {
                (prev, (n - 1) as f64)
            } else {
                (s, n as f64)
            };
            let (state, dt) = henon_step(a, k, &from, spec.value);
            out.push(Crossing {
                orbit,
                time: t_from * spec.dt + dt,
                state,
            });
            armed = false;
        }
        prev = s;
    }
    out
}

/// Integrates every initial condition and records its section crossings.
pub fn generate_section(a: &ActionSpec, spec: &SectionSpec) -> Result<PoincareSection> {
    spec.validate(a)?;
    let ids: Vec<usize> = (0..spec.initial.len()).collect();
    let per_orbit = par::map(&ids, |&i| orbit_crossings(a, spec, i, &spec.initial[i]));
    Ok(PoincareSection {
        points: per_orbit.into_iter().flatten().collect(),
        spec: spec.clone(),
        action_used: a.clone(),
    })
}

/// Rectangle `[x0, x1] x [-p, p]` containing the allowed part of the section
/// plane.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Window {
    x0: f64,
    x1: f64,
    p: f64,
}

fn window(s: &PoincareSection) -> Result<Window> {
    let a = &s.action_used;
    let (x0, x1) = allowed_interval(a, s.spec.axis, s.spec.value, s.spec.energy)?;
    let o = 1 - s.spec.axis;
    let mut vmin = f64::INFINITY;
    for k in 0..=2000 {
        let mut q = [0.0; 2];
        q[s.spec.axis] = s.spec.value;
        q[o] = x0 + (x1 - x0) * k as f64 / 2000.0;
        vmin = vmin.min(a.potential().eval(&q));
    }
    let p = (2.0 * a.mass() * (s.spec.energy - vmin)).sqrt();
    // A little slack so that boundary points fall inside.
    let (xs, ps) = (1e-9 * (x1 - x0), 1e-9 * p);
    Ok(Window {
        x0: x0 - xs,
        x1: x1 + xs,
        p: p + ps,
    })
}

fn merge(a: Window, b: Window) -> Window {
    Window {
        x0: a.x0.min(b.x0),
        x1: a.x1.max(b.x1),
        p: a.p.max(b.p),
    }
}

fn box_of(w: &Window, n: usize, x: f64, px: f64) -> Option<(usize, usize)> {
    let u = (x - w.x0) / (w.x1 - w.x0);
    let v = (px + w.p) / (2.0 * w.p);
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return None;
    }
    let i = ((u * n as f64) as usize).min(n - 1);
    let j = ((v * n as f64) as usize).min(n - 1);
    Some((i, j))
}

fn occupied(s: &PoincareSection, w: &Window, n: usize) -> BTreeSet<(usize, usize)> {
    s.coordinates()
        .iter()
        .filter_map(|&(_, x, px)| box_of(w, n, x, px))
        .collect()
}

/// Boxes of an `n x n` partition of `w` that touch the allowed region of
/// `s` (a corner or the centre inside it).
fn allowed_boxes(s: &PoincareSection, w: &Window, n: usize) -> usize {
    let a = &s.action_used;
    let o = 1 - s.spec.axis;
    let inside = |x: f64, px: f64| {
        let mut q = [0.0; 2];
        q[s.spec.axis] = s.spec.value;
        q[o] = x;
        px * px / (2.0 * a.mass()) + a.potential().eval(&q) <= s.spec.energy
    };
    let (dx, dp) = ((w.x1 - w.x0) / n as f64, 2.0 * w.p / n as f64);
    let mut count = 0;
    for i in 0..n {
        for j in 0..n {
            let (x, p) = (w.x0 + i as f64 * dx, -w.p + j as f64 * dp);
            let probes = [
                (x, p),
                (x + dx, p),
                (x, p + dp),
                (x + dx, p + dp),
                (x + 0.5 * dx, p + 0.5 * dp),
            ];
            if probes.iter().any(|&(x, p)| inside(x, p)) {
                count += 1;
            }
        }
    }
    count
}

/// Fraction of the boxes of an `n x n` partition of the allowed `(x, p_x)`
/// region that contain at least one crossing.
pub fn section_occupancy(s: &PoincareSection, n: usize) -> Result<f64> {
    if s.points.is_empty() {
        return Err(invalid("the section has no crossings"));
    }
    if n == 0 {
        return Err(invalid("box count must be positive"));
    }
    let w = window(s)?;
    Ok(occupied(s, &w, n).len() as f64 / allowed_boxes(s, &w, n).max(1) as f64)
}

/// Scatter of one orbit's crossings about a smooth curve, in units of the
/// window half-widths. Two estimates are formed and the smaller is kept:
/// a Fourier fit of the radius about the centroid as a function of angle
/// (exact for closed curves around the centroid), and the median residual
/// of local quadratic fits through each crossing's nearest neighbours (for
/// curves of any shape). A genuine two-dimensional cloud defeats both. Zero
/// for fewer than 8 crossings.
fn orbit_thickness(points: &[(f64, f64)], w: &Window) -> f64 {
    if points.len() < 8 {
        return 0.0;
    }
    let (sx, sp) = (0.5 * (w.x1 - w.x0), w.p);
    let scaled: Vec<(f64, f64)> = points.iter().map(|&(x, p)| (x / sx, p / sp)).collect();
    fourier_thickness(&scaled).min(local_thickness(&scaled))
}

fn fourier_thickness(scaled: &[(f64, f64)]) -> f64 {
    let n = scaled.len() as f64;
    let cx = scaled.iter().map(|v| v.0).sum::<f64>() / n;
    let cp = scaled.iter().map(|v| v.1).sum::<f64>() / n;
    let polar: Vec<(f64, f64)> = scaled
        .iter()
        .map(|&(x, p)| ((p - cp).atan2(x - cx), (x - cx).hypot(p - cp)))
        .collect();
    let harmonics = 8.min(scaled.len() / 4);
    let cols = 2 * harmonics + 1;
    let mut a = DMatrix::<f64>::zeros(polar.len(), cols);
    let b = DVector::from_iterator(polar.len(), polar.iter().map(|v| v.1));
    for (r, &(th, _)) in polar.iter().enumerate() {
        a[(r, 0)] = 1.0;
        for k in 1..=harmonics {
            a[(r, 2 * k - 1)] = (k as f64 * th).cos();
            a[(r, 2 * k)] = (k as f64 * th).sin();
        }
    }
    match a.clone().svd(true, true).solve(&b, 1e-12) {
        Ok(c) => (a * c - b).amax(),
        Err(_) => f64::INFINITY,
    }
}

fn local_thickness(scaled: &[(f64, f64)]) -> f64 {
    let k = 12.min(scaled.len() - 1);
    let mut residuals = Vec::with_capacity(scaled.len());
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(scaled.len());
    for &(x0, p0) in scaled {
        dist.clear();
        dist.extend(
            scaled
                .iter()
                .enumerate()
                .map(|(j, &(x, p))| ((x - x0).powi(2) + (p - p0).powi(2), j)),
        );
        dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        let nb: Vec<(f64, f64)> = dist[..=k].iter().map(|&(_, j)| scaled[j]).collect();
        let m = nb.len() as f64;
        let (mx, mp) = (
            nb.iter().map(|v| v.0).sum::<f64>() / m,
            nb.iter().map(|v| v.1).sum::<f64>() / m,
        );
        let (mut cxx, mut cxp, mut cpp) = (0.0, 0.0, 0.0);
        for &(x, p) in &nb {
            cxx += (x - mx) * (x - mx);
            cxp += (x - mx) * (p - mp);
            cpp += (p - mp) * (p - mp);
        }
        // Principal direction of the neighbourhood.
        let angle = 0.5 * (2.0 * cxp).atan2(cxx - cpp);
        let (u, v) = ((angle.cos(), angle.sin()), (-angle.sin(), angle.cos()));
        let frame = |x: f64, p: f64| {
            (
                (x - mx) * u.0 + (p - mp) * u.1,
                (x - mx) * v.0 + (p - mp) * v.1,
            )
        };
        let mut a = DMatrix::<f64>::zeros(nb.len(), 3);
        let mut b = DVector::<f64>::zeros(nb.len());
        for (r, &(x, p)) in nb.iter().enumerate() {
            let (s, t) = frame(x, p);
            a[(r, 0)] = 1.0;
            a[(r, 1)] = s;
            a[(r, 2)] = s * s;
            b[r] = t;
        }
        let Ok(c) = a.svd(true, true).solve(&b, 1e-14) else {
            return f64::INFINITY;
        };
        let (s, t) = frame(x0, p0);
        residuals.push((t - c[0] - c[1] * s - c[2] * s * s).abs());
    }
    residuals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    residuals[residuals.len() / 2]
}

/// Descriptive comparison of two sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionComparison {
    pub boxes: usize,
    pub classical_occupancy: f64,
    pub quantum_occupancy: f64,
    pub classical_boxes: usize,
    pub quantum_boxes: usize,
    /// Boxes occupied by exactly one of the sections, on a common partition.
    pub symmetric_difference: usize,
    /// `symmetric_difference` over the boxes occupied by either.
    pub symmetric_fraction: f64,
    pub classical_thickness: Vec<f64>,
    pub quantum_thickness: Vec<f64>,
    pub classical_mean_thickness: f64,
    pub quantum_mean_thickness: f64,
}

fn thickness_per_orbit(s: &PoincareSection, w: &Window) -> Vec<f64> {
    let coords = s.coordinates();
    (0..s.orbit_count())
        .map(|o| {
            let pts: Vec<(f64, f64)> = coords
                .iter()
                .filter(|c| c.0 == o)
                .map(|c| (c.1, c.2))
                .collect();
            orbit_thickness(&pts, w)
        })
        .collect()
}

/// Per-orbit thickness of a section's crossing clouds.
pub fn section_thickness(s: &PoincareSection) -> Result<Vec<f64>> {
    let w = window(s)?;
    Ok(thickness_per_orbit(s, &w))
}

/// Compares sections taken at the same energy above their respective
/// potential minima.
pub fn compare_sections(
    classical: &PoincareSection,
    quantum: &PoincareSection,
    boxes: usize,
) -> Result<SectionComparison> {
    let ec = classical.spec.excitation(&classical.action_used);
    let eq = quantum.spec.excitation(&quantum.action_used);
    if (ec - eq).abs() > 1e-9 * ec.abs().max(1.0) {
        return Err(invalid(format!(
            "sections are at different energies above their minima ({ec} and {eq})"
        )));
    }
    if classical.spec.axis != quantum.spec.axis
        || classical.spec.value != quantum.spec.value
        || classical.spec.orientation != quantum.spec.orientation
    {
        return Err(invalid("sections use different planes"));
    }
    let wc = window(classical)?;
    let wq = window(quantum)?;
    let common = merge(wc, wq);
    let a = occupied(classical, &common, boxes);
    let b = occupied(quantum, &common, boxes);
    let sym = a.symmetric_difference(&b).count();
    let union = a.union(&b).count();
    let ct = thickness_per_orbit(classical, &wc);
    let qt = thickness_per_orbit(quantum, &wq);
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    Ok(SectionComparison {
        boxes,
        classical_occupancy: section_occupancy(classical, boxes)?,
        quantum_occupancy: section_occupancy(quantum, boxes)?,
        classical_boxes: a.len(),
        quantum_boxes: b.len(),
        symmetric_difference: sym,
        symmetric_fraction: if union == 0 {
            0.0
        } else {
            sym as f64 / union as f64
        },
        classical_mean_thickness: mean(&ct),
        quantum_mean_thickness: mean(&qt),
        classical_thickness: ct,
        quantum_thickness: qt,
    })
}

/// The model `V = v2 (x^2 + y^2) + v22 x^2 y^2` with mass `m`.
pub fn anharmonic_model(mass: f64, v2: f64, v22: f64) -> Result<ActionSpec> {
    ActionSpec::new(
        mass,
        PolynomialPotential::two_d(&[((2, 0), v2), ((0, 2), v2), ((2, 2), v22)])?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uncoupled_crossings_lie_on_x_energy_ellipses() {
        let a = anharmonic_model(1.0, 0.5, 0.0).unwrap();
        let spec = SectionSpec::on_shell(&a, 1.0, 6, 0, 40, 0.01, 400.0).unwrap();
        let s = generate_section(&a, &spec).unwrap();
        assert!(s.energy_error() < 1e-8);
        for (o, init) in spec.initial.iter().enumerate() {
            let ex0 = 0.5 * init.p[0] * init.p[0] + 0.5 * init.q[0] * init.q[0];
            let pts: Vec<_> = s.points.iter().filter(|c| c.orbit == o).collect();
            assert!(pts.len() >= 30);
            for c in pts {
                let ex = 0.5 * c.state.p[0] * c.state.p[0] + 0.5 * c.state.q[0] * c.state.q[0];
                assert!((ex - ex0).abs() < 1e-6);
                assert!(c.state.q[1].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn time_reversal_mirrors_the_section() {
        let a = anharmonic_model(1.0, 0.5, 0.05).unwrap();
        let spec = SectionSpec::on_shell(&a, 2.0, 3, 5, 12, 0.005, 200.0).unwrap();
        let fwd = generate_section(&a, &spec).unwrap();
        for o in 0..3 {
            let f: Vec<_> = fwd
                .points
                .iter()
                .filter(|c| c.orbit == o)
                .map(|c| c.state)
                .collect();
            // Reversing time and mirroring y keeps the crossing orientation,
            // so the orbit retraces its crossings with p_x negated.
            let last = f[f.len() - 1];
            let mut back = spec.clone();
            back.initial = vec![PhaseState::new(last.q, [-last.p[0], last.p[1]])];
            back.max_crossings = f.len();
            let r = generate_section(&a, &back).unwrap();
            assert_eq!(r.points.len(), f.len());
            for (k, c) in r.points.iter().enumerate() {
                let g = f[f.len() - 1 - k];
                assert!(
                    (c.state.q[0] - g.q[0]).abs() < 1e-8 && (c.state.p[0] + g.p[0]).abs() < 1e-8,
                    "{k} {c:?} {g:?}"
                );
            }
        }
    }

    #[test]
    fn fixed_point_orbit_occupies_one_box() {
        let a = anharmonic_model(1.0, 0.5, 0.05).unwrap();
        // x = px = 0 gives a periodic orbit along the y axis.
        let e = 1.0;
        let spec = SectionSpec::new(
            &a,
            e,
            vec![PhaseState::new([0.0, 0.0], [0.0, (2.0 * e).sqrt()])],
            20,
            0.01,
            200.0,
        )
        .unwrap();
        let s = generate_section(&a, &spec).unwrap();
        let n = 16;
        let w = window(&s).unwrap();
        let occ = section_occupancy(&s, n).unwrap();
        assert_eq!(occ, 1.0 / allowed_boxes(&s, &w, n) as f64);
    }

    #[test]
    fn identical_sections_have_no_difference() {
        let a = anharmonic_model(1.0, 0.5, 0.05).unwrap();
        let spec = SectionSpec::on_shell(&a, 1.0, 4, 0, 30, 0.02, 300.0).unwrap();
        let s = generate_section(&a, &spec).unwrap();
        let c = compare_sections(&s, &s, 32).unwrap();
        assert_eq!(c.symmetric_difference, 0);
        assert_eq!(c.classical_occupancy, c.quantum_occupancy);
        let other = SectionSpec::on_shell(&a, 2.0, 4, 0, 30, 0.02, 300.0).unwrap();
        assert!(compare_sections(&s, &generate_section(&a, &other).unwrap(), 32).is_err());
    }

    #[test]
    fn shell_validation() {
        let a = anharmonic_model(1.0, 0.5, 0.05).unwrap();
        assert!(SectionSpec::new(
            &a,
            1.0,
            vec![PhaseState::new([0.0, 0.0], [0.0, 1.0])],
            5,
            0.01,
            10.0
        )
        .is_err());
        assert!(SectionSpec::on_shell(&a, -1.0, 3, 0, 5, 0.01, 10.0).is_err());
    }

    #[test]
    fn regular_orbits_are_thin() {
        let a = anharmonic_model(1.0, 0.5, 0.0).unwrap();
        let spec = SectionSpec::on_shell(&a, 1.0, 4, 0, 60, 0.01, 600.0).unwrap();
        let s = generate_section(&a, &spec).unwrap();
        assert!(section_thickness(&s).unwrap().iter().all(|t| *t < 1e-6));
    }

    #[test]
    fn coupled_model_grows_chaotic_with_energy() {
        let a = anharmonic_model(1.0, 0.5, 0.05).unwrap();
        let section = |e: f64| {
            generate_section(
                &a,
                &SectionSpec::above_minimum(&a, e, 20, 0, 200, 0.01, 1e5).unwrap(),
            )
            .unwrap()
        };
        let (low, high) = (section(1.0), section(50.0));
        assert!(section_occupancy(&high, 32).unwrap() > section_occupancy(&low, 32).unwrap());
        let median = |s: &PoincareSection| {
            let mut t = section_thickness(s).unwrap();
            t.sort_by(|a, b| a.partial_cmp(b).unwrap());
            t[t.len() / 2]
        };
        assert!(median(&low) < 1e-3);
        assert!(median(&high) > 1e-2);
    }
}
