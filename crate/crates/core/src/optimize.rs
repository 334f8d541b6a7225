//! Derivative-free minimization: Nelder-Mead with restarts and a
//! coordinate-wise parabolic polish.

use alloc::vec;
use alloc::vec::Vec;

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Converged once the simplex diameter (max-norm distance of any vertex
    /// from the best one) falls below this.
    pub tol: f64,
    pub max_evaluations: usize,
    /// Fresh simplices built around the best point after convergence; a
    /// restart that does not move the best point confirms the minimum.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            tol: 1e-8,
            max_evaluations: 20_000,
            restarts: 3,
        }
    }
}

/// Result of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Final simplex diameter (zero for the polish).
    pub diameter: f64,
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .map(|v| {
            v.iter()
                .zip(best)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Minimizes `f` from `x0` with the adaptive-parameter Nelder-Mead method.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return Minimum {
            x: Vec::new(),
            value: v,
            evaluations: evals,
            converged: true,
            diameter: 0.0,
        };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut best = x0.to_vec();
    let mut best_value = eval(&best, &mut evals);
    let mut last_diameter = f64::INFINITY;
    let mut converged = false;
    for round in 0..=opts.restarts {
        let start = best.clone();
        let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
        let mut values = vec![best_value];
        for i in 0..n {
            let mut v = start.clone();
            v[i] += opts.initial_step;
            values.push(eval(&v, &mut evals));
            simplex.push(v);
        }
        let mut round_converged = false;
        while evals < opts.max_evaluations {
            // Sort ascending by value; ties keep their order.
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| {
                values[a]
                    .partial_cmp(&values[b])
                    .unwrap_or(core::cmp::Ordering::Equal)
            });
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            last_diameter = diameter(&simplex);
            if last_diameter < opts.tol {
                round_converged = true;
                break;
            }
            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / nf;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < values[0] {
                let xe = along(alpha * beta);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = along(alpha * gamma);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-gamma);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    let b = simplex[0].clone();
                    for i in 1..=n {
                        for (x, bx) in simplex[i].iter_mut().zip(&b) {
                            *x = bx + delta * (*x - bx);
                        }
                        values[i] = eval(&simplex[i], &mut evals);
                    }
                }
            }
        }
        let moved = simplex[0]
            .iter()
            .zip(&best)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let improved = values[0] < best_value;
        if improved {
            best = simplex[0].clone();
            best_value = values[0];
        }
        if !round_converged {
            break;
        }
        if round > 0 && (moved < opts.tol || !improved) {
            converged = true;
            break;
        }
        if round == opts.restarts {
            converged = true;
        }
    }
    Minimum {
        x: best,
        value: best_value,
        evaluations: evals,
        converged,
        diameter: last_diameter,
    }
}

/// Coordinate-wise parabolic refinement: along each axis, fits a parabola
/// through three points and moves to its vertex when that lowers `f`. The
/// probe step is halved after every sweep without progress, down to `tol`.
pub fn quadratic_polish<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    value: f64,
    step: f64,
    tol: f64,
) -> Minimum {
    let mut x = x0.to_vec();
    let mut fx = value;
    let mut h = step;
    let mut evals = 0;
    while h >= tol && evals < 2000 {
        let mut progress = false;
        for i in 0..x.len() {
            let mut probe = x.clone();
            probe[i] = x[i] - h;
            let fm = f(&probe);
            probe[i] = x[i] + h;
            let fp = f(&probe);
            evals += 2;
            let curv = fp - 2.0 * fx + fm;
            let mut cand = if fm < fx && fm <= fp {
                Some((x[i] - h, fm))
            } else if fp < fx {
                Some((x[i] + h, fp))
            } else {
                None
            };
            if curv > 0.0 {
                let shift = 0.5 * h * (fm - fp) / curv;
                if shift.abs() <= 2.0 * h {
                    probe[i] = x[i] + shift;
                    let fv = f(&probe);
                    evals += 1;
                    if fv < fx && cand.map_or(true, |c| fv < c.1) {
                        cand = Some((probe[i], fv));
                    }
                }
            }
            if let Some((xi, fi)) = cand {
                x[i] = xi;
                fx = fi;
                progress = true;
            }
        }
        if !progress {
            h *= 0.5;
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: evals,
        converged: true,
        diameter: 0.0,
    }
}
