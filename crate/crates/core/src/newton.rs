//! Damped (semismooth) Newton, Levenberg–Marquardt and multistart plumbing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{all_finite, inf_norm, solve_checked, Matrix, Vector};

/// A map `F: R^k -> R^l` with a (generalized) Jacobian.
pub trait System: Sync {
    fn eval(&self, z: &Vector) -> Vector;
    fn jacobian(&self, z: &Vector) -> Matrix;
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub max_halvings: usize,
    /// Extra iterations spent driving the residual below `tol` once reached.
    pub polish_iters: usize,
}

impl NewtonOptions {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self { tol, max_iters, max_halvings: 30, polish_iters: 30 }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub z: Vector,
    /// `‖F(z)‖∞`
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

const DIVERGENCE_NORM: f64 = 1e8;
const SHIFT: f64 = 1e-3;

fn norm2(v: &Vector) -> f64 {
    v.norm()
}

/// Backtracking on `‖F‖₂` along `d`; returns the accepted point and value.
fn line_search<S: System>(
    sys: &S,
    z: &Vector,
    fz_norm: f64,
    d: &Vector,
    alpha0: f64,
    max_halvings: usize,
) -> Option<(Vector, Vector)> {
    let mut alpha = alpha0;
    for _ in 0..=max_halvings {
        let trial = z + d * alpha;
        let ft = sys.eval(&trial);
        if all_finite(&ft) && norm2(&ft) <= (1.0 - 1e-4 * alpha.min(1.0)) * fz_norm {
            return Some((trial, ft));
        }
        alpha *= 0.5;
    }
    None
}

/// Newton on a square system with step halving and a steepest-descent
/// fallback when the Jacobian is singular.
pub fn damped_newton<S: System>(sys: &S, z0: &Vector, opts: &NewtonOptions) -> NewtonOutcome {
    let mut z = z0.clone();
    let mut fz = sys.eval(&z);
    let mut iterations = 0;
    let mut polish_left = opts.polish_iters;
    let mut reached = false;
    loop {
        let res = inf_norm(&fz);
        if !all_finite(&fz) {
            return NewtonOutcome { z, residual: f64::INFINITY, iterations, converged: false };
        }
        if res <= opts.tol {
            reached = true;
            if res == 0.0 || polish_left == 0 {
                break;
            }
            polish_left -= 1;
        }
        if iterations >= opts.max_iters + if reached { opts.polish_iters } else { 0 } {
            break;
        }
        iterations += 1;
        let jac = sys.jacobian(&z);
        let fnorm = norm2(&fz);
        let newton = solve_checked(&jac, &(-&fz))
            .and_then(|d| line_search(sys, &z, fnorm, &d, 1.0, opts.max_halvings))
            .or_else(|| {
                // Derivatives of x^k vanish at 0; a shifted Jacobian still gives a usable direction.
                let shift = SHIFT * (1.0 + inf_norm(&z));
                let shifted = sys.jacobian(&z.map(|v| v + shift));
                solve_checked(&shifted, &(-&fz))
                    .and_then(|d| line_search(sys, &z, fnorm, &d, 1.0, opts.max_halvings))
            });
        let step = newton.or_else(|| {
            let g = jac.transpose() * &fz;
            let jg = &jac * &g;
            let denom = jg.norm_squared();
            if denom == 0.0 || !denom.is_finite() {
                return None;
            }
            let alpha = g.norm_squared() / denom;
            line_search(sys, &z, fnorm, &(-g), alpha, opts.max_halvings)
        });
        match step {
            Some((zn, fzn)) => {
                z = zn;
                fz = fzn;
            }
            None => break,
        }
        if inf_norm(&z) > DIVERGENCE_NORM {
            break;
        }
    }
    let residual = inf_norm(&fz);
    NewtonOutcome { converged: residual <= opts.tol, z, residual, iterations }
}

/// Levenberg–Marquardt for `min ½‖F(z)‖²` with possibly rectangular `F`.
pub fn levenberg_marquardt<S: System>(sys: &S, z0: &Vector, opts: &NewtonOptions) -> NewtonOutcome {
    let mut z = z0.clone();
    let mut fz = sys.eval(&z);
    let mut cost = fz.norm_squared();
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut polish_left = opts.polish_iters;
    while iterations < opts.max_iters + opts.polish_iters {
        if !cost.is_finite() {
            break;
        }
        let res = inf_norm(&fz);
        if res <= opts.tol {
            if res == 0.0 || polish_left == 0 {
                break;
            }
            polish_left -= 1;
        } else if iterations >= opts.max_iters {
            break;
        }
        iterations += 1;
        let jac = sys.jacobian(&z);
        let jt = jac.transpose();
        let g = &jt * &fz;
        let jtj = &jt * &jac;
        let k = z.len();
        let mut improved = false;
        for _ in 0..opts.max_halvings {
            let scale = jtj.diagonal().max().max(1e-12);
            let lhs = &jtj + Matrix::identity(k, k) * (mu * scale);
            let Some(d) = solve_checked(&lhs, &(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let trial = &z + &d;
            let ft = sys.eval(&trial);
            let tc = ft.norm_squared();
            if tc.is_finite() && tc < cost {
                z = trial;
                fz = ft;
                cost = tc;
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved || inf_norm(&z) > DIVERGENCE_NORM {
            break;
        }
    }
    let residual = inf_norm(&fz);
    NewtonOutcome { converged: residual <= opts.tol, z, residual, iterations }
}

/// Independent generator for start `stream` under `seed`.
pub fn start_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(0..count)` in parallel and returns results in index order.
pub fn multistart<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

/// Search statistics attached to reports and verdicts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Effort {
    pub starts: usize,
    pub iterations: usize,
    pub converged: usize,
    pub grid_points: usize,
}

impl Effort {
    pub fn absorb(&mut self, other: &Effort) {
        self.starts += other.starts;
        self.iterations += other.iterations;
        self.converged += other.converged;
        self.grid_points += other.grid_points;
    }

    pub fn record(&mut self, out: &NewtonOutcome) {
        self.starts += 1;
        self.iterations += out.iterations;
        self.converged += usize::from(out.converged);
    }
}
