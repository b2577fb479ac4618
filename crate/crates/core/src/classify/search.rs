//! Counterexample searches for homogeneous conditions.
//!
//! Every pair property reduces to "does `R(z) = 0` have a nonzero root?" for
//! a residual `R` that is positively homogeneous up to scaling. Roots are
//! searched on the unit sphere by Levenberg–Marquardt, and in low dimension
//! the absence of roots is certified by a grid over the faces of the cube
//! `‖z‖∞ = 1` together with a Lipschitz bound on `R`.

use rand::Rng;
use rand_distr_lite::standard_normal;
use rayon::prelude::*;

use crate::linalg::{inf_norm, Matrix, Vector};
use crate::newton::{levenberg_marquardt, multistart, start_rng, Effort, NewtonOptions, System};
use crate::tensor::Tensor;

/// Grid spacing on each cube face.
pub const GRID_STEP: f64 = 0.02;

/// Largest ambient dimension for which the face grid is run.
pub const GRID_MAX_AMBIENT: usize = 4;

/// A homogeneous condition whose nonzero roots are counterexamples.
pub(crate) trait Homogeneous: Sync {
    fn ambient(&self) -> usize;
    fn residual(&self, z: &[f64]) -> Vector;
    fn jacobian(&self, z: &[f64]) -> Matrix;
    /// Bound on `‖R(z) - R(z')‖∞ / ‖z - z'‖∞` over the cube `‖z‖∞ ≤ 1`.
    fn lipschitz(&self) -> f64;
    /// Roots only live in the nonnegative orthant.
    fn nonnegative(&self) -> bool {
        false
    }
    /// `‖R(-z)‖∞ = ‖R(z)‖∞`, so only the `+1` faces need scanning.
    fn sign_symmetric(&self) -> bool {
        false
    }
}

/// `R(z)` augmented with `‖z‖² - 1`.
struct OnSphere<'a, H: Homogeneous>(&'a H);

impl<H: Homogeneous> System for OnSphere<'_, H> {
    fn eval(&self, z: &Vector) -> Vector {
        let r = self.0.residual(z.as_slice());
        let k = r.len();
        Vector::from_fn(k + 1, |i, _| if i < k { r[i] } else { z.norm_squared() - 1.0 })
    }

    fn jacobian(&self, z: &Vector) -> Matrix {
        let j = self.0.jacobian(z.as_slice());
        let (rows, cols) = j.shape();
        Matrix::from_fn(rows + 1, cols, |r, c| if r < rows { j[(r, c)] } else { 2.0 * z[c] })
    }
}

#[derive(Clone, Debug)]
pub(crate) struct SearchHit {
    pub z: Vector,
    pub residual: f64,
}

pub(crate) struct SearchOutcome {
    pub hit: Option<SearchHit>,
    /// Final iterates of every start, in start order.
    pub endpoints: Vec<SearchHit>,
    pub effort: Effort,
}

fn normalize(z: &Vector) -> Option<Vector> {
    let nz = z.norm();
    (nz > 0.0 && nz.is_finite()).then(|| z / nz)
}

/// Refines `z0` onto the sphere; returns the normalized endpoint and `‖R‖∞`.
pub(crate) fn refine<H: Homogeneous>(h: &H, z0: &Vector, tol: f64, iters: usize) -> (SearchHit, usize) {
    let opts = NewtonOptions { tol: tol * 0.1, max_iters: iters, max_halvings: 30, polish_iters: 10 };
    let out = levenberg_marquardt(&OnSphere(h), z0, &opts);
    let z = normalize(&out.z).unwrap_or_else(|| z0.clone());
    let residual = inf_norm(&h.residual(z.as_slice()));
    (SearchHit { z, residual }, out.iterations)
}

/// Multistart LM from random points on the sphere (plus `seeds`); the first
/// start in index order whose residual reaches `tol` wins.
pub(crate) fn sphere_search<H: Homogeneous>(
    h: &H,
    starts: usize,
    seed: u64,
    stream_base: u64,
    tol: f64,
    seeds: &[Vector],
) -> SearchOutcome {
    let k = h.ambient();
    let total = seeds.len() + starts;
    let runs = multistart(total, |i| {
        let z0 = if i < seeds.len() {
            seeds[i].clone()
        } else {
            let mut rng = start_rng(seed, stream_base + i as u64);
            let mut z = Vector::from_fn(k, |_, _| standard_normal(&mut rng));
            if h.nonnegative() {
                z = z.abs();
            }
            normalize(&z).unwrap_or_else(|| Vector::from_element(k, (k as f64).sqrt().recip()))
        };
        refine(h, &z0, tol, 200)
    });
    let mut effort = Effort::default();
    let mut hit = None;
    let mut endpoints = Vec::with_capacity(runs.len());
    for (end, iters) in runs {
        effort.starts += 1;
        effort.iterations += iters;
        if end.residual <= tol {
            effort.converged += 1;
            if hit.is_none() {
                hit = Some(end.clone());
            }
        }
        endpoints.push(end);
    }
    SearchOutcome { hit, endpoints, effort }
}

#[derive(Clone, Debug)]
pub(crate) struct GridOutcome {
    pub min_residual: f64,
    pub argmin: Vector,
    pub points: usize,
    /// `L · step / 2`: a root on the cube forces some grid residual below it.
    pub threshold: f64,
}

impl GridOutcome {
    pub fn certifies(&self) -> bool {
        self.min_residual > self.threshold * (1.0 + 1e-6) + 1e-12
    }
}

/// Evaluates `‖R‖∞` on every face `z_j = ±1` of the cube with the remaining
/// coordinates on a grid of spacing [`GRID_STEP`].
pub(crate) fn face_grid<H: Homogeneous>(h: &H) -> GridOutcome {
    let k = h.ambient();
    let lo = if h.nonnegative() { 0.0 } else { -1.0 };
    let per_axis = ((1.0 - lo) / GRID_STEP).round() as usize + 1;
    let face_points = per_axis.pow((k - 1) as u32);
    let signs: &[f64] = if h.nonnegative() || h.sign_symmetric() { &[1.0] } else { &[1.0, -1.0] };
    let faces: Vec<(usize, f64)> = (0..k).flat_map(|j| signs.iter().map(move |s| (j, *s))).collect();

    let best = faces
        .par_iter()
        .map(|&(j, s)| {
            let mut z = vec![0.0; k];
            let mut best = (f64::INFINITY, vec![0.0; k]);
            for flat in 0..face_points {
                let mut rem = flat;
                for (c, slot) in z.iter_mut().enumerate() {
                    if c == j {
                        *slot = s;
                    } else {
                        *slot = lo + (rem % per_axis) as f64 * GRID_STEP;
                        rem /= per_axis;
                    }
                }
                let r = inf_norm(&h.residual(&z));
                if r < best.0 {
                    best = (r, z.clone());
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::INFINITY, vec![0.0; k]), |acc, b| if b.0 < acc.0 { b } else { acc });

    GridOutcome {
        min_residual: best.0,
        argmin: Vector::from_vec(best.1),
        points: face_points * faces.len(),
        threshold: h.lipschitz() * GRID_STEP / 2.0,
    }
}

/// Bound on the Lipschitz constant of `x ↦ T x^{m-1}` on `‖x‖∞ ≤ 1`.
pub(crate) fn power_lipschitz(t: &Tensor) -> f64 {
    (t.order() - 1) as f64 * t.max_abs_row_sum()
}

pub(crate) fn random_unit(rng: &mut impl Rng, k: usize) -> Vector {
    let z = Vector::from_fn(k, |_, _| standard_normal(rng));
    normalize(&z).unwrap_or_else(|| Vector::from_element(k, (k as f64).sqrt().recip()))
}

/// Box–Muller normal sampling, to avoid pulling in a distributions crate for one call.
mod rand_distr_lite {
    use rand::Rng;

    pub fn standard_normal(rng: &mut impl Rng) -> f64 {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

// ---------------------------------------------------------------------------
// Concrete conditions.

/// R0 pair: `x ∧ y = 0, A x^{m-1} - B y^{m-1} = 0`.
pub(crate) struct R0Pair<'a> {
    pub a: &'a Tensor,
    pub b: &'a Tensor,
}

impl Homogeneous for R0Pair<'_> {
    fn ambient(&self) -> usize {
        2 * self.a.dim()
    }

    fn residual(&self, z: &[f64]) -> Vector {
        let n = self.a.dim();
        let (x, y) = z.split_at(n);
        let eq = self.a.power_map(x) - self.b.power_map(y);
        Vector::from_fn(2 * n, |i, _| if i < n { x[i].min(y[i]) } else { eq[i - n] })
    }

    fn jacobian(&self, z: &[f64]) -> Matrix {
        let n = self.a.dim();
        let (x, y) = z.split_at(n);
        let (ja, jb) = (self.a.jacobian_map(x), self.b.jacobian_map(y));
        Matrix::from_fn(2 * n, 2 * n, |r, c| {
            if r < n {
                let sel_x = x[r] <= y[r];
                f64::from(u8::from((sel_x && c == r) || (!sel_x && c == n + r)))
            } else if c < n {
                ja[(r - n, c)]
            } else {
                -jb[(r - n, c - n)]
            }
        })
    }

    fn lipschitz(&self) -> f64 {
        1f64.max(power_lipschitz(self.a) + power_lipschitz(self.b))
    }

    fn nonnegative(&self) -> bool {
        true
    }
}

/// P pair: `x * y ≤ 0, A x^{m-1} - B y^{m-1} = 0`, with the sign condition
/// as the penalty `max(0, x_i y_i)`.
pub(crate) struct PPair<'a> {
    pub a: &'a Tensor,
    pub b: &'a Tensor,
}

impl Homogeneous for PPair<'_> {
    fn ambient(&self) -> usize {
        2 * self.a.dim()
    }

    fn residual(&self, z: &[f64]) -> Vector {
        let n = self.a.dim();
        let (x, y) = z.split_at(n);
        let eq = self.a.power_map(x) - self.b.power_map(y);
        Vector::from_fn(2 * n, |i, _| if i < n { eq[i] } else { (x[i - n] * y[i - n]).max(0.0) })
    }

    fn jacobian(&self, z: &[f64]) -> Matrix {
        let n = self.a.dim();
        let (x, y) = z.split_at(n);
        let (ja, jb) = (self.a.jacobian_map(x), self.b.jacobian_map(y));
        Matrix::from_fn(2 * n, 2 * n, |r, c| {
            if r < n {
                if c < n {
                    ja[(r, c)]
                } else {
                    -jb[(r, c - n)]
                }
            } else {
                let i = r - n;
                if x[i] * y[i] <= 0.0 {
                    0.0
                } else if c == i {
                    y[i]
                } else if c == n + i {
                    x[i]
                } else {
                    0.0
                }
            }
        })
    }

    fn lipschitz(&self) -> f64 {
        2f64.max(power_lipschitz(self.a) + power_lipschitz(self.b))
    }

    fn sign_symmetric(&self) -> bool {
        true
    }
}

/// P tensor: `x_i (T x^{m-1})_i ≤ 0` for all `i`, as `max(0, x_i (T x^{m-1})_i)`.
pub(crate) struct PTensor<'a> {
    pub t: &'a Tensor,
}

impl Homogeneous for PTensor<'_> {
    fn ambient(&self) -> usize {
        self.t.dim()
    }

    fn residual(&self, x: &[f64]) -> Vector {
        let tx = self.t.power_map(x);
        Vector::from_fn(x.len(), |i, _| (x[i] * tx[i]).max(0.0))
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        let tx = self.t.power_map(x);
        let jt = self.t.jacobian_map(x);
        let n = x.len();
        Matrix::from_fn(n, n, |r, c| {
            if x[r] * tx[r] <= 0.0 {
                0.0
            } else {
                x[r] * jt[(r, c)] + if r == c { tx[r] } else { 0.0 }
            }
        })
    }

    fn lipschitz(&self) -> f64 {
        self.t.order() as f64 * self.t.max_abs_row_sum()
    }

    fn sign_symmetric(&self) -> bool {
        self.t.order().is_multiple_of(2)
    }
}

/// Singular direction of a tensor: `C x^{m-1} = 0`.
pub(crate) struct Kernel<'a> {
    pub t: &'a Tensor,
}

impl Homogeneous for Kernel<'_> {
    fn ambient(&self) -> usize {
        self.t.dim()
    }

    fn residual(&self, x: &[f64]) -> Vector {
        self.t.power_map(x)
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        self.t.jacobian_map(x)
    }

    fn lipschitz(&self) -> f64 {
        power_lipschitz(self.t)
    }

    fn sign_symmetric(&self) -> bool {
        true
    }
}

/// R0 tensor: `x ∧ T x^{m-1} = 0`.
pub(crate) struct R0Tensor<'a> {
    pub t: &'a Tensor,
}

impl Homogeneous for R0Tensor<'_> {
    fn ambient(&self) -> usize {
        self.t.dim()
    }

    fn residual(&self, x: &[f64]) -> Vector {
        let tx = self.t.power_map(x);
        Vector::from_fn(x.len(), |i, _| x[i].min(tx[i]))
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        let tx = self.t.power_map(x);
        let jt = self.t.jacobian_map(x);
        let n = x.len();
        Matrix::from_fn(n, n, |r, c| {
            if x[r] <= tx[r] {
                f64::from(u8::from(r == c))
            } else {
                jt[(r, c)]
            }
        })
    }

    fn lipschitz(&self) -> f64 {
        1f64.max(power_lipschitz(self.t))
    }

    fn nonnegative(&self) -> bool {
        true
    }
}

/// Strong P pair: with `dx = x1 - x2`, `dy = y1 - y2`,
/// `dx * dy ≤ 0` and `(A x1 - A x2) - (B y1 - B y2) = 0`, normalized by
/// `‖(dx, dy)‖ = 1`. Variables are `(x1, y1, x2, y2)`; not homogeneous, so
/// only the LM search applies.
pub(crate) struct StrongP<'a> {
    pub a: &'a Tensor,
    pub b: &'a Tensor,
}

impl StrongP<'_> {
    fn parts(z: &Vector, n: usize) -> [&[f64]; 4] {
        let s = z.as_slice();
        [&s[..n], &s[n..2 * n], &s[2 * n..3 * n], &s[3 * n..]]
    }
}

impl System for StrongP<'_> {
    fn eval(&self, z: &Vector) -> Vector {
        let n = self.a.dim();
        let [x1, y1, x2, y2] = Self::parts(z, n);
        let eq = (self.a.power_map(x1) - self.a.power_map(x2)) - (self.b.power_map(y1) - self.b.power_map(y2));
        let mut norm = 0.0;
        for i in 0..n {
            norm += (x1[i] - x2[i]).powi(2) + (y1[i] - y2[i]).powi(2);
        }
        Vector::from_fn(2 * n + 1, |i, _| {
            if i < n {
                eq[i]
            } else if i < 2 * n {
                let j = i - n;
                ((x1[j] - x2[j]) * (y1[j] - y2[j])).max(0.0)
            } else {
                norm - 1.0
            }
        })
    }

    fn jacobian(&self, z: &Vector) -> Matrix {
        let n = self.a.dim();
        let [x1, y1, x2, y2] = Self::parts(z, n);
        let (ja1, ja2) = (self.a.jacobian_map(x1), self.a.jacobian_map(x2));
        let (jb1, jb2) = (self.b.jacobian_map(y1), self.b.jacobian_map(y2));
        let mut j = Matrix::zeros(2 * n + 1, 4 * n);
        for r in 0..n {
            for c in 0..n {
                j[(r, c)] = ja1[(r, c)];
                j[(r, n + c)] = -jb1[(r, c)];
                j[(r, 2 * n + c)] = -ja2[(r, c)];
                j[(r, 3 * n + c)] = jb2[(r, c)];
            }
            let (dx, dy) = (x1[r] - x2[r], y1[r] - y2[r]);
            if dx * dy > 0.0 {
                j[(n + r, r)] = dy;
                j[(n + r, 2 * n + r)] = -dy;
                j[(n + r, n + r)] = dx;
                j[(n + r, 3 * n + r)] = -dx;
            }
            let last = 2 * n;
            j[(last, r)] = 2.0 * dx;
            j[(last, 2 * n + r)] = -2.0 * dx;
            j[(last, n + r)] = 2.0 * dy;
            j[(last, 3 * n + r)] = -2.0 * dy;
        }
        j
    }
}
