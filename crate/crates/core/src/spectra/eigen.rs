//! H-, Z- and B-eigenpairs by multistart Levenberg–Marquardt on the
//! normalized eigen-equations.

use rand::Rng;
use serde::Serialize;

use crate::classify::search::{power_lipschitz, sphere_search, Homogeneous};
use crate::error::{HtcpError, Result};
use crate::linalg::{inf_dist, inf_norm, ser_vector, Matrix, Vector};
use crate::newton::{levenberg_marquardt, multistart, start_rng, Effort, NewtonOptions, System};
use crate::problem::SolverConfig;
use crate::tensor::Tensor;

pub const EIGEN_MAX_DIM: usize = 6;
pub const EIGEN_MAX_ORDER: usize = 5;

/// Pairs closer than this in `λ` and in `x` (∞-norm) are merged.
pub const EIGEN_DEDUP_TOL: f64 = 1e-6;

/// Below this `‖B x^{m-1}‖∞` a B-eigen direction is reported as common null.
const NULL_TOL: f64 = 1e-6;

const STREAM_H: u64 = 1 << 36;
const STREAM_Z: u64 = 2 << 36;
const STREAM_B: u64 = 3 << 36;
const STREAM_NULL: u64 = 4 << 36;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EigenKind {
    H,
    Z,
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Unit vector: ∞-norm for H, 2-norm for Z and B.
    #[serde(serialize_with = "ser_vector")]
    pub x: Vector,
    pub residual: f64,
    pub kind: EigenKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenReport {
    pub kind: EigenKind,
    pub pairs: Vec<EigenPair>,
    /// B-eigen only: unit `x` with `A x^{m-1} = B x^{m-1} = 0`.
    pub common_null: Vec<Vec<f64>>,
    pub effort: Effort,
    /// Multistart gives no completeness guarantee.
    pub confidence: &'static str,
}

impl EigenReport {
    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }
}

fn check_guards(t: &Tensor, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if t.dim() > EIGEN_MAX_DIM || t.order() > EIGEN_MAX_ORDER {
        return Err(HtcpError::GuardExceeded(format!(
            "eigen solvers support n <= {EIGEN_MAX_DIM} and m <= {EIGEN_MAX_ORDER}, got n = {}, m = {}",
            t.dim(),
            t.order()
        )));
    }
    Ok(())
}

/// Flips `x` so that its first clearly nonzero entry is positive.
fn canonical_sign(x: &Vector) -> (Vector, f64) {
    let s = x.iter().find(|v| v.abs() > 1e-9).map_or(1.0, |v| v.signum());
    (x * s, s)
}

/// Zeroes entries below the accuracy a residual of `tol` pins them to
/// (about `tol^{1/(m-1)}` near multiple roots), then renormalizes.
fn snap(x: &Vector, tol: f64, order: usize, inf: bool) -> Vector {
    let floor = 10.0 * tol.powf(1.0 / (order as f64 - 1.0).max(1.0));
    let y = x.map(|v| if v.abs() < floor { 0.0 } else { v });
    let norm = if inf { inf_norm(&y) } else { y.norm() };
    if norm > 0.0 {
        y / norm
    } else {
        x.clone()
    }
}

/// Keeps the snapped vector when it still satisfies the equation.
fn best_of(x: Vector, tol: f64, order: usize, inf: bool, residual: impl Fn(&Vector) -> f64) -> (Vector, f64) {
    let snapped = snap(&x, tol, order, inf);
    let (r0, r1) = (residual(&x), residual(&snapped));
    if r1 <= tol && r1 <= r0.max(tol) {
        (snapped, r1)
    } else {
        (x, r0)
    }
}

fn ipow(v: f64, k: usize) -> f64 {
    v.powi(k as i32)
}

/// `‖A x^{m-1} - λ · rhs‖∞` with the kind-specific right-hand side.
pub fn eigen_residual(a: &Tensor, b: Option<&Tensor>, kind: EigenKind, lambda: f64, x: &Vector) -> Result<f64> {
    let ax = a.apply_power(x)?;
    let rhs = match kind {
        EigenKind::H => x.map(|v| ipow(v, a.order() - 1)),
        EigenKind::Z => x.clone(),
        EigenKind::B => b
            .ok_or_else(|| HtcpError::Invalid("B-eigen residual needs the second tensor".into()))?
            .apply_power(x)?,
    };
    Ok(inf_norm(&(ax - rhs * lambda)))
}

fn finish(kind: EigenKind, mut found: Vec<EigenPair>, common: Vec<Vector>, effort: Effort) -> EigenReport {
    found.sort_by(|p, q| p.residual.total_cmp(&q.residual));
    let mut pairs: Vec<EigenPair> = Vec::new();
    for p in found {
        if !pairs
            .iter()
            .any(|k| (k.lambda - p.lambda).abs() <= EIGEN_DEDUP_TOL && inf_dist(&k.x, &p.x) <= EIGEN_DEDUP_TOL)
        {
            pairs.push(p);
        }
    }
    pairs.sort_by(|p, q| {
        p.lambda.total_cmp(&q.lambda).then_with(|| {
            p.x.iter().zip(q.x.iter()).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut nulls: Vec<Vector> = Vec::new();
    for c in common {
        if !nulls.iter().any(|k| inf_dist(k, &c) <= EIGEN_DEDUP_TOL) {
            nulls.push(c);
        }
    }
    EigenReport {
        kind,
        pairs,
        common_null: nulls.into_iter().map(|v| v.as_slice().to_vec()).collect(),
        effort,
        confidence: "heuristic",
    }
}

fn lm_opts(cfg: &SolverConfig) -> NewtonOptions {
    NewtonOptions { tol: cfg.tol_residual * 0.1, max_iters: cfg.max_newton_iters.max(100), max_halvings: 30, polish_iters: 10 }
}

// ---------------------------------------------------------------------------

/// `T x^{m-1} - λ x^{[m-1]}` with `x_j = s`; unknowns are the other `x_i` and `λ`.
struct HSystem<'a> {
    t: &'a Tensor,
    j: usize,
    s: f64,
}

impl HSystem<'_> {
    fn x(&self, v: &Vector) -> Vector {
        let n = self.t.dim();
        Vector::from_fn(n, |i, _| match i.cmp(&self.j) {
            std::cmp::Ordering::Less => v[i],
            std::cmp::Ordering::Equal => self.s,
            std::cmp::Ordering::Greater => v[i - 1],
        })
    }
}

impl System for HSystem<'_> {
    fn eval(&self, v: &Vector) -> Vector {
        let x = self.x(v);
        let lambda = v[v.len() - 1];
        let k = self.t.order() - 1;
        self.t.power_map(x.as_slice()) - x.map(|xi| ipow(xi, k)) * lambda
    }

    fn jacobian(&self, v: &Vector) -> Matrix {
        let x = self.x(v);
        let n = x.len();
        let lambda = v[n - 1];
        let k = self.t.order() - 1;
        let jt = self.t.jacobian_map(x.as_slice());
        Matrix::from_fn(n, n, |r, c| {
            if c == n - 1 {
                return -ipow(x[r], k);
            }
            let col = if c < self.j { c } else { c + 1 };
            jt[(r, col)] - if r == col { lambda * k as f64 * ipow(x[col], k - 1) } else { 0.0 }
        })
    }
}

/// H-eigenpairs `T x^{m-1} = λ x^{[m-1]}` with `‖x‖∞ = 1`.
pub fn h_eigen(t: &Tensor, cfg: &SolverConfig) -> Result<EigenReport> {
    check_guards(t, cfg)?;
    let n = t.dim();
    let k = t.order() - 1;
    let bound = t.max_abs_row_sum().max(1.0);
    let per_slot = (cfg.multistart_count / (2 * n)).max(2);
    let opts = lm_opts(cfg);
    let tol = cfg.tol_residual;
    let runs = multistart(2 * n * per_slot, |idx| {
        let (slot, _) = (idx / per_slot, idx % per_slot);
        let sys = HSystem { t, j: slot / 2, s: if slot % 2 == 0 { 1.0 } else { -1.0 } };
        let mut rng = start_rng(cfg.rng_seed, STREAM_H + idx as u64);
        let v0 = Vector::from_fn(n, |i, _| if i < n - 1 { rng.random_range(-1.0..=1.0) } else { rng.random_range(-bound..=bound) });
        let out = levenberg_marquardt(&sys, &v0, &opts);
        let x = sys.x(&out.z);
        (x, out.z[n - 1], out)
    });
    let mut effort = Effort::default();
    let mut found = Vec::new();
    for (x, lambda, out) in runs {
        effort.record(&out);
        let scale = inf_norm(&x);
        if !(scale > 0.0) || !lambda.is_finite() {
            continue;
        }
        let (x, _) = canonical_sign(&(x / scale));
        let (x, residual) = best_of(x, tol, t.order(), true, |x| {
            inf_norm(&(t.power_map(x.as_slice()) - x.map(|v| ipow(v, k)) * lambda))
        });
        if residual <= tol {
            found.push(EigenPair { lambda, x, residual, kind: EigenKind::H });
        }
    }
    Ok(finish(EigenKind::H, found, vec![], effort))
}

// ---------------------------------------------------------------------------

/// `[A x^{m-1} - λ R(x); ‖x‖² - 1]` where `R(x) = x` (Z) or `B x^{m-1}` (B).
struct Normalized<'a> {
    a: &'a Tensor,
    b: Option<&'a Tensor>,
}

impl System for Normalized<'_> {
    fn eval(&self, v: &Vector) -> Vector {
        let n = self.a.dim();
        let x = v.rows(0, n).into_owned();
        let lambda = v[n];
        let rhs = match self.b {
            Some(b) => b.power_map(x.as_slice()),
            None => x.clone(),
        };
        let r = self.a.power_map(x.as_slice()) - rhs * lambda;
        Vector::from_fn(n + 1, |i, _| if i < n { r[i] } else { x.norm_squared() - 1.0 })
    }

    fn jacobian(&self, v: &Vector) -> Matrix {
        let n = self.a.dim();
        let x = v.rows(0, n).into_owned();
        let lambda = v[n];
        let ja = self.a.jacobian_map(x.as_slice());
        let (jr, rhs) = match self.b {
            Some(b) => (b.jacobian_map(x.as_slice()), b.power_map(x.as_slice())),
            None => (Matrix::identity(n, n), x.clone()),
        };
        Matrix::from_fn(n + 1, n + 1, |r, c| match (r < n, c < n) {
            (true, true) => ja[(r, c)] - lambda * jr[(r, c)],
            (true, false) => -rhs[r],
            (false, true) => 2.0 * x[c],
            (false, false) => 0.0,
        })
    }
}

fn unit_start(rng: &mut impl Rng, n: usize) -> Vector {
    loop {
        let x = Vector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let norm = x.norm();
        if norm > 1e-3 {
            return x / norm;
        }
    }
}

/// Z-eigenpairs `T x^{m-1} = λ x` with `‖x‖₂ = 1`.
pub fn z_eigen(t: &Tensor, cfg: &SolverConfig) -> Result<EigenReport> {
    check_guards(t, cfg)?;
    let n = t.dim();
    let even = t.order().is_multiple_of(2);
    let bound = t.max_abs_row_sum().max(1.0) * (n as f64).sqrt();
    let opts = lm_opts(cfg);
    let sys = Normalized { a: t, b: None };
    let runs = multistart(cfg.multistart_count, |k| {
        let mut rng = start_rng(cfg.rng_seed, STREAM_Z + k as u64);
        let x0 = unit_start(&mut rng, n);
        let mut v0 = Vector::zeros(n + 1);
        v0.rows_mut(0, n).copy_from(&x0);
        v0[n] = rng.random_range(-bound..=bound);
        levenberg_marquardt(&sys, &v0, &opts)
    });
    let mut effort = Effort::default();
    let mut found = Vec::new();
    for out in runs {
        effort.record(&out);
        let x = out.z.rows(0, n).into_owned();
        let norm = x.norm();
        if !(norm > 0.0) || !out.z[n].is_finite() {
            continue;
        }
        let x = x / norm;
        let mut lambda = out.z[n];
        // (λ, x) ↦ (λ, -x) for even order and (-λ, -x) for odd order.
        let (x, s) = canonical_sign(&x);
        if !even && s < 0.0 {
            lambda = -lambda;
        }
        let (x, residual) = best_of(x, cfg.tol_residual, t.order(), false, |x| {
            inf_norm(&(t.power_map(x.as_slice()) - x * lambda))
        });
        if residual <= cfg.tol_residual {
            found.push(EigenPair { lambda, x, residual, kind: EigenKind::Z });
        }
    }
    Ok(finish(EigenKind::Z, found, vec![], effort))
}

/// B-eigenpairs `A x^{m-1} = λ B x^{m-1}` with `‖x‖₂ = 1`. Unit directions
/// where both sides vanish are listed separately in `common_null`.
pub fn b_eigen(a: &Tensor, b: &Tensor, cfg: &SolverConfig) -> Result<EigenReport> {
    a.same_shape(b)?;
    check_guards(a, cfg)?;
    let n = a.dim();
    let opts = lm_opts(cfg);
    let sys = Normalized { a, b: Some(b) };
    let runs = multistart(cfg.multistart_count, |k| {
        let mut rng = start_rng(cfg.rng_seed, STREAM_B + k as u64);
        let x0 = unit_start(&mut rng, n);
        let (ax, bx) = (a.power_map(x0.as_slice()), b.power_map(x0.as_slice()));
        let denom = bx.norm_squared();
        let lambda0 = if denom > 1e-12 { ax.dot(&bx) / denom } else { 0.0 };
        let mut v0 = Vector::zeros(n + 1);
        v0.rows_mut(0, n).copy_from(&x0);
        v0[n] = lambda0;
        levenberg_marquardt(&sys, &v0, &opts)
    });
    let mut effort = Effort::default();
    let mut found = Vec::new();
    let mut common: Vec<Vector> = Vec::new();
    for out in runs {
        effort.record(&out);
        let x = out.z.rows(0, n).into_owned();
        let norm = x.norm();
        if !(norm > 0.0) || !out.z[n].is_finite() {
            continue;
        }
        let (x, _) = canonical_sign(&(x / norm));
        let lambda = out.z[n];
        if inf_norm(&b.power_map(x.as_slice())) <= NULL_TOL {
            continue;
        }
        let (x, residual) = best_of(x, cfg.tol_residual, a.order(), false, |x| {
            inf_norm(&(a.power_map(x.as_slice()) - b.power_map(x.as_slice()) * lambda))
        });
        if residual <= cfg.tol_residual {
            found.push(EigenPair { lambda, x, residual, kind: EigenKind::B });
        }
    }
    let nulls = sphere_search(&CommonNull { a, b }, cfg.multistart_count, cfg.rng_seed, STREAM_NULL, cfg.tol_residual, &[]);
    effort.absorb(&nulls.effort);
    for end in nulls.endpoints {
        if end.residual <= cfg.tol_residual {
            let (x, _) = canonical_sign(&end.z);
            let (x, _) = best_of(x, cfg.tol_residual, a.order(), false, |x| {
                inf_norm(&a.power_map(x.as_slice())).max(inf_norm(&b.power_map(x.as_slice())))
            });
            common.push(x);
        }
    }
    Ok(finish(EigenKind::B, found, common, effort))
}

/// `[A x^{m-1}; B x^{m-1}]`, whose unit roots are the common-null directions.
struct CommonNull<'a> {
    a: &'a Tensor,
    b: &'a Tensor,
}

impl Homogeneous for CommonNull<'_> {
    fn ambient(&self) -> usize {
        self.a.dim()
    }

    fn residual(&self, x: &[f64]) -> Vector {
        let (ax, bx) = (self.a.power_map(x), self.b.power_map(x));
        Vector::from_iterator(2 * x.len(), ax.iter().chain(bx.iter()).copied())
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        let (ja, jb) = (self.a.jacobian_map(x), self.b.jacobian_map(x));
        let n = x.len();
        Matrix::from_fn(2 * n, n, |r, c| if r < n { ja[(r, c)] } else { jb[(r - n, c)] })
    }

    fn lipschitz(&self) -> f64 {
        power_lipschitz(self.a).max(power_lipschitz(self.b))
    }

    fn sign_symmetric(&self) -> bool {
        true
    }
}
