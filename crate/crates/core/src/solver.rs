//! HTCP residual, generalized Jacobian and the three solvers.
//!
//! The residual is the min-map reformulation
//! `Ψ(x, y) = [x ∧ y; A x^{m-1} - B y^{m-1} - q]`, whose zeros are exactly
//! the solutions.

use rand::Rng;
use serde::Serialize;

use crate::error::{check_dim, HtcpError, Result};
use crate::linalg::{inf_norm, Matrix, Vector};
use crate::newton::{damped_newton, multistart, start_rng, Effort, NewtonOptions, NewtonOutcome, System};
use crate::problem::{canonical_dedup, HtcpInstance, Pattern, SolutionPair, SolverConfig};
use crate::tensor::{inverse_power_vector, Tensor};

/// Grid spacing for the `n ≤ 2` emptiness scan.
pub const EMPTY_GRID_STEP: f64 = 0.05;

/// Largest dimension for which `ProvenEmpty` may be claimed.
pub const EMPTY_PROOF_MAX_DIM: usize = 2;

/// Weight of the vanishing linear term that makes `z = 0` a regular start
/// for the homotopy.
const HOMOTOPY_REGULARIZATION: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Found,
    NoneFound,
    /// Enumeration exhausted every pattern (only for `n ≤ 2`).
    ProvenEmpty,
    GuardExceeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Newton,
    Homotopy,
    Enumerate,
}

/// Where a homotopy path stopped short of `t = 1`.
#[derive(Clone, Debug, Serialize)]
pub struct PathFailure {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub method: Method,
    pub status: SolveStatus,
    pub solutions: Vec<SolutionPair>,
    pub effort: Effort,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_failure: Option<PathFailure>,
}

impl SolveReport {
    fn from_solutions(method: Method, solutions: Vec<SolutionPair>, effort: Effort) -> Self {
        let status = if solutions.is_empty() { SolveStatus::NoneFound } else { SolveStatus::Found };
        Self { method, status, solutions, effort, path_failure: None }
    }
}

fn check_xy(inst: &HtcpInstance, x: &Vector, y: &Vector) -> Result<()> {
    check_dim(inst.dim(), x.len())?;
    check_dim(inst.dim(), y.len())
}

/// `Ψ(x, y)`: rows `0..n` are `x ∧ y`, rows `n..2n` are `A x^{m-1} - B y^{m-1} - q`.
pub fn residual(inst: &HtcpInstance, x: &Vector, y: &Vector) -> Result<Vector> {
    check_xy(inst, x, y)?;
    let sys = PsiSystem::new(inst, inst.q().clone(), 0.0);
    Ok(sys.eval(&stack(x, y)))
}

/// Clarke selection for `Ψ`: row `i` of the top block picks `∂/∂x_i` when
/// `x_i ≤ y_i` (ties go to `x`) and `∂/∂y_i` otherwise; the bottom block is
/// `[∇(A x^{m-1}), -∇(B y^{m-1})]`.
pub fn generalized_jacobian(inst: &HtcpInstance, x: &Vector, y: &Vector) -> Result<Matrix> {
    check_xy(inst, x, y)?;
    let sys = PsiSystem::new(inst, inst.q().clone(), 0.0);
    Ok(sys.jacobian(&stack(x, y)))
}

pub(crate) fn stack(x: &Vector, y: &Vector) -> Vector {
    let n = x.len();
    Vector::from_fn(2 * n, |i, _| if i < n { x[i] } else { y[i - n] })
}

pub(crate) fn split(z: &Vector) -> (Vector, Vector) {
    let n = z.len() / 2;
    (z.rows(0, n).into_owned(), z.rows(n, n).into_owned())
}

/// `z ↦ [x ∧ y; A x^{m-1} - B y^{m-1} + c (x - y) - rhs]`.
pub(crate) struct PsiSystem<'a> {
    a: &'a Tensor,
    b: &'a Tensor,
    rhs: Vector,
    reg: f64,
    /// Offset subtracted from the min-map rows (used for regular values).
    top: Option<Vector>,
}

impl<'a> PsiSystem<'a> {
    pub(crate) fn new(inst: &'a HtcpInstance, rhs: Vector, reg: f64) -> Self {
        Self { a: inst.a(), b: inst.b(), rhs, reg, top: None }
    }
}

impl System for PsiSystem<'_> {
    fn eval(&self, z: &Vector) -> Vector {
        let n = self.a.dim();
        let (x, y) = (&z.as_slice()[..n], &z.as_slice()[n..]);
        let eq = self.a.power_map(x) - self.b.power_map(y) - &self.rhs;
        Vector::from_fn(2 * n, |i, _| {
            if i < n {
                x[i].min(y[i]) - self.top.as_ref().map_or(0.0, |t| t[i])
            } else {
                let j = i - n;
                eq[j] + self.reg * (x[j] - y[j])
            }
        })
    }

    fn jacobian(&self, z: &Vector) -> Matrix {
        let n = self.a.dim();
        let (x, y) = (&z.as_slice()[..n], &z.as_slice()[n..]);
        let ja = self.a.jacobian_map(x);
        let jb = self.b.jacobian_map(y);
        let mut g = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            if x[i] <= y[i] {
                g[(i, i)] = 1.0;
            } else {
                g[(i, n + i)] = 1.0;
            }
            for j in 0..n {
                g[(n + i, j)] = ja[(i, j)];
                g[(n + i, n + j)] = -jb[(i, j)];
            }
            g[(n + i, i)] += self.reg;
            g[(n + i, n + i)] -= self.reg;
        }
        g
    }
}

/// The square system left after a pattern fixes one variable per coordinate:
/// free `w_i` is `x_i` where the pattern frees `x`, else `y_i`; the other
/// variable of the coordinate is held at `fixed_i`.
pub(crate) struct ReducedSystem<'a> {
    pub a: &'a Tensor,
    pub b: &'a Tensor,
    pub pattern: Pattern,
    pub fixed: Vector,
    pub rhs: Vector,
}

impl ReducedSystem<'_> {
    pub(crate) fn expand(&self, w: &[f64]) -> (Vector, Vector) {
        let n = self.a.dim();
        let mut x = Vector::zeros(n);
        let mut y = Vector::zeros(n);
        for i in 0..n {
            if self.pattern.x_free(i) {
                x[i] = w[i];
                y[i] = self.fixed[i];
            } else {
                x[i] = self.fixed[i];
                y[i] = w[i];
            }
        }
        (x, y)
    }
}

impl System for ReducedSystem<'_> {
    fn eval(&self, w: &Vector) -> Vector {
        let (x, y) = self.expand(w.as_slice());
        self.a.power_map(x.as_slice()) - self.b.power_map(y.as_slice()) - &self.rhs
    }

    fn jacobian(&self, w: &Vector) -> Matrix {
        let (x, y) = self.expand(w.as_slice());
        let ja = self.a.jacobian_map(x.as_slice());
        let jb = self.b.jacobian_map(y.as_slice());
        let n = self.a.dim();
        Matrix::from_fn(n, n, |r, c| if self.pattern.x_free(c) { ja[(r, c)] } else { -jb[(r, c)] })
    }
}

fn newton_opts(cfg: &SolverConfig) -> NewtonOptions {
    NewtonOptions::new(cfg.tol_residual, cfg.max_newton_iters)
}

fn accept(inst: &HtcpInstance, out: &NewtonOutcome, tol: f64) -> Option<SolutionPair> {
    if !out.converged {
        return None;
    }
    let (x, y) = split(&out.z);
    let sol = SolutionPair::evaluate(inst, x, y).ok()?;
    (sol.residual() <= tol).then_some(sol)
}

/// Semismooth Newton on `Ψ` from one start.
pub fn solve_newton(inst: &HtcpInstance, x0: &Vector, y0: &Vector, cfg: &SolverConfig) -> Result<SolveReport> {
    check_xy(inst, x0, y0)?;
    cfg.validate()?;
    let sys = PsiSystem::new(inst, inst.q().clone(), 0.0);
    let out = damped_newton(&sys, &stack(x0, y0), &newton_opts(cfg));
    let mut effort = Effort::default();
    effort.record(&out);
    let sols = accept(inst, &out, cfg.tol_residual).into_iter().collect();
    Ok(SolveReport::from_solutions(Method::Newton, sols, effort))
}

/// Semismooth Newton from `multistart_count` starts drawn uniformly from
/// `[-r, r]^{2n}`; start `k` uses stream `k` of the configured seed.
pub fn solve_newton_multistart(inst: &HtcpInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let n = inst.dim();
    let r = cfg.search_radius;
    let opts = newton_opts(cfg);
    let runs = multistart(cfg.multistart_count, |k| {
        let mut rng = start_rng(cfg.rng_seed, k as u64);
        let z0 = Vector::from_fn(2 * n, |_, _| rng.random_range(-r..=r));
        let sys = PsiSystem::new(inst, inst.q().clone(), 0.0);
        let out = damped_newton(&sys, &z0, &opts);
        let sol = accept(inst, &out, cfg.tol_residual);
        (out, sol)
    });
    let mut effort = Effort::default();
    let mut sols = Vec::new();
    for (out, sol) in runs {
        effort.record(&out);
        sols.extend(sol);
    }
    Ok(SolveReport::from_solutions(Method::Newton, canonical_dedup(sols, cfg.tol_dedup), effort))
}

/// Predictor–corrector continuation from `z = 0` at `t = 0` to `t = 1` on
/// `G(z, t) = [x ∧ y; A x^{m-1} - B y^{m-1} + (1-t) c (x - y) - t q]`.
///
/// At `t = 1` this is `Ψ`. The `(1-t) c (x - y)` term vanishes at the end
/// and makes the origin a nondegenerate start.
pub fn solve_homotopy(inst: &HtcpInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let n = inst.dim();
    let base_h = 1.0 / cfg.homotopy_steps as f64;
    let min_h = base_h / 100.0;
    let opts = newton_opts(cfg);
    let mut effort = Effort { starts: 1, ..Default::default() };

    let mut t = 0.0_f64;
    let mut z = Vector::zeros(2 * n);
    let mut prev: Option<(f64, Vector)> = None;
    let mut h = base_h;

    while t < 1.0 {
        let t_next = (t + h).min(1.0);
        let pred = match &prev {
            Some((tp, zp)) if t > *tp => &z + (&z - zp) * ((t_next - t) / (t - tp)),
            _ => z.clone(),
        };
        let sys = PsiSystem::new(inst, inst.q() * t_next, HOMOTOPY_REGULARIZATION * (1.0 - t_next));
        let out = damped_newton(&sys, &pred, &opts);
        effort.iterations += out.iterations;
        if out.converged {
            prev = Some((t, z));
            z = out.z;
            t = t_next;
            h = (h * 2.0).min(base_h);
        } else {
            h *= 0.5;
            if h < min_h {
                let (x, y) = split(&z);
                return Ok(SolveReport {
                    method: Method::Homotopy,
                    status: SolveStatus::NoneFound,
                    solutions: vec![],
                    effort,
                    path_failure: Some(PathFailure {
                        t,
                        x: x.iter().cloned().collect(),
                        y: y.iter().cloned().collect(),
                    }),
                });
            }
        }
    }
    let (x, y) = split(&z);
    let sol = SolutionPair::evaluate(inst, x, y)?;
    let sols: Vec<_> = (sol.residual() <= cfg.tol_residual).then_some(sol).into_iter().collect();
    effort.converged = sols.len();
    Ok(SolveReport::from_solutions(Method::Homotopy, sols, effort))
}

/// Start `k` for a reduced pattern system: nonnegative, with a
/// log-uniform overall scale so that both small and large roots are reached.
pub(crate) fn reduced_start(rng: &mut impl Rng, k: usize, n: usize, radius: f64, floor: &Vector) -> Vector {
    if k == 0 {
        return Vector::from_fn(n, |i, _| floor[i] + 1.0);
    }
    let rho = radius * 10f64.powf(-2.0 * rng.random::<f64>());
    Vector::from_fn(n, |i, _| floor[i] + rho * rng.random::<f64>())
}

struct PatternSearch {
    solutions: Vec<SolutionPair>,
    effort: Effort,
    grid_min: f64,
}

fn search_pattern(inst: &HtcpInstance, p: Pattern, cfg: &SolverConfig, grid: bool) -> PatternSearch {
    let n = inst.dim();
    let sys = ReducedSystem {
        a: inst.a(),
        b: inst.b(),
        pattern: p,
        fixed: Vector::zeros(n),
        rhs: inst.q().clone(),
    };
    let opts = newton_opts(cfg);
    let floor = Vector::zeros(n);
    let count = cfg.multistart_count;
    let mut effort = Effort::default();
    let mut sols = Vec::new();
    for k in 0..count {
        let mut rng = start_rng(cfg.rng_seed, (p.mask() << 20) | k as u64);
        let w0 = reduced_start(&mut rng, k, n, cfg.search_radius, &floor);
        let out = damped_newton(&sys, &w0, &opts);
        effort.record(&out);
        if !out.converged || out.z.iter().any(|v| *v < -10.0 * cfg.tol_residual) {
            continue;
        }
        let w = out.z.map(|v| v.max(0.0));
        let (x, y) = sys.expand(w.as_slice());
        if let Ok(sol) = SolutionPair::evaluate(inst, x, y) {
            if sol.residual() <= cfg.tol_residual {
                sols.push(sol);
            }
        }
    }
    let mut grid_min = f64::INFINITY;
    if grid {
        let steps = (cfg.search_radius / EMPTY_GRID_STEP).round() as usize;
        let total = (steps + 1).pow(n as u32);
        let mut w = Vector::zeros(n);
        for flat in 0..total {
            let mut rem = flat;
            for i in 0..n {
                w[i] = (rem % (steps + 1)) as f64 * EMPTY_GRID_STEP;
                rem /= steps + 1;
            }
            grid_min = grid_min.min(inf_norm(&sys.eval(&w)));
        }
        effort.grid_points += total;
    }
    PatternSearch { solutions: sols, effort, grid_min }
}

/// Enumerates all `2^n` complementarity patterns, solving each reduced
/// polynomial system by multistart Newton and keeping nonnegative roots.
///
/// `ProvenEmpty` is reported only for `n ≤ 2`, when no pattern produced a
/// root and a grid scan of `[0, r]^n` with spacing 0.05 never got the
/// residual below `10 · tol`.
pub fn solve_pattern_enumeration(inst: &HtcpInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    cfg.check_guards(inst.dim(), inst.order())?;
    let n = inst.dim();
    let grid = n <= EMPTY_PROOF_MAX_DIM;
    let per_pattern = multistart(1usize << n, |mask| search_pattern(inst, Pattern::new(mask as u64, n), cfg, grid));
    let mut effort = Effort::default();
    let mut sols = Vec::new();
    let mut grid_min = f64::INFINITY;
    for ps in per_pattern {
        effort.absorb(&ps.effort);
        grid_min = grid_min.min(ps.grid_min);
        sols.extend(ps.solutions);
    }
    let sols = canonical_dedup(sols, cfg.tol_dedup);
    let mut report = SolveReport::from_solutions(Method::Enumerate, sols, effort);
    if report.solutions.is_empty() && grid && grid_min > 10.0 * cfg.tol_residual {
        report.status = SolveStatus::ProvenEmpty;
    }
    Ok(report)
}

/// Both residuals at most `tol` and `min(x, y) ≥ -tol`, recomputed from scratch.
pub fn verify_solution(inst: &HtcpInstance, pair: &SolutionPair, tol: f64) -> bool {
    match SolutionPair::evaluate(inst, pair.x.clone(), pair.y.clone()) {
        Ok(s) => {
            s.residual_complementarity <= tol
                && s.residual_equation <= tol
                && s.x.iter().zip(s.y.iter()).all(|(a, b)| a.min(*b) >= -tol)
        }
        Err(_) => false,
    }
}

/// `(A, B, q) ↦ (A, B, μ^{m-1} q)`.
pub fn scale_instance(inst: &HtcpInstance, mu: f64) -> Result<HtcpInstance> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(HtcpError::Domain(format!("scale factor must be positive, got {mu}")));
    }
    inst.with_q(inst.q() * mu.powi(inst.order() as i32 - 1))
}

/// `(x, y) ↦ (μ x, μ y)`; the recorded residuals scale accordingly.
pub fn scale_solution(pair: &SolutionPair, mu: f64, order: usize) -> Result<SolutionPair> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(HtcpError::Domain(format!("scale factor must be positive, got {mu}")));
    }
    Ok(SolutionPair {
        x: &pair.x * mu,
        y: &pair.y * mu,
        residual_complementarity: pair.residual_complementarity * mu,
        residual_equation: pair.residual_equation * mu.powi(order as i32 - 1),
        pattern: pair.pattern,
    })
}

/// Lifts a TCP(B, q) solution `y` to the HTCP(I, B, q) solution
/// `((B y^{m-1} + q)^{[1/(m-1)]}, y)`.
pub fn tcp_bridge_to_htcp(b: &Tensor, q: &Vector, y: &Vector) -> Result<SolutionPair> {
    let m = b.order();
    if !m.is_multiple_of(2) {
        return Err(HtcpError::OddOrder(m));
    }
    check_dim(b.dim(), q.len())?;
    check_dim(b.dim(), y.len())?;
    let w = b.apply_power(y)? + q;
    if let Some(i) = w.iter().position(|v| *v < 0.0) {
        return Err(HtcpError::Domain(format!(
            "(B y^(m-1) + q)_{i} = {} < 0: y is not a TCP solution",
            w[i]
        )));
    }
    let x = inverse_power_vector(&w, (m - 1) as u32)?;
    let inst = HtcpInstance::new(Tensor::identity(m, b.dim())?, b.clone(), q.clone())?;
    SolutionPair::evaluate(&inst, x, y.clone())
}

pub fn tcp_bridge_from_htcp(pair: &SolutionPair) -> Vector {
    pair.y.clone()
}
