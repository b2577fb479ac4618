//! Degree of the residual map at the origin by regular-value census: pick a
//! small generic `p`, find every preimage of `p` through the complementarity
//! case split, and sum the signs of the Jacobian determinants.

use rand::Rng;
use serde::Serialize;

use crate::classify::{check_p_pair, check_r0_pair, check_r_pair};
use crate::error::{HtcpError, Result};
use crate::linalg::{det_sign, inf_dist, ser_vector, Matrix, Vector};
use crate::newton::{damped_newton, multistart, start_rng, Effort, NewtonOptions, System};
use crate::problem::{HtcpInstance, Pattern, SolverConfig};
use crate::solver::{generalized_jacobian, reduced_start, ReducedSystem};
use crate::tensor::Tensor;

/// Resampling budget for the regular value.
pub const MAX_REGULAR_ATTEMPTS: usize = 10;

/// Preimages with `|det| ≤` this are degenerate and trigger a resample.
pub const DEGENERATE_DET: f64 = 1e-8;

/// `‖p‖∞ = REGULAR_SCALE · r^{m-1}` for search radius `r`.
pub const REGULAR_SCALE: f64 = 1e-2;

const STREAM_VALUE: u64 = 1 << 44;
const STREAM_ROOTS: u64 = 2 << 44;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confidence {
    ExactSpecialCase,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignedSolution {
    #[serde(serialize_with = "ser_vector")]
    pub z: Vector,
    pub sign: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeEstimate {
    pub value: i64,
    pub solutions_used: Vec<SignedSolution>,
    #[serde(serialize_with = "ser_vector")]
    pub regular_value: Vector,
    pub confidence: Confidence,
    /// Odd order: existence may fail, so no claim is attached to a nonzero value.
    pub odd_order: bool,
    /// Regular values tried, including the accepted one.
    pub attempts: usize,
    pub effort: Effort,
}

impl DegreeEstimate {
    fn from_census(census: Census, confidence: Confidence, odd_order: bool, effort: Effort) -> Self {
        let value = census.solutions.iter().map(|s| i64::from(s.sign)).sum();
        Self {
            value,
            solutions_used: census.solutions,
            regular_value: census.value,
            confidence,
            odd_order,
            attempts: census.attempts,
            effort,
        }
    }
}

struct Census {
    solutions: Vec<SignedSolution>,
    value: Vector,
    attempts: usize,
}

fn random_value(rng: &mut impl Rng, len: usize, magnitude: f64) -> Vector {
    let p = Vector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0));
    let scale = p.amax().max(1e-3);
    p * (magnitude / scale)
}

fn regular_magnitude(order: usize, cfg: &SolverConfig) -> f64 {
    REGULAR_SCALE * cfg.search_radius.powi(order as i32 - 1)
}

fn dedup(mut roots: Vec<Vector>, tol: f64) -> Vec<Vector> {
    let mut kept: Vec<Vector> = Vec::new();
    roots.sort_by(|a, b| a.iter().zip(b.iter()).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    for r in roots.drain(..) {
        if !kept.iter().any(|k| inf_dist(k, &r) <= tol) {
            kept.push(r);
        }
    }
    kept
}

/// Retries with fresh regular values until every preimage is nondegenerate.
fn census_loop(
    effort: &mut Effort,
    mut attempt: impl FnMut(usize, &mut Effort) -> (Vector, Vec<(Vector, Option<i32>)>),
) -> Result<Census> {
    for k in 0..MAX_REGULAR_ATTEMPTS {
        let (value, roots) = attempt(k, effort);
        if roots.iter().all(|(_, s)| s.is_some()) {
            let solutions = roots.into_iter().map(|(z, s)| SignedSolution { z, sign: s.unwrap_or(0) }).collect();
            return Ok(Census { solutions, value, attempts: k + 1 });
        }
    }
    Err(HtcpError::DegenerateRegularValue(MAX_REGULAR_ATTEMPTS))
}

/// All preimages `Ψ(z) = p` for the pair: per pattern, hold the active
/// variable of each coordinate at `p_i` and solve the reduced square system
/// for the other, keeping roots with the free variable above `p_i`.
fn pair_preimages(a: &Tensor, b: &Tensor, p: &Vector, cfg: &SolverConfig, stream: u64, effort: &mut Effort) -> Vec<(Vector, Option<i32>)> {
    let n = a.dim();
    let top = p.rows(0, n).into_owned();
    let bottom = p.rows(n, n).into_owned();
    let inst = HtcpInstance::new(a.clone(), b.clone(), bottom.clone()).expect("validated shapes");
    let opts = NewtonOptions::new(cfg.tol_residual, cfg.max_newton_iters);
    let starts = cfg.multistart_count;
    let runs = multistart((1usize << n) * starts, |idx| {
        let (mask, k) = (idx / starts, idx % starts);
        let pattern = Pattern::new(mask as u64, n);
        let sys = ReducedSystem { a, b, pattern, fixed: top.clone(), rhs: bottom.clone() };
        let mut rng = start_rng(cfg.rng_seed, stream + ((mask as u64) << 20) + k as u64);
        let w0 = reduced_start(&mut rng, k, n, cfg.search_radius, &top);
        let out = damped_newton(&sys, &w0, &opts);
        let root = (out.converged && out.z.iter().zip(top.iter()).all(|(w, f)| *w > *f)).then(|| {
            let (x, y) = sys.expand(out.z.as_slice());
            Vector::from_iterator(2 * n, x.iter().chain(y.iter()).copied())
        });
        (root, out)
    });
    let mut roots = Vec::new();
    for (root, out) in runs {
        effort.record(&out);
        roots.extend(root);
    }
    dedup(roots, cfg.tol_dedup)
        .into_iter()
        .map(|z| {
            let (x, y) = (z.rows(0, n).into_owned(), z.rows(n, n).into_owned());
            let sign = generalized_jacobian(&inst, &x, &y).ok().and_then(|g| det_sign(&g, DEGENERATE_DET));
            (z, sign)
        })
        .collect()
}

/// Census for `x ↦ A x^{m-1}` at a generic point.
fn power_map_preimages(a: &Tensor, p: &Vector, cfg: &SolverConfig, stream: u64, effort: &mut Effort) -> Vec<(Vector, Option<i32>)> {
    struct PowerEq<'a> {
        a: &'a Tensor,
        p: &'a Vector,
    }
    impl System for PowerEq<'_> {
        fn eval(&self, x: &Vector) -> Vector {
            self.a.power_map(x.as_slice()) - self.p
        }
        fn jacobian(&self, x: &Vector) -> Matrix {
            self.a.jacobian_map(x.as_slice())
        }
    }
    let n = a.dim();
    let sys = PowerEq { a, p };
    let opts = NewtonOptions::new(cfg.tol_residual, cfg.max_newton_iters);
    let r = cfg.search_radius;
    let runs = multistart(cfg.multistart_count * (1 << n), |k| {
        let mut rng = start_rng(cfg.rng_seed, stream + k as u64);
        let rho = r * 10f64.powf(-2.0 * rng.random::<f64>());
        let x0 = Vector::from_fn(n, |_, _| rng.random_range(-rho..=rho));
        damped_newton(&sys, &x0, &opts)
    });
    let mut roots = Vec::new();
    for out in runs {
        effort.record(&out);
        if out.converged {
            roots.push(out.z);
        }
    }
    dedup(roots, cfg.tol_dedup)
        .into_iter()
        .map(|x| {
            let sign = det_sign(&a.jacobian_map(x.as_slice()), DEGENERATE_DET);
            (x, sign)
        })
        .collect()
}

/// Census for `ψ(x) = x ∧ B x^{m-1}`: coordinates in the active set solve
/// `(B x^{m-1})_i = p_i` with `x_i > p_i`; the rest hold `x_i = p_i`.
fn tcp_preimages(b: &Tensor, p: &Vector, cfg: &SolverConfig, stream: u64, effort: &mut Effort) -> Vec<(Vector, Option<i32>)> {
    struct Active<'a> {
        b: &'a Tensor,
        p: &'a Vector,
        idx: Vec<usize>,
    }
    impl Active<'_> {
        fn full(&self, w: &Vector) -> Vector {
            let mut x = self.p.clone();
            for (k, &i) in self.idx.iter().enumerate() {
                x[i] = w[k];
            }
            x
        }
    }
    impl System for Active<'_> {
        fn eval(&self, w: &Vector) -> Vector {
            let bx = self.b.power_map(self.full(w).as_slice());
            Vector::from_fn(self.idx.len(), |k, _| bx[self.idx[k]] - self.p[self.idx[k]])
        }
        fn jacobian(&self, w: &Vector) -> Matrix {
            let jb = self.b.jacobian_map(self.full(w).as_slice());
            Matrix::from_fn(self.idx.len(), self.idx.len(), |r, c| jb[(self.idx[r], self.idx[c])])
        }
    }
    let n = b.dim();
    let opts = NewtonOptions::new(cfg.tol_residual, cfg.max_newton_iters);
    let starts = cfg.multistart_count;
    let runs = multistart((1usize << n) * starts, |job| {
        let (mask, k) = (job / starts, job % starts);
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let sys = Active { b, p, idx: idx.clone() };
        let floor = Vector::from_fn(idx.len(), |k, _| p[idx[k]]);
        let mut rng = start_rng(cfg.rng_seed, stream + ((mask as u64) << 20) + k as u64);
        let w0 = reduced_start(&mut rng, k, idx.len(), cfg.search_radius, &floor);
        let out = if idx.is_empty() { None } else { Some(damped_newton(&sys, &w0, &opts)) };
        let w = out.as_ref().map_or_else(|| Vector::zeros(0), |o| o.z.clone());
        let ok = out.as_ref().is_none_or(|o| o.converged) && w.iter().zip(floor.iter()).all(|(v, f)| *v > *f);
        let x = sys.full(&w);
        // Inactive coordinates need (B x^{m-1})_i ≥ p_i.
        let bx = b.power_map(x.as_slice());
        let feasible = ok && (0..n).filter(|i| mask >> i & 1 == 0).all(|i| bx[i] >= p[i]);
        (feasible.then_some(x), out)
    });
    let mut roots = Vec::new();
    for (root, out) in runs {
        if let Some(o) = out {
            effort.record(&o);
        }
        roots.extend(root);
    }
    dedup(roots, cfg.tol_dedup)
        .into_iter()
        .map(|x| {
            let bx = b.power_map(x.as_slice());
            let jb = b.jacobian_map(x.as_slice());
            let g = Matrix::from_fn(n, n, |r, c| if x[r] <= bx[r] { f64::from(u8::from(r == c)) } else { jb[(r, c)] });
            (x, det_sign(&g, DEGENERATE_DET))
        })
        .collect()
}

/// Degree of `Ψ` at the origin for the pair `{A, B}`.
///
/// With `r_pair_q`, a certified R pair gives the exact value from the sign
/// of the Jacobian at its unique solution. An even-order P pair gives the
/// exact value `(-1)^n` times the degree of `x ↦ A x^{m-1}`. Otherwise the
/// value is a heuristic census. Errors if the R0 check finds a counterexample.
pub fn degree_estimate_pair(a: &Tensor, b: &Tensor, r_pair_q: Option<&Vector>, cfg: &SolverConfig) -> Result<DegreeEstimate> {
    a.same_shape(b)?;
    cfg.validate()?;
    cfg.check_guards(a.dim(), a.order())?;
    let r0 = check_r0_pair(a, b, cfg)?;
    if r0.is_refuted() {
        return Err(HtcpError::R0Refuted);
    }
    let mut effort = r0.effort.clone();
    let n = a.dim();
    let m = a.order();
    let odd = m % 2 == 1;

    if let Some(q) = r_pair_q {
        let r = check_r_pair(a, b, q, cfg)?;
        effort.absorb(&r.effort);
        if r.holds() {
            let inst = HtcpInstance::new(a.clone(), b.clone(), q.clone())?;
            let sol = crate::solver::solve_pattern_enumeration(&inst, cfg)?.solutions.remove(0);
            let g = generalized_jacobian(&inst, &sol.x, &sol.y)?;
            if let Some(sign) = det_sign(&g, DEGENERATE_DET) {
                let census = Census {
                    solutions: vec![SignedSolution { z: sol.stacked(), sign }],
                    value: q.clone(),
                    attempts: 1,
                };
                return Ok(DegreeEstimate::from_census(census, Confidence::ExactSpecialCase, odd, effort));
            }
        }
    }

    if !odd {
        let p_check = check_p_pair(a, b, cfg)?;
        effort.absorb(&p_check.effort);
        if p_check.holds() {
            let mag = regular_magnitude(m, cfg);
            let mut census = census_loop(&mut effort, |k, e| {
                let mut rng = start_rng(cfg.rng_seed, STREAM_VALUE + k as u64);
                let p = random_value(&mut rng, n, mag);
                let roots = power_map_preimages(a, &p, cfg, STREAM_ROOTS + ((k as u64) << 32), e);
                (p, roots)
            })?;
            let flip = if n % 2 == 1 { -1 } else { 1 };
            for s in &mut census.solutions {
                s.sign *= flip;
            }
            return Ok(DegreeEstimate::from_census(census, Confidence::ExactSpecialCase, odd, effort));
        }
    }

    let mag = regular_magnitude(m, cfg);
    let census = census_loop(&mut effort, |k, e| {
        let mut rng = start_rng(cfg.rng_seed, STREAM_VALUE + k as u64);
        let p = random_value(&mut rng, 2 * n, mag);
        let roots = pair_preimages(a, b, &p, cfg, STREAM_ROOTS + ((k as u64) << 32), e);
        (p, roots)
    })?;
    Ok(DegreeEstimate::from_census(census, Confidence::Heuristic, odd, effort))
}

/// Census-only pair degree (no special cases), used to cross-check the
/// exact formulas.
pub fn degree_census_pair(a: &Tensor, b: &Tensor, cfg: &SolverConfig) -> Result<DegreeEstimate> {
    a.same_shape(b)?;
    cfg.validate()?;
    cfg.check_guards(a.dim(), a.order())?;
    let (n, m) = (a.dim(), a.order());
    let mut effort = Effort::default();
    let mag = regular_magnitude(m, cfg);
    let census = census_loop(&mut effort, |k, e| {
        let mut rng = start_rng(cfg.rng_seed, STREAM_VALUE + k as u64);
        let p = random_value(&mut rng, 2 * n, mag);
        let roots = pair_preimages(a, b, &p, cfg, STREAM_ROOTS + ((k as u64) << 32), e);
        (p, roots)
    })?;
    Ok(DegreeEstimate::from_census(census, Confidence::Heuristic, m % 2 == 1, effort))
}

/// Degree of `ψ(x) = x ∧ B x^{m-1}` at the origin for even-order `B`.
/// Errors if a nonzero `x ≥ 0` with `x ∧ B x^{m-1} = 0` is found.
pub fn degree_estimate_tcp(b: &Tensor, cfg: &SolverConfig) -> Result<DegreeEstimate> {
    cfg.validate()?;
    cfg.check_guards(b.dim(), b.order())?;
    let m = b.order();
    if !m.is_multiple_of(2) {
        return Err(HtcpError::OddOrder(m));
    }
    let (witness, _, mut effort) = crate::classify::r0_tensor_counterexample(b, cfg);
    if witness.is_some() {
        return Err(HtcpError::R0Refuted);
    }
    let n = b.dim();
    let mag = regular_magnitude(m, cfg);
    let census = census_loop(&mut effort, |k, e| {
        let mut rng = start_rng(cfg.rng_seed, STREAM_VALUE + k as u64);
        let p = random_value(&mut rng, n, mag);
        let roots = tcp_preimages(b, &p, cfg, STREAM_ROOTS + ((k as u64) << 32), e);
        (p, roots)
    })?;
    Ok(DegreeEstimate::from_census(census, Confidence::Heuristic, false, effort))
}
