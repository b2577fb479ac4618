//! Problem data shared by the solvers and classifiers.

use serde::{Serialize, Serializer};

use crate::error::{check_dim, HtcpError, Result};
use crate::linalg::{inf_norm, Vector};
use crate::tensor::Tensor;

/// `HTCP(A, B, q)`: find `x ∧ y = 0` with `A x^{m-1} - B y^{m-1} = q`.
#[derive(Clone, Debug, PartialEq)]
pub struct HtcpInstance {
    a: Tensor,
    b: Tensor,
    q: Vector,
}

impl HtcpInstance {
    pub fn new(a: Tensor, b: Tensor, q: Vector) -> Result<Self> {
        a.same_shape(&b)?;
        check_dim(a.dim(), q.len())?;
        if let Some(pos) = q.iter().position(|v| !v.is_finite()) {
            return Err(HtcpError::NonFinite(pos));
        }
        Ok(Self { a, b, q })
    }

    pub fn a(&self) -> &Tensor {
        &self.a
    }

    pub fn b(&self) -> &Tensor {
        &self.b
    }

    pub fn q(&self) -> &Vector {
        &self.q
    }

    pub fn order(&self) -> usize {
        self.a.order()
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn with_q(&self, q: Vector) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), q)
    }

    /// `A x^{m-1} - B y^{m-1} - q`.
    pub(crate) fn equation(&self, x: &[f64], y: &[f64]) -> Vector {
        self.a.power_map(x) - self.b.power_map(y) - &self.q
    }
}

/// Complementarity split of the coordinates: bit `i` set means `y_i = 0`
/// with `x_i` free, otherwise `x_i = 0` with `y_i` free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    mask: u64,
    dim: usize,
}

impl Pattern {
    pub fn new(mask: u64, dim: usize) -> Self {
        debug_assert!(dim <= 64);
        let keep = if dim >= 64 { u64::MAX } else { (1u64 << dim) - 1 };
        Self { mask: mask & keep, dim }
    }

    /// Pattern read off a pair: `x_i` is free where `x_i > y_i`.
    pub fn from_pair(x: &Vector, y: &Vector) -> Self {
        let mask = x
            .iter()
            .zip(y.iter())
            .enumerate()
            .filter(|(_, (a, b))| a > b)
            .fold(0u64, |m, (i, _)| m | (1 << i));
        Self::new(mask, x.len())
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_free(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    pub fn all(dim: usize) -> impl Iterator<Item = Pattern> {
        (0..1u64 << dim).map(move |m| Pattern::new(m, dim))
    }

    /// Splits a free-variable vector `w` into `(x, y)`.
    pub fn scatter(&self, w: &[f64]) -> (Vector, Vector) {
        let mut x = Vector::zeros(self.dim);
        let mut y = Vector::zeros(self.dim);
        for i in 0..self.dim {
            if self.x_free(i) {
                x[i] = w[i];
            } else {
                y[i] = w[i];
            }
        }
        (x, y)
    }
}

impl std::fmt::Display for Pattern {
    /// One character per coordinate: `x` where `x_i` is free, `y` otherwise.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.dim {
            f.write_str(if self.x_free(i) { "x" } else { "y" })?;
        }
        Ok(())
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A candidate `(x, y)` with its residual diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionPair {
    pub x: Vector,
    pub y: Vector,
    /// `‖x ∧ y‖∞`
    pub residual_complementarity: f64,
    /// `‖A x^{m-1} - B y^{m-1} - q‖∞`
    pub residual_equation: f64,
    pub pattern: Pattern,
}

impl SolutionPair {
    pub fn evaluate(inst: &HtcpInstance, x: Vector, y: Vector) -> Result<Self> {
        check_dim(inst.dim(), x.len())?;
        check_dim(inst.dim(), y.len())?;
        let comp = inf_norm(&x.zip_map(&y, f64::min));
        let eq = inf_norm(&inst.equation(x.as_slice(), y.as_slice()));
        let pattern = Pattern::from_pair(&x, &y);
        Ok(Self { x, y, residual_complementarity: comp, residual_equation: eq, pattern })
    }

    pub fn residual(&self) -> f64 {
        self.residual_complementarity.max(self.residual_equation)
    }

    /// `(x, y)` stacked into one vector of length `2n`.
    pub fn stacked(&self) -> Vector {
        let n = self.x.len();
        Vector::from_fn(2 * n, |i, _| if i < n { self.x[i] } else { self.y[i - n] })
    }

    pub fn distance(&self, other: &SolutionPair) -> f64 {
        crate::linalg::inf_dist(&self.stacked(), &other.stacked())
    }
}

impl Serialize for SolutionPair {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SolutionPair", 5)?;
        st.serialize_field("x", self.x.as_slice())?;
        st.serialize_field("y", self.y.as_slice())?;
        st.serialize_field("residual_complementarity", &self.residual_complementarity)?;
        st.serialize_field("residual_equation", &self.residual_equation)?;
        st.serialize_field("pattern", &self.pattern)?;
        st.end()
    }
}

/// Sorts by pattern, then lexicographically by `(x, y)`, and merges entries
/// closer than `tol` in the ∞-norm (keeping the one with smaller residual).
pub fn canonical_dedup(mut sols: Vec<SolutionPair>, tol: f64) -> Vec<SolutionPair> {
    sols.sort_by(|a, b| a.residual().total_cmp(&b.residual()));
    let mut kept: Vec<SolutionPair> = Vec::with_capacity(sols.len());
    for s in sols {
        if !kept.iter().any(|k| k.distance(&s) <= tol) {
            kept.push(s);
        }
    }
    kept.sort_by(|a, b| {
        a.pattern.cmp(&b.pattern).then_with(|| {
            let (sa, sb) = (a.stacked(), b.stacked());
            sa.iter()
                .zip(sb.iter())
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    kept
}

/// Tunables for the solvers, classifiers and spectral routines.
#[derive(Clone, Debug, Serialize)]
pub struct SolverConfig {
    pub tol_residual: f64,
    pub tol_dedup: f64,
    pub max_newton_iters: usize,
    pub multistart_count: usize,
    pub rng_seed: u64,
    pub homotopy_steps: usize,
    pub search_radius: f64,
    /// Parallelism hint; results never depend on it, so it is not serialized.
    #[serde(skip)]
    pub worker_count: Option<usize>,
    /// Largest dimension accepted by the enumeration-based routines.
    pub guard_dim: usize,
    /// Largest order accepted by the enumeration-based routines.
    pub guard_order: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-9,
            tol_dedup: 1e-7,
            max_newton_iters: 100,
            multistart_count: 64,
            rng_seed: 0,
            homotopy_steps: 50,
            search_radius: 10.0,
            worker_count: None,
            guard_dim: 12,
            guard_order: 6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.tol_residual > 0.0
            && self.tol_dedup > 0.0
            && self.max_newton_iters > 0
            && self.multistart_count > 0
            && self.homotopy_steps > 0
            && self.search_radius > 0.0
            && self.worker_count.is_none_or(|w| w > 0);
        if !positive {
            return Err(HtcpError::Invalid("solver configuration values must be positive".into()));
        }
        Ok(())
    }

    pub fn check_guards(&self, dim: usize, order: usize) -> Result<()> {
        if dim > self.guard_dim {
            return Err(HtcpError::GuardExceeded(format!(
                "dimension {dim} exceeds the limit {}",
                self.guard_dim
            )));
        }
        if order > self.guard_order {
            return Err(HtcpError::GuardExceeded(format!(
                "order {order} exceeds the limit {}",
                self.guard_order
            )));
        }
        Ok(())
    }

    /// Runs `f` on a pool with `worker_count` threads (or the global pool).
    pub fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match self.worker_count {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map(|pool| pool.install(f))
                .expect("thread pool"),
            None => f(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_display_and_scatter() {
        let p = Pattern::new(0b01, 2);
        assert_eq!(p.to_string(), "xy");
        let (x, y) = p.scatter(&[3.0, 4.0]);
        assert_eq!(x.as_slice(), &[3.0, 0.0]);
        assert_eq!(y.as_slice(), &[0.0, 4.0]);
        assert_eq!(Pattern::all(3).count(), 8);
    }

    #[test]
    fn dedup_merges_close_and_orders() {
        let mk = |x: f64, y: f64| {
            let (x, y) = (Vector::from_vec(vec![x]), Vector::from_vec(vec![y]));
            SolutionPair {
                pattern: Pattern::from_pair(&x, &y),
                x,
                y,
                residual_complementarity: 0.0,
                residual_equation: 0.0,
            }
        };
        let out = canonical_dedup(vec![mk(1.0, 0.0), mk(0.0, 2.0), mk(1.0 + 1e-9, 0.0)], 1e-7);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].y[0], 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { search_radius: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(SolverConfig::default().check_guards(13, 3).is_err());
    }
}
