//! Small dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative pivot threshold below which a square system is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn inf_dist(a: &Vector, b: &Vector) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Solves `m w = b` with full pivoting, returning `None` when the smallest
/// pivot is negligible relative to the largest.
pub fn solve_checked(m: &Matrix, b: &Vector) -> Option<Vector> {
    if m.nrows() != m.ncols() || m.nrows() != b.len() {
        return None;
    }
    if m.nrows() == 0 {
        return Some(Vector::zeros(0));
    }
    let lu = m.clone().full_piv_lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..u.nrows() {
        let p = u[(i, i)].abs();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if !(hi > 0.0) || lo <= SINGULAR_RCOND * hi {
        return None;
    }
    let w = lu.solve(b)?;
    all_finite(&w).then_some(w)
}

/// Numerical rank via singular values, relative to the largest one.
pub fn rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Minimum-norm least-squares solution of `m w = b` and its residual ∞-norm.
pub fn least_squares(m: &Matrix, b: &Vector) -> Option<(Vector, f64)> {
    if m.ncols() == 0 {
        return Some((Vector::zeros(0), inf_norm(b)));
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (smax * 1e-12).max(f64::MIN_POSITIVE);
    let w = svd.solve(b, eps).ok()?;
    let r = inf_norm(&(m * &w - b));
    Some((w, r))
}

/// Sign of the determinant, or `None` when `|det|` is at most `min_abs`.
pub fn det_sign(m: &Matrix, min_abs: f64) -> Option<i32> {
    let d = m.clone().determinant();
    if !d.is_finite() || d.abs() <= min_abs {
        None
    } else if d > 0.0 {
        Some(1)
    } else {
        Some(-1)
    }
}

/// Serializes a vector as a plain JSON array.
pub(crate) fn ser_vector<S: serde::Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}
