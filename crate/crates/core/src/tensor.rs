//! Dense real tensors and the multilinear kernels built on them.
//!
//! Storage is row-major with the first index slowest, so for an order-`m`,
//! dimension-`n` tensor the entry `a[i1][i2]...[im]` lives at flat offset
//! `((i1 * n + i2) * n + ...) * n + im`. All indices are 0-based.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, HtcpError, Result};
use crate::linalg::{Matrix, Vector};

/// Upper bound on the number of stored entries for any tensor we build.
pub const MAX_TENSOR_ENTRIES: usize = 1 << 24;

/// Largest order accepted by [`Tensor::partial_symmetrize`] (`(m-1)! ≤ 720`).
pub const MAX_SYMMETRIZE_ORDER: usize = 7;

/// A dense order-`m`, dimension-`n` real tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::TensorFile", into = "crate::io::TensorFile")]
pub struct Tensor {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
}

pub(crate) fn entry_count(order: usize, dim: usize) -> Result<usize> {
    let count = u32::try_from(order)
        .ok()
        .and_then(|m| dim.checked_pow(m))
        .ok_or_else(|| HtcpError::GuardExceeded(format!("{dim}^{order} entries overflow")))?;
    if count > MAX_TENSOR_ENTRIES {
        return Err(HtcpError::GuardExceeded(format!(
            "{dim}^{order} = {count} entries exceeds the limit of {MAX_TENSOR_ENTRIES}"
        )));
    }
    Ok(count)
}

impl Tensor {
    pub fn new(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        if order < 2 {
            return Err(HtcpError::InvalidShape(format!("order must be >= 2, got {order}")));
        }
        if dim < 1 {
            return Err(HtcpError::InvalidShape("dimension must be >= 1".into()));
        }
        let count = entry_count(order, dim)?;
        if entries.len() != count {
            return Err(HtcpError::InvalidShape(format!(
                "expected {count} entries for order {order}, dim {dim}; got {}",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(HtcpError::NonFinite(pos));
        }
        Ok(Self { order, dim, entries })
    }

    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        let count = entry_count(order.max(2), dim)?;
        Self::new(order, dim, vec![0.0; count])
    }

    /// The identity tensor: 1 on the superdiagonal `i1 = ... = im`, else 0.
    pub fn identity(order: usize, dim: usize) -> Result<Self> {
        let mut t = Self::zeros(order, dim)?;
        for i in 0..dim {
            let idx = vec![i; order];
            let off = t.offset(&idx);
            t.entries[off] = 1.0;
        }
        Ok(t)
    }

    /// A diagonal tensor with `d[i]` at `(i, i, ..., i)`.
    pub fn diagonal(order: usize, d: &[f64]) -> Result<Self> {
        let mut t = Self::zeros(order, d.len())?;
        for (i, v) in d.iter().enumerate() {
            let off = t.offset(&vec![i; order]);
            t.entries[off] = *v;
        }
        Self::new(order, d.len(), t.entries)
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        check_dim(m.nrows(), m.ncols())?;
        let n = m.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(m[(i, j)]);
            }
        }
        Self::new(2, n, entries)
    }

    /// Order-2 tensors as matrices; `None` for higher orders.
    pub fn to_matrix(&self) -> Option<Matrix> {
        (self.order == 2).then(|| Matrix::from_row_slice(self.dim, self.dim, &self.entries))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[self.offset(idx)]
    }

    /// Returns a copy with one entry replaced.
    pub fn with_entry(mut self, idx: &[usize], val: f64) -> Result<Self> {
        if idx.len() != self.order || idx.iter().any(|&i| i >= self.dim) {
            return Err(HtcpError::InvalidShape(format!("index {idx:?} out of range")));
        }
        if !val.is_finite() {
            return Err(HtcpError::NonFinite(self.offset(idx)));
        }
        let off = self.offset(idx);
        self.entries[off] = val;
        Ok(self)
    }

    /// Iterates over `(multi-index, value)` for every stored entry.
    pub fn indexed(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.entries.iter().enumerate().map(move |(off, v)| (decode(off, self.order, self.dim), *v))
    }

    pub fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.order != other.order {
            return Err(HtcpError::OrderMismatch { expected: self.order, found: other.order });
        }
        check_dim(self.dim, other.dim)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Tensor::new(self.order, self.dim, entries)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor {
            order: self.order,
            dim: self.dim,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|a| *a == 0.0)
    }

    /// `max_i Σ |a_{i i2 ... im}|`; bounds `‖T x^{m-1}‖∞` by this times `‖x‖∞^{m-1}`.
    pub fn max_abs_row_sum(&self) -> f64 {
        let stride = self.entries.len() / self.dim;
        self.entries
            .chunks(stride)
            .map(|row| row.iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `T x^{m-1}`: `(T x^{m-1})_i = Σ a_{i i2 ... im} x_{i2} ... x_{im}`.
    pub fn apply_power(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        Ok(self.power_map(x.as_slice()))
    }

    pub(crate) fn power_map(&self, x: &[f64]) -> Vector {
        Vector::from_vec(contract_trailing(&self.entries, self.dim, self.order - 1, x))
    }

    /// `(T x^{m-2})_{ij} = Σ t_{i j i3 ... im} x_{i3} ... x_{im}`.
    ///
    /// For a partially symmetric tensor this matrix times `x` reproduces
    /// `T x^{m-1}`.
    pub fn contract_to_matrix(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.dim, x.len())?;
        let flat = contract_trailing(&self.entries, self.dim, self.order - 2, x.as_slice());
        Ok(Matrix::from_row_slice(self.dim, self.dim, &flat))
    }

    /// Jacobian of `x ↦ T x^{m-1}`.
    ///
    /// Differentiates each trailing index position in turn, which agrees with
    /// `(m-1) · contract_to_matrix(partial_symmetrize(T), x)` without the
    /// factorial cost of symmetrizing.
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.dim, x.len())?;
        Ok(self.jacobian_map(x.as_slice()))
    }

    pub(crate) fn jacobian_map(&self, x: &[f64]) -> Matrix {
        let (n, m) = (self.dim, self.order);
        let mut jac = Matrix::zeros(n, n);
        if m == 2 {
            for i in 0..n {
                for j in 0..n {
                    jac[(i, j)] = self.entries[i * n + j];
                }
            }
            return jac;
        }
        let mut idx = vec![0usize; m];
        for (off, &a) in self.entries.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            decode_into(off, n, &mut idx);
            for p in 1..m {
                let mut prod = a;
                for (q, &iq) in idx.iter().enumerate().skip(1) {
                    if q != p {
                        prod *= x[iq];
                    }
                }
                jac[(idx[0], idx[p])] += prod;
            }
        }
        jac
    }

    /// Averages every entry over permutations of its trailing `m-1` indices.
    pub fn partial_symmetrize(&self) -> Result<Tensor> {
        let m = self.order;
        if m > MAX_SYMMETRIZE_ORDER {
            return Err(HtcpError::GuardExceeded(format!(
                "partial symmetrization supports order <= {MAX_SYMMETRIZE_ORDER}, got {m}"
            )));
        }
        let perms: Vec<Vec<usize>> = (1..m).permutations(m - 1).collect();
        let inv_count = 1.0 / perms.len() as f64;
        let mut idx = vec![0usize; m];
        let mut permuted = vec![0usize; m];
        let mut out = vec![0.0; self.entries.len()];
        for (off, slot) in out.iter_mut().enumerate() {
            decode_into(off, self.dim, &mut idx);
            permuted[0] = idx[0];
            let mut sum = 0.0;
            for perm in &perms {
                for (k, &src) in perm.iter().enumerate() {
                    permuted[k + 1] = idx[src];
                }
                sum += self.entries[self.offset(&permuted)];
            }
            *slot = sum * inv_count;
        }
        Tensor::new(m, self.dim, out)
    }

    /// Tensor product `C = A B` with
    /// `c_{i α1 ... α_{m-1}} = Σ a_{i i2 ... im} b_{i2 α1} ... b_{im α_{m-1}}`,
    /// where each `α` ranges over the trailing `k-1` indices of `B`.
    /// The result has order `(m-1)(k-1)+1`.
    pub fn shao_product(&self, other: &Tensor) -> Result<Tensor> {
        check_dim(self.dim, other.dim)?;
        let n = self.dim;
        let (m, k) = (self.order, other.order);
        let out_order = (m - 1)
            .checked_mul(k - 1)
            .and_then(|v| v.checked_add(1))
            .ok_or_else(|| HtcpError::GuardExceeded("product order overflow".into()))?;
        entry_count(out_order, n)?;

        let s = other.entries.len() / n; // n^{k-1}
        let mut cur = self.entries.clone();
        // After replacing positions 1..p, the layout is [n, s^p, n^{m-1-p}].
        for p in 1..m {
            let pre = n * s.pow((p - 1) as u32);
            let post = n.pow((m - 1 - p) as u32);
            let mut next = vec![0.0; pre * s * post];
            for a in 0..pre {
                for l in 0..n {
                    let brow = &other.entries[l * s..(l + 1) * s];
                    for c in 0..post {
                        let v = cur[(a * n + l) * post + c];
                        if v == 0.0 {
                            continue;
                        }
                        for (alpha, &b) in brow.iter().enumerate() {
                            next[(a * s + alpha) * post + c] += v * b;
                        }
                    }
                }
            }
            cur = next;
        }
        Tensor::new(out_order, n, cur)
    }

    /// `M · T` for a square matrix `M`.
    pub fn left_mul_matrix(&self, m: &Matrix) -> Result<Tensor> {
        Tensor::from_matrix(m)?.shao_product(self)
    }

    /// `T · M` for a square matrix `M`; `(T M) x^{m-1} = T (M x)^{m-1}`.
    pub fn right_mul_matrix(&self, m: &Matrix) -> Result<Tensor> {
        self.shao_product(&Tensor::from_matrix(m)?)
    }
}

/// Contracts the last `count` indices of a dense order-`(r+count)` block with `x`.
fn contract_trailing(entries: &[f64], n: usize, count: usize, x: &[f64]) -> Vec<f64> {
    let mut cur: Vec<f64> = entries.to_vec();
    for _ in 0..count {
        cur = cur.chunks(n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect();
    }
    cur
}

fn decode(mut off: usize, order: usize, n: usize) -> Vec<usize> {
    let mut idx = vec![0; order];
    for slot in idx.iter_mut().rev() {
        *slot = off % n;
        off /= n;
    }
    idx
}

fn decode_into(mut off: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = off % n;
        off /= n;
    }
}

pub fn identity_tensor(order: usize, dim: usize) -> Result<Tensor> {
    Tensor::identity(order, dim)
}

/// Componentwise power `x^{[k]}`.
pub fn power_vector(x: &Vector, k: u32) -> Vector {
    x.map(|v| v.powi(k as i32))
}

/// Componentwise real `k`-th root; odd roots keep the sign, even roots
/// reject negative components.
pub fn inverse_power_vector(x: &Vector, k: u32) -> Result<Vector> {
    if k == 0 {
        return Err(HtcpError::Domain("root of order 0".into()));
    }
    let inv = 1.0 / k as f64;
    let mut out = Vector::zeros(x.len());
    for (i, &v) in x.iter().enumerate() {
        out[i] = if k % 2 == 1 {
            v.signum() * v.abs().powf(inv)
        } else if v >= 0.0 {
            v.powf(inv)
        } else {
            return Err(HtcpError::Domain(format!(
                "component {i} = {v} is negative under an even root"
            )));
        };
        if v == 0.0 {
            out[i] = 0.0;
        }
    }
    Ok(out)
}

pub fn hadamard(x: &Vector, y: &Vector) -> Result<Vector> {
    check_dim(x.len(), y.len())?;
    Ok(x.component_mul(y))
}

/// `x ∧ y`, the componentwise minimum.
pub fn pointwise_min(x: &Vector, y: &Vector) -> Result<Vector> {
    check_dim(x.len(), y.len())?;
    Ok(x.zip_map(y, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    /// The order-3 dim-2 tensor with a_{000} = a_{011} = 1.
    fn sum_of_squares_tensor() -> Tensor {
        Tensor::zeros(3, 2)
            .unwrap()
            .with_entry(&[0, 0, 0], 1.0)
            .unwrap()
            .with_entry(&[0, 1, 1], 1.0)
            .unwrap()
    }

    #[test]
    fn identity_acts_as_coordinate_power() {
        let i4 = identity_tensor(4, 2).unwrap();
        assert_eq!(i4.apply_power(&v(&[2.0, 1.0])).unwrap(), v(&[8.0, 1.0]));
        let i3 = identity_tensor(3, 2).unwrap();
        assert_eq!(i3.apply_power(&v(&[-1.0, 2.0])).unwrap(), v(&[1.0, 4.0]));
        let i2 = identity_tensor(2, 3).unwrap();
        assert_eq!(i2.to_matrix().unwrap(), Matrix::identity(3, 3));
    }

    #[test]
    fn apply_power_example_tensor() {
        let a = sum_of_squares_tensor();
        assert_eq!(a.apply_power(&v(&[2.0, 3.0])).unwrap(), v(&[13.0, 0.0]));
        assert_eq!(a.apply_power(&v(&[0.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn apply_power_dimension_mismatch() {
        let a = sum_of_squares_tensor();
        assert!(matches!(
            a.apply_power(&v(&[1.0, 2.0, 3.0])),
            Err(HtcpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tensor_validation() {
        assert!(Tensor::new(1, 2, vec![0.0; 2]).is_err());
        assert!(Tensor::new(2, 2, vec![0.0; 3]).is_err());
        assert!(matches!(Tensor::new(2, 1, vec![f64::NAN]), Err(HtcpError::NonFinite(0))));
        assert!(Tensor::zeros(30, 8).is_err());
    }

    #[test]
    fn power_vectors() {
        assert_eq!(power_vector(&v(&[2.0, 3.0]), 2), v(&[4.0, 9.0]));
        assert_eq!(power_vector(&v(&[-2.0, 1.0]), 3), v(&[-8.0, 1.0]));
        assert_eq!(power_vector(&v(&[1.0, 1.0, 1.0]), 5), v(&[1.0, 1.0, 1.0]));
        let r = inverse_power_vector(&v(&[8.0, 1.0]), 3).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-15 && r[1] == 1.0);
        assert_eq!(inverse_power_vector(&v(&[4.0, 0.0]), 2).unwrap(), v(&[2.0, 0.0]));
        assert!(matches!(inverse_power_vector(&v(&[-1.0, 1.0]), 2), Err(HtcpError::Domain(_))));
        let r = inverse_power_vector(&v(&[-8.0]), 3).unwrap();
        assert!((r[0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn min_and_hadamard() {
        let (x, y) = (v(&[1.0, -2.0]), v(&[0.0, 3.0]));
        assert_eq!(pointwise_min(&x, &y).unwrap(), v(&[0.0, -2.0]));
        assert_eq!(hadamard(&x, &y).unwrap(), v(&[0.0, -6.0]));
        let (x, y) = (v(&[1.0, 0.0]), v(&[0.0, 2.0]));
        assert_eq!(pointwise_min(&x, &y).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(x.dot(&y), 0.0);
        let (x, y) = (v(&[1.0, -1.0]), v(&[3.0, 0.0]));
        let lhs = pointwise_min(&x, &y).unwrap() * 2.0;
        let rhs = pointwise_min(&(x * 2.0), &(y * 2.0)).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(lhs, v(&[2.0, -2.0]));
        assert!(pointwise_min(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn symmetrize_two_permutation_average() {
        let t = Tensor::zeros(3, 2).unwrap().with_entry(&[0, 0, 1], 2.0).unwrap();
        let s = t.partial_symmetrize().unwrap();
        assert_eq!(s.get(&[0, 0, 1]), 1.0);
        assert_eq!(s.get(&[0, 1, 0]), 1.0);
        let again = s.partial_symmetrize().unwrap();
        assert_eq!(again, s);
        assert!(Tensor::zeros(8, 2).unwrap().partial_symmetrize().is_err());
    }

    #[test]
    fn contraction_and_jacobian_of_identity() {
        let i4 = identity_tensor(4, 2).unwrap();
        let x = v(&[1.0, 2.0]);
        assert_eq!(i4.contract_to_matrix(&x).unwrap(), Matrix::from_diagonal(&v(&[1.0, 4.0])));
        assert_eq!(i4.jacobian(&x).unwrap(), Matrix::from_diagonal(&v(&[3.0, 12.0])));
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let t = Tensor::from_matrix(&m).unwrap();
        assert_eq!(t.contract_to_matrix(&x).unwrap(), m);
        assert_eq!(t.jacobian(&v(&[5.0, -7.0])).unwrap(), m);
    }

    #[test]
    fn shao_with_identity_matrix() {
        let a = sum_of_squares_tensor();
        let eye = Tensor::identity(2, 2).unwrap();
        assert_eq!(a.shao_product(&eye).unwrap(), a);
        assert_eq!(eye.shao_product(&a).unwrap(), a);
    }

    #[test]
    fn shao_order_and_guard() {
        let a = Tensor::identity(3, 2).unwrap();
        let b = Tensor::identity(4, 2).unwrap();
        let c = a.shao_product(&b).unwrap();
        assert_eq!(c.order(), 7);
        assert_eq!(c, Tensor::identity(7, 2).unwrap());
        let big = Tensor::identity(5, 8).unwrap();
        assert!(matches!(big.shao_product(&big), Err(HtcpError::GuardExceeded(_))));
        assert!(a.shao_product(&Tensor::identity(2, 3).unwrap()).is_err());
    }
}
