//! JSON file formats.
//!
//! Tensor: `{"order": m, "dim": n, "entries": [{"idx": [i1, ..., im], "val": r}, ...]}`
//! with 0-based indices; omitted entries are zero and a repeated `idx` is an
//! error. Vector: `{"dim": n, "values": [...]}`. Instance:
//! `{"A": <tensor>, "B": <tensor>, "q": <vector>}`; pair files omit `q`.
//!
//! Emission is canonical (nonzero entries only, row-major order) so that
//! load followed by re-emit reproduces a file byte for byte.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HtcpError, Result};
use crate::linalg::Vector;
use crate::problem::HtcpInstance;
use crate::tensor::{entry_count, Tensor};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryFile {
    pub idx: Vec<usize>,
    pub val: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorFile {
    pub order: usize,
    pub dim: usize,
    pub entries: Vec<EntryFile>,
}

impl TryFrom<TensorFile> for Tensor {
    type Error = HtcpError;

    fn try_from(f: TensorFile) -> Result<Self> {
        let count = entry_count(f.order.max(2), f.dim.max(1))?;
        let mut dense = vec![0.0; count];
        let mut seen = HashSet::new();
        for e in &f.entries {
            if e.idx.len() != f.order || e.idx.iter().any(|&i| i >= f.dim) {
                return Err(HtcpError::InvalidShape(format!(
                    "index {:?} invalid for order {}, dim {}",
                    e.idx, f.order, f.dim
                )));
            }
            if !seen.insert(e.idx.clone()) {
                return Err(HtcpError::Invalid(format!("duplicate index {:?}", e.idx)));
            }
            let off = e.idx.iter().fold(0, |acc, &i| acc * f.dim + i);
            dense[off] = e.val;
        }
        Tensor::new(f.order, f.dim, dense)
    }
}

impl From<Tensor> for TensorFile {
    fn from(t: Tensor) -> Self {
        let entries = t
            .indexed()
            .filter(|(_, v)| *v != 0.0)
            .map(|(idx, val)| EntryFile { idx, val })
            .collect();
        TensorFile { order: t.order(), dim: t.dim(), entries }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorFile {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl TryFrom<VectorFile> for Vector {
    type Error = HtcpError;

    fn try_from(f: VectorFile) -> Result<Self> {
        if f.values.len() != f.dim {
            return Err(HtcpError::DimensionMismatch { expected: f.dim, found: f.values.len() });
        }
        if let Some(pos) = f.values.iter().position(|v| !v.is_finite()) {
            return Err(HtcpError::NonFinite(pos));
        }
        Ok(Vector::from_vec(f.values))
    }
}

impl From<&Vector> for VectorFile {
    fn from(v: &Vector) -> Self {
        VectorFile { dim: v.len(), values: v.iter().cloned().collect() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(rename = "A")]
    pub a: Tensor,
    #[serde(rename = "B")]
    pub b: Tensor,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<VectorFile>,
}

/// A tensor pair `{A, B}` as read from a pair or instance file.
#[derive(Clone, Debug)]
pub struct PairFile {
    pub a: Tensor,
    pub b: Tensor,
    pub q: Option<Vector>,
}

pub fn vector_to_json(v: &Vector) -> serde_json::Value {
    serde_json::to_value(VectorFile::from(v)).expect("vector serializes")
}

pub fn parse_vector(s: &str) -> Result<Vector> {
    let f: VectorFile = serde_json::from_str(s)?;
    Vector::try_from(f)
}

pub fn parse_tensor(s: &str) -> Result<Tensor> {
    Ok(serde_json::from_str(s)?)
}

pub fn parse_pair(s: &str) -> Result<PairFile> {
    let f: InstanceFile = serde_json::from_str(s)?;
    f.a.same_shape(&f.b)?;
    let q = f.q.map(Vector::try_from).transpose()?;
    if let Some(q) = &q {
        crate::error::check_dim(f.a.dim(), q.len())?;
    }
    Ok(PairFile { a: f.a, b: f.b, q })
}

pub fn parse_instance(s: &str) -> Result<HtcpInstance> {
    let p = parse_pair(s)?;
    let q = p.q.ok_or_else(|| HtcpError::Invalid("instance file has no \"q\"".into()))?;
    HtcpInstance::new(p.a, p.b, q)
}

pub fn instance_to_string(inst: &HtcpInstance) -> String {
    let f = InstanceFile {
        a: inst.a().clone(),
        b: inst.b().clone(),
        q: Some(VectorFile::from(inst.q())),
    };
    let mut s = serde_json::to_string_pretty(&f).expect("instance serializes");
    s.push('\n');
    s
}

pub fn pair_to_string(a: &Tensor, b: &Tensor) -> String {
    let f = InstanceFile { a: a.clone(), b: b.clone(), q: None };
    let mut s = serde_json::to_string_pretty(&f).expect("pair serializes");
    s.push('\n');
    s
}

pub fn read_instance(path: &Path) -> Result<HtcpInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn read_pair(path: &Path) -> Result<PairFile> {
    parse_pair(&std::fs::read_to_string(path)?)
}

pub fn read_vector(path: &Path) -> Result<Vector> {
    parse_vector(&std::fs::read_to_string(path)?)
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    parse_tensor(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_tensor_is_densified() {
        let t = parse_tensor(
            r#"{"order": 3, "dim": 2, "entries": [{"idx": [0,0,0], "val": 1.0}, {"idx": [0,1,1], "val": 1}]}"#,
        )
        .unwrap();
        assert_eq!(t.get(&[0, 0, 0]), 1.0);
        assert_eq!(t.get(&[0, 1, 1]), 1.0);
        assert_eq!(t.entries().iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn duplicate_and_out_of_range_indices_rejected() {
        let dup = r#"{"order": 2, "dim": 2, "entries": [{"idx": [0,1], "val": 1}, {"idx": [0,1], "val": 2}]}"#;
        assert!(parse_tensor(dup).is_err());
        let oob = r#"{"order": 2, "dim": 2, "entries": [{"idx": [0,2], "val": 1}]}"#;
        assert!(parse_tensor(oob).is_err());
        let short = r#"{"order": 2, "dim": 2, "entries": [{"idx": [0], "val": 1}]}"#;
        assert!(parse_tensor(short).is_err());
    }

    #[test]
    fn vector_dim_checked() {
        assert!(parse_vector(r#"{"dim": 2, "values": [1.0]}"#).is_err());
        assert_eq!(parse_vector(r#"{"dim": 2, "values": [1.0, -2]}"#).unwrap()[1], -2.0);
    }

    #[test]
    fn instance_needs_q_and_matching_dims() {
        let t = r#"{"order": 2, "dim": 1, "entries": []}"#;
        let no_q = format!(r#"{{"A": {t}, "B": {t}}}"#);
        assert!(parse_instance(&no_q).is_err());
        assert!(parse_pair(&no_q).is_ok());
        let bad_q = format!(r#"{{"A": {t}, "B": {t}, "q": {{"dim": 2, "values": [0, 0]}}}}"#);
        assert!(parse_pair(&bad_q).is_err());
    }
}
