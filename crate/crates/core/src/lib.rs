//! Solvers, classifiers and spectral tools for the horizontal tensor
//! complementarity problem: given order-`m`, dimension-`n` tensors `A`, `B`
//! and `q ∈ R^n`, find `x ∧ y = 0` with `A x^{m-1} - B y^{m-1} = q`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod error;
pub mod generate;
pub mod hlcp;
pub mod io;
pub mod linalg;
pub mod newton;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod spectra;
pub mod tensor;

pub use error::{HtcpError, Result};
pub use linalg::{Matrix, Vector};
pub use problem::{HtcpInstance, Pattern, SolutionPair, SolverConfig};
pub use tensor::Tensor;
