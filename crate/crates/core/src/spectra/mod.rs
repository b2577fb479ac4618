//! Tensor eigenpairs and topological-degree estimates.

pub mod degree;
pub mod eigen;

pub use degree::{degree_census_pair, degree_estimate_pair, degree_estimate_tcp, Confidence, DegreeEstimate, SignedSolution};
pub use eigen::{b_eigen, eigen_residual, h_eigen, z_eigen, EigenKind, EigenPair, EigenReport};
