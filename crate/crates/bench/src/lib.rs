//! Seeded fixtures for the benchmarks.

use htcp_core::generate::{dominant_tensor, random_instance, random_tensor, random_vector};
use htcp_core::newton::start_rng;
use htcp_core::{HtcpInstance, SolverConfig, Tensor, Vector};

pub const SEED: u64 = 42;

pub fn tensor(order: usize, dim: usize) -> Tensor {
    random_tensor(&mut start_rng(SEED, 0), order, dim).expect("small tensor")
}

pub fn dominant(order: usize, dim: usize) -> Tensor {
    dominant_tensor(&mut start_rng(SEED, 1), order, dim).expect("small tensor")
}

pub fn point(dim: usize) -> Vector {
    random_vector(&mut start_rng(SEED, 2), dim)
}

pub fn instance(order: usize, dim: usize) -> HtcpInstance {
    random_instance(&mut start_rng(SEED, 3), order, dim).expect("small instance")
}

/// Default tolerances with a reduced multistart budget.
pub fn config() -> SolverConfig {
    SolverConfig { multistart_count: 16, worker_count: Some(1), ..Default::default() }
}
