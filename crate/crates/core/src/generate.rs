//! Seeded instance generators.

use rand::Rng;
use serde::Serialize;

use crate::error::{HtcpError, Result};
use crate::linalg::Vector;
use crate::newton::start_rng;
use crate::problem::HtcpInstance;
use crate::tensor::{entry_count, Tensor};

/// Off-diagonal weight for the diagonally dominated families.
const NOISE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Entries of `A`, `B` and `q` uniform on `[-1, 1]`.
    Random,
    /// `A` and `±B` with dominant positive diagonals.
    R0Likely,
    /// `A` and `B` both with dominant positive diagonals.
    PLikely,
    /// The three fixed textbook instances, independent of the seed.
    Canonical,
}

impl std::str::FromStr for Family {
    type Err = HtcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Family::Random),
            "r0-likely" => Ok(Family::R0Likely),
            "p-likely" => Ok(Family::PLikely),
            "paper-examples" => Ok(Family::Canonical),
            _ => Err(HtcpError::Invalid(format!("unknown family {s:?}"))),
        }
    }
}

/// A generated instance with a file-friendly name.
#[derive(Clone, Debug)]
pub struct Named {
    pub name: String,
    pub instance: HtcpInstance,
}

pub fn random_tensor(rng: &mut impl Rng, order: usize, dim: usize) -> Result<Tensor> {
    let count = entry_count(order, dim)?;
    Tensor::new(order, dim, (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect())
}

pub fn random_vector(rng: &mut impl Rng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0))
}

/// Diagonal entries in `[1, 2]` plus off-diagonal noise of size `NOISE`.
pub fn dominant_tensor(rng: &mut impl Rng, order: usize, dim: usize) -> Result<Tensor> {
    let noise = random_tensor(rng, order, dim)?.scale(NOISE);
    let diag: Vec<f64> = (0..dim).map(|_| rng.random_range(1.0..=2.0)).collect();
    Tensor::diagonal(order, &diag)?.add(&noise)
}

pub fn random_instance(rng: &mut impl Rng, order: usize, dim: usize) -> Result<HtcpInstance> {
    let a = random_tensor(rng, order, dim)?;
    let b = random_tensor(rng, order, dim)?;
    HtcpInstance::new(a, b, random_vector(rng, dim))
}

fn family_instance(family: Family, rng: &mut impl Rng, order: usize, dim: usize) -> Result<HtcpInstance> {
    match family {
        Family::Random => random_instance(rng, order, dim),
        Family::R0Likely | Family::PLikely => {
            let a = dominant_tensor(rng, order, dim)?;
            let mut b = dominant_tensor(rng, order, dim)?;
            if family == Family::R0Likely && rng.random_bool(0.5) {
                b = b.scale(-1.0);
            }
            HtcpInstance::new(a, b, random_vector(rng, dim))
        }
        Family::Canonical => unreachable!(),
    }
}

/// `{I, I}` in `E(4, 2)` with `q = e`; unique solution `(e, 0)`.
pub fn r_pair_example() -> HtcpInstance {
    let i = Tensor::identity(4, 2).expect("small tensor");
    HtcpInstance::new(i.clone(), i, Vector::from_element(2, 1.0)).expect("consistent shapes")
}

/// Order-3 P pair with `a_000 = a_011 = 1`, `B = -A`, and `q = 0`.
pub fn odd_p_pair_example() -> HtcpInstance {
    let a = Tensor::zeros(3, 2)
        .and_then(|t| t.with_entry(&[0, 0, 0], 1.0))
        .and_then(|t| t.with_entry(&[0, 1, 1], 1.0))
        .expect("small tensor");
    let b = a.scale(-1.0);
    HtcpInstance::new(a, b, Vector::zeros(2)).expect("consistent shapes")
}

/// `{I, -I}` in `T(3, 2)` with `q = (0, -1)`: a P pair without solution.
pub fn no_solution_example() -> HtcpInstance {
    let i = Tensor::identity(3, 2).expect("small tensor");
    HtcpInstance::new(i.clone(), i.scale(-1.0), Vector::from_vec(vec![0.0, -1.0])).expect("consistent shapes")
}

/// `count` instances of `family`, each drawn from its own seeded stream so
/// that instance `k` does not depend on `count`.
pub fn generate(family: Family, order: usize, dim: usize, count: usize, seed: u64) -> Result<Vec<Named>> {
    if family == Family::Canonical {
        return Ok(vec![
            Named { name: "r-pair-even".into(), instance: r_pair_example() },
            Named { name: "p-pair-odd".into(), instance: odd_p_pair_example() },
            Named { name: "no-solution-odd".into(), instance: no_solution_example() },
        ]);
    }
    if order < 2 || dim == 0 {
        return Err(HtcpError::InvalidShape(format!("order {order}, dim {dim}")));
    }
    (0..count)
        .map(|k| {
            let mut rng = start_rng(seed, k as u64);
            let instance = family_instance(family, &mut rng, order, dim)?;
            Ok(Named { name: format!("{}-{k:04}", family_slug(family)), instance })
        })
        .collect()
}

fn family_slug(f: Family) -> &'static str {
    match f {
        Family::Random => "random",
        Family::R0Likely => "r0-likely",
        Family::PLikely => "p-likely",
        Family::Canonical => "canonical",
    }
}
