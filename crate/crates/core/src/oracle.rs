//! Cross-checks of the iterative solvers against pattern enumeration.

use serde::Serialize;

use crate::error::{HtcpError, Result};
use crate::generate::random_instance;
use crate::hlcp::{solve_hlcp_enumerate, HlcpInstance};
use crate::linalg::inf_dist;
use crate::newton::{multistart, start_rng};
use crate::problem::{HtcpInstance, SolutionPair, SolverConfig};
use crate::solver::{solve_homotopy, solve_newton_multistart, solve_pattern_enumeration, Method};

/// Largest ∞-distance at which two solutions count as the same point.
pub const CONTAINMENT_TOL: f64 = 1e-6;

const STREAM_ORACLE: u64 = 1 << 48;

#[derive(Clone, Debug, Serialize)]
pub struct Mismatch {
    pub method: Method,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCase {
    pub index: usize,
    pub order: usize,
    pub dim: usize,
    pub enumerated: usize,
    pub newton: usize,
    pub homotopy: usize,
    /// Iterative solutions missing from the enumeration set.
    pub missing: Vec<Mismatch>,
    /// For `m = 2`: whether enumeration and the HLCP solver give the same set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hlcp_agrees: Option<bool>,
}

impl OracleCase {
    pub fn passed(&self) -> bool {
        self.missing.is_empty() && self.hlcp_agrees != Some(false)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    pub count: usize,
    pub solutions_checked: usize,
    pub solutions_contained: usize,
    pub hlcp_checked: usize,
    pub hlcp_agreed: usize,
    pub failures: Vec<OracleCase>,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn agreement_rate(&self) -> f64 {
        if self.solutions_checked == 0 {
            1.0
        } else {
            self.solutions_contained as f64 / self.solutions_checked as f64
        }
    }
}

fn contains(set: &[SolutionPair], s: &SolutionPair) -> bool {
    set.iter().any(|t| inf_dist(&t.stacked(), &s.stacked()) <= CONTAINMENT_TOL)
}

fn same_set(a: &[SolutionPair], b: &[SolutionPair]) -> bool {
    a.iter().all(|s| contains(b, s)) && b.iter().all(|s| contains(a, s))
}

/// Runs Newton multistart and homotopy on `inst` and checks every solution
/// against the enumeration set; for `m = 2` also compares with the HLCP solver.
pub fn check_instance(inst: &HtcpInstance, index: usize, cfg: &SolverConfig) -> Result<OracleCase> {
    let enumerated = solve_pattern_enumeration(inst, cfg)?.solutions;
    let newton = solve_newton_multistart(inst, cfg)?.solutions;
    let homotopy = solve_homotopy(inst, cfg)?.solutions;
    let missing = newton
        .iter()
        .map(|s| (Method::Newton, s))
        .chain(homotopy.iter().map(|s| (Method::Homotopy, s)))
        .filter(|(_, s)| !contains(&enumerated, s))
        .map(|(method, s)| Mismatch { method, x: s.x.iter().cloned().collect(), y: s.y.iter().cloned().collect() })
        .collect();
    let hlcp_agrees = match (inst.a().to_matrix(), inst.b().to_matrix()) {
        (Some(a), Some(b)) => {
            let h = solve_hlcp_enumerate(&HlcpInstance::new(a, b, inst.q().clone())?, cfg.tol_residual)?;
            Some(!h.has_continuum() && same_set(&h.solutions, &enumerated))
        }
        _ => None,
    };
    Ok(OracleCase {
        index,
        order: inst.order(),
        dim: inst.dim(),
        enumerated: enumerated.len(),
        newton: newton.len(),
        homotopy: homotopy.len(),
        missing,
        hlcp_agrees,
    })
}

/// Instance `k` has order `orders[k % len]` and dimension cycling through
/// `1..=max_dim`, with entries drawn from its own seeded stream.
pub fn oracle_check(count: usize, max_dim: usize, orders: &[usize], cfg: &SolverConfig) -> Result<OracleSummary> {
    cfg.validate()?;
    if max_dim == 0 || orders.is_empty() || orders.iter().any(|&m| m < 2) {
        return Err(HtcpError::Invalid("oracle check needs max_dim ≥ 1 and orders ≥ 2".into()));
    }
    let cases = multistart(count, |k| {
        let order = orders[k % orders.len()];
        let dim = 1 + (k / orders.len()) % max_dim;
        let mut rng = start_rng(cfg.rng_seed, STREAM_ORACLE + k as u64);
        random_instance(&mut rng, order, dim).and_then(|inst| check_instance(&inst, k, cfg))
    });
    let mut summary = OracleSummary {
        count,
        solutions_checked: 0,
        solutions_contained: 0,
        hlcp_checked: 0,
        hlcp_agreed: 0,
        failures: vec![],
    };
    for case in cases {
        let case = case?;
        summary.solutions_checked += case.newton + case.homotopy;
        summary.solutions_contained += case.newton + case.homotopy - case.missing.len();
        if let Some(ok) = case.hlcp_agrees {
            summary.hlcp_checked += 1;
            summary.hlcp_agreed += ok as usize;
        }
        if !case.passed() {
            summary.failures.push(case);
        }
    }
    Ok(summary)
}
