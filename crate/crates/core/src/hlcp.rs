//! Horizontal LCP `x ∧ y = 0, A x - B y = q` by complementary-pattern enumeration.
//!
//! Each pattern `α` fixes which of `x_i`, `y_i` is zero and leaves the linear
//! system `M(α) w = q`, whose column `i` is `A_{·i}` when `x_i` is free and
//! `-B_{·i}` otherwise. Nonsingular patterns give at most one candidate.
//! Singular patterns are resolved exactly at small `n` by enumerating the
//! basic solutions of `{w ≥ 0 : M(α) w = q}` and its recession cone.

use serde::Serialize;

use crate::error::{check_dim, HtcpError, Result};
use crate::linalg::{inf_norm, least_squares, rank, solve_checked, Matrix, Vector};
use crate::newton::multistart;
use crate::problem::{canonical_dedup, Pattern, SolutionPair};

pub const MAX_HLCP_DIM: usize = 24;

/// Solutions within this ∞-distance are merged.
pub const DEDUP_TOL: f64 = 1e-7;

const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct HlcpInstance {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Vector,
}

impl HlcpInstance {
    pub fn new(a: Matrix, b: Matrix, q: Vector) -> Result<Self> {
        let n = q.len();
        for m in [&a, &b] {
            check_dim(n, m.nrows())?;
            check_dim(n, m.ncols())?;
            if m.iter().any(|v| !v.is_finite()) {
                return Err(HtcpError::Invalid("non-finite matrix entry".into()));
            }
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(HtcpError::Invalid("non-finite q".into()));
        }
        Ok(Self { a, b, q })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn pattern_matrix(&self, p: Pattern) -> Matrix {
        let n = self.dim();
        Matrix::from_fn(n, n, |r, c| if p.x_free(c) { self.a[(r, c)] } else { -self.b[(r, c)] })
    }

    pub fn evaluate(&self, x: Vector, y: Vector) -> SolutionPair {
        let comp = inf_norm(&x.zip_map(&y, f64::min));
        let eq = inf_norm(&(&self.a * &x - &self.b * &y - &self.q));
        SolutionPair {
            pattern: Pattern::from_pair(&x, &y),
            x,
            y,
            residual_complementarity: comp,
            residual_equation: eq,
        }
    }
}

/// How a singular pattern matrix resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularKind {
    /// `{w ≥ 0 : M w = q}` is empty.
    Empty,
    /// Exactly one feasible point; it is included in the solution list.
    Isolated,
    /// A segment or ray of solutions: the problem has infinitely many.
    Continuum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegeneratePattern {
    pub pattern: Pattern,
    pub kind: SingularKind,
}

#[derive(Clone, Debug, Default)]
pub struct HlcpResult {
    pub solutions: Vec<SolutionPair>,
    pub degenerate: Vec<DegeneratePattern>,
}

impl HlcpResult {
    pub fn has_continuum(&self) -> bool {
        self.degenerate.iter().any(|d| d.kind == SingularKind::Continuum)
    }
}

enum PatternOutcome {
    Regular(Option<Vector>),
    Singular(SingularKind, Vec<Vector>),
}

/// All subsets of `0..k` (as column index lists), smallest first.
fn subsets(k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..1u64 << k).map(move |m| (0..k).filter(|i| m >> i & 1 == 1).collect())
}

fn columns(m: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Basic feasible points of `{w ≥ 0 : M w = rhs}`: solutions supported on
/// column subsets of full column rank.
fn basic_points(m: &Matrix, rhs: &Vector, tol: f64) -> Vec<Vector> {
    let k = m.ncols();
    let scale = 1.0 + inf_norm(rhs);
    let mut out: Vec<Vector> = Vec::new();
    for cols in subsets(k) {
        let sub = columns(m, &cols);
        if rank(&sub, RANK_TOL) < cols.len() {
            continue;
        }
        let Some((ws, r)) = least_squares(&sub, rhs) else { continue };
        if r > tol * scale || ws.iter().any(|v| *v < -tol) {
            continue;
        }
        let mut w = Vector::zeros(k);
        for (j, &c) in cols.iter().enumerate() {
            w[c] = ws[j].max(0.0);
        }
        if !out.iter().any(|o| crate::linalg::inf_dist(o, &w) <= DEDUP_TOL) {
            out.push(w);
        }
    }
    out
}

/// Some `d ≥ 0` with `Σ d = 1` and `M d = 0`, if one exists.
pub(crate) fn recession_direction(m: &Matrix, tol: f64) -> Option<Vector> {
    let (n, k) = (m.nrows(), m.ncols());
    let mut aug = Matrix::zeros(n + 1, k);
    aug.view_mut((0, 0), (n, k)).copy_from(m);
    aug.row_mut(n).fill(1.0);
    let mut rhs = Vector::zeros(n + 1);
    rhs[n] = 1.0;
    subsets(k).skip(1).find_map(|cols| {
        let sub = columns(&aug, &cols);
        if rank(&sub, RANK_TOL) < cols.len() {
            return None;
        }
        match least_squares(&sub, &rhs) {
            Some((d, r)) if r <= tol && d.iter().all(|v| *v >= -tol) => {
                let mut full = Vector::zeros(k);
                for (j, &c) in cols.iter().enumerate() {
                    full[c] = d[j].max(0.0);
                }
                Some(full)
            }
            _ => None,
        }
    })
}

fn solve_pattern(inst: &HlcpInstance, p: Pattern, tol: f64) -> PatternOutcome {
    let m = inst.pattern_matrix(p);
    match solve_checked(&m, &inst.q) {
        Some(w) => PatternOutcome::Regular(w.iter().all(|v| *v >= -tol).then(|| w.map(|v| v.max(0.0)))),
        None => {
            let points = basic_points(&m, &inst.q, tol);
            let kind = if points.is_empty() {
                SingularKind::Empty
            } else if points.len() > 1 || recession_direction(&m, tol).is_some() {
                SingularKind::Continuum
            } else {
                SingularKind::Isolated
            };
            PatternOutcome::Singular(kind, points)
        }
    }
}

/// Every solution of `HLCP(A, B, q)` reachable through a pattern, with
/// singular patterns reported alongside.
pub fn solve_hlcp_enumerate(inst: &HlcpInstance, tol: f64) -> Result<HlcpResult> {
    let n = inst.dim();
    if n > MAX_HLCP_DIM {
        return Err(HtcpError::GuardExceeded(format!(
            "HLCP enumeration supports n <= {MAX_HLCP_DIM}, got {n}"
        )));
    }
    let outcomes = multistart(1usize << n, |mask| {
        let p = Pattern::new(mask as u64, n);
        (p, solve_pattern(inst, p, tol))
    });
    let mut candidates = Vec::new();
    let mut degenerate = Vec::new();
    for (p, out) in outcomes {
        let ws = match out {
            PatternOutcome::Regular(w) => w.into_iter().collect::<Vec<_>>(),
            PatternOutcome::Singular(kind, points) => {
                degenerate.push(DegeneratePattern { pattern: p, kind });
                points
            }
        };
        for w in ws {
            let (x, y) = p.scatter(w.as_slice());
            let sol = inst.evaluate(x, y);
            if sol.residual() <= tol * (1.0 + inf_norm(&inst.q)) {
                candidates.push(sol);
            }
        }
    }
    Ok(HlcpResult { solutions: canonical_dedup(candidates, DEDUP_TOL), degenerate })
}

/// `true` iff enumeration yields exactly one solution and no pattern admits
/// a continuum. The found solutions are returned as witnesses either way.
pub fn hlcp_is_unique(inst: &HlcpInstance, tol: f64) -> Result<(bool, HlcpResult)> {
    let res = solve_hlcp_enumerate(inst, tol)?;
    Ok((res.solutions.len() == 1 && !res.has_continuum(), res))
}
