//! Sparse direct solve of the assembled system (faer LU with partial pivoting
//! and fill-reducing ordering), plus a few steps of iterative refinement.

use std::time::Instant;

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use thiserror::Error;

use crate::assembly::LinearSystem;
pub use crate::assembly::SystemState;
use crate::sparse::{self, CsrMatrix};
use crate::C64;

/// Normwise backward error above which the factorization is declared unusable.
pub const BACKWARD_ERROR_LIMIT: f64 = 1e-9;
const REFINEMENT_STEPS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("matrix is not square: {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("numerically singular system: {0}")]
    Singular(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub n: usize,
    pub nnz: usize,
    /// ‖b − Ax‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞) after refinement.
    pub backward_error: f64,
    pub refinement_steps: usize,
    /// ‖A‖∞‖x‖∞/‖b‖∞, a cheap lower bound on the ∞-norm condition number.
    pub growth: f64,
    pub seconds: f64,
}

fn to_faer(a: &CsrMatrix) -> Result<SparseColMat<usize, C64>, SolverError> {
    let t: Vec<_> = a
        .triplets()
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    SparseColMat::try_new_from_triplets(a.n_rows, a.n_cols, &t)
        .map_err(|e| SolverError::Singular(format!("{e:?}")))
}

fn backward_error(a: &CsrMatrix, x: &[C64], b: &[C64], na: f64) -> (Vec<C64>, f64) {
    let ax = a.mul_vec(x);
    let r: Vec<C64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let denom = na * sparse::norm_inf(x) + sparse::norm_inf(b);
    let be = if denom == 0.0 {
        0.0
    } else {
        sparse::norm_inf(&r) / denom
    };
    (r, be)
}

pub fn solve_sparse(a: &CsrMatrix, b: &[C64]) -> Result<(Vec<C64>, SolveReport), SolverError> {
    if a.n_rows != a.n_cols {
        return Err(SolverError::Shape {
            rows: a.n_rows,
            cols: a.n_cols,
        });
    }
    assert_eq!(b.len(), a.n_rows);
    let start = Instant::now();
    let n = a.n_rows;
    faer::set_global_parallelism(faer::Par::Seq);
    if n == 0 {
        let report = SolveReport {
            n,
            nnz: 0,
            backward_error: 0.0,
            refinement_steps: 0,
            growth: 0.0,
            seconds: 0.0,
        };
        return Ok((Vec::new(), report));
    }
    let lu = to_faer(a)?
        .sp_lu()
        .map_err(|e| SolverError::Singular(format!("{e:?}")))?;
    let apply = |rhs: &[C64]| -> Vec<C64> {
        let mut m = Mat::<C64>::from_fn(n, 1, |i, _| rhs[i]);
        lu.solve_in_place_with_conj(faer::Conj::No, m.as_mut());
        (0..n).map(|i| m[(i, 0)]).collect()
    };
    let mut x = apply(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::Singular(
            "zero pivot produced non-finite values".into(),
        ));
    }
    let na = a.norm_inf();
    let (mut r, mut be) = backward_error(a, &x, b, na);
    let mut steps = 0;
    while steps < REFINEMENT_STEPS && be > f64::EPSILON {
        let d = apply(&r);
        let trial: Vec<C64> = x.iter().zip(&d).map(|(x, d)| x + d).collect();
        let (r2, be2) = backward_error(a, &trial, b, na);
        if !(be2 < be) {
            break;
        }
        x = trial;
        r = r2;
        be = be2;
        steps += 1;
    }
    if !(be <= BACKWARD_ERROR_LIMIT) {
        return Err(SolverError::Singular(format!(
            "backward error {be:e} after refinement"
        )));
    }
    let nb = sparse::norm_inf(b);
    let growth = if nb > 0.0 {
        na * sparse::norm_inf(&x) / nb
    } else {
        0.0
    };
    let report = SolveReport {
        n,
        nnz: a.nnz(),
        backward_error: be,
        refinement_steps: steps,
        growth,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((x, report))
}

pub fn solve(system: &LinearSystem) -> Result<(SystemState, SolveReport), SolverError> {
    let (x, report) = solve_sparse(&system.matrix, &system.rhs)?;
    Ok((SystemState::from_free(system.dofs.clone(), &x), report))
}
