//! Solve → estimate → mark → refine, with per-iteration records.

use std::time::Instant;

use crate::assembly;
use crate::config::{PmlConfig, ProblemConfig, RunConfig};
use crate::estimator::{self, ExactSolution, IndicatorField};
use crate::mesh::{self, Mesh};
use crate::solver::{self, SystemState};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marking {
    /// Mark T when η_T > τ·max η.
    Maximum(f64),
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub iter: usize,
    pub dof: usize,
    pub eps_f: f64,
    pub eps_p: f64,
    pub e_h: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    /// max_iter reached with εF above the tolerance.
    BudgetExhausted,
    DofCap,
}

#[derive(Debug, Clone)]
pub struct AdaptOptions {
    pub tol: f64,
    pub marking: Marking,
    pub max_iter: usize,
    pub h0: f64,
    pub dof_cap: usize,
}

impl From<&RunConfig> for AdaptOptions {
    fn from(r: &RunConfig) -> Self {
        AdaptOptions {
            tol: r.tol,
            marking: Marking::Maximum(r.tau),
            max_iter: r.max_iter,
            h0: r.h0,
            dof_cap: r.dof_cap,
        }
    }
}

/// What the observer sees after each estimate; `marked` is empty on the last iteration.
pub struct Step<'a> {
    pub iteration: usize,
    pub mesh: &'a Mesh,
    pub state: &'a SystemState,
    pub indicators: &'a IndicatorField,
    pub marked: &'a [usize],
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub records: Vec<ConvergenceRecord>,
    pub mesh: Mesh,
    pub state: SystemState,
    pub indicators: IndicatorField,
    pub status: Status,
}

pub fn mark(ind: &IndicatorField, marking: Marking) -> Vec<usize> {
    match marking {
        Marking::Uniform => (0..ind.eta.len()).collect(),
        Marking::Maximum(tau) => {
            let max = ind.eta.iter().copied().fold(0.0, f64::max);
            if max == 0.0 {
                return Vec::new();
            }
            // The maximal element always qualifies: τ < 1.
            (0..ind.eta.len())
                .filter(|&e| ind.eta[e] > tau * max || ind.eta[e] == max)
                .collect()
        }
    }
}

pub fn run(
    cfg: &ProblemConfig,
    pml: &PmlConfig,
    opts: &AdaptOptions,
    exact: Option<&dyn ExactSolution>,
    mut observer: impl FnMut(&Step),
) -> Result<AdaptOutcome, Error> {
    let mesh = mesh::generate_initial_mesh(cfg, pml, opts.h0)?;
    run_from(mesh, cfg, pml, opts, exact, &mut observer)
}

/// The loop on a caller-supplied initial mesh.
pub fn run_from(
    mut mesh: Mesh,
    cfg: &ProblemConfig,
    pml: &PmlConfig,
    opts: &AdaptOptions,
    exact: Option<&dyn ExactSolution>,
    observer: &mut dyn FnMut(&Step),
) -> Result<AdaptOutcome, Error> {
    let mut records = Vec::new();
    let mut iter = 1;
    loop {
        let start = Instant::now();
        let system = assembly::assemble(&mesh, cfg, pml)?;
        let dof = system.dofs.n_free;
        let (state, _) = solver::solve(&system)?;
        let ind = estimator::indicators(&mesh, &state, cfg, pml)?;
        let e_h = exact.map(|x| estimator::apriori_error(&mesh, &state, x, cfg));
        records.push(ConvergenceRecord {
            iter,
            dof,
            eps_f: ind.eps_f,
            eps_p: ind.eps_p,
            e_h,
            seconds: start.elapsed().as_secs_f64(),
        });
        let status = if ind.eps_f <= opts.tol {
            Some(Status::Converged)
        } else if dof > opts.dof_cap {
            Some(Status::DofCap)
        } else if iter >= opts.max_iter {
            Some(Status::BudgetExhausted)
        } else {
            None
        };
        if let Some(status) = status {
            observer(&Step {
                iteration: iter,
                mesh: &mesh,
                state: &state,
                indicators: &ind,
                marked: &[],
            });
            return Ok(AdaptOutcome {
                records,
                mesh,
                state,
                indicators: ind,
                status,
            });
        }
        let marked = mark(&ind, opts.marking);
        observer(&Step {
            iteration: iter,
            mesh: &mesh,
            state: &state,
            indicators: &ind,
            marked: &marked,
        });
        mesh = mesh.bisect(&marked)?;
        iter += 1;
    }
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
