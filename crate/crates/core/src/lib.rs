//! Adaptive finite elements with perfectly matched layers for time-harmonic
//! acoustic plane-wave scattering by a periodic elastic surface.
//!
//! One period cell is discretized with P1 elements: pressure above the
//! grating profile, displacement below it, both truncated by polynomial PML
//! layers. The crate assembles and solves the coupled complex system,
//! evaluates residual a posteriori indicators and drives newest-vertex
//! bisection refinement. The [`spectral`] module supplies the modal
//! (Rayleigh-expansion) oracles used for verification.

pub mod adapt;
pub mod assembly;
pub mod cli;
pub mod config;
pub mod estimator;
pub mod io;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod spectral;

pub use num_complex::Complex64 as C64;

use thiserror::Error;

/// Umbrella error used by the pipelines and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Assembly(#[from] assembly::AssemblyError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Estimator(#[from] estimator::EstimatorError),
    #[error("{0}")]
    Budget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for each error family.
    pub fn exit_code(&self) -> i32 {
        use config::ConfigError as CE;
        match self {
            Error::Config(CE::Geometry(_)) | Error::Mesh(_) => 3,
            Error::Config(_) => 2,
            Error::Spectral(spectral::SpectralError::Wood(_)) => 2,
            Error::Spectral(_) | Error::Solver(_) | Error::Estimator(_) => 4,
            Error::Assembly(assembly::AssemblyError::Geometry(_)) => 3,
            Error::Assembly(_) => 4,
            Error::Budget(_) => 5,
            Error::Io(_) => 1,
        }
    }
}
