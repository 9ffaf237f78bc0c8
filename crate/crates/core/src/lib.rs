//! Lowest-order mixed virtual element solver for the Laplace eigenvalue
//! problem on polygonal meshes.
//!
//! The discretization works on general polygonal cells with one flux degree
//! of freedom per edge (the normal flux integral) and one constant scalar
//! unknown per cell. The crate provides mesh generators for several
//! structured and unstructured families on the unit square, the symmetric
//! square (-1,1)^2 and an L-shaped domain, the per-cell projector and
//! stabilized flux form, global assembly into a sparse eigenvalue pencil,
//! dense and shift-invert eigensolvers for the smallest modes, and the
//! analysis toolkit used by the command line runner: exact reference
//! spectra, convergence-order fits, nonlinear extrapolation of eigenvalue
//! limits, stabilization sweeps and spurious-mode detection.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod eigensolver;
pub mod io;
pub mod mesh;
pub mod quad;
pub mod vem_local;

use thiserror::Error;

/// Pin the linear algebra backend to sequential execution once per
/// process, so repeated runs with identical inputs produce bit-identical
/// floating point results.
pub(crate) fn run_sequential() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// The requested configuration is contradictory or out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Mesh family and domain cannot be combined.
    #[error("mesh family {family} is not defined on domain {domain}")]
    IncompatibleFamily {
        family: mesh::MeshFamily,
        domain: mesh::Domain,
    },

    /// A cell collapsed to (numerically) zero area.
    #[error("cell {cell} is degenerate (area {area:.3e})")]
    DegenerateCell { cell: usize, area: f64 },

    /// A boundary edge could not be matched to any boundary segment.
    #[error("boundary edge {edge} lies on no declared boundary segment")]
    UnclassifiableBoundaryEdge { edge: usize },

    /// Assembly found a boundary edge that was never tagged.
    #[error("boundary edge {edge} is untagged; run boundary tagging first")]
    UntaggedBoundaryEdge { edge: usize },

    /// A linear system was singular or a factorization failed.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The discrete spectrum must be positive; a violation signals an
    /// assembly or solver defect.
    #[error("eigenvalue {index} is non-positive ({value:.6e})")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    /// Malformed mesh file or other structured input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command line runner: configuration
    /// problems exit 2, numerical or I/O failures exit 3.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidConfig(_)
            | Error::IncompatibleFamily { .. }
            | Error::Parse(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
