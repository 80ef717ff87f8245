//! Dense and sparse linear algebra used by the collocation solvers.

pub mod condest;
pub mod dense;
pub mod direct;
pub mod eigen;
pub mod gmres;
pub mod ilu;
pub mod sparse;

pub use condest::{cond_estimate_stability, onenorm_estimate, stability_estimate_with};
pub use dense::{dense_solve, singular_values, DenseLu, DenseMatrix, PIVOT_TOLERANCE};
pub use direct::SparseLu;
pub use eigen::{eigenvalues_dense, min_singular_value};
pub use gmres::{gmres, GmresOptions, GmresOutcome};
pub use ilu::{IdentityPreconditioner, IluPreconditioner, Preconditioner};
pub use sparse::{reverse_cuthill_mckee, SparseMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is numerically singular (pivot {index})")]
    Singular { index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("GMRES broke down at iteration {iteration}")]
    Breakdown { iteration: usize },
    #[error("iterative method did not converge")]
    NonConvergence,
    #[error("dimension {dim} exceeds the dense limit {max}")]
    TooLarge { dim: usize, max: usize },
}
