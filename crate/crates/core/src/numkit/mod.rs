//! Dense small-matrix numerical kernel.

pub mod eigen;
pub mod expm;
pub mod lstsq;
pub mod matrix;
pub mod riccati;
pub mod sylvester;
pub mod vectorize;

pub use eigen::{eigenvalues, spectral, SpectralReport};
pub use expm::expm;
pub use lstsq::{
    least_squares, numerical_rank, singular_values, spectral_norm, LeastSquares, DEFAULT_RANK_TOL,
};
pub use matrix::{Lu, Matrix, SymMatrix};
pub use riccati::{
    are_residual, hamiltonian, hamiltonian_parts, kleinman_history, kleinman_solve,
    special_feedforward_history, stable_graph_solution, HamiltonianKind, Iterate, IterationHistory,
    StopReason, StopRule,
};
pub use sylvester::{solve_lyapunov, solve_sylvester};
pub use vectorize::{
    col, colm, colv, compress_rows, compress_upper, kron, kron_vec, uncol, uncolm,
};
