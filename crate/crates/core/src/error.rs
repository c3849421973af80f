use thiserror::Error;

/// Errors raised by the numerical kernel, the simulator, the data pipeline
/// and the equilibrium algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is singular or numerically singular ({context})")]
    Singular { context: &'static str },

    #[error("rank deficient in {context}: numerical rank {rank} < required {required}")]
    RankDeficient {
        context: String,
        rank: usize,
        required: usize,
    },

    #[error("Sylvester pencil is numerically singular (spectra of F and -G overlap)")]
    SingularPencil,

    #[error("initial gain is not stabilizing: shifted closed-loop margin {margin}")]
    NotStabilizing { margin: f64 },

    #[error(
        "iteration did not converge within {iterations} iterations (last step {last_residual:e})"
    )]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
    },

    #[error("iteration diverged at step {iteration}: ‖P‖_F grew from {initial:e} to {current:e}")]
    Divergence {
        iteration: usize,
        initial: f64,
        current: f64,
    },

    #[error("Hamiltonian spectrum is not (n,n) split: {stable} stable, {unstable} unstable, {marginal} on the axis")]
    NotCSplitting {
        stable: usize,
        unstable: usize,
        marginal: usize,
    },

    #[error("stable invariant subspace is not a graph subspace (Z1 numerically singular)")]
    NotGraphSubspace,

    #[error("non-finite state at t = {time} (realization {realization}, agent {agent})")]
    NonFiniteState {
        time: f64,
        realization: usize,
        agent: usize,
    },

    #[error("window [{start}, {end}] lies outside the path domain [{domain_start}, {domain_end}]")]
    WindowOutOfRange {
        start: f64,
        end: f64,
        domain_start: f64,
        domain_end: f64,
    },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Wraps the error with the name of the algorithm stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
