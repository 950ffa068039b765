use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid disorder law: {0}")]
    InvalidDisorder(String),

    #[error("potential has {found} sites but the cube has {expected}")]
    CubeMismatch { expected: usize, found: usize },

    #[error("matrix of order {order} exceeds the dense eigensolver limit {limit}")]
    TooLarge { order: usize, limit: usize },

    #[error("QL iteration did not converge after {iterations} sweeps (order {order})")]
    NoConvergence { order: usize, iterations: usize },

    #[error("eigenvalue #{index} is not simple: gap to the rest of the spectrum is {gap:e}")]
    Degenerate { index: usize, gap: f64 },

    #[error("eigenvectors were not computed for this sample")]
    MissingEigenvectors,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("realization {realization_index} (base seed {base_seed}): {source}")]
    Realization {
        base_seed: u64,
        realization_index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Tags an error with the realization that produced it, so the failing
    /// draw can be replayed in isolation.
    pub fn in_realization(self, base_seed: u64, realization_index: u64) -> Self {
        match self {
            e @ Error::Realization { .. } => e,
            other => Error::Realization {
                base_seed,
                realization_index,
                source: Box::new(other),
            },
        }
    }
}
