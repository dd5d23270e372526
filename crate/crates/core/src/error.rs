use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("power allocation outside the feasible box at (k={k}, m={m}): {value}")]
    OutsideBox { k: usize, m: usize, value: f64 },

    #[error("objective is not finite at iteration {iter}")]
    NonFiniteObjective { iter: usize },

    #[error("expansion point violates its own surrogate by {violation:e}")]
    InfeasibleExpansion { violation: f64 },

    #[error("barrier method diverged after {} Newton steps (last objective {:?})", .history.len(), .history.last())]
    BarrierDivergence { history: Vec<f64> },

    #[error("Newton system is numerically ill-conditioned ({0}); consider rescaling the channel gains")]
    NumericalIllConditioning(String),

    #[error("SCA outer iteration {outer}: {source}")]
    Sca {
        outer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed channel file: {0}")]
    ChannelFile(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by user input rather than by a solver.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Dimension(_) | Error::ChannelFile(_)
        )
    }
}
