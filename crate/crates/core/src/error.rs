//! Error type shared by all solver stages.

/// Errors produced by geometry validation, modal analysis and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Rejected input (geometry, mode index, frequency, grid parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested frequency sits on (or numerically at) the cutoff of
    /// mode `m`, where the modal normalization diverges.
    #[error("mode {m} is at cutoff at {f_hz} Hz (|gamma| = {gamma_abs} < {tol})")]
    CutoffSingular {
        m: usize,
        f_hz: f64,
        gamma_abs: f64,
        tol: f64,
    },

    /// Fewer projection equations than unknown modal coefficients.
    #[error("underdetermined system: {rows} equations for {unknowns} unknowns")]
    Underdetermined { rows: usize, unknowns: usize },

    /// The least-squares factorization detected numerical rank below the
    /// number of unknowns (too few or ill-placed basis functions).
    #[error("rank-deficient least-squares system: numerical rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    /// The feedback operator of a cascade is numerically singular
    /// (resonant trapped mode between the cascaded sections).
    #[error("singular cascade: feedback operator not invertible (residual {residual:e})")]
    SingularCascade { residual: f64 },

    /// Adaptive quadrature exceeded its refinement depth limit.
    #[error("adaptive quadrature did not converge within depth {max_depth}")]
    NoConvergence { max_depth: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
