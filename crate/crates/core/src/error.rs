use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field does not belong to this grid (dim/ell/r_max/n mismatch)")]
    GridMismatch,

    #[error("charge functional degenerate: K(u) = {0:.3e} <= 0")]
    DegenerateCharge(f64),

    #[error("charge collapsed during descent: K(u) = {0:.3e}")]
    VanishingCharge(f64),

    #[error("descent did not converge: residual {residual:.3e} after {iters} iterations")]
    NonConvergence { residual: f64, iters: usize },

    #[error("eigenvalue iteration did not converge after {iters} iterations (last estimates: {trace:?})")]
    EigenNonConvergence { iters: usize, trace: Vec<f64> },

    #[error("no decaying solution: omega = {omega} is outside the linear-decay window (omega^2 >= m^2 = {m2})")]
    NoDecayingSolution { omega: f64, m2: f64 },

    #[error("shooting bracket not found in ({lo:.3e}, {hi:.3e}); the requested omega may lie outside the existence window")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
