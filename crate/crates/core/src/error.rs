use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid construction parameters (interval bounds, grid size, scheme values, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An argument violates the operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The likelihood annihilated the prior; the caller should keep the prior.
    #[error("degenerate Bayes update: total posterior mass {mass:e}")]
    DegenerateUpdate { mass: f64 },

    /// New and old intervals do not overlap, or the overlap carries no mass.
    #[error("regrid failed: {0}")]
    Regrid(String),

    #[error("infeasible time budget: {0}")]
    InfeasibleBudget(String),

    /// Allan deviation requested at an averaging time the series cannot support.
    #[error("invalid averaging time {tau}: {reason}")]
    InvalidTau { tau: f64, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
