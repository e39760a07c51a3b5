use thiserror::Error;

/// Errors produced by the solvers and their building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("ambiguous shadow boundary: {} sign changes of alpha.nu at {roots:?}", roots.len())]
    AmbiguousShadowBoundary { roots: Vec<f64> },

    #[error("infeasible partition: {0}")]
    InfeasiblePartition(String),

    #[error("under-resolved quadrature: {ppw:.2} points per wavelength (minimum {min})")]
    Resolution { ppw: f64, min: f64 },

    #[error("singular linear system (pivot {pivot} vanished)")]
    Singular { pivot: usize },

    #[error("ill-conditioned linear system: condition estimate {condition:.3e}")]
    IllConditioned { condition: f64 },

    #[error("series truncated: Hankel values saturate at order {order} before {requested} terms")]
    Truncation { order: usize, requested: usize },

    #[error("degenerate reference: zero norm over the {0} region")]
    DegenerateReference(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
