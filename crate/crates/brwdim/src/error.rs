use thiserror::Error;

/// Errors raised while building factor groups, free products, or words.
#[derive(Debug, Error)]
pub enum GroupError {
    #[error("factor {index}: {message}")]
    InvalidFactor { index: usize, message: String },
    #[error("invalid free product: {0}")]
    InvalidSpec(String),
    #[error("the free product of two order-2 factors is excluded")]
    DegenerateProduct,
    #[error("step distribution must be symmetric unless every factor is finite")]
    NonsymmetricStep,
    #[error("words belong to different specs (ids {0} and {1})")]
    SpecMismatch(u64, u64),
    #[error("word block {position}: {message}")]
    MalformedWord { position: usize, message: String },
    #[error("truncation depth {depth} insufficient for radius {requested} in factor {factor}")]
    TruncationExceeded {
        factor: usize,
        depth: u32,
        requested: u32,
    },
    #[error("block product leaves the truncated ball of factor {factor}")]
    LeftBall { factor: usize },
    #[error("sphere counts disagree at m={m}: enumeration {enumerated}, recurrence {recurrence}")]
    SphereMismatch {
        m: u32,
        enumerated: u64,
        recurrence: u64,
    },
}

/// Errors raised by the generating-function layer.
#[derive(Debug, Error)]
pub enum GenfunError {
    #[error("factor {factor} first-visit system diverges at w={w} (radius {radius})")]
    DivergedAtW { factor: usize, w: f64, radius: f64 },
    #[error("fixed-point iteration did not converge within {iterations} iterations (residual {residual:.3e})")]
    SlowConvergence { iterations: u64, residual: f64 },
    #[error("fixed-point iteration diverged at z={z}")]
    Diverged { z: f64 },
    #[error("R exceeds search cap {cap}")]
    RExceedsCap { cap: f64 },
    #[error("no root: the left-hand side never exceeds 1 inside the convergence region")]
    NoRoot,
    #[error("lambda {lambda} outside the valid range {low}..={high}")]
    LambdaOutOfRange { lambda: f64, low: f64, high: f64 },
    #[error("xi solution not converged at z={0}")]
    XiNotConverged(f64),
    #[error("sphere series of factor {factor} is truncated and has no closed-form tail")]
    MissingSphereTail { factor: usize },
    #[error("z*_d sequence is not strictly decreasing: {0:?}")]
    NonMonotoneTruncation(Vec<f64>),
    #[error("insufficient resolution: dimension differences fall below the numerical floor")]
    InsufficientResolution,
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Errors raised by the Perron-Frobenius helpers.
#[derive(Debug, Error)]
pub enum PfError {
    #[error("matrix is reducible")]
    Reducible,
    #[error("matrix has a negative entry at ({0},{1})")]
    NegativeEntry(usize, usize),
    #[error("power iteration failed to converge")]
    NoConvergence,
    #[error("all factors must be finite for the block metric; factor {0} is truncated")]
    InfiniteFactor(usize),
    #[error(transparent)]
    Genfun(#[from] GenfunError),
}

/// Errors raised while building or solving amalgams.
#[derive(Debug, Error)]
pub enum AmalgamError {
    #[error("invalid amalgam: {0}")]
    Invalid(String),
    #[error("embedding {factor} is not a monomorphism: {message}")]
    BadEmbedding { factor: usize, message: String },
    #[error("F_H iteration diverged at z={z}")]
    Diverged { z: f64 },
    #[error("F_H iteration did not converge within {iterations} iterations (residual {residual:.3e})")]
    SlowConvergence { iterations: u64, residual: f64 },
    #[error(transparent)]
    Pf(#[from] PfError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Errors raised by the path-series oracle.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("truncation depth insufficient: factor {factor} has depth {depth}, horizon needs {needed}")]
    DepthInsufficient {
        factor: usize,
        depth: u32,
        needed: u32,
    },
    #[error("target word is the identity")]
    IdentityTarget,
    #[error("first-visit coefficient f^({n}) = {value:.3e} below the cancellation floor")]
    NegativeCoefficient { n: usize, value: f64 },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid offspring distribution: {0}")]
    InvalidOffspring(String),
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}
