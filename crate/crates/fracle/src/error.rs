use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),

    #[error("grid too coarse on axis {axis}: {points} points cannot resolve {modes} modes (need at least {needed})")]
    ResolutionTooCoarse {
        axis: usize,
        points: usize,
        modes: usize,
        needed: usize,
    },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("coincident points")]
    CoincidentPoints,

    #[error("unresolved singularity: |x - y| = {distance:e} is below the resolvability threshold {threshold:e}")]
    UnresolvedSingularity { distance: f64, threshold: f64 },

    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("exponent hypothesis violated: {0}")]
    Exponent(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("no convergence after {iterations} iterations (relative theta change {theta_change:e}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        theta_change: f64,
        residual: f64,
    },

    #[error("positivity lost: clamped mass fraction {fraction:e} exceeds {limit:e}")]
    PositivityLost { fraction: f64, limit: f64 },

    #[error("ascent violated at iteration {iteration}: theta {previous} -> {current}")]
    AscentViolated {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("zero input")]
    ZeroInput,

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("too few rows: need {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("sweep row eps = {epsilon}: {source}")]
    Row { epsilon: f64, source: Box<Error> },

    #[error("{}", format_violations(.0))]
    Config(Vec<String>),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[String]) -> String {
    let mut out = format!("{} config violation(s)", v.len());
    for line in v {
        out.push_str("\n  ");
        out.push_str(line);
    }
    out
}

pub type Result<T> = std::result::Result<T, Error>;
