use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("weight is not admissible: {0}")]
    NotAdmissible(String),

    #[error("invalid epsilon {epsilon}: {reason}")]
    InvalidEpsilon { epsilon: f64, reason: String },

    #[error("argument {value} outside the nonlinearity domain {domain}")]
    OutOfDomain { value: f64, domain: String },

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("center solution is not strictly positive (min = {min})")]
    CenterNotPositive { min: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("trajectory left the nonlinearity domain at t = {t} (u = {u})")]
    DomainExit { t: f64, u: f64 },

    #[error("zero at t = {t} lies within tolerance of the window seam")]
    AmbiguousZero { t: f64 },

    #[error("trajectory hit the origin at t = {t}")]
    OriginHit { t: f64 },

    #[error("no sign change of the counting function in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("monodromy at lambda0 has no eigenvalue 1 (|trace - 2| = {defect})")]
    DegenerateEigenvector { defect: f64 },

    #[error("no positive periodic solution found: {0}")]
    NotFound(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("sampled solution is not strictly positive (min = {min})")]
    NotPositive { min: f64 },

    #[error("Morse certificate failed: lambda0 = {lambda0}")]
    CertificateFailed { lambda0: f64 },

    #[error("twist condition not certified for k = {k}: {reason}")]
    TwistNotCertified { k: usize, reason: String },

    #[error("no k <= {cap} certifies the twist condition")]
    KStarTooLarge { cap: usize },

    #[error("found {found} periodicity class(es) for k = {k}, j = {j}; need 2")]
    PairNotFound { k: usize, j: usize, found: usize },

    #[error("solution for k = {k}, j = {j} has {zeros} zeros, expected {expected}")]
    WindingMismatch {
        k: usize,
        j: usize,
        zeros: usize,
        expected: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
