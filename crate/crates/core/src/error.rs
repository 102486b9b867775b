use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {0} lies outside the model domain")]
    DomainError(String),

    #[error("metric is not positive definite at {0}")]
    SingularMetric(String),

    #[error("trajectory left the model domain at t = {time}")]
    DomainExit { time: f64 },

    #[error("integration step {step} is too large for length {length}")]
    StepTooLarge { step: f64, length: f64 },

    #[error("zero vector where a nonzero direction is required")]
    ZeroVector,

    #[error("shooting did not converge (best endpoint error {best_error:e})")]
    NoConvergence { best_error: f64 },

    #[error("length {length} exceeds the injectivity bound {bound}")]
    BeyondInjectivityBound { length: f64, bound: f64 },

    #[error("seed frame rejected: {0}")]
    BadSeedFrame(String),

    #[error("field has {found} samples, carrier curve has {expected}")]
    GridMismatch { expected: usize, found: usize },

    #[error("variation is not proper: endpoint displacement {0:e}")]
    NotProper(f64),

    #[error("sn_K vanishes at t = {0}")]
    PoleError(f64),

    #[error("conjugate point reached (normal Jacobian determinant {det:e} at rho = {rho})")]
    ConjugatePoint { rho: f64, det: f64 },

    #[error("curvature sampling cannot certify a positive bound (estimate {0})")]
    InconclusiveK(f64),

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("bad parameters for {model}: {reason}")]
    BadParams { model: String, reason: String },

    #[error("variation surface misses the base curve by {0:e}")]
    SurfaceOffBase(f64),

    #[error("operation needs a closed-form variation surface")]
    NeedsClosedForm,

    #[error("self-test failed: {0}")]
    SelfTest(String),
}
