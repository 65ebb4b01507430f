use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SprayError {
    #[error("state outside domain of `{label}`")]
    DomainViolation { label: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("velocity must be nonzero")]
    ZeroVelocity,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("field `{0}` has no exact derivatives")]
    NotDifferentiable(String),
    #[error("differentiation failed: {0}")]
    DifferentiationFailure(String),
    #[error("initial state lies outside the domain")]
    ImmediateDomainViolation,
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    StepBudget { t: f64 },
    #[error("geodesic residual {residual:e} exceeds bound {bound:e}")]
    ResidualBoundExceeded { residual: f64, bound: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("curve is not a geodesic point set (orthogonal residual {0:e})")]
    NotAGeodesicPointSet(f64),
    #[error("first coordinate is not monotone near the sample")]
    NotGraphLike,
    #[error("Newton iteration diverged (residual {0:e})")]
    NewtonDiverged(f64),
    #[error("singular Jacobian")]
    JacobianSingular,
    #[error("gauge s = 0 inconsistent with family cocycle (residual {0:e})")]
    GaugeAmbiguity(f64),
    #[error("closure axiom failed at lambda = {lambda}, t0 = {t0}: deviation {deviation:e}")]
    ClosureFailure {
        lambda: f64,
        t0: f64,
        deviation: f64,
    },
    #[error("family carries {got} essential parameters, a path space needs {expected}")]
    ParamCountMismatch { expected: usize, got: usize },
    #[error("all family fits diverged")]
    FitDiverged,
    #[error("samples are not strictly increasing")]
    NonMonotone,
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("interval pattern ({left}, {right}) does not suit strategy {strategy}")]
    WrongIntervalPattern {
        strategy: String,
        left: String,
        right: String,
    },
    #[error("interval probe failed: {0}")]
    ProbeFailure(String),
}

pub type Result<T> = std::result::Result<T, SprayError>;
