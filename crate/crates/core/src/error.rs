use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("expected a unit quaternion or axis, got norm {norm}")]
    NotUnit { norm: f64 },

    #[error("expected a pure imaginary quaternion, real part is {real}")]
    NotPureImaginary { real: f64 },

    #[error("vector is not tangent: constraint residual {residual:e} exceeds {tolerance:e}")]
    NotTangent { residual: f64, tolerance: f64 },

    #[error("point violates the manifold constraints: residual {residual:e}")]
    OffManifold { residual: f64 },

    #[error("tangent vectors are based at different points")]
    BasePointMismatch,

    #[error("deformation parameter {eps} outside the supported range [0, {max}]")]
    DeformationOutOfRange { eps: f64, max: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("symplectic form is degenerate at this point (pivot {pivot:e})")]
    SingularSystem { pivot: f64 },

    #[error("step size {step:e} underflows")]
    StepUnderflow { step: f64 },

    #[error("projection to the constraint set failed at t = {t} (drift {drift:e})")]
    ProjectionFailure {
        t: f64,
        drift: f64,
        last_good: Vec<f64>,
    },

    #[error("integration did not converge: {0}")]
    Convergence(String),

    #[error("base Hamiltonian is not positive after shift (lower bound {lower_bound})")]
    NonPositiveHamiltonian { lower_bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
