use thiserror::Error;

/// Errors raised by the rotation, trajectory and parameter layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (symmetric part norm {0:.3e})")]
    NotSkewSymmetric(f64),
    #[error("matrix is not a rotation (orthogonality error {orthogonality:.3e}, det {det})")]
    NotRotation { orthogonality: f64, det: f64 },
    #[error("rotation vector norm {0} is outside the inverse right Jacobian domain")]
    JacobianDomain(f64),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("thrust {0:.4} N too small for the flatness map (near free fall)")]
    NearFreeFall(f64),
    #[error("body z-axis aligned with heading direction (gimbal condition)")]
    GimbalCondition,
    #[error("trajectory undefined at t = {t}: {reason}")]
    Trajectory { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
