use thiserror::Error;

use crate::domain::DomainKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point of kind {found:?} used with a {expected:?} domain")]
    KindMismatch { expected: DomainKind, found: DomainKind },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("geodesic between antipodal points is not unique")]
    NonUniqueGeodesic,

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("implicit slope is singular: |dm/dx| = {0:e}")]
    SingularSlope(f64),

    #[error("no sign change of eta'' found up to y = {y_max}")]
    NotFound { y_max: f64 },

    #[error("witness construction failed: {0}")]
    ConstructionFailed(String),

    #[error("bumps do not fit on the base edge: {0}")]
    GeometryOverflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
