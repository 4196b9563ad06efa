use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The Jacobian of a patch lost rank at a queried parameter point.
    #[error("patch is not immersed at {point:?}: smallest singular value {singular_value:e} (largest {largest:e})")]
    NotImmersed {
        point: Vec<f64>,
        singular_value: f64,
        largest: f64,
    },

    /// A deformation `phi + t V` stopped being an immersion.
    #[error("deformation at t = {t:e} is not immersed: {source}")]
    DeformationNotImmersed { t: f64, source: Box<Error> },

    #[error("point {point:?} is off the ambient sphere: |phi| = {norm}, radius {radius}")]
    NotOnSphere {
        point: Vec<f64>,
        norm: f64,
        radius: f64,
    },

    #[error("patch construction rejected: {0}")]
    Construction(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
