use thiserror::Error;

/// Errors raised by parameter validation and the simulation entry points.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("n_levels = {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("n_levels * hbar = {product} differs from 2*pi (relative error {rel_err:e})")]
    PlanckMismatch { product: f64, rel_err: f64 },

    #[error("point ({theta}, {p}) lies outside the torus 0 <= theta < 2pi, -pi <= p < pi")]
    OffTorus { theta: f64, p: f64 },

    #[error("operation requires the {expected} representation")]
    WrongRepresentation { expected: &'static str },

    #[error("dimension {got} exceeds the dense-oracle limit of {max}")]
    DimensionTooLarge { got: usize, max: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("Husimi grid resolution {m_theta}x{m_p} is below the minimum of 16")]
    GridTooCoarse { m_theta: usize, m_p: usize },

    #[error("box side must be positive, got {0}")]
    NonPositiveSide(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
