use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("lifted map construction failed: {0}")]
    LiftConstructionFailed(String),

    #[error("operator is numerically zero")]
    ZeroOperator,

    #[error("wedge degree {0} exceeds space dimension {1}")]
    DegreeOverflow(usize, usize),

    #[error("interior product of a degree-0 multivector")]
    DegreeUnderflow,

    #[error("invalid degree {degree} for space dimension {space_dim}")]
    InvalidDegree { degree: usize, space_dim: usize },

    #[error(
        "field not in essential range: worst cell {cell} at distance {distance:e} \
         ({violations} cell(s) above tolerance)"
    )]
    FieldNotInEssentialRange {
        cell: usize,
        distance: f64,
        violations: usize,
    },

    #[error("point lies on the jump set (axis {axis}, coordinate {coordinate})")]
    OnJumpSet { axis: usize, coordinate: f64 },

    #[error("point {0:?} is outside the open unit cube")]
    OutOfDomain(Vec<f64>),

    #[error("unsupported operator order {0}; only first-order operators are constructible")]
    UnsupportedOrder(usize),

    #[error("quadrature error: {0}")]
    QuadratureError(String),

    #[error("format error: {0}")]
    Format(String),
}
