use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("modulus {0} does not fit below 2^31")]
    ModulusTooLarge(u64),

    #[error("operands belong to different fields (p={left} vs p={right})")]
    FieldMismatch { left: u64, right: u64 },

    #[error("division by zero")]
    DivisionByZero,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("interpolation nodes are not distinct")]
    DegenerateNodes,

    #[error("evaluation points invalid: {0}")]
    InvalidPoints(String),

    #[error("need at least {needed} results, got {got}")]
    InsufficientResults { needed: usize, got: usize },

    #[error("infeasible system: {0}")]
    Infeasible(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("decode failed for group {group}: {survivors} surviving results, {needed} needed")]
    DecodeFailure {
        group: usize,
        survivors: usize,
        needed: usize,
    },

    #[error("realization space has {count} members, cap is {cap}")]
    RealizationSpaceTooLarge { count: String, cap: usize },

    #[error("invalid realization: {0}")]
    InvalidRealization(String),

    #[error("padded dimension {0} exceeds the supported limit")]
    PaddingTooLarge(u128),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
