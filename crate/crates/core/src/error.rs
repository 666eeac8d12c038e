use thiserror::Error;

/// Errors raised while building codes, transforms and decoders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("field order exponent {0} outside supported range 2..=10")]
    FieldOrder(u32),

    #[error("polynomial {poly:#b} does not have degree {n}")]
    PolynomialDegree { poly: u32, n: u32 },

    #[error("polynomial {poly:#b} is not primitive: alpha^{power} repeats alpha^{earlier}")]
    NotPrimitive { poly: u32, power: u32, earlier: u32 },

    #[error("polynomial {poly:#b} is not primitive: alpha^{power} collapses to zero")]
    NotPrimitiveZero { poly: u32, power: u32 },

    #[error("inverse of zero")]
    InverseOfZero,

    #[error("expected {expected} bits, got {got}")]
    BitLength { expected: usize, got: usize },

    #[error("bit value {0} is not 0 or 1")]
    NotABit(u8),

    #[error("value {value} is not an element of GF(2^{n})")]
    NotAnElement { value: u32, n: u32 },

    #[error("dimension K = {k} outside 1..={len}")]
    Dimension { k: usize, len: usize },

    #[error("invalid locator list: {0}")]
    Locators(String),

    #[error("invalid permutation: {0}")]
    Permutation(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("generator matrix has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
