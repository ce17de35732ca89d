//! Error type shared across the workbench.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("direction index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("not a unit: {0}")]
    NotAUnit(String),
    #[error("extracted bracket is not constant: {0}")]
    NonConstantBracket(String),
    #[error("first-order cochains differ: {0}")]
    FirstOrderMismatch(String),
    #[error("classical part must vanish: {0}")]
    NonzeroClassicalPart(String),
    #[error("series is not normalized to 1 + O(L): {0}")]
    NotNormalized(String),
    #[error("not a Poisson derivation: {0}")]
    NotPoisson(String),
    #[error("field does not split into constant plus Hamiltonian parts: {0}")]
    NotDecomposable(String),
    #[error("operation unsupported on this model: {0}")]
    UnsupportedModel(String),
    #[error("direction is not quantizable: {0}")]
    NotQuantizable(String),
    #[error("map is not a self-equivalence of the product: {0}")]
    NotAnEquivalence(String),
    #[error("class series is not in reduced units")]
    NotReduced,
    #[error("group closure exceeded the element cap of {0}")]
    CapExceeded(usize),
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
