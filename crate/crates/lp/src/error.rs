use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("non-finite data in `{0}`")]
    NonFinite(String),
    #[error("inconsistent bounds on `{name}`: {lower} > {upper}")]
    InconsistentBounds { name: String, lower: f64, upper: f64 },
    #[error("unknown variable index {0}")]
    UnknownVar(usize),
    #[error("integer column `{0}` is not binary")]
    NonBinaryInteger(String),
    #[error("solve_lp called on a problem with integrality marks")]
    HasIntegers,
    #[error("singular basis: no acceptable pivot for basis position {position} (row {row})")]
    SingularBasis { position: usize, row: usize },
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}
