//! Transfer functions, DER parameter records and VPP portfolios.

mod der;
mod portfolio;
mod tf;

pub(crate) use der::kind_tf;
pub use der::{build_der_tf, DerClass, DerKind, DerUnit};
pub use portfolio::{VppOfferBounds, VppPortfolio};
pub use tf::{hurwitz, StateSpace, TransferFunction};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("empty polynomial")]
    EmptyPolynomial,
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("negative delay {0}")]
    NegativeDelay(f64),
    #[error("denominator constant term is zero")]
    ZeroDenominatorConstant,
    #[error("improper transfer function: numerator degree {num_degree} > denominator degree {den_degree}")]
    Improper { num_degree: usize, den_degree: usize },
    #[error("time constant must be positive, got {0}")]
    NonPositiveTimeConstant(f64),
    #[error("branches with different delays cannot be summed")]
    DelayMismatch,
    #[error("{field} = {value}: {reason}")]
    InvalidParameter {
        field: String,
        value: f64,
        reason: &'static str,
    },
    #[error("unit index {index} out of range for {len} units")]
    UnitIndex { index: usize, len: usize },
}
