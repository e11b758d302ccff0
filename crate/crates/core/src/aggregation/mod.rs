//! VPP aggregation: inertia split, like-kind equivalents, full-order assembly
//! and the fitted reduced-order droop branch.

mod fit;
mod homogeneous;
mod reduced;

pub use fit::{
    evaluate_mape, fit_reduced_model, objective_gradient_check, AggregateVpp, FitConfig, FitReport, MapeReport,
};
pub use homogeneous::{
    aggregate_homogeneous, aggregate_inertia, assemble_heterogeneous, Delays, HomogeneousEquivalent, HostSystem,
    VppFullModel,
};
pub use reduced::ReducedParams;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::models::{DerClass, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("no units to aggregate")]
    EmptyGroup,
    #[error("unit {unit} is {found:?}, group is {expected:?}")]
    MixedKinds {
        expected: DerClass,
        found: DerClass,
        unit: String,
    },
    #[error("{0:?} group has zero droop")]
    ZeroDroop(DerClass),
    #[error("portfolio {0} has neither droop nor inertia")]
    NoResponse(String),
    #[error("host system parameters invalid")]
    InvalidHost,
    #[error("invalid fit configuration field {0}")]
    InvalidConfig(&'static str),
    #[error("full model leaves the guard band: {peak_hz} Hz at {disturbance} MW")]
    FullModelUnstable { disturbance: f64, peak_hz: f64 },
    #[error("simulation failed for scenarios {0:?}")]
    ScenarioFailures(Vec<(usize, String)>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
