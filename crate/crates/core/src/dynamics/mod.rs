//! Post-disturbance frequency: staged closed form and a numerical reference.

mod closed_form;
mod ode;

pub use closed_form::{
    closed_form_frequency, nadir, qss_deviation, rocof_max, stage_coefficients, stage_model, Nadir, Stage1Mode, Stage3,
    StageCoefficients, StageParams,
};
pub use ode::{simulate_full_order, FrequencyModel, FrequencyTrajectory, InertiaBlock, DIVERGENCE_GUARD_HZ};

use thiserror::Error;

use crate::models::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid {field} = {value}")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("total droop is zero; quasi-steady state undefined")]
    ZeroDroop,
    #[error("stage-3 response is not underdamped (discriminant {discriminant})")]
    NotUnderdamped { discriminant: f64 },
    #[error("no inertia online at t = 0")]
    ZeroInertia,
    #[error("frequency diverged beyond the guard at t = {t} s")]
    Diverged { t: f64 },
    #[error("step {step} s too large for horizon {horizon} s")]
    StepTooLarge { step: f64, horizon: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
