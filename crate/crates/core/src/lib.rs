//! Frequency-response aggregation of VPPs, delay-aware frequency dynamics,
//! linear security constraints and joint energy/inertia/droop clearing.

pub mod aggregation;
pub mod dynamics;
pub mod linalg;
pub mod market;
pub mod models;
pub mod num;
pub mod scenario;
pub mod security;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type TransferFunctionF64 = models::TransferFunction<f64>;
pub type TransferFunctionF32 = models::TransferFunction<f32>;
pub type StageParamsF64 = dynamics::StageParams<f64>;
pub type StageParamsF32 = dynamics::StageParams<f32>;
pub type StageCoefficientsF64 = dynamics::StageCoefficients<f64>;
pub type StageCoefficientsF32 = dynamics::StageCoefficients<f32>;
pub type FrequencyModelF64 = dynamics::FrequencyModel<f64>;
pub type FrequencyTrajectoryF64 = dynamics::FrequencyTrajectory<f64>;
pub type FrequencyTrajectoryF32 = dynamics::FrequencyTrajectory<f32>;
