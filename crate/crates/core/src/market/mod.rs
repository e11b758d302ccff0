//! Joint energy, inertia and droop clearing: SCUC, continuous SCUC and SCED
//! models, dual-based prices, settlement and a frequency audit of the result.

mod audit;
mod offers;
mod pipeline;
mod problem;
mod settle;

pub use audit::{frequency_audit, FrequencyAudit, PeriodAudit};
pub use offers::OfferBook;
pub use pipeline::{
    solve_clearing, solve_pipeline, ClearingOutcome, ClearingSolution, LpCheck, PeriodMix, PipelineReport,
    PriceSchedule, SCUC_NODE_LIMIT, SCUC_REL_GAP,
};
pub use problem::{
    build_clearing_problem, expected_row_count, period_surfaces, ClearingMode, ClearingProblem, Commitment,
};
pub use settle::{settle, ClassSettlement, ProviderClass, Service, Settlement, SettlementLine};

use thiserror::Error;

use crate::dynamics::DynamicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("no nadir surface for period {period}")]
    MissingSurface { period: usize },
    #[error("surface for period {period} is built for a {surface} MW disturbance, the period has {period_delta_d} MW")]
    SurfaceDisturbance {
        period: usize,
        surface: f64,
        period_delta_d: f64,
    },
    #[error("offer book: {0}")]
    Offers(String),
    #[error("SCED needs a fixed commitment")]
    MissingCommitment,
    #[error("commitment: {0}")]
    Commitment(String),
    #[error("variable `{0}` is unbounded in the cost direction")]
    Unbounded(String),
    #[error("{stage} infeasible: {}{family}", period.map_or(String::new(), |t| format!("period {t}, ")))]
    Infeasible {
        stage: &'static str,
        period: Option<usize>,
        family: String,
    },
    #[error("{stage} ended {status}")]
    Unsolved { stage: &'static str, status: &'static str },
    #[error(transparent)]
    Lp(#[from] vppfr_lp::LpError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
