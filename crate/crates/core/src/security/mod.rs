//! Linear frequency-security constraints: RoCoF and QSS bounds and a
//! piecewise-linear under-estimator of the frequency nadir.

mod pwl;

pub use pwl::{
    build_pwl_surface, check_point, sample_monotonicity, sample_nadir, MonotonicityViolation, NadirPlane, PointCheck,
    PwlNadirSurface, SurfaceConfig, SurfaceDomain, SurfaceStats, ACTIVE_TOLERANCE_HZ, CONSERVATIVE_TOLERANCE_HZ,
};

use thiserror::Error;

use crate::dynamics::DynamicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecurityError {
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("invalid surface domain: {0}")]
    Domain(String),
    #[error("plane fit failed: {0}")]
    Lp(#[from] vppfr_lp::LpError),
    #[error("plane fit LP ended {0}")]
    PlaneFit(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("surface file: {0}")]
    Format(String),
}

/// Smallest non-delayed inertia that keeps the initial RoCoF within
/// `rocof_max`, MW·s/Hz.
pub fn rocof_bound(delta_d: f64, rocof_max: f64) -> Result<f64, SecurityError> {
    if !(rocof_max > 0.0) {
        return Err(SecurityError::NonPositive {
            field: "rocof_max",
            value: rocof_max,
        });
    }
    Ok(delta_d.abs() / (2.0 * rocof_max))
}

/// Smallest total droop that keeps the QSS deviation within `qss_max`, MW/Hz.
pub fn qss_bound(delta_d: f64, qss_max: f64) -> Result<f64, SecurityError> {
    if !(qss_max > 0.0) {
        return Err(SecurityError::NonPositive {
            field: "qss_max",
            value: qss_max,
        });
    }
    Ok(delta_d.abs() / qss_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_invert_the_frequency_metrics() {
        assert!((rocof_bound(80.0, 0.125).unwrap() - 320.0).abs() < 1e-12);
        assert_eq!(rocof_bound(0.0, 0.3).unwrap(), 0.0);
        assert!((qss_bound(80.0, 0.025).unwrap() - 3200.0).abs() < 1e-9);
        assert_eq!(qss_bound(0.0, 0.1).unwrap(), 0.0);
        assert!(rocof_bound(1.0, 0.0).is_err());
        assert!(qss_bound(1.0, -1.0).is_err());
    }
}
