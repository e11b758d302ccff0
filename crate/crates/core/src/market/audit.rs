use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{nadir, stage_model, Stage1Mode, StageParams};
use crate::market::{ClearingSolution, MarketError};
use crate::scenario::SystemScenario;
use crate::security::CONSERVATIVE_TOLERANCE_HZ;

/// Oracle horizon and step, s.
const ORACLE_HORIZON_S: f64 = 30.0;
const ORACLE_STEP_S: f64 = 1e-3;

/// Frequency metrics of one cleared period. Deviations are magnitudes in Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodAudit {
    pub period: usize,
    pub delta_d: f64,
    pub rocof: f64,
    /// Closed-form nadir.
    pub nadir: f64,
    pub t_nadir: f64,
    /// Nadir of the numerical reference.
    pub nadir_ode: f64,
    pub qss: f64,
    pub rocof_ok: bool,
    pub nadir_ok: bool,
    pub qss_ok: bool,
}

impl PeriodAudit {
    pub fn passes(&self) -> bool {
        self.rocof_ok && self.nadir_ok && self.qss_ok
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyAudit {
    pub periods: Vec<PeriodAudit>,
    /// Periods whose true nadir is deeper than the limit by more than the
    /// conservativeness tolerance.
    pub nadir_violations: Vec<usize>,
}

impl FrequencyAudit {
    pub fn passes(&self) -> bool {
        self.periods.iter().all(PeriodAudit::passes)
    }
}

/// Re-evaluates each period's response with the cleared inertia and droop.
pub fn frequency_audit(sol: &ClearingSolution, s: &SystemScenario) -> Result<FrequencyAudit, MarketError> {
    let b = s.boundaries;
    let periods: Vec<PeriodAudit> = sol
        .mix
        .par_iter()
        .enumerate()
        .map(|(t, m)| {
            if m.delta_d == 0.0 {
                return Ok(PeriodAudit {
                    period: t,
                    delta_d: 0.0,
                    rocof: 0.0,
                    nadir: 0.0,
                    t_nadir: 0.0,
                    nadir_ode: 0.0,
                    qss: 0.0,
                    rocof_ok: true,
                    nadir_ok: true,
                    qss_ok: true,
                });
            }
            let params = StageParams {
                h_gv: m.h_gv,
                h_to: m.h_to,
                k_g: m.k_g,
                k_fm: m.k_fm,
                k_vpp: m.k_vpp,
                t_gv: s.t_gv(),
                delta_d: m.delta_d,
                tau1: s.delays.tau1,
                tau2: s.delays.tau2,
                mode: Stage1Mode::Instant,
            };
            let coeffs = stage_model(&params)?;
            let n = nadir(&coeffs);
            let traj = params
                .frequency_model()?
                .simulate(m.delta_d, ORACLE_HORIZON_S, ORACLE_STEP_S)?;
            let rocof = m.delta_d.abs() / (2.0 * m.h_gv);
            let qss = m.delta_d.abs() / (m.k_g + m.k_fm + m.k_vpp);
            let tol = 1e-9;
            Ok(PeriodAudit {
                period: t,
                delta_d: m.delta_d,
                rocof,
                nadir: -n.value,
                t_nadir: n.t,
                nadir_ode: -traj.nadir,
                qss,
                rocof_ok: rocof <= b.rocof_max_hz_per_s * (1.0 + tol),
                nadir_ok: -n.value <= b.nadir_max_hz + CONSERVATIVE_TOLERANCE_HZ,
                qss_ok: qss <= b.qss_max_hz * (1.0 + tol),
            })
        })
        .collect::<Result<_, MarketError>>()?;
    let nadir_violations = periods.iter().filter(|p| !p.nadir_ok).map(|p| p.period).collect();
    Ok(FrequencyAudit {
        periods,
        nadir_violations,
    })
}
