use serde::{Deserialize, Serialize};

use crate::models::der::{DerClass, DerKind, DerUnit};
use crate::models::ModelError;

/// Market offer limits of a VPP. Reserve maxima left empty are derived from
/// the aggregated model at clearing time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VppOfferBounds {
    #[serde(default)]
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default)]
    pub p_vppr_in_min: f64,
    #[serde(default)]
    pub p_vppr_in_max: Option<f64>,
    #[serde(default)]
    pub p_df_min: f64,
    #[serde(default)]
    pub p_df_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VppPortfolio {
    pub name: String,
    /// Base power S_sys the unit shares are measured against.
    pub s_sys_mw: f64,
    /// Rated VPP capacity.
    pub rated_mw: f64,
    pub units: Vec<DerUnit>,
    pub offer: VppOfferBounds,
}

impl VppPortfolio {
    pub fn capacity_share(&self, index: usize) -> Result<f64, ModelError> {
        let u = self.units.get(index).ok_or(ModelError::UnitIndex {
            index,
            len: self.units.len(),
        })?;
        if self.s_sys_mw <= 0.0 {
            return Err(ModelError::InvalidParameter {
                field: format!("{}.s_sys_mw", self.name),
                value: self.s_sys_mw,
                reason: "must be positive",
            });
        }
        Ok(u.rated_mw / self.s_sys_mw)
    }

    /// `(share, unit)` pairs for units of one class.
    pub fn units_of(&self, class: DerClass) -> impl Iterator<Item = (f64, &DerUnit)> {
        self.units
            .iter()
            .filter(move |u| u.kind.class() == class)
            .map(|u| (u.rated_mw / self.s_sys_mw, u))
    }

    /// Small-SG capacity as a fraction of the VPP rating.
    pub fn k_g(&self) -> f64 {
        let sg: f64 = self.units_of(DerClass::SmallSg).map(|(_, u)| u.rated_mw).sum();
        if self.rated_mw > 0.0 {
            sg / self.rated_mw
        } else {
            0.0
        }
    }

    /// Combined small-SG ramp limit in MW/h.
    pub fn small_sg_ramp(&self) -> f64 {
        self.units
            .iter()
            .map(|u| match u.kind {
                DerKind::SmallSg { ramp_mw_per_h, .. } => ramp_mw_per_h,
                _ => 0.0,
            })
            .sum()
    }

    pub fn total_unit_mw(&self) -> f64 {
        self.units.iter().map(|u| u.rated_mw).sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field: &str, value: f64, reason: &'static str| ModelError::InvalidParameter {
            field: format!("{}.{field}", self.name),
            value,
            reason,
        };
        if !(self.s_sys_mw > 0.0) {
            return Err(bad("s_sys_mw", self.s_sys_mw, "must be positive"));
        }
        if !(self.rated_mw > 0.0) || self.rated_mw > self.s_sys_mw {
            return Err(bad(
                "rated_mw",
                self.rated_mw,
                "must be positive and not exceed s_sys_mw",
            ));
        }
        for u in &self.units {
            u.validate()?;
        }
        let total = self.total_unit_mw();
        if total > self.rated_mw * (1.0 + 1e-12) {
            return Err(bad("units", total, "unit ratings exceed the VPP rating"));
        }
        let o = &self.offer;
        if !(o.p_min >= 0.0 && o.p_max >= o.p_min) {
            return Err(bad("offer.p_max", o.p_max, "energy offer bounds inconsistent"));
        }
        if o.p_vppr_in_max.is_some_and(|m| m < o.p_vppr_in_min) || o.p_vppr_in_min < 0.0 {
            return Err(bad(
                "offer.p_vppr_in_min",
                o.p_vppr_in_min,
                "inertia reserve bounds inconsistent",
            ));
        }
        if o.p_df_max.is_some_and(|m| m < o.p_df_min) || o.p_df_min < 0.0 {
            return Err(bad("offer.p_df_min", o.p_df_min, "droop reserve bounds inconsistent"));
        }
        Ok(())
    }
}
