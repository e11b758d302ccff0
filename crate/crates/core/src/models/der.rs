//! Distributed energy resources and their primary-frequency-response branches.

use serde::{Deserialize, Serialize};

use crate::models::tf::TransferFunction;
use crate::models::ModelError;

/// One DER inside a VPP. Inertia and droop are on the VPP system base and get
/// weighted by the unit's capacity share during aggregation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerUnit {
    pub name: String,
    /// Rated power S_v in MW.
    pub rated_mw: f64,
    #[serde(flatten)]
    pub kind: DerKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerKind {
    /// Reheat-governed small synchronous generator.
    SmallSg {
        h: f64,
        k: f64,
        t_g: f64,
        t_r: f64,
        t_c: f64,
        f_h: f64,
        ramp_mw_per_h: f64,
        #[serde(default)]
        d_g: f64,
    },
    /// Grid-forming inverter equipment; responds after the GFM delay.
    Gfm {
        h: f64,
        k: f64,
        t_fm: f64,
    },
    EvCluster {
        k: f64,
        t_ev: f64,
    },
    /// Thermostatic flexible load: gain `k * phi_a * c` behind two lags.
    FlexibleLoad {
        k: f64,
        t_fl: f64,
        c: f64,
        t_a: f64,
        phi_a: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerClass {
    SmallSg,
    Gfm,
    EvCluster,
    FlexibleLoad,
}

impl DerClass {
    pub const ALL: [DerClass; 4] = [
        DerClass::SmallSg,
        DerClass::Gfm,
        DerClass::EvCluster,
        DerClass::FlexibleLoad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DerClass::SmallSg => "small_sg",
            DerClass::Gfm => "gfm",
            DerClass::EvCluster => "ev_cluster",
            DerClass::FlexibleLoad => "flexible_load",
        }
    }
}

impl DerKind {
    pub fn class(&self) -> DerClass {
        match self {
            DerKind::SmallSg { .. } => DerClass::SmallSg,
            DerKind::Gfm { .. } => DerClass::Gfm,
            DerKind::EvCluster { .. } => DerClass::EvCluster,
            DerKind::FlexibleLoad { .. } => DerClass::FlexibleLoad,
        }
    }

    /// Steady-state MW/Hz of the branch, i.e. its DC gain.
    pub fn droop(&self) -> f64 {
        match *self {
            DerKind::SmallSg { k, d_g, .. } => k + d_g,
            DerKind::Gfm { k, .. } | DerKind::EvCluster { k, .. } => k,
            DerKind::FlexibleLoad { k, c, phi_a, .. } => k * c * phi_a,
        }
    }

    pub fn inertia(&self) -> f64 {
        match *self {
            DerKind::SmallSg { h, .. } | DerKind::Gfm { h, .. } => h,
            _ => 0.0,
        }
    }

    fn time_constants(&self) -> Vec<(&'static str, f64)> {
        match *self {
            DerKind::SmallSg { t_g, t_r, t_c, .. } => vec![("t_g", t_g), ("t_r", t_r), ("t_c", t_c)],
            DerKind::Gfm { t_fm, .. } => vec![("t_fm", t_fm)],
            DerKind::EvCluster { t_ev, .. } => vec![("t_ev", t_ev)],
            DerKind::FlexibleLoad { t_fl, t_a, .. } => vec![("t_fl", t_fl), ("t_a", t_a)],
        }
    }

    fn nonnegatives(&self) -> Vec<(&'static str, f64)> {
        match *self {
            DerKind::SmallSg {
                h,
                k,
                f_h,
                ramp_mw_per_h,
                d_g,
                ..
            } => vec![
                ("h", h),
                ("k", k),
                ("f_h", f_h),
                ("ramp_mw_per_h", ramp_mw_per_h),
                ("d_g", d_g),
            ],
            DerKind::Gfm { h, k, .. } => vec![("h", h), ("k", k)],
            DerKind::EvCluster { k, .. } => vec![("k", k)],
            DerKind::FlexibleLoad { k, c, phi_a, .. } => vec![("k", k), ("c", c), ("phi_a", phi_a)],
        }
    }
}

impl DerUnit {
    /// Checks the unit's type invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        let field = |f: &str| format!("{}.{}", self.name, f);
        if !(self.rated_mw.is_finite() && self.rated_mw > 0.0) {
            return Err(ModelError::InvalidParameter {
                field: field("rated_mw"),
                value: self.rated_mw,
                reason: "must be positive",
            });
        }
        for (name, v) in self.kind.nonnegatives() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    field: field(name),
                    value: v,
                    reason: "must be finite and nonnegative",
                });
            }
        }
        for (name, v) in self.kind.time_constants() {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameter {
                    field: field(name),
                    value: v,
                    reason: "time constant must be positive",
                });
            }
        }
        if let DerKind::SmallSg { f_h, .. } = self.kind {
            if f_h > 1.0 {
                return Err(ModelError::InvalidParameter {
                    field: field("f_h"),
                    value: f_h,
                    reason: "high-pressure fraction must not exceed 1",
                });
            }
        }
        Ok(())
    }
}

/// Feedback branch `dP(s) / df(s)` of one DER (sign handled by the caller).
///
/// GFM branches get `gfm_delay` as their activation time; every other kind
/// responds from the disturbance instant.
pub fn build_der_tf(unit: &DerUnit, gfm_delay: f64) -> Result<TransferFunction<f64>, ModelError> {
    unit.validate()?;
    kind_tf(&unit.kind, gfm_delay)
}

pub(crate) fn kind_tf(kind: &DerKind, gfm_delay: f64) -> Result<TransferFunction<f64>, ModelError> {
    match *kind {
        DerKind::SmallSg {
            k,
            t_g,
            t_r,
            t_c,
            f_h,
            d_g,
            ..
        } => {
            let gov = TransferFunction::new(vec![k, k * f_h * t_r], vec![1.0, t_r], 0.0)?
                .series(&TransferFunction::first_order(1.0, t_g)?)
                .series(&TransferFunction::first_order(1.0, t_c)?);
            if d_g > 0.0 {
                gov.parallel(&TransferFunction::gain(d_g))
            } else {
                Ok(gov)
            }
        }
        DerKind::Gfm { k, t_fm, .. } => TransferFunction::first_order(k, t_fm)?.with_delay(gfm_delay),
        DerKind::EvCluster { k, t_ev } => TransferFunction::first_order(k, t_ev),
        DerKind::FlexibleLoad { k, t_fl, c, t_a, phi_a } => {
            Ok(TransferFunction::first_order(k * phi_a * c, t_fl)?.series(&TransferFunction::first_order(1.0, t_a)?))
        }
    }
}
