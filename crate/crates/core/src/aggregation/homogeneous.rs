//! Capacity-weighted aggregation of like DERs and assembly of the full VPP.

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationError;
use crate::dynamics::{FrequencyModel, InertiaBlock};
use crate::models::{kind_tf, DerClass, DerKind, DerUnit, TransferFunction, VppPortfolio};

/// Activation times of the delayed responses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delays {
    /// GFM response delay.
    pub tau1: f64,
    /// Governor response delay.
    pub tau2: f64,
}

impl Default for Delays {
    fn default() -> Self {
        Delays { tau1: 0.5, tau2: 1.5 }
    }
}

impl Delays {
    /// Activation time of a DER class's droop branch.
    pub fn of(&self, class: DerClass) -> f64 {
        match class {
            DerClass::SmallSg => self.tau2,
            DerClass::Gfm => self.tau1,
            DerClass::EvCluster | DerClass::FlexibleLoad => 0.0,
        }
    }
}

/// Inertia split `(H_VPPG, H_VPPR)`: small-SG inertia responds at once, GFM
/// inertia after the GFM delay.
pub fn aggregate_inertia(portfolio: &VppPortfolio) -> (f64, f64) {
    let sum = |class| {
        portfolio
            .units_of(class)
            .map(|(share, u)| share * u.kind.inertia())
            .sum::<f64>()
    };
    (sum(DerClass::SmallSg), sum(DerClass::Gfm))
}

/// One equivalent unit standing in for all units of a class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousEquivalent {
    pub class: DerClass,
    /// Equivalent droop `sum K_m k`, MW/Hz.
    pub droop: f64,
    /// Equivalent inertia `sum K_m H`, MW·s/Hz.
    pub inertia: f64,
    /// Canonical-form parameters carrying the weighted lags. Gains and
    /// inertia are already share-weighted.
    pub kind: DerKind,
}

impl HomogeneousEquivalent {
    pub fn transfer_function(&self, delays: &Delays) -> Result<TransferFunction<f64>, AggregationError> {
        Ok(kind_tf(&self.kind, delays.tau1)?.with_delay(delays.of(self.class))?)
    }
}

/// Aggregates `(capacity share, unit)` pairs of a single class.
///
/// Gains add after share weighting; every lag parameter becomes the average
/// weighted by each unit's share of the equivalent gain.
pub fn aggregate_homogeneous(units: &[(f64, &DerUnit)]) -> Result<HomogeneousEquivalent, AggregationError> {
    let first = units.first().ok_or(AggregationError::EmptyGroup)?;
    let class = first.1.kind.class();
    if let Some((_, u)) = units.iter().find(|(_, u)| u.kind.class() != class) {
        return Err(AggregationError::MixedKinds {
            expected: class,
            found: u.kind.class(),
            unit: u.name.clone(),
        });
    }
    for (_, u) in units {
        u.validate()?;
    }
    let kappa: Vec<f64> = units
        .iter()
        .map(|(share, u)| {
            share
                * match u.kind {
                    DerKind::SmallSg { k, .. } => k,
                    _ => u.kind.droop(),
                }
        })
        .collect();
    let k: f64 = kappa.iter().sum();
    if !(k > 0.0) {
        return Err(AggregationError::ZeroDroop(class));
    }
    let lam: Vec<f64> = kappa.iter().map(|c| c / k).collect();
    let avg =
        |get: &dyn Fn(&DerKind) -> f64| -> f64 { units.iter().zip(&lam).map(|((_, u), l)| l * get(&u.kind)).sum() };
    let share_sum = |get: &dyn Fn(&DerKind) -> f64| -> f64 { units.iter().map(|(s, u)| s * get(&u.kind)).sum() };
    let inertia = share_sum(&|d| d.inertia());
    macro_rules! field {
        ($variant:ident, $f:ident) => {
            &|d: &DerKind| match *d {
                DerKind::$variant { $f, .. } => $f,
                _ => unreachable!(),
            }
        };
    }
    let kind = match class {
        DerClass::SmallSg => DerKind::SmallSg {
            h: inertia,
            k,
            t_g: avg(field!(SmallSg, t_g)),
            t_r: avg(field!(SmallSg, t_r)),
            t_c: avg(field!(SmallSg, t_c)),
            f_h: avg(field!(SmallSg, f_h)),
            ramp_mw_per_h: units
                .iter()
                .map(|(_, u)| match u.kind {
                    DerKind::SmallSg { ramp_mw_per_h, .. } => ramp_mw_per_h,
                    _ => 0.0,
                })
                .sum(),
            d_g: share_sum(field!(SmallSg, d_g)),
        },
        DerClass::Gfm => DerKind::Gfm {
            h: inertia,
            k,
            t_fm: avg(field!(Gfm, t_fm)),
        },
        DerClass::EvCluster => DerKind::EvCluster {
            k,
            t_ev: avg(field!(EvCluster, t_ev)),
        },
        DerClass::FlexibleLoad => DerKind::FlexibleLoad {
            k,
            t_fl: avg(field!(FlexibleLoad, t_fl)),
            c: 1.0,
            t_a: avg(field!(FlexibleLoad, t_a)),
            phi_a: 1.0,
        },
    };
    Ok(HomogeneousEquivalent {
        class,
        droop: kind.droop(),
        inertia,
        kind,
    })
}

/// Full-order VPP: one equivalent branch per DER class in parallel around
/// the VPP inertia.
#[derive(Clone, Debug, PartialEq)]
pub struct VppFullModel {
    pub name: String,
    pub h_vppg: f64,
    pub h_vppr: f64,
    pub delays: Delays,
    pub groups: Vec<HomogeneousEquivalent>,
    pub branches: Vec<TransferFunction<f64>>,
}

impl VppFullModel {
    pub fn total_droop(&self) -> f64 {
        self.branches.iter().map(|b| b.dc_gain()).sum()
    }

    /// The VPP inside a host system, ready for the numerical oracle.
    pub fn in_host(&self, host: &HostSystem) -> FrequencyModel<f64> {
        let mut m = host.frequency_model(self.h_vppg, self.h_vppr, &self.delays);
        m.branches.extend(self.branches.iter().cloned());
        m
    }
}

pub fn assemble_heterogeneous(portfolio: &VppPortfolio, delays: &Delays) -> Result<VppFullModel, AggregationError> {
    portfolio.validate()?;
    let (h_vppg, h_vppr) = aggregate_inertia(portfolio);
    let mut groups = Vec::new();
    let mut branches = Vec::new();
    for class in DerClass::ALL {
        let units: Vec<_> = portfolio.units_of(class).collect();
        if units.is_empty() {
            continue;
        }
        match aggregate_homogeneous(&units) {
            Ok(eq) => {
                branches.push(eq.transfer_function(delays)?);
                groups.push(eq);
            }
            // droop-free group (e.g. inertia-only GFM) adds no branch
            Err(AggregationError::ZeroDroop(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if branches.is_empty() && h_vppg + h_vppr <= 0.0 {
        return Err(AggregationError::NoResponse(portfolio.name.clone()));
    }
    Ok(VppFullModel {
        name: portfolio.name.clone(),
        h_vppg,
        h_vppr,
        delays: *delays,
        groups,
        branches,
    })
}

/// The surrounding grid a VPP is fitted in: synchronous inertia and governors
/// plus grid-forming equipment. Without it a lone VPP has too little inertia
/// for the nadir to be meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HostSystem {
    /// Synchronous inertia, online from the disturbance, MW·s/Hz.
    pub h_sync: f64,
    /// Grid-forming inertia, online after the GFM delay, MW·s/Hz.
    #[serde(default)]
    pub h_gfm: f64,
    /// Grid-forming droop, MW/Hz.
    #[serde(default)]
    pub k_gfm: f64,
    /// Governor droop behind `t_gov`, MW/Hz.
    pub k_gov: f64,
    pub t_gov: f64,
}

impl HostSystem {
    pub fn total_droop(&self) -> f64 {
        self.k_gfm + self.k_gov
    }

    pub(crate) fn frequency_model(&self, h_vppg: f64, h_vppr: f64, delays: &Delays) -> FrequencyModel<f64> {
        let mut inertia = vec![InertiaBlock {
            h: self.h_sync + h_vppg,
            active_from: 0.0,
        }];
        if self.h_gfm + h_vppr > 0.0 {
            inertia.push(InertiaBlock {
                h: self.h_gfm + h_vppr,
                active_from: delays.tau1,
            });
        }
        let mut branches = Vec::new();
        if self.k_gfm > 0.0 {
            branches.push(
                TransferFunction::gain(self.k_gfm)
                    .with_delay(delays.tau1)
                    .expect("nonnegative delay"),
            );
        }
        if self.k_gov > 0.0 {
            branches.push(
                TransferFunction::first_order(self.k_gov, self.t_gov)
                    .expect("validated host")
                    .with_delay(delays.tau2)
                    .expect("nonnegative delay"),
            );
        }
        FrequencyModel { inertia, branches }
    }

    pub fn validate(&self) -> Result<(), AggregationError> {
        let ok = self.h_sync > 0.0
            && self.h_gfm >= 0.0
            && self.k_gfm >= 0.0
            && self.k_gov >= 0.0
            && self.t_gov > 0.0
            && [self.h_sync, self.h_gfm, self.k_gfm, self.k_gov, self.t_gov]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(AggregationError::InvalidHost)
        }
    }
}
