use serde::{Deserialize, Serialize};

use crate::market::{ClearingSolution, OfferBook, PriceSchedule};
use crate::scenario::SystemScenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderClass {
    Sg,
    Reg,
    Ess,
    Vpp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Service {
    Energy,
    Inertia,
    Droop,
}

/// One provider, period and service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettlementLine {
    pub class: ProviderClass,
    pub provider: String,
    pub period: usize,
    pub service: Service,
    /// Energy in MWh, inertia in MW·s/Hz and droop in MW/Hz, held for the
    /// period.
    pub quantity: f64,
    pub price: f64,
    pub offer: f64,
    pub revenue: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSettlement {
    pub class: ProviderClass,
    pub cost: f64,
    pub revenue: f64,
    pub profit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub lines: Vec<SettlementLine>,
    pub classes: Vec<ClassSettlement>,
    /// Sum of provider costs; equals the clearing objective.
    pub total_cost: f64,
}

/// Pays every cleared quantity its clearing price and charges it its offer.
pub fn settle(s: &SystemScenario, sol: &ClearingSolution, prices: &PriceSchedule, offers: &OfferBook) -> Settlement {
    let dt = s.dt_h;
    let mut lines = Vec::new();
    use ProviderClass::*;
    use Service::*;
    for t in 0..s.periods {
        let rho = &prices.energy[t];
        for (i, g) in s.sgs.iter().enumerate() {
            let x = sol.commitment.sg[t][i];
            lines.push(line(
                Sg,
                &g.name,
                t,
                Energy,
                sol.p_sg[t][i],
                rho[g.bus - 1],
                offers.sg_energy[t][i],
                dt,
            ));
            lines.push(line(Sg, &g.name, t, Inertia, x * g.h, prices.sg_inertia[t][i], 0.0, dt));
            lines.push(line(Sg, &g.name, t, Droop, x * g.k, prices.sg_droop[t][i], 0.0, dt));
        }
        for (j, r) in s.regs.iter().enumerate() {
            lines.push(line(
                Reg,
                &r.name,
                t,
                Energy,
                sol.p_reg[t][j],
                rho[r.bus - 1],
                offers.reg_energy[t][j],
                dt,
            ));
            lines.push(line(
                Reg,
                &r.name,
                t,
                Inertia,
                sol.h_reg[t][j],
                prices.fm_inertia[t],
                offers.reg_inertia[t][j],
                dt,
            ));
            lines.push(line(
                Reg,
                &r.name,
                t,
                Droop,
                sol.k_reg[t][j],
                prices.fm_droop[t],
                offers.reg_droop[t][j],
                dt,
            ));
        }
        for (k, e) in s.ess.iter().enumerate() {
            let (dis, ch) = (sol.ess_discharge[t][k], sol.ess_charge[t][k]);
            let price = rho[e.bus - 1];
            // charging is bought at the nodal price and carries no offer
            lines.push(SettlementLine {
                class: Ess,
                provider: e.name.clone(),
                period: t,
                service: Energy,
                quantity: dis - ch,
                price,
                offer: offers.ess_energy[t][k],
                revenue: price * (dis - ch) * dt,
                cost: offers.ess_energy[t][k] * dis * dt,
            });
            lines.push(line(
                Ess,
                &e.name,
                t,
                Inertia,
                sol.h_ess[t][k],
                prices.fm_inertia[t],
                offers.ess_inertia[t][k],
                dt,
            ));
            lines.push(line(
                Ess,
                &e.name,
                t,
                Droop,
                sol.k_ess[t][k],
                prices.fm_droop[t],
                offers.ess_droop[t][k],
                dt,
            ));
        }
        for (l, v) in s.vpps.iter().enumerate() {
            let price = rho[v.bus - 1];
            let (pg, pr) = (sol.p_vppg[t][l], sol.p_vppr[t][l]);
            let (ag, ar) = (offers.vpp_energy_sg[t][l], offers.vpp_energy_other[t][l]);
            lines.push(SettlementLine {
                class: Vpp,
                provider: v.name.clone(),
                period: t,
                service: Energy,
                quantity: pg + pr,
                price,
                offer: if pg + pr > 0.0 {
                    (ag * pg + ar * pr) / (pg + pr)
                } else {
                    ar
                },
                revenue: price * (pg + pr) * dt,
                cost: (ag * pg + ar * pr) * dt,
            });
            let (hg, hr) = (sol.h_vppg[t][l], sol.h_vppr[t][l]);
            let (pg_in, pr_in) = (prices.vpp_inertia[t][l], prices.fm_inertia[t]);
            let beta = offers.vpp_inertia[t][l];
            lines.push(SettlementLine {
                class: Vpp,
                provider: v.name.clone(),
                period: t,
                service: Inertia,
                quantity: hg + hr,
                price: if hg + hr > 0.0 {
                    (pg_in * hg + pr_in * hr) / (hg + hr)
                } else {
                    pr_in
                },
                offer: if hg + hr > 0.0 { beta * hr / (hg + hr) } else { beta },
                revenue: (pg_in * hg + pr_in * hr) * dt,
                cost: beta * hr * dt,
            });
            lines.push(line(
                Vpp,
                &v.name,
                t,
                Droop,
                sol.k_vpp[t][l],
                prices.vpp_droop[t][l],
                offers.vpp_droop[t][l],
                dt,
            ));
        }
    }
    let classes = [Sg, Reg, Ess, Vpp]
        .into_iter()
        .map(|class| {
            let (cost, revenue) = lines
                .iter()
                .filter(|l| l.class == class)
                .fold((0.0, 0.0), |(c, r), l| (c + l.cost, r + l.revenue));
            ClassSettlement {
                class,
                cost,
                revenue,
                profit: revenue - cost,
            }
        })
        .collect::<Vec<_>>();
    let total_cost = classes.iter().map(|c| c.cost).sum();
    Settlement {
        lines,
        classes,
        total_cost,
    }
}

#[allow(clippy::too_many_arguments)]
fn line(
    class: ProviderClass,
    provider: &str,
    period: usize,
    service: Service,
    quantity: f64,
    price: f64,
    offer: f64,
    dt: f64,
) -> SettlementLine {
    SettlementLine {
        class,
        provider: provider.to_string(),
        period,
        service,
        quantity,
        price,
        offer,
        revenue: price * quantity * dt,
        cost: offer * quantity * dt,
    }
}
