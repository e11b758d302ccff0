use log::{debug, info};
use serde::{Deserialize, Serialize};
use vppfr_lp::{
    complementary_slackness, duality_gap, primal_residual, solve_lp, solve_milp_with, LpSolution, MilpOptions,
    MilpReport, Status,
};

use crate::market::problem::{build, Dropped};
use crate::market::{ClearingMode, ClearingProblem, Commitment, MarketError, OfferBook};
use crate::scenario::SystemScenario;
use crate::security::PwlNadirSurface;

/// Aggregate inertia and droop cleared in one period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodMix {
    pub delta_d: f64,
    /// Non-delayed inertia of committed SGs and VPP small-SG blocks.
    pub h_gv: f64,
    pub h_to: f64,
    pub k_g: f64,
    /// Droop of GFM plants and storage.
    pub k_fm: f64,
    pub k_vpp: f64,
}

/// Cleared quantities `[period][unit]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearingSolution {
    pub p_sg: Vec<Vec<f64>>,
    pub p_reg: Vec<Vec<f64>>,
    pub ess_discharge: Vec<Vec<f64>>,
    pub ess_charge: Vec<Vec<f64>>,
    /// Stored energy at the end of each period, MWh.
    pub ess_soc: Vec<Vec<f64>>,
    pub p_vppg: Vec<Vec<f64>>,
    pub p_vppr: Vec<Vec<f64>>,
    pub h_reg: Vec<Vec<f64>>,
    pub h_ess: Vec<Vec<f64>>,
    pub h_vppr: Vec<Vec<f64>>,
    pub k_reg: Vec<Vec<f64>>,
    pub k_ess: Vec<Vec<f64>>,
    pub k_vpp: Vec<Vec<f64>>,
    /// Non-delayed inertia of each VPP, `x_l H_VPPG`.
    pub h_vppg: Vec<Vec<f64>>,
    /// Bus angles, rad.
    pub theta: Vec<Vec<f64>>,
    pub commitment: Commitment,
    pub startup: Vec<Vec<bool>>,
    pub shutdown: Vec<Vec<bool>>,
    pub mix: Vec<PeriodMix>,
    /// Total social cost of the final dispatch, $.
    pub objective: f64,
}

/// Prices per period in $ per unit per hour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSchedule {
    /// `[period][bus]`, $/MWh.
    pub energy: Vec<Vec<f64>>,
    pub sg_inertia: Vec<Vec<f64>>,
    pub sg_droop: Vec<Vec<f64>>,
    /// Non-delayed VPP inertia.
    pub vpp_inertia: Vec<Vec<f64>>,
    pub vpp_droop: Vec<Vec<f64>>,
    /// GFM inertia, also paid to delayed VPP inertia.
    pub fm_inertia: Vec<f64>,
    pub fm_droop: Vec<f64>,
    /// Raw multipliers: RoCoF and QSS rows of the continuous SCUC, QSS row
    /// of the SCED, nadir planes of both.
    pub lambda_in: Vec<f64>,
    pub lambda_dr_cscuc: Vec<f64>,
    pub lambda_dr_sced: Vec<f64>,
    pub lambda_ipfr_cscuc: Vec<Vec<f64>>,
    pub lambda_ipfr_sced: Vec<Vec<f64>>,
}

/// Optimality certificates of one LP stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpCheck {
    pub duality_gap: f64,
    pub complementary_slackness: f64,
    pub primal_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub scuc_objective: f64,
    pub relaxation_objective: f64,
    pub continuous_objective: f64,
    pub sced_objective: f64,
    pub milp_nodes: usize,
    pub milp_gap: f64,
    pub milp_node_limit_hit: bool,
    pub continuous_check: LpCheck,
    pub sced_check: LpCheck,
}

#[derive(Clone, Debug)]
pub struct ClearingOutcome {
    pub solution: ClearingSolution,
    pub prices: PriceSchedule,
    pub report: PipelineReport,
    pub offers: OfferBook,
}

pub(crate) fn lp_check(p: &ClearingProblem, sol: &LpSolution) -> LpCheck {
    LpCheck {
        duality_gap: duality_gap(&p.lp, sol),
        complementary_slackness: complementary_slackness(&p.lp, sol),
        primal_residual: primal_residual(&p.lp, &sol.x),
        iterations: sol.iterations,
    }
}

/// Relative optimality gap at which the SCUC search stops.
pub const SCUC_REL_GAP: f64 = 1e-3;
/// Node budget of the SCUC search. Deterministic, unlike a wall-clock limit.
pub const SCUC_NODE_LIMIT: usize = 2_000;

/// Solves one clearing problem; MILPs go through branch-and-bound.
pub fn solve_clearing(p: &ClearingProblem) -> Result<LpSolution, MarketError> {
    if p.lp.is_mip() {
        let opts = MilpOptions {
            rel_gap: SCUC_REL_GAP,
            node_limit: SCUC_NODE_LIMIT,
            ..MilpOptions::default()
        };
        Ok(solve_milp_with(&p.lp, &opts)?)
    } else {
        Ok(solve_lp(&p.lp)?)
    }
}

/// Names the first period that cannot be cleared on its own and the security
/// family whose removal makes it clear.
fn diagnose(
    s: &SystemScenario,
    offers: &OfferBook,
    surfaces: &[PwlNadirSurface],
    mode: ClearingMode,
    fixed: Option<&Commitment>,
    stage: &'static str,
) -> MarketError {
    let relaxed = if mode == ClearingMode::Scuc {
        ClearingMode::ContinuousScuc
    } else {
        mode
    };
    let feasible = |t: usize, d: Dropped| -> Result<bool, MarketError> {
        let p = build(s, offers, surfaces, relaxed, fixed, t..t + 1, d)?;
        Ok(solve_lp(&p.lp)?.status == Status::Optimal)
    };
    for t in 0..s.periods {
        match feasible(t, Dropped::default()) {
            Ok(true) => continue,
            Ok(false) => {}
            Err(e) => return e,
        }
        let families = [
            (
                "rocof",
                Dropped {
                    rocof: true,
                    ..Dropped::default()
                },
            ),
            (
                "qss",
                Dropped {
                    qss: true,
                    ..Dropped::default()
                },
            ),
            (
                "nadir",
                Dropped {
                    nadir: true,
                    ..Dropped::default()
                },
            ),
            (
                "frequency security",
                Dropped {
                    rocof: true,
                    qss: true,
                    nadir: true,
                },
            ),
        ];
        let mut family = "power balance and unit limits".to_string();
        for (name, d) in families {
            if let Ok(true) = feasible(t, d) {
                family = name.to_string();
                break;
            }
        }
        return MarketError::Infeasible {
            stage,
            period: Some(t),
            family,
        };
    }
    MarketError::Infeasible {
        stage,
        period: None,
        family: "intertemporal (ramp, commitment or storage)".into(),
    }
}

fn solve_stage(
    s: &SystemScenario,
    offers: &OfferBook,
    surfaces: &[PwlNadirSurface],
    mode: ClearingMode,
    fixed: Option<&Commitment>,
    stage: &'static str,
) -> Result<(ClearingProblem, LpSolution), MarketError> {
    let p = crate::market::build_clearing_problem(s, offers, surfaces, mode, fixed)?;
    let t0 = std::time::Instant::now();
    let sol = solve_clearing(&p)?;
    debug!(
        "{stage}: {} rows, {} columns, {:?} in {:.2?}",
        p.lp.num_rows(),
        p.lp.num_vars(),
        sol.status,
        t0.elapsed()
    );
    match sol.status {
        Status::Optimal => Ok((p, sol)),
        Status::Infeasible => Err(diagnose(s, offers, surfaces, mode, fixed, stage)),
        Status::Unbounded => Err(MarketError::Unsolved {
            stage,
            status: "unbounded",
        }),
    }
}

fn commitment_of(p: &ClearingProblem, x: &[f64]) -> Commitment {
    Commitment {
        sg: p
            .vars
            .iter()
            .map(|v| v.sg.iter().map(|g| x[g.x.0].round()).collect())
            .collect(),
        vpp: p
            .vars
            .iter()
            .map(|v| v.vpp.iter().map(|g| x[g.x.0].clamp(0.0, 1.0)).collect())
            .collect(),
    }
}

fn table<T>(rows: &[T], f: impl Fn(&T) -> Vec<f64>) -> Vec<Vec<f64>> {
    rows.iter().map(f).collect()
}

fn extract(s: &SystemScenario, p: &ClearingProblem, sol: &LpSolution, commitment: Commitment) -> ClearingSolution {
    let x = &sol.x;
    let v = &p.vars;
    let caps = &p.capabilities;
    let h_vppg = table(v, |pv| {
        pv.vpp.iter().zip(caps).map(|(g, c)| x[g.x.0] * c.h_vppg).collect()
    });
    let mut startup = Vec::new();
    let mut shutdown = Vec::new();
    for t in 0..s.periods {
        let (su, sd): (Vec<bool>, Vec<bool>) = s
            .sgs
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let before = if t == 0 {
                    f64::from(u8::from(g.initially_on))
                } else {
                    commitment.sg[t - 1][i]
                };
                let now = commitment.sg[t][i];
                (now > before + 0.5, now < before - 0.5)
            })
            .unzip();
        startup.push(su);
        shutdown.push(sd);
    }
    let mix = (0..s.periods)
        .map(|t| {
            let pv = &v[t];
            let h_gv =
                s.sgs.iter().zip(&commitment.sg[t]).map(|(g, x)| x * g.h).sum::<f64>() + h_vppg[t].iter().sum::<f64>();
            let h_to = h_gv
                + pv.reg.iter().map(|r| x[r.h.0]).sum::<f64>()
                + pv.ess.iter().map(|r| x[r.h.0]).sum::<f64>()
                + pv.vpp.iter().map(|r| x[r.h.0]).sum::<f64>();
            PeriodMix {
                delta_d: s.delta_d(t),
                h_gv,
                h_to,
                k_g: s.sgs.iter().zip(&commitment.sg[t]).map(|(g, x)| x * g.k).sum(),
                k_fm: pv.reg.iter().map(|r| x[r.k.0]).sum::<f64>() + pv.ess.iter().map(|r| x[r.k.0]).sum::<f64>(),
                k_vpp: pv.vpp.iter().map(|r| x[r.k.0]).sum(),
            }
        })
        .collect();
    ClearingSolution {
        p_sg: table(v, |pv| pv.sg.iter().map(|g| x[g.p.0]).collect()),
        p_reg: table(v, |pv| pv.reg.iter().map(|g| x[g.p.0]).collect()),
        ess_discharge: table(v, |pv| pv.ess.iter().map(|g| x[g.dis.0]).collect()),
        ess_charge: table(v, |pv| pv.ess.iter().map(|g| x[g.ch.0]).collect()),
        ess_soc: table(v, |pv| pv.ess.iter().map(|g| x[g.soc.0]).collect()),
        p_vppg: table(v, |pv| pv.vpp.iter().map(|g| x[g.pg.0]).collect()),
        p_vppr: table(v, |pv| pv.vpp.iter().map(|g| x[g.pr.0]).collect()),
        h_reg: table(v, |pv| pv.reg.iter().map(|g| x[g.h.0]).collect()),
        h_ess: table(v, |pv| pv.ess.iter().map(|g| x[g.h.0]).collect()),
        h_vppr: table(v, |pv| pv.vpp.iter().map(|g| x[g.h.0]).collect()),
        k_reg: table(v, |pv| pv.reg.iter().map(|g| x[g.k.0]).collect()),
        k_ess: table(v, |pv| pv.ess.iter().map(|g| x[g.k.0]).collect()),
        k_vpp: table(v, |pv| pv.vpp.iter().map(|g| x[g.k.0]).collect()),
        h_vppg,
        theta: table(v, |pv| pv.theta.iter().map(|g| x[g.0]).collect()),
        commitment,
        startup,
        shutdown,
        mix,
        objective: sol.objective,
    }
}

/// Plane-weighted sums `sum_hp kappa_hp lambda_hp` of one period.
fn weighted(surface: &PwlNadirSurface, lambdas: &[f64], kappa: fn(&crate::security::NadirPlane) -> f64) -> f64 {
    surface.planes.iter().zip(lambdas).map(|(p, l)| kappa(p) * l).sum()
}

fn prices(
    s: &SystemScenario,
    surfaces: &[PwlNadirSurface],
    cscuc: (&ClearingProblem, &LpSolution),
    sced: (&ClearingProblem, &LpSolution),
    commitment: &Commitment,
) -> PriceSchedule {
    let dt = s.dt_h;
    let dual = |sol: &LpSolution, r: Option<vppfr_lp::RowId>| r.map_or(0.0, |r| sol.duals[r.0] / dt);
    let (cp, cs) = cscuc;
    let (sp, ss) = sced;
    let mut out = PriceSchedule {
        energy: Vec::new(),
        sg_inertia: Vec::new(),
        sg_droop: Vec::new(),
        vpp_inertia: Vec::new(),
        vpp_droop: Vec::new(),
        fm_inertia: Vec::new(),
        fm_droop: Vec::new(),
        lambda_in: Vec::new(),
        lambda_dr_cscuc: Vec::new(),
        lambda_dr_sced: Vec::new(),
        lambda_ipfr_cscuc: Vec::new(),
        lambda_ipfr_sced: Vec::new(),
    };
    for t in 0..s.periods {
        let (crow, srow) = (&cp.rows[t], &sp.rows[t]);
        let lambda_in = dual(cs, crow.rocof);
        let dr_c = dual(cs, crow.qss);
        let dr_s = dual(ss, srow.qss);
        let ipfr_c: Vec<f64> = crow.nadir.iter().map(|&r| dual(cs, Some(r))).collect();
        let ipfr_s: Vec<f64> = srow.nadir.iter().map(|&r| dual(ss, Some(r))).collect();
        let surface = &surfaces[t];
        let in_c = lambda_in + weighted(surface, &ipfr_c, |p| p.kappa_h_to);
        let dr_g = dr_c + weighted(surface, &ipfr_c, |p| p.kappa_k_g);
        out.sg_inertia.push(commitment.sg[t].iter().map(|x| x * in_c).collect());
        out.sg_droop.push(commitment.sg[t].iter().map(|x| x * dr_g).collect());
        out.vpp_inertia.push(vec![in_c; s.vpps.len()]);
        out.fm_inertia.push(weighted(surface, &ipfr_s, |p| p.kappa_h_to));
        out.fm_droop.push(dr_s + weighted(surface, &ipfr_s, |p| p.kappa_k_fm));
        out.vpp_droop
            .push(vec![dr_s + weighted(surface, &ipfr_s, |p| p.kappa_k_vpp); s.vpps.len()]);
        out.energy
            .push(srow.balance.iter().map(|&r| dual(ss, Some(r))).collect());
        out.lambda_in.push(lambda_in);
        out.lambda_dr_cscuc.push(dr_c);
        out.lambda_dr_sced.push(dr_s);
        out.lambda_ipfr_cscuc.push(ipfr_c);
        out.lambda_ipfr_sced.push(ipfr_s);
    }
    out
}

/// SCUC for the commitment, continuous SCUC for the inertia prices, SCED
/// with the commitment fixed for dispatch, energy and droop prices.
pub fn solve_pipeline(
    s: &SystemScenario,
    offers: &OfferBook,
    surfaces: &[PwlNadirSurface],
) -> Result<ClearingOutcome, MarketError> {
    let t0 = std::time::Instant::now();
    let (scuc, scuc_sol) = solve_stage(s, offers, surfaces, ClearingMode::Scuc, None, "scuc")?;
    let milp = scuc_sol.milp.clone().unwrap_or(MilpReport {
        nodes: 0,
        best_bound: scuc_sol.objective,
        gap: 0.0,
        node_limit_hit: false,
        root_bound: scuc_sol.objective,
    });
    if milp.node_limit_hit {
        log::warn!("SCUC stopped at the node limit with gap {:.3e}", milp.gap);
    }
    let commitment = commitment_of(&scuc, &scuc_sol.x);
    let (cscuc, cscuc_sol) = solve_stage(
        s,
        offers,
        surfaces,
        ClearingMode::ContinuousScuc,
        None,
        "continuous_scuc",
    )?;
    let (sced, sced_sol) = solve_stage(s, offers, surfaces, ClearingMode::Sced, Some(&commitment), "sced")?;
    let prices = prices(s, surfaces, (&cscuc, &cscuc_sol), (&sced, &sced_sol), &commitment);
    let solution = extract(s, &sced, &sced_sol, commitment);
    let report = PipelineReport {
        scuc_objective: scuc_sol.objective,
        relaxation_objective: milp.root_bound,
        continuous_objective: cscuc_sol.objective,
        sced_objective: sced_sol.objective,
        milp_nodes: milp.nodes,
        milp_gap: milp.gap,
        milp_node_limit_hit: milp.node_limit_hit,
        continuous_check: lp_check(&cscuc, &cscuc_sol),
        sced_check: lp_check(&sced, &sced_sol),
    };
    info!(
        "cleared {} periods: cost {:.2} $, {} B&B nodes, {:.2?}",
        s.periods,
        solution.objective,
        milp.nodes,
        t0.elapsed()
    );
    Ok(ClearingOutcome {
        solution,
        prices,
        report,
        offers: offers.clone(),
    })
}
