use std::ops::Range;

use serde::{Deserialize, Serialize};
use vppfr_lp::{LpProblem, RowId, RowSense, VarId};

use crate::market::{MarketError, OfferBook};
use crate::scenario::{SystemScenario, VppCapability};
use crate::security::PwlNadirSurface;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearingMode {
    /// SG commitment binary.
    Scuc,
    /// SG commitment relaxed to `[0, 1]`; gives the inertia duals.
    ContinuousScuc,
    /// Commitment fixed, commitment rows dropped; gives energy and droop duals.
    Sced,
}

/// Commitment levels `[period][unit]`: 0/1 for SGs, `[0, 1]` for VPP
/// small-SG blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub sg: Vec<Vec<f64>>,
    pub vpp: Vec<Vec<f64>>,
}

/// Security row families that can be switched off when looking for the
/// cause of an infeasibility.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct Dropped {
    pub rocof: bool,
    pub qss: bool,
    pub nadir: bool,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct SgVars {
    pub x: VarId,
    pub p: VarId,
    pub su: Option<VarId>,
    pub sd: Option<VarId>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct RegVars {
    pub p: VarId,
    pub h: VarId,
    pub k: VarId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct EssVars {
    pub dis: VarId,
    pub ch: VarId,
    pub soc: VarId,
    pub h: VarId,
    pub k: VarId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct VppVars {
    pub x: VarId,
    pub pg: VarId,
    pub pr: VarId,
    pub h: VarId,
    pub k: VarId,
}

#[derive(Clone, Debug)]
pub(crate) struct PeriodVars {
    pub sg: Vec<SgVars>,
    pub reg: Vec<RegVars>,
    pub ess: Vec<EssVars>,
    pub vpp: Vec<VppVars>,
    pub theta: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub(crate) struct PeriodRows {
    pub balance: Vec<RowId>,
    pub rocof: Option<RowId>,
    pub qss: Option<RowId>,
    pub nadir: Vec<RowId>,
}

/// A clearing LP/MILP with the handles needed to read it back.
#[derive(Clone, Debug)]
pub struct ClearingProblem {
    pub lp: LpProblem,
    pub mode: ClearingMode,
    pub(crate) periods: Range<usize>,
    pub(crate) vars: Vec<PeriodVars>,
    pub(crate) rows: Vec<PeriodRows>,
    pub(crate) capabilities: Vec<VppCapability>,
}

impl ClearingProblem {
    pub fn periods(&self) -> Range<usize> {
        self.periods.clone()
    }
}

/// Per-period copies of a surface built at a reference disturbance.
pub fn period_surfaces(s: &SystemScenario, reference: &PwlNadirSurface) -> Vec<PwlNadirSurface> {
    (0..s.periods).map(|t| reference.scaled_to(s.delta_d(t))).collect()
}

/// Row count of a full-horizon problem: per period one balance row per bus,
/// the RoCoF and QSS rows, one row per plane, and the unit rows. SGs carry
/// two output rows, two ramp rows after the first period, and in commitment
/// modes a logic row plus a minimum up and a minimum down row when those
/// exceed one hour. REGs carry one capacity row; storage a state-of-charge
/// and a capacity row, plus one terminal row for the horizon; VPPs two
/// small-SG output rows and two ramp rows after the first period.
pub fn expected_row_count(s: &SystemScenario, planes: &[usize], mode: ClearingMode) -> usize {
    let commit = mode != ClearingMode::Sced;
    let mut rows = s.ess.len();
    for (t, &hp) in planes.iter().enumerate().take(s.periods) {
        let later = t > 0;
        rows += s.buses + 2 + hp;
        for g in &s.sgs {
            rows += 2 + if later { 2 } else { 0 };
            if commit {
                rows += 1 + usize::from(g.min_up_h > 1) + usize::from(g.min_down_h > 1);
            }
        }
        rows += s.regs.len() + 2 * s.ess.len();
        rows += s.vpps.len() * (2 + if later { 2 } else { 0 });
    }
    rows
}

pub fn build_clearing_problem(
    s: &SystemScenario,
    offers: &OfferBook,
    surfaces: &[PwlNadirSurface],
    mode: ClearingMode,
    fixed: Option<&Commitment>,
) -> Result<ClearingProblem, MarketError> {
    build(s, offers, surfaces, mode, fixed, 0..s.periods, Dropped::default())
}

fn check_inputs(
    s: &SystemScenario,
    offers: &OfferBook,
    surfaces: &[PwlNadirSurface],
    mode: ClearingMode,
    fixed: Option<&Commitment>,
) -> Result<(), MarketError> {
    offers.validate(s).map_err(MarketError::Offers)?;
    for t in 0..s.periods {
        let surface = surfaces.get(t).ok_or(MarketError::MissingSurface { period: t })?;
        let d = s.delta_d(t);
        if (surface.delta_d - d).abs() > 1e-9 * d.abs().max(1.0) {
            return Err(MarketError::SurfaceDisturbance {
                period: t,
                surface: surface.delta_d,
                period_delta_d: d,
            });
        }
    }
    if mode == ClearingMode::Sced {
        let c = fixed.ok_or(MarketError::MissingCommitment)?;
        let ok = c.sg.len() == s.periods
            && c.vpp.len() == s.periods
            && c.sg.iter().all(|r| r.len() == s.sgs.len())
            && c.vpp.iter().all(|r| r.len() == s.vpps.len());
        if !ok {
            return Err(MarketError::Commitment("shape does not match the scenario".into()));
        }
    }
    Ok(())
}

pub(crate) fn build(
    s: &SystemScenario,
    offers: &OfferBook,
    surfaces: &[PwlNadirSurface],
    mode: ClearingMode,
    fixed: Option<&Commitment>,
    periods: Range<usize>,
    dropped: Dropped,
) -> Result<ClearingProblem, MarketError> {
    check_inputs(s, offers, surfaces, mode, fixed)?;
    let b = &s.boundaries;
    let dt = s.dt_h;
    let commit = mode != ClearingMode::Sced;
    let inertia_mw = 2.0 * b.rocof_max_hz_per_s;
    let caps: Vec<VppCapability> = s.vpps.iter().map(|v| v.capability(&s.delays)).collect();
    let mut lp = LpProblem::new();
    let mut vars: Vec<PeriodVars> = Vec::new();
    let mut rows: Vec<PeriodRows> = Vec::new();
    let mut susceptance = vec![Vec::new(); s.buses];
    for br in &s.branches {
        let y = s.base_mva / br.x;
        susceptance[br.from - 1].push((br.to - 1, y));
        susceptance[br.to - 1].push((br.from - 1, y));
    }

    for t in periods.clone() {
        let first = t == periods.start;
        let prev = if first { None } else { vars.last().cloned() };

        let mut sg = Vec::with_capacity(s.sgs.len());
        for (i, g) in s.sgs.iter().enumerate() {
            let x = match (mode, fixed) {
                (ClearingMode::Sced, Some(c)) => {
                    let v = c.sg[t][i];
                    lp.add_var(format!("x_sg[{t}][{i}]"), v, v, 0.0)?
                }
                _ => {
                    let x = lp.add_var(format!("x_sg[{t}][{i}]"), 0.0, 1.0, 0.0)?;
                    lp.set_integer(x, mode == ClearingMode::Scuc);
                    x
                }
            };
            let p = lp.add_var(format!("p_sg[{t}][{i}]"), 0.0, g.p_max, dt * offers.sg_energy[t][i])?;
            let (su, sd) = if commit {
                (
                    Some(lp.add_var(format!("su_sg[{t}][{i}]"), 0.0, 1.0, 0.0)?),
                    Some(lp.add_var(format!("sd_sg[{t}][{i}]"), 0.0, 1.0, 0.0)?),
                )
            } else {
                (None, None)
            };
            sg.push(SgVars { x, p, su, sd });
        }
        let mut reg = Vec::with_capacity(s.regs.len());
        for j in 0..s.regs.len() {
            let avail = s.reg_available[t][j];
            reg.push(RegVars {
                p: lp.add_var(format!("p_reg[{t}][{j}]"), 0.0, avail, dt * offers.reg_energy[t][j])?,
                h: lp.add_var(
                    format!("h_reg[{t}][{j}]"),
                    0.0,
                    f64::INFINITY,
                    dt * offers.reg_inertia[t][j],
                )?,
                k: lp.add_var(
                    format!("k_reg[{t}][{j}]"),
                    0.0,
                    f64::INFINITY,
                    dt * offers.reg_droop[t][j],
                )?,
            });
        }
        let mut ess = Vec::with_capacity(s.ess.len());
        for (k, e) in s.ess.iter().enumerate() {
            ess.push(EssVars {
                dis: lp.add_var(
                    format!("dis_ess[{t}][{k}]"),
                    0.0,
                    e.power_mw,
                    dt * offers.ess_energy[t][k],
                )?,
                ch: lp.add_var(format!("ch_ess[{t}][{k}]"), 0.0, e.power_mw, 0.0)?,
                soc: lp.add_var(
                    format!("soc_ess[{t}][{k}]"),
                    e.soc_min * e.energy_mwh,
                    e.soc_max * e.energy_mwh,
                    0.0,
                )?,
                h: lp.add_var(
                    format!("h_ess[{t}][{k}]"),
                    0.0,
                    f64::INFINITY,
                    dt * offers.ess_inertia[t][k],
                )?,
                k: lp.add_var(
                    format!("k_ess[{t}][{k}]"),
                    0.0,
                    f64::INFINITY,
                    dt * offers.ess_droop[t][k],
                )?,
            });
        }
        let mut vpp = Vec::with_capacity(s.vpps.len());
        for (l, v) in s.vpps.iter().enumerate() {
            let o = &v.portfolio.offer;
            let k_g = v.portfolio.k_g();
            let cap = caps[l];
            let x = match fixed.filter(|_| mode == ClearingMode::Sced) {
                Some(c) => {
                    let x = c.vpp[t][l];
                    lp.add_var(format!("x_vpp[{t}][{l}]"), x, x, 0.0)?
                }
                None => lp.add_var(format!("x_vpp[{t}][{l}]"), 0.0, 1.0, 0.0)?,
            };
            let h_hi = o.p_vppr_in_max.map_or(cap.h_vppr, |m| (m / inertia_mw).min(cap.h_vppr));
            let k_hi = o.p_df_max.map_or(cap.k_vpp, |m| (m / b.nadir_max_hz).min(cap.k_vpp));
            let h_lo = o.p_vppr_in_min / inertia_mw;
            let k_lo = o.p_df_min / b.nadir_max_hz;
            vpp.push(VppVars {
                x,
                pg: lp.add_var(
                    format!("pg_vpp[{t}][{l}]"),
                    0.0,
                    f64::INFINITY,
                    dt * offers.vpp_energy_sg[t][l],
                )?,
                pr: lp.add_var(
                    format!("pr_vpp[{t}][{l}]"),
                    0.0,
                    (1.0 - k_g) * o.p_max,
                    dt * offers.vpp_energy_other[t][l],
                )?,
                h: lp.add_var(
                    format!("h_vpp[{t}][{l}]"),
                    h_lo,
                    h_hi.max(h_lo),
                    dt * offers.vpp_inertia[t][l],
                )?,
                k: lp.add_var(
                    format!("k_vpp[{t}][{l}]"),
                    k_lo,
                    k_hi.max(k_lo),
                    dt * offers.vpp_droop[t][l],
                )?,
            });
        }
        let theta = (0..s.buses)
            .map(|n| {
                let (lo, hi) = if n + 1 == s.reference_bus {
                    (0.0, 0.0)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                };
                lp.add_var(format!("theta[{t}][{n}]"), lo, hi, 0.0)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pv = PeriodVars {
            sg,
            reg,
            ess,
            vpp,
            theta,
        };

        // nodal balance with DC flows
        let mut injections: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); s.buses];
        for (g, v) in s.sgs.iter().zip(&pv.sg) {
            injections[g.bus - 1].push((v.p, 1.0));
        }
        for (r, v) in s.regs.iter().zip(&pv.reg) {
            injections[r.bus - 1].push((v.p, 1.0));
        }
        for (e, v) in s.ess.iter().zip(&pv.ess) {
            injections[e.bus - 1].push((v.dis, 1.0));
            injections[e.bus - 1].push((v.ch, -1.0));
        }
        for (e, v) in s.vpps.iter().zip(&pv.vpp) {
            injections[e.bus - 1].push((v.pg, 1.0));
            injections[e.bus - 1].push((v.pr, 1.0));
        }
        let mut balance = Vec::with_capacity(s.buses);
        for (n, mut coeffs) in injections.into_iter().enumerate() {
            for &(m, y) in &susceptance[n] {
                coeffs.push((pv.theta[n], -y));
                coeffs.push((pv.theta[m], y));
            }
            balance.push(lp.add_row(format!("balance[{t}][{n}]"), &coeffs, RowSense::Eq, s.loads[t][n])?);
        }

        // security rows
        let delta_d = s.delta_d(t);
        let mut h_gv: Vec<(VarId, f64)> = Vec::new();
        for (g, v) in s.sgs.iter().zip(&pv.sg) {
            h_gv.push((v.x, g.h));
        }
        for (cap, v) in caps.iter().zip(&pv.vpp) {
            h_gv.push((v.x, cap.h_vppg));
        }
        let mut h_to = h_gv.clone();
        h_to.extend(pv.reg.iter().map(|v| (v.h, 1.0)));
        h_to.extend(pv.ess.iter().map(|v| (v.h, 1.0)));
        h_to.extend(pv.vpp.iter().map(|v| (v.h, 1.0)));
        let k_g: Vec<(VarId, f64)> = s.sgs.iter().zip(&pv.sg).map(|(g, v)| (v.x, g.k)).collect();
        let k_fm: Vec<(VarId, f64)> = pv
            .reg
            .iter()
            .map(|v| (v.k, 1.0))
            .chain(pv.ess.iter().map(|v| (v.k, 1.0)))
            .collect();
        let k_vpp: Vec<(VarId, f64)> = pv.vpp.iter().map(|v| (v.k, 1.0)).collect();

        let rocof = if dropped.rocof {
            None
        } else {
            Some(lp.add_row(
                format!("rocof[{t}]"),
                &h_gv,
                RowSense::Ge,
                delta_d.abs() / (2.0 * b.rocof_max_hz_per_s),
            )?)
        };
        let qss = if dropped.qss {
            None
        } else {
            let all: Vec<_> = k_g.iter().chain(&k_fm).chain(&k_vpp).copied().collect();
            Some(lp.add_row(format!("qss[{t}]"), &all, RowSense::Ge, delta_d.abs() / b.qss_max_hz)?)
        };
        let mut nadir = Vec::new();
        if !dropped.nadir {
            for (hp, plane) in surfaces[t].planes.iter().enumerate() {
                let mut coeffs: Vec<(VarId, f64)> = Vec::new();
                coeffs.extend(h_to.iter().map(|&(v, a)| (v, plane.kappa_h_to * a)));
                coeffs.extend(k_g.iter().map(|&(v, a)| (v, plane.kappa_k_g * a)));
                coeffs.extend(k_fm.iter().map(|&(v, a)| (v, plane.kappa_k_fm * a)));
                coeffs.extend(k_vpp.iter().map(|&(v, a)| (v, plane.kappa_k_vpp * a)));
                nadir.push(lp.add_row(
                    format!("nadir[{t}][{hp}]"),
                    &coeffs,
                    RowSense::Ge,
                    -b.nadir_max_hz - plane.constant,
                )?);
            }
        }

        // SG output, ramp and commitment logic
        for (i, (g, v)) in s.sgs.iter().zip(&pv.sg).enumerate() {
            lp.add_row(
                format!("sg_min[{t}][{i}]"),
                &[(v.p, 1.0), (v.x, -g.p_min)],
                RowSense::Ge,
                0.0,
            )?;
            lp.add_row(
                format!("sg_max[{t}][{i}]"),
                &[(v.p, 1.0), (v.x, -g.p_max)],
                RowSense::Le,
                0.0,
            )?;
            if let Some(pr) = &prev {
                let q = pr.sg[i].p;
                let ramp = g.ramp_mw_per_h * dt;
                lp.add_row(
                    format!("sg_ramp_up[{t}][{i}]"),
                    &[(v.p, 1.0), (q, -1.0)],
                    RowSense::Le,
                    ramp,
                )?;
                lp.add_row(
                    format!("sg_ramp_dn[{t}][{i}]"),
                    &[(v.p, 1.0), (q, -1.0)],
                    RowSense::Ge,
                    -ramp,
                )?;
            }
            if let (Some(su), Some(sd)) = (v.su, v.sd) {
                let logic = [(v.x, 1.0), (su, -1.0), (sd, 1.0)];
                match &prev {
                    Some(pr) => {
                        let mut c = logic.to_vec();
                        c.push((pr.sg[i].x, -1.0));
                        lp.add_row(format!("sg_logic[{t}][{i}]"), &c, RowSense::Eq, 0.0)?;
                    }
                    // an isolated later period has no predecessor to link to
                    None if t > 0 => {}
                    None => {
                        let x0 = f64::from(u8::from(g.initially_on));
                        lp.add_row(format!("sg_logic[{t}][{i}]"), &logic, RowSense::Eq, x0)?;
                    }
                }
                let window = |len: usize, pick: fn(&SgVars) -> Option<VarId>| -> Vec<(VarId, f64)> {
                    let start = t.saturating_sub(len - 1).max(periods.start);
                    let mut c: Vec<(VarId, f64)> = vars[start - periods.start..]
                        .iter()
                        .filter_map(|p| pick(&p.sg[i]))
                        .map(|v| (v, 1.0))
                        .collect();
                    c.extend(pick(v).map(|v| (v, 1.0)));
                    c
                };
                if g.min_up_h > 1 {
                    let len = ((g.min_up_h as f64) / dt).ceil() as usize;
                    let mut c = window(len.max(1), |v| v.su);
                    c.push((v.x, -1.0));
                    lp.add_row(format!("sg_min_up[{t}][{i}]"), &c, RowSense::Le, 0.0)?;
                }
                if g.min_down_h > 1 {
                    let len = ((g.min_down_h as f64) / dt).ceil() as usize;
                    let mut c = window(len.max(1), |v| v.sd);
                    c.push((v.x, 1.0));
                    lp.add_row(format!("sg_min_down[{t}][{i}]"), &c, RowSense::Le, 1.0)?;
                }
            }
        }

        // GFM plants: energy plus reserves within the available power
        for (j, v) in pv.reg.iter().enumerate() {
            lp.add_row(
                format!("reg_cap[{t}][{j}]"),
                &[(v.p, 1.0), (v.h, inertia_mw), (v.k, b.nadir_max_hz)],
                RowSense::Le,
                s.reg_available[t][j],
            )?;
        }
        for (k, (e, v)) in s.ess.iter().zip(&pv.ess).enumerate() {
            let mut c = vec![(v.soc, 1.0), (v.ch, -e.efficiency * dt), (v.dis, dt / e.efficiency)];
            let rhs = match &prev {
                Some(pr) => {
                    c.push((pr.ess[k].soc, -1.0));
                    0.0
                }
                None => e.soc0 * e.energy_mwh,
            };
            lp.add_row(format!("ess_soc[{t}][{k}]"), &c, RowSense::Eq, rhs)?;
            lp.add_row(
                format!("ess_cap[{t}][{k}]"),
                &[(v.dis, 1.0), (v.h, inertia_mw), (v.k, b.nadir_max_hz)],
                RowSense::Le,
                e.power_mw,
            )?;
            if t + 1 == s.periods {
                lp.add_row(
                    format!("ess_terminal[{k}]"),
                    &[(v.soc, 1.0)],
                    RowSense::Ge,
                    e.soc0 * e.energy_mwh,
                )?;
            }
        }

        // VPP small-SG block: output scaled by commitment, ramp limited
        for (l, (entry, v)) in s.vpps.iter().zip(&pv.vpp).enumerate() {
            let o = &entry.portfolio.offer;
            let k_g = entry.portfolio.k_g();
            lp.add_row(
                format!("vpp_min[{t}][{l}]"),
                &[(v.pg, 1.0), (v.x, -k_g * o.p_min)],
                RowSense::Ge,
                0.0,
            )?;
            lp.add_row(
                format!("vpp_max[{t}][{l}]"),
                &[(v.pg, 1.0), (v.x, -k_g * o.p_max)],
                RowSense::Le,
                0.0,
            )?;
            if let Some(pr) = &prev {
                let q = pr.vpp[l].pg;
                let ramp = entry.portfolio.small_sg_ramp() * dt;
                lp.add_row(
                    format!("vpp_ramp_up[{t}][{l}]"),
                    &[(v.pg, 1.0), (q, -1.0)],
                    RowSense::Le,
                    ramp,
                )?;
                lp.add_row(
                    format!("vpp_ramp_dn[{t}][{l}]"),
                    &[(v.pg, 1.0), (q, -1.0)],
                    RowSense::Ge,
                    -ramp,
                )?;
            }
        }

        vars.push(pv);
        rows.push(PeriodRows {
            balance,
            rocof,
            qss,
            nadir,
        });
    }

    if let Some(v) = lp
        .vars()
        .iter()
        .find(|v| (v.cost < 0.0 && v.upper == f64::INFINITY) || (v.cost > 0.0 && v.lower == f64::NEG_INFINITY))
    {
        return Err(MarketError::Unbounded(v.name.clone()));
    }
    Ok(ClearingProblem {
        lp,
        mode,
        periods,
        vars,
        rows,
        capabilities: caps,
    })
}
