//! Plot-ready tables of a clearing run.

use vppfr_core::market::{settle, Settlement};
use vppfr_core::scenario::SystemScenario;

use crate::{ClearingFile, CliError};

/// One CSV table: a header and string cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip formatting, so equal values give equal bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

fn sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn table(name: &'static str, header: &[&str], rows: Vec<Vec<String>>) -> Table {
    Table {
        name,
        header: header.iter().map(|h| h.to_string()).collect(),
        rows,
    }
}

/// Errors unless the clearing was run on a system shaped like `s`.
pub fn check_matches(s: &SystemScenario, c: &ClearingFile) -> Result<(), CliError> {
    let mismatch = |what: String| Err(CliError::Mismatch(what));
    if c.scenario != s.name {
        return mismatch(format!("clearing is for scenario {}, not {}", c.scenario, s.name));
    }
    let sol = &c.solution;
    let per_period = [
        ("periods", c.periods),
        ("p_sg", sol.p_sg.len()),
        ("p_reg", sol.p_reg.len()),
        ("ess_discharge", sol.ess_discharge.len()),
        ("p_vppg", sol.p_vppg.len()),
        ("mix", sol.mix.len()),
        ("commitment", sol.commitment.sg.len()),
        ("energy prices", c.prices.energy.len()),
        ("inertia prices", c.prices.sg_inertia.len()),
        ("droop prices", c.prices.sg_droop.len()),
        ("offers", c.offers.sg_energy.len()),
    ];
    for (what, n) in per_period {
        if n != s.periods {
            return mismatch(format!("{what} covers {n} periods, the scenario has {}", s.periods));
        }
    }
    let units = [
        ("SG", sol.p_sg.first().map_or(0, Vec::len), s.sgs.len()),
        ("REG", sol.p_reg.first().map_or(0, Vec::len), s.regs.len()),
        ("ESS", sol.ess_discharge.first().map_or(0, Vec::len), s.ess.len()),
        ("VPP", sol.p_vppg.first().map_or(0, Vec::len), s.vpps.len()),
        ("bus", c.prices.energy.first().map_or(0, Vec::len), s.buses),
    ];
    for (what, got, want) in units {
        if s.periods > 0 && got != want {
            return mismatch(format!("clearing has {got} {what} columns, the scenario has {want}"));
        }
    }
    Ok(())
}

/// Provider-level settlement, one row per provider, period and service.
pub fn settlement_lines(st: &Settlement) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec![
        "class", "provider", "period", "service", "quantity", "price", "offer", "revenue", "cost",
    ];
    let rows = st
        .lines
        .iter()
        .map(|l| {
            vec![
                label(&l.class),
                l.provider.clone(),
                l.period.to_string(),
                label(&l.service),
                num(l.quantity),
                num(l.price),
                num(l.offer),
                num(l.revenue),
                num(l.cost),
            ]
        })
        .collect();
    (header, rows)
}

fn label<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Energy mix and prices, inertia mix and prices, droop mix and prices per
/// period, and the settlement by provider class.
pub fn tables(s: &SystemScenario, c: &ClearingFile) -> Result<Vec<Table>, CliError> {
    check_matches(s, c)?;
    let sol = &c.solution;
    let pr = &c.prices;

    let mut energy = Vec::with_capacity(s.periods);
    let mut inertia = Vec::with_capacity(s.periods);
    let mut droop = Vec::with_capacity(s.periods);
    for t in 0..s.periods {
        let x = &sol.commitment.sg[t];
        let ess_net: f64 = sol.ess_discharge[t]
            .iter()
            .zip(&sol.ess_charge[t])
            .map(|(d, c)| d - c)
            .sum();
        let rho = &pr.energy[t];
        let rho_min = rho.iter().copied().fold(f64::INFINITY, f64::min);
        let rho_max = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rho_mean = if rho.is_empty() {
            0.0
        } else {
            sum(rho) / rho.len() as f64
        };
        energy.push(vec![
            t.to_string(),
            num(s.total_load(t)),
            num(sum(&sol.p_sg[t])),
            num(sum(&sol.p_reg[t])),
            num(ess_net),
            num(sum(&sol.p_vppg[t]) + sum(&sol.p_vppr[t])),
            num(if rho.is_empty() { 0.0 } else { rho_min }),
            num(rho_mean),
            num(if rho.is_empty() { 0.0 } else { rho_max }),
        ]);

        let h_sg: f64 = s.sgs.iter().zip(x).map(|(g, x)| x * g.h).sum();
        inertia.push(vec![
            t.to_string(),
            num(h_sg),
            num(sum(&sol.h_reg[t])),
            num(sum(&sol.h_ess[t])),
            num(sum(&sol.h_vppg[t])),
            num(sum(&sol.h_vppr[t])),
            num(sol.mix[t].h_to),
            num(max(&pr.sg_inertia[t])),
            num(pr.fm_inertia[t]),
            num(max(&pr.vpp_inertia[t])),
        ]);

        let k_sg: f64 = s.sgs.iter().zip(x).map(|(g, x)| x * g.k).sum();
        let m = &sol.mix[t];
        droop.push(vec![
            t.to_string(),
            num(k_sg),
            num(sum(&sol.k_reg[t])),
            num(sum(&sol.k_ess[t])),
            num(sum(&sol.k_vpp[t])),
            num(m.k_g + m.k_fm + m.k_vpp),
            num(max(&pr.sg_droop[t])),
            num(pr.fm_droop[t]),
            num(max(&pr.vpp_droop[t])),
        ]);
    }

    let st = settle(s, sol, pr, &c.offers);
    let mut summary: Vec<Vec<String>> = st
        .classes
        .iter()
        .map(|k| vec![label(&k.class), num(k.cost), num(k.revenue), num(k.profit)])
        .collect();
    let revenue: f64 = st.classes.iter().map(|k| k.revenue).sum();
    summary.push(vec![
        "total".into(),
        num(st.total_cost),
        num(revenue),
        num(revenue - st.total_cost),
    ]);
    let (header, lines) = settlement_lines(&st);

    Ok(vec![
        table(
            "energy",
            &[
                "period",
                "load_mw",
                "sg_mw",
                "reg_mw",
                "ess_net_mw",
                "vpp_mw",
                "price_min",
                "price_mean",
                "price_max",
            ],
            energy,
        ),
        table(
            "inertia",
            &[
                "period",
                "sg",
                "reg",
                "ess",
                "vpp_nondelayed",
                "vpp_delayed",
                "total",
                "sg_price",
                "fm_price",
                "vpp_price",
            ],
            inertia,
        ),
        table(
            "droop",
            &[
                "period",
                "sg",
                "reg",
                "ess",
                "vpp",
                "total",
                "sg_price",
                "fm_price",
                "vpp_price",
            ],
            droop,
        ),
        table("settlement", &header, lines),
        table("settlement_summary", &["class", "cost", "revenue", "profit"], summary),
    ])
}
