use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::scenario::{SystemScenario, SCHEMA_VERSION};

/// One broken invariant, located by a field path such as
/// `loads[period=3][node=5]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Report(Vec<Violation>);

impl Report {
    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                path: path.into(),
                message: message.into(),
            });
        }
    }
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Every invariant violation of the scenario. An empty list means the
/// scenario is well formed.
pub fn validate_scenario(s: &SystemScenario) -> Vec<Violation> {
    let mut r = Report(Vec::new());
    r.check(
        s.schema_version == SCHEMA_VERSION,
        "schema_version",
        format!("expected {SCHEMA_VERSION}"),
    );
    r.check(s.periods >= 1, "periods", "at least one period required");
    r.check(positive(s.dt_h), "dt_h", "must be positive");
    r.check(positive(s.base_mva), "base_mva", "must be positive");
    r.check(s.buses >= 1, "buses", "at least one bus required");
    let bus_ok = |b: usize| b >= 1 && b <= s.buses;
    r.check(bus_ok(s.reference_bus), "reference_bus", "not a bus of the network");

    let d = &s.delays;
    r.check(
        d.tau1 > 0.0 && d.tau2 > d.tau1 && d.tau2.is_finite(),
        "delays",
        format!(
            "stage ordering requires tau2 > tau1 > 0 (tau1 = {}, tau2 = {})",
            d.tau1, d.tau2
        ),
    );
    let b = &s.boundaries;
    r.check(
        positive(b.rocof_max_hz_per_s),
        "boundaries.rocof_max_hz_per_s",
        "must be positive",
    );
    r.check(positive(b.nadir_max_hz), "boundaries.nadir_max_hz", "must be positive");
    r.check(positive(b.qss_max_hz), "boundaries.qss_max_hz", "must be positive");
    r.check(
        positive(s.disturbance.load_fraction),
        "disturbance.load_fraction",
        "must be positive",
    );
    r.check(
        positive(s.disturbance.mean_mw),
        "disturbance.mean_mw",
        "must be positive",
    );
    r.check(
        finite_nonneg(s.disturbance.std_mw),
        "disturbance.std_mw",
        "must be nonnegative",
    );

    for (name, [lo, hi]) in s.offers.named() {
        r.check(
            finite_nonneg(lo) && hi >= lo && hi.is_finite(),
            format!("offers.{name}"),
            "range must satisfy 0 <= low <= high",
        );
    }
    let sec = &s.security;
    r.check(sec.planes >= 1, "security.planes", "at least one plane");
    r.check(sec.grid >= 2, "security.grid", "at least two samples per axis");
    for (name, [lo, hi]) in [("h_to", sec.h_to), ("k_g", sec.k_g), ("k_fast", sec.k_fast)] {
        r.check(
            finite_nonneg(lo) && hi >= lo && hi.is_finite(),
            format!("security.{name}"),
            "range must satisfy 0 <= low <= high",
        );
    }
    r.check(positive(sec.h_to[0]), "security.h_to", "inertia range must be positive");

    // network
    let mut seen = BTreeSet::new();
    let mut adj = vec![Vec::new(); s.buses + 1];
    for (i, br) in s.branches.iter().enumerate() {
        let p = format!("branch[{i}]");
        r.check(
            bus_ok(br.from) && bus_ok(br.to),
            &p,
            "endpoint is not a bus of the network",
        );
        r.check(br.from != br.to, &p, "self loop");
        r.check(
            br.x.is_finite() && br.x != 0.0,
            format!("{p}.x"),
            "reactance must be finite and nonzero",
        );
        let key = (br.from.min(br.to), br.from.max(br.to));
        r.check(seen.insert(key), &p, "duplicate branch; merge parallel circuits");
        if bus_ok(br.from) && bus_ok(br.to) {
            adj[br.from].push(br.to);
            adj[br.to].push(br.from);
        }
    }
    if bus_ok(s.reference_bus) {
        let mut reached = vec![false; s.buses + 1];
        let mut queue = VecDeque::from([s.reference_bus]);
        reached[s.reference_bus] = true;
        while let Some(n) = queue.pop_front() {
            for &m in &adj[n] {
                if !reached[m] {
                    reached[m] = true;
                    queue.push_back(m);
                }
            }
        }
        for n in 1..=s.buses {
            r.check(reached[n], format!("bus[{n}]"), "not connected to the reference bus");
        }
    }

    // profiles
    r.check(s.loads.len() == s.periods, "loads", "one row per period required");
    for (t, row) in s.loads.iter().enumerate() {
        for (n, v) in row.iter().enumerate() {
            r.check(
                finite_nonneg(*v),
                format!("loads[period={}][node={}]", t + 1, n + 1),
                format!("negative or non-finite load {v}"),
            );
        }
    }
    r.check(
        s.reg_available.len() == s.periods,
        "reg_available",
        "one row per period required",
    );
    for (t, row) in s.reg_available.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let cap = s.regs.get(j).map_or(f64::INFINITY, |u| u.capacity_mw);
            r.check(
                finite_nonneg(*v) && *v <= cap * (1.0 + 1e-12),
                format!(
                    "reg_available[period={}][unit={}]",
                    t + 1,
                    s.regs.get(j).map_or("?", |u| &u.name)
                ),
                format!("availability {v} outside [0, capacity]"),
            );
        }
    }

    // providers
    let mut names = BTreeSet::new();
    let mut unique = |r: &mut Report, path: &str, name: &str| {
        r.check(
            names.insert(name.to_string()),
            path,
            format!("duplicate provider name {name}"),
        );
    };
    for (i, g) in s.sgs.iter().enumerate() {
        let p = format!("sg[{i}]");
        unique(&mut r, &p, &g.name);
        r.check(bus_ok(g.bus), format!("{p}.bus"), "not a bus of the network");
        r.check(
            finite_nonneg(g.p_min) && g.p_max >= g.p_min && g.p_max.is_finite(),
            format!("{p}.p_max"),
            "output bounds must satisfy 0 <= p_min <= p_max",
        );
        r.check(finite_nonneg(g.h), format!("{p}.h"), "inertia must be nonnegative");
        r.check(finite_nonneg(g.k), format!("{p}.k"), "droop must be nonnegative");
        r.check(positive(g.t_g), format!("{p}.t_g"), "time constant must be positive");
        r.check(
            finite_nonneg(g.ramp_mw_per_h),
            format!("{p}.ramp_mw_per_h"),
            "must be nonnegative",
        );
        r.check(
            g.ramp_mw_per_h * s.dt_h >= g.p_min,
            format!("{p}.ramp_mw_per_h"),
            "ramp below minimum output makes start-up and shut-down impossible",
        );
    }
    for (i, u) in s.regs.iter().enumerate() {
        let p = format!("reg[{i}]");
        unique(&mut r, &p, &u.name);
        r.check(bus_ok(u.bus), format!("{p}.bus"), "not a bus of the network");
        r.check(
            finite_nonneg(u.capacity_mw),
            format!("{p}.capacity_mw"),
            "must be nonnegative",
        );
    }
    for (i, e) in s.ess.iter().enumerate() {
        let p = format!("ess[{i}]");
        unique(&mut r, &p, &e.name);
        r.check(bus_ok(e.bus), format!("{p}.bus"), "not a bus of the network");
        r.check(
            finite_nonneg(e.power_mw),
            format!("{p}.power_mw"),
            "must be nonnegative",
        );
        r.check(positive(e.energy_mwh), format!("{p}.energy_mwh"), "must be positive");
        r.check(
            e.efficiency > 0.0 && e.efficiency <= 1.0,
            format!("{p}.efficiency"),
            "must lie in (0, 1]",
        );
        r.check(
            0.0 <= e.soc_min && e.soc_min <= e.soc0 && e.soc0 <= e.soc_max && e.soc_max <= 1.0,
            format!("{p}.soc0"),
            "requires 0 <= soc_min <= soc0 <= soc_max <= 1",
        );
    }
    for (i, v) in s.vpps.iter().enumerate() {
        let p = format!("vpp[{i}]");
        unique(&mut r, &p, &v.name);
        r.check(bus_ok(v.bus), format!("{p}.bus"), "not a bus of the network");
        if let Err(e) = v.portfolio.validate() {
            r.check(false, format!("{p}.portfolio"), e.to_string());
        }
        let kg = v.portfolio.k_g();
        r.check(
            (0.0..=1.0).contains(&kg),
            format!("{p}.portfolio"),
            "small-SG fraction outside [0, 1]",
        );
        if let Some(a) = &v.aggregate {
            r.check(
                a.h_vppg >= 0.0 && a.h_vppr >= 0.0,
                format!("{p}.aggregate"),
                "inertia must be nonnegative",
            );
            r.check(
                (a.reduced.dc_gain() - a.k_vpp).abs() <= 1e-9 * a.k_vpp.abs().max(1.0),
                format!("{p}.aggregate.k_vpp"),
                "droop factor differs from the reduced model's DC gain",
            );
        }
    }
    r.0
}
