use std::sync::OnceLock;

use vppfr_core::market::*;
use vppfr_core::scenario::{bundled_scenario, SystemScenario};
use vppfr_core::security::{build_pwl_surface, PwlNadirSurface, SurfaceConfig};

fn reference() -> &'static PwlNadirSurface {
    static SURFACE: OnceLock<PwlNadirSurface> = OnceLock::new();
    SURFACE.get_or_init(|| build_pwl_surface(&SurfaceConfig::from_scenario(&bundled_scenario())).unwrap())
}

/// `len` periods of the bundled day starting at `start`.
fn window(start: usize, len: usize) -> SystemScenario {
    let mut s = bundled_scenario();
    s.periods = len;
    s.loads = s.loads[start..start + len].to_vec();
    s.reg_available = s.reg_available[start..start + len].to_vec();
    s
}

/// Everything on bus 1.
fn one_bus(mut s: SystemScenario) -> SystemScenario {
    s.buses = 1;
    s.reference_bus = 1;
    s.branches.clear();
    s.loads = s.loads.iter().map(|row| vec![row.iter().sum()]).collect();
    s.sgs.iter_mut().for_each(|g| g.bus = 1);
    s.regs.iter_mut().for_each(|r| r.bus = 1);
    s.ess.iter_mut().for_each(|e| e.bus = 1);
    s.vpps.iter_mut().for_each(|v| v.bus = 1);
    s
}

fn clear(s: &SystemScenario) -> ClearingOutcome {
    clear_with(s, &OfferBook::draw(s, None))
}

fn clear_with(s: &SystemScenario, offers: &OfferBook) -> ClearingOutcome {
    solve_pipeline(s, offers, &period_surfaces(s, reference())).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn frequency_prices(p: &PriceSchedule) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::new();
    for rows in [&p.sg_inertia, &p.sg_droop, &p.vpp_inertia, &p.vpp_droop] {
        v.extend(rows.iter().flatten());
    }
    v.extend(&p.fm_inertia);
    v.extend(&p.fm_droop);
    v
}

#[test]
fn row_count_matches_the_formula() {
    let s = window(8, 3);
    let offers = OfferBook::draw(&s, None);
    let surfaces = period_surfaces(&s, reference());
    let planes: Vec<usize> = surfaces.iter().map(|p| p.planes.len()).collect();
    let scuc = build_clearing_problem(&s, &offers, &surfaces, ClearingMode::Scuc, None).unwrap();
    let cont = build_clearing_problem(&s, &offers, &surfaces, ClearingMode::ContinuousScuc, None).unwrap();
    let fixed = Commitment {
        sg: vec![vec![1.0; s.sgs.len()]; s.periods],
        vpp: vec![vec![1.0; s.vpps.len()]; s.periods],
    };
    let sced = build_clearing_problem(&s, &offers, &surfaces, ClearingMode::Sced, Some(&fixed)).unwrap();
    for (p, mode) in [
        (&scuc, ClearingMode::Scuc),
        (&cont, ClearingMode::ContinuousScuc),
        (&sced, ClearingMode::Sced),
    ] {
        assert_eq!(p.lp.num_rows(), expected_row_count(&s, &planes, mode), "{mode:?}");
    }
    assert!(scuc.lp.is_mip());
    assert!(!cont.lp.is_mip() && !sced.lp.is_mip());
}

#[test]
fn sced_needs_a_commitment_of_the_right_shape() {
    let s = window(0, 2);
    let offers = OfferBook::draw(&s, None);
    let surfaces = period_surfaces(&s, reference());
    let err = build_clearing_problem(&s, &offers, &surfaces, ClearingMode::Sced, None).unwrap_err();
    assert_eq!(err, MarketError::MissingCommitment);
    let short = Commitment {
        sg: vec![vec![1.0; s.sgs.len()]],
        vpp: vec![vec![1.0; s.vpps.len()]],
    };
    let err = build_clearing_problem(&s, &offers, &surfaces, ClearingMode::Sced, Some(&short)).unwrap_err();
    assert!(matches!(err, MarketError::Commitment(_)));
}

#[test]
fn surfaces_must_match_the_period_disturbance() {
    let s = window(0, 2);
    let offers = OfferBook::draw(&s, None);
    let wrong = vec![reference().clone(); 2];
    let err = build_clearing_problem(&s, &offers, &wrong, ClearingMode::Scuc, None).unwrap_err();
    assert!(matches!(err, MarketError::SurfaceDisturbance { period: 0, .. }));
    let err = build_clearing_problem(&s, &offers, &wrong[..1], ClearingMode::Scuc, None).unwrap_err();
    assert!(matches!(
        err,
        MarketError::SurfaceDisturbance { .. } | MarketError::MissingSurface { .. }
    ));
}

#[test]
fn one_bus_without_disturbance_buys_no_frequency_service() {
    let mut s = one_bus(window(12, 2));
    s.disturbance.load_fraction = 0.0;
    let out = clear(&s);
    let sol = &out.solution;
    for t in 0..s.periods {
        let supply: f64 = sol.p_sg[t].iter().sum::<f64>()
            + sol.p_reg[t].iter().sum::<f64>()
            + sol.ess_discharge[t].iter().sum::<f64>()
            - sol.ess_charge[t].iter().sum::<f64>()
            + sol.p_vppg[t].iter().sum::<f64>()
            + sol.p_vppr[t].iter().sum::<f64>();
        assert!(
            close(supply, s.total_load(t), 1e-9),
            "period {t}: {supply} vs {}",
            s.total_load(t)
        );
        let bought: f64 = [&sol.h_reg, &sol.h_ess, &sol.h_vppr, &sol.k_reg, &sol.k_ess, &sol.k_vpp]
            .iter()
            .map(|tab| tab[t].iter().sum::<f64>())
            .sum();
        assert!(bought.abs() < 1e-9, "period {t} bought {bought}");
    }
    assert!(frequency_prices(&out.prices).iter().all(|p| p.abs() < 1e-9));
    let audit = frequency_audit(sol, &s).unwrap();
    assert!(audit.passes());
}

#[test]
fn marginal_units_earn_nothing_on_energy() {
    let s = one_bus(window(17, 3));
    let out = clear(&s);
    let st = settle(&s, &out.solution, &out.prices, &out.offers);
    let sol = &out.solution;
    let mut checked = 0;
    for (i, g) in s.sgs.iter().enumerate() {
        for t in 0..s.periods {
            let p = sol.p_sg[t][i];
            let on = sol.commitment.sg[t][i] > 0.5;
            let inside = p > g.p_min + 1e-6 && p < g.p_max - 1e-6;
            let ramp = g.ramp_mw_per_h * s.dt_h;
            let free = |q: f64| (p - q).abs() < ramp - 1e-6;
            let unramped = (t == 0 || free(sol.p_sg[t - 1][i])) && (t + 1 == s.periods || free(sol.p_sg[t + 1][i]));
            if on && inside && unramped {
                let price = out.prices.energy[t][0];
                assert!(
                    (price - out.offers.sg_energy[t][i]).abs() < 1e-6,
                    "{} period {t}",
                    g.name
                );
                let line = st
                    .lines
                    .iter()
                    .find(|l| l.provider == g.name && l.period == t && l.service == Service::Energy)
                    .unwrap();
                assert!(line.revenue - line.cost < 1e-6);
                checked += 1;
            }
        }
    }
    assert!(checked > 0, "no marginal SG in the window");
}

#[test]
fn pipeline_certificates_and_ordering() {
    let s = window(10, 4);
    let out = clear(&s);
    let r = &out.report;
    assert!(r.relaxation_objective <= r.scuc_objective + 1e-6);
    assert!(r.continuous_objective <= r.scuc_objective + 1e-6);
    assert!(close(r.relaxation_objective, r.continuous_objective, 1e-9));
    // the SCED with the SCUC commitment fixed is the SCUC restricted to it
    assert!(close(r.sced_objective, r.scuc_objective, 1e-6), "{r:?}");
    assert!(r.milp_gap <= SCUC_REL_GAP * r.scuc_objective.abs() + 1e-9 || r.milp_node_limit_hit);
    for c in [r.continuous_check, r.sced_check] {
        assert!(c.duality_gap <= 1e-8, "{c:?}");
        assert!(c.complementary_slackness <= 1e-8, "{c:?}");
        assert!(c.primal_residual <= 1e-6, "{c:?}");
    }
}

#[test]
fn settlement_costs_add_up_to_the_objective() {
    let s = window(6, 4);
    let out = clear(&s);
    let st = settle(&s, &out.solution, &out.prices, &out.offers);
    assert!(close(st.total_cost, out.solution.objective, 1e-6));
    assert!(close(st.total_cost, out.report.sced_objective, 1e-6));
    for l in &st.lines {
        if l.quantity == 0.0 {
            assert_eq!((l.revenue, l.cost), (0.0, 0.0), "{l:?}");
        }
        assert!(l.price.is_finite() && l.revenue.is_finite());
    }
    let summed: f64 = st.classes.iter().map(|c| c.profit).sum();
    let direct: f64 = st.lines.iter().map(|l| l.revenue - l.cost).sum();
    assert!(close(summed, direct, 1e-9));
}

#[test]
fn slack_security_gives_zero_frequency_prices() {
    // evening peak: committed SGs cover loose limits with inertia and droop
    // that cost nothing
    let mut s = window(18, 3);
    s.boundaries.rocof_max_hz_per_s = 1e3;
    s.boundaries.qss_max_hz = 1e3;
    s.boundaries.nadir_max_hz = 1e3;
    let out = clear(&s);
    let p = &out.prices;
    assert!(frequency_prices(p).iter().all(|v| v.abs() < 1e-9), "{p:?}");
    for v in p.lambda_in.iter().chain(&p.lambda_dr_cscuc).chain(&p.lambda_dr_sced) {
        assert!(v.abs() < 1e-9);
    }
    assert!(p.lambda_ipfr_sced.iter().flatten().all(|v| v.abs() < 1e-9));
}

#[test]
fn scarce_inertia_is_priced() {
    // reduce SG inertia until the RoCoF row binds
    let base = window(11, 3);
    let (s, out, t) = [1.0, 0.8, 0.6, 0.4]
        .into_iter()
        .find_map(|f| {
            let mut s = base.clone();
            s.sgs.iter_mut().for_each(|g| g.h *= f);
            let out = solve_pipeline(&s, &OfferBook::draw(&s, None), &period_surfaces(&s, reference())).ok()?;
            let t = (0..s.periods).find(|&t| out.prices.lambda_in[t] > 1e-6)?;
            Some((s, out, t))
        })
        .expect("the RoCoF row binds at some inertia level");
    let p = &out.prices;
    assert!(p.vpp_inertia[t].iter().all(|&v| v > 0.0));
    // the mask: offline units are paid nothing for inertia or droop
    let c = &out.solution.commitment;
    let mut offline = 0;
    for t in 0..s.periods {
        for i in 0..s.sgs.len() {
            if c.sg[t][i] == 0.0 {
                offline += 1;
                assert_eq!(p.sg_inertia[t][i], 0.0);
                assert_eq!(p.sg_droop[t][i], 0.0);
            } else {
                assert!(close(p.sg_inertia[t][i], p.vpp_inertia[t][0], 1e-12));
            }
        }
    }
    assert!(offline > 0);
}

#[test]
fn doubling_every_offer_doubles_cost_and_prices() {
    let s = window(18, 3);
    let offers = OfferBook::draw(&s, None);
    let a = clear_with(&s, &offers);
    let b = clear_with(&s, &offers.scaled(2.0));
    assert!(close(b.solution.objective, 2.0 * a.solution.objective, 1e-7));
    let pa = serde_json::to_value(&a.prices).unwrap();
    let pb = serde_json::to_value(&b.prices).unwrap();
    fn walk(a: &serde_json::Value, b: &serde_json::Value) {
        match (a, b) {
            (serde_json::Value::Array(x), serde_json::Value::Array(y)) => {
                assert_eq!(x.len(), y.len());
                x.iter().zip(y).for_each(|(x, y)| walk(x, y));
            }
            (serde_json::Value::Object(x), serde_json::Value::Object(y)) => {
                x.iter().for_each(|(k, v)| walk(v, &y[k]));
            }
            _ => {
                let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                assert!((y - 2.0 * x).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }
    walk(&pa, &pb);
}

#[test]
fn clearing_is_deterministic() {
    let s = window(7, 3);
    let a = clear(&s);
    let b = clear(&s);
    assert_eq!(
        serde_json::to_string(&a.solution).unwrap(),
        serde_json::to_string(&b.solution).unwrap()
    );
    assert_eq!(
        serde_json::to_string(&a.prices).unwrap(),
        serde_json::to_string(&b.prices).unwrap()
    );
    assert_eq!(a.report, b.report);
}

#[test]
fn cleared_periods_pass_the_frequency_audit() {
    let s = window(9, 4);
    let out = clear(&s);
    let audit = frequency_audit(&out.solution, &s).unwrap();
    assert!(audit.nadir_violations.is_empty());
    for p in &audit.periods {
        assert!(p.passes(), "{p:?}");
        // the closed form tracks the numerical reference
        assert!((p.nadir - p.nadir_ode).abs() < 2e-3, "{p:?}");
    }
}

#[test]
fn vpps_lower_the_evening_cost() {
    let s = window(17, 4);
    let with = clear(&s);
    let without = clear(&s.without_vpps());
    assert!(with.solution.objective < without.solution.objective);
    let st = settle(&s, &with.solution, &with.prices, &with.offers);
    let vpp = st.classes.iter().find(|c| c.class == ProviderClass::Vpp).unwrap();
    assert!(vpp.profit >= -1e-6);
}

#[test]
fn impossible_rocof_is_diagnosed() {
    let mut s = window(3, 2);
    s.boundaries.rocof_max_hz_per_s = 1e-4;
    let err = solve_pipeline(&s, &OfferBook::draw(&s, None), &period_surfaces(&s, reference())).unwrap_err();
    match err {
        MarketError::Infeasible { stage, period, family } => {
            assert_eq!(stage, "scuc");
            assert_eq!(period, Some(0));
            assert_eq!(family, "rocof");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn offer_book_is_seeded() {
    let s = window(0, 3);
    assert_eq!(OfferBook::draw(&s, None), OfferBook::draw(&s, Some(s.offers.seed)));
    assert_ne!(OfferBook::draw(&s, Some(1)), OfferBook::draw(&s, Some(2)));
    assert!(OfferBook::draw(&s, None).validate(&s).is_ok());
    let other = window(0, 4);
    assert!(OfferBook::draw(&s, None).validate(&other).is_err());
}
