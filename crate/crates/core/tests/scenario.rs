use std::path::PathBuf;

use approx::assert_relative_eq;
use vppfr_core::scenario::*;

fn write_bundle(dir: &PathBuf) {
    std::fs::create_dir_all(dir).unwrap();
    for name in [
        "ieee30.toml",
        "ieee30_load.csv",
        "ieee30_reg.csv",
        "vpp1.toml",
        "vpp2.toml",
        "vpp3.toml",
    ] {
        std::fs::write(dir.join(name), bundled_file(name).unwrap()).unwrap();
    }
}

fn scratch(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("vppfr-scenario-{tag}-{}", std::process::id()))
}

#[test]
fn bundled_scenario_is_well_formed() {
    let s = bundled_scenario();
    let report = validate_scenario(&s);
    assert!(report.is_empty(), "{report:?}");
    assert_eq!(s.periods, 24);
    assert_eq!(s.buses, 30);
    assert_eq!(s.vpps.len(), 3);
    assert!(s.vpps.iter().all(|v| v.aggregate.is_none()));
}

#[test]
fn equal_stage_delays_violate_stage_ordering() {
    let mut s = bundled_scenario();
    s.delays.tau2 = s.delays.tau1;
    let report = validate_scenario(&s);
    assert!(
        report.iter().any(|v| v.message.contains("stage ordering")),
        "{report:?}"
    );
}

#[test]
fn negative_load_names_period_and_node() {
    let mut s = bundled_scenario();
    s.loads[4][6] = -1.0;
    let report = validate_scenario(&s);
    assert_eq!(report.len(), 1, "{report:?}");
    assert_eq!(report[0].path, "loads[period=5][node=7]");
}

#[test]
fn validation_is_idempotent_and_pure() {
    let mut s = bundled_scenario();
    s.loads[0][0] = -3.0;
    s.sgs[1].t_g = 0.0;
    let before = s.clone();
    let a = validate_scenario(&s);
    let b = validate_scenario(&s);
    assert_eq!(a, b);
    assert_eq!(s, before);
    assert_eq!(a.len(), 2);
}

#[test]
fn broken_network_is_reported() {
    let mut s = bundled_scenario();
    // bus 30 hangs off 27 and 29; 29 only off 27 and 30
    s.branches.retain(|b| !(b.from == 27 && (b.to == 29 || b.to == 30)));
    let report = validate_scenario(&s);
    assert!(report.iter().any(|v| v.path == "bus[30]"), "{report:?}");
    assert!(report.iter().any(|v| v.path == "bus[29]"), "{report:?}");
}

#[test]
fn loads_from_disk_like_the_bundle() {
    let dir = scratch("load");
    write_bundle(&dir);
    let s = SystemScenario::load(&dir.join("ieee30.toml")).unwrap();
    assert_eq!(s, bundled_scenario());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn csv_errors_carry_file_and_line() {
    let dir = scratch("csv");
    write_bundle(&dir);
    let path = dir.join("ieee30_load.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("3,4,not-a-number\n");
    let line = text.lines().count();
    std::fs::write(&path, text).unwrap();
    match SystemScenario::load(&dir.join("ieee30.toml")) {
        Err(ScenarioError::Csv { file, line: l, .. }) => {
            assert!(file.ends_with("ieee30_load.csv"));
            assert_eq!(l, line);
        }
        other => panic!("expected a CSV error, got {other:?}"),
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_file_is_an_io_error() {
    let err = SystemScenario::load(&scratch("missing").join("nope.toml")).unwrap_err();
    assert!(matches!(err, ScenarioError::Io { .. }));
}

#[test]
fn disturbance_is_a_fixed_share_of_load() {
    let s = bundled_scenario();
    for t in 0..s.periods {
        assert_relative_eq!(s.delta_d(t), 0.08 * s.total_load(t), max_relative = 1e-12);
    }
    let peak = (0..s.periods).map(|t| s.delta_d(t)).fold(0.0, f64::max);
    assert_eq!(s.max_delta_d(), peak);
}

#[test]
fn host_system_is_the_full_sg_fleet() {
    let s = bundled_scenario();
    let host = s.host_system();
    assert_relative_eq!(host.h_sync, s.sgs.iter().map(|g| g.h).sum::<f64>());
    assert_relative_eq!(host.k_gov, s.sgs.iter().map(|g| g.k).sum::<f64>());
    let weighted = s.sgs.iter().map(|g| g.k * g.t_g).sum::<f64>() / host.k_gov;
    assert_relative_eq!(host.t_gov, weighted, max_relative = 1e-12);
    assert_relative_eq!(s.t_gv(), weighted, max_relative = 1e-12);
}

#[test]
fn removing_vpps_keeps_total_capacity() {
    let s = bundled_scenario();
    let capacity = |s: &SystemScenario| {
        s.sgs.iter().map(|g| g.p_max).sum::<f64>()
            + s.regs.iter().map(|r| r.capacity_mw).sum::<f64>()
            + s.ess.iter().map(|e| e.power_mw).sum::<f64>()
            + s.vpps.iter().map(|v| v.portfolio.rated_mw).sum::<f64>()
    };
    let w = s.without_vpps();
    assert!(w.vpps.is_empty());
    assert_relative_eq!(capacity(&w), capacity(&s), max_relative = 1e-12);
    assert!(validate_scenario(&w).is_empty());
}

#[test]
fn aggregate_with_wrong_droop_is_flagged() {
    use vppfr_core::aggregation::{assemble_heterogeneous, fit_reduced_model, FitConfig};
    let mut s = bundled_scenario();
    let full = assemble_heterogeneous(&s.vpps[2].portfolio, &s.delays).unwrap();
    let config = FitConfig {
        scenarios: 20,
        max_iterations: 50,
        ..s.fit_config(1, 7)
    };
    let mut agg = fit_reduced_model(&full, &s.host_system(), &config).unwrap();
    s.vpps[2].aggregate = Some(agg.clone());
    assert!(validate_scenario(&s).is_empty());
    agg.k_vpp *= 1.1;
    s.vpps[2].aggregate = Some(agg);
    let report = validate_scenario(&s);
    assert_eq!(report.len(), 1);
    assert_eq!(report[0].path, "vpp[2].aggregate.k_vpp");
}
