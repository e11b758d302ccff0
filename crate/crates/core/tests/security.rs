use std::sync::OnceLock;

use approx::assert_relative_eq;
use proptest::prelude::*;
use vppfr_core::dynamics::{nadir, stage_model, Stage1Mode, StageParams};
use vppfr_core::scenario::bundled_scenario;
use vppfr_core::security::*;

fn bundled_config() -> SurfaceConfig {
    SurfaceConfig::from_scenario(&bundled_scenario())
}

fn bundled_surface() -> &'static PwlNadirSurface {
    static SURFACE: OnceLock<PwlNadirSurface> = OnceLock::new();
    SURFACE.get_or_init(|| {
        let mut c = bundled_config();
        c.planes = 20;
        build_pwl_surface(&c).unwrap()
    })
}

fn lerp(r: [f64; 2], u: f64) -> f64 {
    r[0] + u * (r[1] - r[0])
}

#[test]
fn bound_examples() {
    assert_relative_eq!(rocof_bound(30.0, 0.125).unwrap(), 120.0);
    assert_relative_eq!(qss_bound(30.0, 0.025).unwrap(), 1200.0);
    assert!(matches!(
        rocof_bound(30.0, 0.0),
        Err(SecurityError::NonPositive { field: "rocof_max", .. })
    ));
}

#[test]
fn degenerate_box_gives_one_exact_plane() {
    let mut c = bundled_config();
    c.domain = SurfaceDomain {
        h_to: [300.0, 300.0],
        k_g: [60.0, 60.0],
        k_fast: [1500.0, 1500.0],
    };
    let s = build_pwl_surface(&c).unwrap();
    assert_eq!(s.planes.len(), 1);
    let truth = sample_nadir(&c, 300.0, 60.0, 1500.0).unwrap();
    assert!((s.value(300.0, 60.0, 1000.0, 500.0).0 - truth).abs() < 1e-9);
    assert!(s.stats.validation_max_gap_hz.abs() < 1e-9);
}

#[test]
fn surface_under_estimates_every_sample() {
    let s = bundled_surface();
    let c = bundled_config();
    let n = c.grid;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let u = |x: usize| x as f64 / (n - 1) as f64;
                let (h, kg, kf) = (
                    lerp(c.domain.h_to, u(i)),
                    lerp(c.domain.k_g, u(j)),
                    lerp(c.domain.k_fast, u(k)),
                );
                let truth = sample_nadir(&c, h, kg, kf).unwrap();
                assert!(s.value(h, kg, kf, 0.0).0 <= truth + 1e-12, "({h}, {kg}, {kf})");
            }
        }
    }
}

#[test]
fn twenty_planes_meet_the_gap_target() {
    let s = bundled_surface();
    assert!(s.planes.len() <= 20);
    assert!(s.stats.validation_max_gap_hz <= 0.01, "{:?}", s.stats);
    assert!(
        s.stats.validation_max_violation_hz <= CONSERVATIVE_TOLERANCE_HZ,
        "{:?}",
        s.stats
    );
    assert!(s.stats.meets_target);
}

#[test]
fn every_plane_supports_the_surface() {
    let s = bundled_surface();
    let c = bundled_config();
    let n = c.grid;
    let mut active = vec![false; s.planes.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let u = |x: usize| x as f64 / (n - 1) as f64;
                let (h, kg, kf) = (
                    lerp(c.domain.h_to, u(i)),
                    lerp(c.domain.k_g, u(j)),
                    lerp(c.domain.k_fast, u(k)),
                );
                let (m, _) = s.value(h, kg, kf, 0.0);
                for (p, pl) in s.planes.iter().enumerate() {
                    if pl.value(h, kg, kf, 0.0) <= m + ACTIVE_TOLERANCE_HZ {
                        active[p] = true;
                    }
                }
            }
        }
    }
    assert!(active.iter().all(|&a| a), "{active:?}");
}

#[test]
fn check_point_thresholds() {
    let s = bundled_surface();
    let d = &s.domain;
    let (h, kg, kf) = (d.h_to[1], d.k_g[1], d.k_fast[1]);
    let loose = check_point(s, h, kg, kf / 2.0, kf / 2.0, 1.0);
    assert!(loose.pass);
    assert!(loose.warning.is_none());
    assert!(!check_point(s, h, kg, kf, 0.0, 0.0).pass);
    // tightening the bound can only turn a pass into a fail
    let mut last = true;
    for i in 0..50 {
        let bound = 0.2 * (1.0 - i as f64 / 50.0);
        let pass = check_point(s, h, kg, kf, 0.0, bound).pass;
        assert!(last || !pass);
        last = pass;
    }
    let out = check_point(s, 2.0 * d.h_to[1], kg, kf, 0.0, 0.5);
    assert!(out.warning.is_some());
}

#[test]
fn worst_plane_is_the_lowest() {
    let s = bundled_surface();
    let d = &s.domain;
    let (h, kg, kf) = (lerp(d.h_to, 0.3), lerp(d.k_g, 0.6), lerp(d.k_fast, 0.2));
    let r = check_point(s, h, kg, kf, 0.0, 0.05);
    let lowest = s
        .planes
        .iter()
        .map(|p| p.value(h, kg, kf, 0.0))
        .fold(f64::INFINITY, f64::min);
    assert_eq!(s.planes[r.worst_plane].value(h, kg, kf, 0.0), lowest);
    assert_eq!(r.surface_hz, lowest);
}

#[test]
fn json_round_trip() {
    let s = bundled_surface();
    let back = PwlNadirSurface::from_json(&s.to_json()).unwrap();
    assert_eq!(&back, s);
    assert!(PwlNadirSurface::from_json("{").is_err());
}

#[test]
fn build_is_deterministic() {
    let mut c = bundled_config();
    c.planes = 5;
    assert_eq!(build_pwl_surface(&c).unwrap(), build_pwl_surface(&c).unwrap());
}

#[test]
fn sampled_nadir_is_monotone_on_the_bundled_box() {
    let v = sample_monotonicity(&bundled_config()).unwrap();
    assert!(v.is_empty(), "{v:?}");
}

#[test]
fn scaling_follows_the_disturbance() {
    let s = bundled_surface();
    let c = bundled_config();
    let half = s.scaled_to(0.5 * s.delta_d);
    let mut small = c.clone();
    small.delta_d = 0.5 * c.delta_d;
    let d = &s.domain;
    for u in [0.0, 0.37, 1.0] {
        let (h, kg, kf) = (lerp(d.h_to, u), lerp(d.k_g, 1.0 - u), lerp(d.k_fast, u));
        assert_relative_eq!(
            half.value(h, kg, kf, 0.0).0,
            0.5 * s.value(h, kg, kf, 0.0).0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            sample_nadir(&small, h, kg, kf).unwrap(),
            0.5 * sample_nadir(&c, h, kg, kf).unwrap(),
            max_relative = 1e-9
        );
    }
}

#[test]
fn nadir_depends_on_fast_droop_only_through_its_sum() {
    let c = bundled_config();
    let base = |k_fm: f64, k_vpp: f64| StageParams {
        h_gv: 400.0,
        h_to: 400.0,
        k_g: 60.0,
        k_fm,
        k_vpp,
        t_gv: c.t_gv,
        delta_d: c.delta_d,
        tau1: c.tau1,
        tau2: c.tau2,
        mode: Stage1Mode::Instant,
    };
    let a = nadir(&stage_model(&base(1200.0, 0.0)).unwrap()).value;
    let b = nadir(&stage_model(&base(700.0, 500.0)).unwrap()).value;
    assert_relative_eq!(a, b, max_relative = 1e-12);
}

#[test]
fn bad_configs_are_rejected() {
    let mut c = bundled_config();
    c.planes = 0;
    assert!(matches!(build_pwl_surface(&c), Err(SecurityError::Domain(_))));
    let mut c = bundled_config();
    c.domain.h_to = [10.0, 5.0];
    assert!(build_pwl_surface(&c).is_err());
    let mut c = bundled_config();
    c.delta_d = 0.0;
    assert!(matches!(build_pwl_surface(&c), Err(SecurityError::NonPositive { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surface_is_conservative_inside_the_box(u in 0.0..1.0f64, v in 0.0..1.0f64, w in 0.0..1.0f64, split in 0.0..1.0f64) {
        let s = bundled_surface();
        let c = bundled_config();
        let d = &s.domain;
        let (h, kg, kf) = (lerp(d.h_to, u), lerp(d.k_g, v), lerp(d.k_fast, w));
        let truth = sample_nadir(&c, h, kg, kf).unwrap();
        let (plane, _) = s.value(h, kg, split * kf, (1.0 - split) * kf);
        prop_assert!(plane <= truth + CONSERVATIVE_TOLERANCE_HZ);
        prop_assert!(truth - plane <= 0.01);
    }
}
