use approx::assert_relative_eq;
use proptest::prelude::*;
use vppfr_core::dynamics::*;
use vppfr_core::models::TransferFunction;

fn params(h_gv: f64, extra_h: f64, k_g: f64, k_fm: f64, k_vpp: f64, t_gv: f64, dd: f64) -> StageParams<f64> {
    StageParams {
        h_gv,
        h_to: h_gv + extra_h,
        k_g,
        k_fm,
        k_vpp,
        t_gv,
        delta_d: dd,
        tau1: 0.5,
        tau2: 1.5,
        mode: Stage1Mode::Instant,
    }
}

fn max_gap(c: &StageCoefficients<f64>, traj: &FrequencyTrajectory<f64>) -> f64 {
    traj.time
        .iter()
        .zip(&traj.df)
        .map(|(t, f)| (c.frequency(*t) - f).abs())
        .fold(0.0, f64::max)
}

#[test]
fn single_machine_without_droop_ramps_at_the_swing_rate() {
    let model = FrequencyModel {
        inertia: vec![InertiaBlock {
            h: 400.0,
            active_from: 0.0,
        }],
        branches: vec![],
    };
    let traj = model.simulate(80.0, 2.0, 1e-3).unwrap();
    assert_relative_eq!(traj.rocof_max, 0.1, max_relative = 1e-12);
    assert_relative_eq!(traj.at(1.0), -0.1, max_relative = 1e-9);
    assert_relative_eq!(rocof_max(80.0, 400.0).unwrap(), 0.1);
}

#[test]
fn zero_disturbance_gives_zero_trajectory() {
    let c = stage_model(&params(100.0, 50.0, 500.0, 100.0, 20.0, 5.0, 0.0)).unwrap();
    let traj = c.params.frequency_model().unwrap().simulate(0.0, 10.0, 1e-3).unwrap();
    assert!(traj.df.iter().all(|v| *v == 0.0));
    assert_eq!(c.frequency(3.0), 0.0);
}

#[test]
fn pure_droop_settles_at_the_qss_deviation() {
    let model = FrequencyModel {
        inertia: vec![InertiaBlock {
            h: 400.0,
            active_from: 0.0,
        }],
        branches: vec![TransferFunction::gain(1600.0)],
    };
    let traj = model.simulate(80.0, 30.0, 1e-3).unwrap();
    assert!((traj.qss + 0.05f64).abs() < 1e-9);
    assert_relative_eq!(qss_deviation(80.0, 1600.0).unwrap(), 0.05);
}

#[test]
fn rejects_zero_inertia_and_coarse_steps() {
    let model = FrequencyModel::<f64> {
        inertia: vec![],
        branches: vec![],
    };
    assert_eq!(model.simulate(1.0, 10.0, 1e-3), Err(DynamicsError::ZeroInertia));
    let model = FrequencyModel {
        inertia: vec![InertiaBlock {
            h: 1.0,
            active_from: 0.0,
        }],
        branches: vec![],
    };
    assert!(matches!(
        model.simulate(1.0, 10.0, 0.5),
        Err(DynamicsError::StepTooLarge { .. })
    ));
    // no droop: 1 MW on 1 MW s/Hz leaves the guard band within 10 s
    assert!(matches!(
        model.simulate(1.0, 20.0, 1e-3),
        Err(DynamicsError::Diverged { .. })
    ));
}

#[test]
fn vanishing_fast_droop_reduces_stage_two_to_a_ramp() {
    let c = stage_model(&params(100.0, 60.0, 800.0, 0.0, 0.0, 6.0, 40.0)).unwrap();
    assert_relative_eq!(c.f_tau2, -40.0 * 1.5 / 320.0, max_relative = 1e-14);
    assert_relative_eq!(c.delta_d_prime, 40.0 * 100.0 / 160.0, max_relative = 1e-14);
}

#[test]
fn delta_d_prime_matches_the_exponential_expression() {
    let p = params(120.0, 80.0, 900.0, 300.0, 60.0, 6.0, 30.0);
    let c = stage_coefficients(&p).unwrap();
    let kf = 360.0;
    let expected = p.h_gv / p.h_to * (-kf / (2.0 * p.h_to) * p.tau2).exp() * p.delta_d;
    assert_relative_eq!(c.delta_d_prime, expected, max_relative = 1e-12);
}

#[test]
fn stage_three_tends_to_the_qss_offset() {
    let c = stage_coefficients(&params(120.0, 80.0, 900.0, 300.0, 60.0, 6.0, 30.0)).unwrap();
    assert_relative_eq!(c.frequency(1e4), -30.0 / 1260.0, max_relative = 1e-12);
    assert_relative_eq!(c.offset, -30.0 / 1260.0);
}

#[test]
fn absolute_constants_reproduce_the_stage_three_curve() {
    let c = stage_coefficients(&params(120.0, 80.0, 900.0, 300.0, 60.0, 6.0, 30.0)).unwrap();
    let (c1, c2) = c.c1_c2().unwrap();
    let (w, a) = (c.omega(), c.alpha);
    for t in [1.6, 3.0, 7.5, 20.0] {
        let v = (-a * t).exp() * (c1 * (w * t).sin() + c2 * (w * t).cos()) + c.offset;
        assert!((v - c.frequency(t)).abs() < 1e-12);
    }
    let (phi, phi_p) = c.phases().unwrap();
    let n = nadir(&c);
    let k = ((w * n.t + phi + phi_p) / std::f64::consts::PI).round();
    assert!((w * n.t + phi + phi_p - k * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn overdamped_case_is_flagged_by_strict_coefficients() {
    // governor lag short and droop small relative to damping
    let p = params(300.0, 0.0, 50.0, 400.0, 0.0, 0.5, 20.0);
    match stage_coefficients(&p) {
        Err(DynamicsError::NotUnderdamped { discriminant }) => assert!(discriminant > 0.0),
        other => panic!("expected overdamped error, got {other:?}"),
    }
    let c = stage_model(&p).unwrap();
    let traj = p.frequency_model().unwrap().simulate(20.0, 30.0, 1e-3).unwrap();
    assert!(max_gap(&c, &traj) < 1e-6);
    let n = nadir(&c);
    assert!(n.monotone);
    assert_eq!(n.value, c.offset);
}

#[test]
fn ramp_mode_matches_the_oracle() {
    let mut p = params(120.0, 80.0, 900.0, 300.0, 60.0, 6.0, 30.0);
    p.mode = Stage1Mode::Ramp;
    let c = stage_model(&p).unwrap();
    let traj = p.frequency_model().unwrap().simulate(30.0, 30.0, 1e-3).unwrap();
    assert!(max_gap(&c, &traj) < 1e-6);
    assert_relative_eq!(c.frequency(0.25), -30.0 * 0.25 / 240.0, max_relative = 1e-14);
}

#[test]
fn f32_and_f64_closed_forms_agree() {
    let p = params(120.0, 80.0, 900.0, 300.0, 60.0, 6.0, 30.0);
    let p32 = StageParams::<f32> {
        h_gv: 120.0,
        h_to: 200.0,
        k_g: 900.0,
        k_fm: 300.0,
        k_vpp: 60.0,
        t_gv: 6.0,
        delta_d: 30.0,
        tau1: 0.5,
        tau2: 1.5,
        mode: Stage1Mode::Instant,
    };
    let (c, c32) = (stage_model(&p).unwrap(), stage_model(&p32).unwrap());
    for t in [0.3, 1.5, 4.0, 12.0] {
        assert!((f64::from(c32.frequency(t as f32)) - c.frequency(t)).abs() < 1e-5);
    }
    let (n, n32) = (nadir(&c), nadir(&c32));
    assert!((f64::from(n32.t) - n.t).abs() < 1e-3);
}

#[test]
fn larger_governor_droop_raises_the_nadir() {
    let mut last = f64::NEG_INFINITY;
    for k_g in [400.0, 600.0, 800.0, 1000.0, 1200.0] {
        let c = stage_model(&params(120.0, 80.0, k_g, 300.0, 60.0, 6.0, 30.0)).unwrap();
        let v = nadir(&c).value;
        assert!(v > last, "k_g={k_g}");
        last = v;
    }
}

fn param_strategy() -> impl Strategy<Value = StageParams<f64>> {
    (
        50.0..300.0f64,
        0.0..200.0f64,
        100.0..1500.0f64,
        0.0..600.0f64,
        0.0..200.0f64,
        2.0..10.0f64,
        5.0..80.0f64,
        0.2..0.8f64,
        0.5..1.5f64,
    )
        .prop_map(|(h_gv, extra, k_g, k_fm, k_vpp, t_gv, dd, tau1, gap)| StageParams {
            h_gv,
            h_to: h_gv + extra,
            k_g,
            k_fm,
            k_vpp,
            t_gv,
            delta_d: dd,
            tau1,
            tau2: tau1 + gap,
            mode: Stage1Mode::Instant,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stage_boundaries_are_continuous(p in param_strategy()) {
        let c = stage_model(&p).unwrap();
        let (f2, d2) = c.eval(p.tau2);
        let eps = 1e-9 * p.tau2;
        let (f3, d3) = c.eval(p.tau2 * (1.0 + 1e-15));
        prop_assert!((f2 - f3).abs() <= 1e-9);
        prop_assert!((d2 - d3).abs() <= 1e-9);
        prop_assert!((c.frequency(p.tau2 + eps) - f2).abs() <= 1e-9 + 1e-6 * eps);
    }

    #[test]
    fn under_frequency_response_stays_below_nominal_through_the_nadir(p in param_strategy()) {
        // lightly damped draws may overshoot nominal on later swings; the
        // arrest phase and the settled value are always under-frequency
        let c = stage_model(&p).unwrap();
        let n = nadir(&c);
        let end = if n.monotone { 30.0 } else { n.t };
        for i in 0..=300 {
            prop_assert!(c.frequency(end * i as f64 / 300.0) <= 0.0);
        }
        prop_assert!(c.offset < 0.0);
    }

    #[test]
    fn scaling_power_inertia_and_droop_leaves_frequency_unchanged(p in param_strategy(), s in 0.1..10.0f64) {
        let q = StageParams {
            h_gv: p.h_gv * s,
            h_to: p.h_to * s,
            k_g: p.k_g * s,
            k_fm: p.k_fm * s,
            k_vpp: p.k_vpp * s,
            delta_d: p.delta_d * s,
            ..p
        };
        let (a, b) = (stage_model(&p).unwrap(), stage_model(&q).unwrap());
        for t in [0.2, 1.0, 2.0, 5.0, 15.0] {
            prop_assert!((a.frequency(t) - b.frequency(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn nadir_is_a_local_minimum(p in param_strategy(), ramp in any::<bool>()) {
        let p = StageParams { mode: if ramp { Stage1Mode::Ramp } else { Stage1Mode::Instant }, ..p };
        let c = stage_model(&p).unwrap();
        let n = nadir(&c);
        if n.monotone {
            prop_assert_eq!(n.value, c.offset);
        } else {
            // interior troughs are stationary; boundary troughs are kinks
            let boundary = n.t == p.tau2 || n.t == p.stage2_start();
            prop_assert!(boundary || (n.t > p.tau2 && c.derivative(n.t).abs() < 1e-8));
            prop_assert!(n.value <= c.frequency(n.t - 1e-3) && n.value <= c.frequency(n.t + 1e-3));
        }
        for i in 0..=600 {
            prop_assert!(n.value <= c.frequency(60.0 * i as f64 / 600.0) + 1e-12);
        }
    }
}

#[test]
fn closed_form_tracks_the_oracle_and_locates_the_nadir() {
    for (i, p) in [
        params(120.0, 80.0, 900.0, 300.0, 60.0, 6.0, 30.0),
        params(60.0, 10.0, 1400.0, 50.0, 0.0, 8.0, 75.0),
        params(250.0, 150.0, 300.0, 500.0, 150.0, 3.0, 12.0),
    ]
    .iter()
    .enumerate()
    {
        let c = stage_model(p).unwrap();
        let traj = p.frequency_model().unwrap().simulate(p.delta_d, 30.0, 1e-3).unwrap();
        assert!(max_gap(&c, &traj) < 1e-6, "case {i}");
        let n = nadir(&c);
        assert!(
            (n.t - traj.t_nadir).abs() < 1e-3,
            "case {i}: {} vs {}",
            n.t,
            traj.t_nadir
        );
        assert!((n.value - traj.nadir).abs() < 1e-4, "case {i}");
    }
}
