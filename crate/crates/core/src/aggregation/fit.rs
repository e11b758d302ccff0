//! Fitting the reduced VPP droop branch to the full-order response.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::homogeneous::{HostSystem, VppFullModel};
use crate::aggregation::reduced::{reduced_response, ReducedParams, Sample};
use crate::aggregation::AggregationError;
use crate::dynamics::FrequencyModel;
use crate::models::TransferFunction;
use crate::num::compensated_sum;

const NADIR_HORIZON_S: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Reduced order r in 1..=3.
    pub order: usize,
    /// Disturbance distribution, MW.
    pub disturbance_mean: f64,
    pub disturbance_std: f64,
    pub scenarios: usize,
    pub lambda_nadir: f64,
    pub lambda_qss: f64,
    pub learning_rate: f64,
    /// Step size `rate / (1 + decay * iteration)`.
    pub decay: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Relative objective change below which the descent stops.
    pub tolerance: f64,
    pub seed: u64,
    /// Frequency residuals are normalised by this deviation, Hz.
    pub response_scale_hz: f64,
    /// Slope residuals are normalised by this rate, Hz/s, so that the
    /// penalty weights stay dimensionless.
    pub slope_scale_hz_per_s: f64,
    /// Time at which the settled-slope penalty is evaluated, s.
    pub qss_horizon_s: f64,
    /// Starting point of the descent; the droop-weighted first-order
    /// estimate when absent. Its order must not exceed `order`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<ReducedParams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            order: 1,
            disturbance_mean: 80.0,
            disturbance_std: 12.0,
            scenarios: 500,
            lambda_nadir: 10.0,
            lambda_qss: 10.0,
            learning_rate: 0.05,
            decay: 2e-3,
            batch_size: 32,
            max_iterations: 1500,
            tolerance: 1e-12,
            seed: 7,
            response_scale_hz: 0.05,
            slope_scale_hz_per_s: 0.125,
            qss_horizon_s: 120.0,
            initial: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), AggregationError> {
        let bad = |field: &'static str| Err(AggregationError::InvalidConfig(field));
        if !(1..=3).contains(&self.order) {
            return bad("order");
        }
        if self.scenarios == 0 || self.batch_size == 0 {
            return bad("scenarios");
        }
        if !(self.lambda_nadir >= 0.0 && self.lambda_qss >= 0.0) {
            return bad("lambda");
        }
        if !(self.learning_rate > 0.0 && self.decay >= 0.0) {
            return bad("learning_rate");
        }
        if !(self.disturbance_std >= 0.0 && self.disturbance_mean > 0.0) {
            return bad("disturbance");
        }
        if !(self.response_scale_hz > 0.0 && self.slope_scale_hz_per_s > 0.0 && self.qss_horizon_s > 0.0) {
            return bad("response_scale_hz");
        }
        if let Some(p) = &self.initial {
            let ok = p.order() >= 1
                && p.order() <= self.order
                && p.num.len() == p.order()
                && p.theta().iter().all(|v| v.is_finite() && *v > 0.0)
                && p.is_admissible();
            if !ok {
                return bad("initial");
            }
        }
        Ok(())
    }

    /// Disturbance pool; nonpositive draws are redrawn.
    pub fn disturbances(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(self.disturbance_mean, self.disturbance_std).expect("validated std");
        (0..self.scenarios)
            .map(|_| loop {
                let d = normal.sample(&mut rng);
                if d > 0.0 {
                    break d;
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub order: usize,
    /// Pool-average objective at the returned parameters.
    pub objective: f64,
    pub lambda_nadir: f64,
    pub lambda_qss: f64,
    pub scenario_count: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Full-model nadir time used as the fixed fitting instant, s.
    pub t_nadir_full: f64,
    pub mape_nadir: f64,
    pub mape_qss: f64,
}

/// The market-facing VPP model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateVpp {
    pub name: String,
    /// Non-delayed inertia, MW·s/Hz.
    pub h_vppg: f64,
    /// Delayed inertia, MW·s/Hz.
    pub h_vppr: f64,
    pub order: usize,
    pub reduced: ReducedParams,
    /// Time from which the reduced droop branch responds, s.
    pub activation: f64,
    /// DC gain of the reduced branch, MW/Hz.
    pub k_vpp: f64,
    /// Lag of the first-order model, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_vpp: Option<f64>,
    pub report: FitReport,
}

impl AggregateVpp {
    pub fn transfer_function(&self) -> TransferFunction<f64> {
        self.reduced.transfer_function(self.activation)
    }

    pub fn in_host(&self, host: &HostSystem, tau1: f64, tau2: f64) -> FrequencyModel<f64> {
        let mut m = host.frequency_model(self.h_vppg, self.h_vppr, &crate::aggregation::Delays { tau1, tau2 });
        m.branches.push(self.transfer_function());
        m
    }
}

/// Full-model quantities the reduced model is fitted against, per MW of
/// disturbance.
struct Target {
    t_nadir: f64,
    nadir: f64,
    qss: f64,
    host_droop: f64,
    horizon: f64,
    scale: f64,
    slope_scale: f64,
    lambda_nadir: f64,
    lambda_qss: f64,
}

impl Target {
    /// Residuals `[nadir, qss, sqrt(l_n) slope at nadir, sqrt(l_q) slope at
    /// horizon]` per MW of disturbance, with their parameter Jacobian.
    fn residuals(
        &self,
        host: &FrequencyModel<f64>,
        p: &ReducedParams,
        activation: f64,
        with_grad: bool,
    ) -> ([f64; 4], Vec<[f64; 4]>) {
        let s = reduced_response(host, p, activation, &[self.t_nadir, self.horizon], with_grad);
        let (a, b): (&Sample, &Sample) = (&s[0], &s[1]);
        let (ln, lq) = (self.lambda_nadir.sqrt(), self.lambda_qss.sqrt());
        let kt = self.host_droop + p.dc_gain();
        let r = [
            (a.f - self.nadir) / self.scale,
            (-1.0 / kt - self.qss) / self.scale,
            ln * a.df / self.slope_scale,
            lq * b.df / self.slope_scale,
        ];
        let mut jac = Vec::new();
        if with_grad {
            for k in 0..a.grad_f.len() {
                let dq = if k == 0 { 1.0 / (kt * kt) } else { 0.0 };
                jac.push([
                    a.grad_f[k] / self.scale,
                    dq / self.scale,
                    ln * a.grad_df[k] / self.slope_scale,
                    lq * b.grad_df[k] / self.slope_scale,
                ]);
            }
        }
        (r, jac)
    }
}

fn sq(r: &[f64; 4]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Objective per squared MW and its gradient.
fn unit_objective(t: &Target, host: &FrequencyModel<f64>, p: &ReducedParams, activation: f64) -> (f64, Vec<f64>) {
    let (r, jac) = t.residuals(host, p, activation, true);
    let g = jac
        .iter()
        .map(|j| 2.0 * (0..4).map(|i| r[i] * j[i]).sum::<f64>())
        .collect();
    (sq(&r), g)
}

/// Central-difference gradient of the same objective, for checking.
pub fn objective_gradient_check(
    full: &VppFullModel,
    host: &HostSystem,
    config: &FitConfig,
    params: &ReducedParams,
) -> Result<(Vec<f64>, Vec<f64>), AggregationError> {
    let setup = Setup::new(full, host, config)?;
    let (_, analytic) = unit_objective(&setup.target, &setup.host_model, params, setup.activation);
    let th = params.theta();
    let fd = (0..th.len())
        .map(|k| {
            let h = 1e-4 * th[k].abs().max(1e-6);
            let mut up = th.clone();
            up[k] += h;
            let mut dn = th.clone();
            dn[k] -= h;
            let f = |v: &[f64]| {
                let p = ReducedParams::from_theta(params.order(), v);
                sq(&setup.target.residuals(&setup.host_model, &p, setup.activation, false).0)
            };
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect();
    Ok((analytic, fd))
}

struct Setup {
    target: Target,
    host_model: FrequencyModel<f64>,
    activation: f64,
    pool: Vec<f64>,
}

impl Setup {
    fn new(full: &VppFullModel, host: &HostSystem, config: &FitConfig) -> Result<Self, AggregationError> {
        config.validate()?;
        host.validate()?;
        if full.branches.is_empty() {
            return Err(AggregationError::NoResponse(full.name.clone()));
        }
        let full_model = full.in_host(host);
        let traj = full_model.simulate(1.0, NADIR_HORIZON_S, 1e-3)?;
        let pool = config.disturbances();
        let worst = pool.iter().fold(0.0f64, |m, d| m.max(*d));
        let peak = traj.df.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst * peak > crate::dynamics::DIVERGENCE_GUARD_HZ {
            return Err(AggregationError::FullModelUnstable {
                disturbance: worst,
                peak_hz: worst * peak,
            });
        }
        let host_model = host.frequency_model(full.h_vppg, full.h_vppr, &full.delays);
        let activation = full.branches.iter().map(|b| b.delay()).fold(f64::INFINITY, f64::min);
        Ok(Setup {
            target: Target {
                t_nadir: traj.t_nadir,
                nadir: traj.nadir,
                qss: -1.0 / (host.total_droop() + full.total_droop()),
                host_droop: host.total_droop(),
                horizon: config.qss_horizon_s.max(traj.t_nadir),
                scale: config.response_scale_hz,
                slope_scale: config.slope_scale_hz_per_s,
                lambda_nadir: config.lambda_nadir,
                lambda_qss: config.lambda_qss,
            },
            host_model,
            activation,
            pool,
        })
    }
}

/// Droop-weighted first-order starting point: total DC gain and the
/// gain-weighted mean response time of the branches.
fn initial_first_order(full: &VppFullModel) -> ReducedParams {
    let k = full.total_droop();
    let t = full
        .branches
        .iter()
        .map(|b| {
            let n = b.num();
            let d = b.den();
            let n1 = n.get(1).copied().unwrap_or(0.0);
            let d1 = d.get(1).copied().unwrap_or(0.0);
            let mean_time = if n[0] != 0.0 { d1 - n1 / n[0] } else { d1 };
            b.dc_gain() * mean_time.max(1e-3)
        })
        .sum::<f64>()
        / k;
    ReducedParams::first_order(k, t.max(1e-3))
}

/// Fits the reduced droop branch by stochastic gradient descent over the
/// disturbance pool, followed by damped Gauss-Newton polishing.
pub fn fit_reduced_model(
    full: &VppFullModel,
    host: &HostSystem,
    config: &FitConfig,
) -> Result<AggregateVpp, AggregationError> {
    let setup = Setup::new(full, host, config)?;
    let mean_sq = compensated_sum(setup.pool.iter().map(|d| d * d)) / setup.pool.len() as f64;

    let start = config.initial.clone().unwrap_or_else(|| initial_first_order(full));
    let (p, mut iterations, mut converged) = descend(&setup, config, start);
    let mut params = polish(&setup, p);
    for order in params.order() + 1..=config.order {
        // the new lag's time constant decides which basin the descent lands
        // in, so try a few and keep the best
        let tmax = params.den[order - 2].powf(1.0 / (order - 1) as f64);
        let mut best: Option<(f64, ReducedParams, bool)> = None;
        for factor in RAISE_FACTORS {
            let (p, it, ok) = descend(&setup, config, params.raise_order(factor * tmax));
            let p = polish(&setup, p);
            iterations += it;
            let obj = sq(&setup.target.residuals(&setup.host_model, &p, setup.activation, false).0);
            if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
                best = Some((obj, p, ok));
            }
        }
        let (_, p, ok) = best.expect("at least one start");
        params = p;
        converged = ok;
    }

    let (r, _) = setup
        .target
        .residuals(&setup.host_model, &params, setup.activation, false);
    let reduced_tf = params.transfer_function(setup.activation);
    let mut reduced_model = setup.host_model.clone();
    reduced_model.branches.push(reduced_tf);
    let mape = evaluate_mape(&full.in_host(host), &reduced_model, &setup.pool)?;
    let (h_vppg, h_vppr) = (full.h_vppg, full.h_vppr);
    Ok(AggregateVpp {
        name: full.name.clone(),
        h_vppg,
        h_vppr,
        order: config.order,
        k_vpp: params.dc_gain(),
        t_vpp: (config.order == 1).then(|| params.den[0]),
        activation: setup.activation,
        reduced: params,
        report: FitReport {
            order: config.order,
            objective: mean_sq * sq(&r),
            lambda_nadir: config.lambda_nadir,
            lambda_qss: config.lambda_qss,
            scenario_count: config.scenarios,
            iterations,
            converged,
            t_nadir_full: setup.target.t_nadir,
            mape_nadir: mape.mape_nadir,
            mape_qss: mape.mape_qss,
        },
    })
}

const MIN_PARAM: f64 = 1e-6;

/// Time constants of an added lag, relative to the current slowest one.
const RAISE_FACTORS: [f64; 3] = [0.1, 0.5, 1.0];

/// Adam-scaled minibatch descent in coordinates relative to the start point.
fn descend(setup: &Setup, config: &FitConfig, start: ReducedParams) -> (ReducedParams, usize, bool) {
    let order = start.order();
    let scale: Vec<f64> = start.theta().iter().map(|v| v.abs().max(1e-3)).collect();
    let np = scale.len();
    let mut phi: Vec<f64> = start.theta().iter().zip(&scale).map(|(t, s)| t / s).collect();
    let to_params = |phi: &[f64]| {
        let th: Vec<f64> = phi.iter().zip(&scale).map(|(p, s)| p * s).collect();
        ReducedParams::from_theta(order, &th)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (order as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let (b1, b2, eps) = (0.9, 0.999, 1e-12);
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut best = start.clone();
    let (mut best_obj, _) = unit_objective(&setup.target, &setup.host_model, &start, setup.activation);
    let mut last = best_obj;
    let mut quiet = 0;
    let mut it = 0;
    while it < config.max_iterations {
        it += 1;
        let batch: Vec<f64> = (0..config.batch_size)
            .map(|_| setup.pool[rng.random_range(0..setup.pool.len())])
            .collect();
        let batch_sq = compensated_sum(batch.iter().map(|d| d * d)) / batch.len() as f64;
        let p = to_params(&phi);
        let (obj, g) = unit_objective(&setup.target, &setup.host_model, &p, setup.activation);
        if obj < best_obj {
            best_obj = obj;
            best = p.clone();
        }
        let rel = (last - obj).abs() / obj.max(f64::MIN_POSITIVE);
        quiet = if rel < config.tolerance { quiet + 1 } else { 0 };
        if quiet >= 20 || obj == 0.0 {
            return (best, it, true);
        }
        last = obj;
        let lr = config.learning_rate / (1.0 + config.decay * it as f64);
        let bc1 = 1.0 - b1_pow(b1, it);
        let bc2 = 1.0 - b1_pow(b2, it);
        let mut step = vec![0.0; np];
        for k in 0..np {
            let gk = batch_sq * g[k] * scale[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            step[k] = lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
        }
        // reject unstable candidates by halving the step
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = phi
                .iter()
                .zip(&step)
                .zip(&scale)
                .map(|((p, s), sc)| (p - s).max(MIN_PARAM / sc))
                .collect();
            if to_params(&cand).is_admissible() {
                phi = cand;
                accepted = true;
                break;
            }
            for s in &mut step {
                *s *= 0.5;
            }
        }
        if !accepted {
            break;
        }
    }
    let p = to_params(&phi);
    let (obj, _) = unit_objective(&setup.target, &setup.host_model, &p, setup.activation);
    if obj < best_obj {
        best = p;
    }
    (best, it, false)
}

fn b1_pow(b: f64, it: usize) -> f64 {
    b.powi(it.min(i32::MAX as usize) as i32)
}

/// Levenberg-Marquardt on the four residuals from the descent result.
fn polish(setup: &Setup, start: ReducedParams) -> ReducedParams {
    let order = start.order();
    let mut th = start.theta();
    let np = th.len();
    let (mut r, mut jac) = setup
        .target
        .residuals(&setup.host_model, &start, setup.activation, true);
    let mut obj = sq(&r);
    let mut mu = 1e-3;
    for _ in 0..100 {
        // normal equations in relative coordinates
        let mut a = crate::linalg::Mat::zeros(np, np);
        let mut g = vec![0.0; np];
        for i in 0..np {
            for k in 0..4 {
                g[i] += jac[i][k] * th[i] * r[k];
            }
            for j in 0..np {
                a[(i, j)] = (0..4).map(|k| jac[i][k] * th[i] * jac[j][k] * th[j]).sum::<f64>();
            }
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut lhs = a.clone();
            for i in 0..np {
                lhs[(i, i)] += mu * (a[(i, i)] + 1e-12);
            }
            let rhs = crate::linalg::Mat::from_rows(&g.iter().map(|v| vec![-v]).collect::<Vec<_>>());
            let Some(d) = lhs.solve(&rhs) else {
                mu *= 10.0;
                continue;
            };
            let cand: Vec<f64> = (0..np)
                .map(|i| (th[i] * (1.0 + d[(i, 0)].clamp(-0.5, 0.5))).max(MIN_PARAM))
                .collect();
            let cp = ReducedParams::from_theta(order, &cand);
            if cp.is_admissible() {
                let (rc, jc) = setup.target.residuals(&setup.host_model, &cp, setup.activation, true);
                if sq(&rc) < obj {
                    th = cand;
                    r = rc;
                    jac = jc;
                    let rel = (obj - sq(&r)) / obj;
                    obj = sq(&r);
                    mu = (mu * 0.3).max(1e-12);
                    improved = rel > 1e-14;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved || obj < 1e-30 {
            break;
        }
    }
    ReducedParams::from_theta(order, &th)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapeReport {
    /// Mean absolute percentage error of the nadir, percent.
    pub mape_nadir: f64,
    /// Mean absolute percentage error of the quasi-steady state, percent.
    pub mape_qss: f64,
}

/// Simulates both models for every disturbance with the numerical oracle.
/// Nadirs come from 30 s trajectories; QSS values from DC gains.
pub fn evaluate_mape(
    full: &FrequencyModel<f64>,
    reduced: &FrequencyModel<f64>,
    disturbances: &[f64],
) -> Result<MapeReport, AggregationError> {
    let results: Vec<Result<(f64, f64), String>> = disturbances
        .par_iter()
        .map(|&d| {
            let a = full
                .simulate(d, NADIR_HORIZON_S, 1e-3)
                .map_err(|e| format!("full: {e}"))?;
            let b = reduced
                .simulate(d, NADIR_HORIZON_S, 1e-3)
                .map_err(|e| format!("reduced: {e}"))?;
            let qa = -d / full.total_droop();
            let qb = -d / reduced.total_droop();
            let pct = |x: f64, y: f64| if x == 0.0 { 0.0 } else { 100.0 * ((y - x) / x).abs() };
            Ok((pct(a.nadir, b.nadir), pct(qa, qb)))
        })
        .collect();
    let failed: Vec<(usize, String)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e.clone())))
        .collect();
    if !failed.is_empty() {
        return Err(AggregationError::ScenarioFailures(failed));
    }
    let ok: Vec<(f64, f64)> = results.into_iter().map(Result::unwrap).collect();
    let n = ok.len().max(1) as f64;
    Ok(MapeReport {
        mape_nadir: compensated_sum(ok.iter().map(|x| x.0)) / n,
        mape_qss: compensated_sum(ok.iter().map(|x| x.1)) / n,
    })
}
