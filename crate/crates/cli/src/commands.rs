use std::path::PathBuf;

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use vppfr_core::aggregation::{assemble_heterogeneous, fit_reduced_model, AggregateVpp};
use vppfr_core::dynamics::FrequencyTrajectory;
use vppfr_core::market::{frequency_audit, period_surfaces, settle, solve_pipeline, OfferBook, PipelineReport};
use vppfr_core::scenario::SystemScenario;
use vppfr_core::security::{build_pwl_surface, PwlNadirSurface, SurfaceConfig};

use crate::files::{load_scenario, read_artifact, Outputs};
use crate::report::{self, num};
use crate::{ClearingFile, ClearingInput, CliError, Command, InputRecord, Manifest, RunConfig, SimulateArgs};

/// Trajectories are written at this spacing, s.
const TRAJECTORY_SPACING_S: f64 = 0.01;

pub(crate) fn dispatch(config: &RunConfig) -> Result<Manifest, CliError> {
    let (s, inputs) = load_scenario(config.scenario.as_deref(), config.aggregates.as_deref())?;
    let seed = config.seed.unwrap_or(s.offers.seed);
    let name = config.command.name();
    info!("{name}: scenario {} with seed {seed}", s.name);
    let out = Outputs::new(&config.out, name, seed)?;
    match &config.command {
        Command::Aggregate => aggregate(config, &s, seed, out, inputs),
        Command::Simulate(args) => simulate(args, &s, out, inputs),
        Command::Security => security(config, &s, out, inputs),
        Command::Clear(args) => clear(config, args.surface.as_ref(), &s, seed, out, inputs),
        Command::Audit(args) => audit(config, args, &s, out, inputs),
        Command::Report(args) => report_cmd(config, args, &s, out, inputs),
    }
}

fn aggregate(
    config: &RunConfig,
    s: &SystemScenario,
    seed: u64,
    mut out: Outputs,
    inputs: Vec<InputRecord>,
) -> Result<Manifest, CliError> {
    let host = s.host_system();
    let fit = s.fit_config(config.order, seed);
    let fitted: Vec<AggregateVpp> = s
        .vpps
        .par_iter()
        .map(|v| {
            let full = assemble_heterogeneous(&v.portfolio, &s.delays)?;
            let mut a = fit_reduced_model(&full, &host, &fit)?;
            // files are keyed by the scenario's name for the VPP
            a.name = v.name.clone();
            info!(
                "{}: order {} nadir MAPE {:.3}% qss MAPE {:.3}%",
                a.name, a.order, a.report.mape_nadir, a.report.mape_qss
            );
            Ok(a)
        })
        .collect::<Result<_, CliError>>()?;
    let mut rows = Vec::new();
    for a in &fitted {
        out.toml(&format!("aggregates/{}.toml", a.name), a)?;
        rows.push(vec![
            a.name.clone(),
            a.order.to_string(),
            num(a.h_vppg),
            num(a.h_vppr),
            num(a.k_vpp),
            num(a.activation),
            num(a.report.mape_nadir),
            num(a.report.mape_qss),
            a.report.iterations.to_string(),
            a.report.converged.to_string(),
        ]);
    }
    out.csv(
        "aggregate_summary.csv",
        &[
            "vpp",
            "order",
            "h_vppg",
            "h_vppr",
            "k_vpp",
            "activation",
            "mape_nadir_pct",
            "mape_qss_pct",
            "iterations",
            "converged",
        ],
        &rows,
    )?;
    out.finish(inputs)
}

#[derive(Serialize)]
struct TrajectoryMetrics {
    rocof_max_hz_per_s: f64,
    t_nadir_s: f64,
    nadir_hz: f64,
    qss_hz: f64,
}

impl From<&FrequencyTrajectory<f64>> for TrajectoryMetrics {
    fn from(t: &FrequencyTrajectory<f64>) -> Self {
        TrajectoryMetrics {
            rocof_max_hz_per_s: t.rocof_max,
            t_nadir_s: t.t_nadir,
            nadir_hz: t.nadir,
            qss_hz: t.qss,
        }
    }
}

#[derive(Serialize)]
struct SimulationMetrics {
    vpp: String,
    delta_d_mw: f64,
    horizon_s: f64,
    step_s: f64,
    full: TrajectoryMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduced: Option<TrajectoryMetrics>,
}

fn simulate(
    args: &SimulateArgs,
    s: &SystemScenario,
    mut out: Outputs,
    inputs: Vec<InputRecord>,
) -> Result<Manifest, CliError> {
    let v = match &args.vpp {
        Some(name) => s
            .vpps
            .iter()
            .find(|v| &v.name == name)
            .ok_or_else(|| CliError::Usage(format!("no VPP named {name}")))?,
        None => s
            .vpps
            .first()
            .ok_or_else(|| CliError::Scenario("the scenario has no VPPs".into()))?,
    };
    if !(args.step > 0.0 && args.horizon > args.step) {
        return Err(CliError::Usage(format!(
            "need 0 < step < horizon, got step {} and horizon {}",
            args.step, args.horizon
        )));
    }
    let delta_d = args.delta_d.unwrap_or(s.disturbance.mean_mw);
    let host = s.host_system();
    let full = assemble_heterogeneous(&v.portfolio, &s.delays)?
        .in_host(&host)
        .simulate(delta_d, args.horizon, args.step)?;
    let reduced = match &v.aggregate {
        Some(a) => Some(
            a.in_host(&host, s.delays.tau1, s.delays.tau2)
                .simulate(delta_d, args.horizon, args.step)?,
        ),
        None => None,
    };

    let stride = ((TRAJECTORY_SPACING_S / args.step).round() as usize).max(1);
    let mut header = vec!["time_s", "df_full_hz"];
    if reduced.is_some() {
        header.push("df_reduced_hz");
    }
    let last = full.time.len().saturating_sub(1);
    let rows: Vec<Vec<String>> = (0..full.time.len())
        .filter(|&i| i % stride == 0 || i == last)
        .map(|i| {
            let mut row = vec![num(full.time[i]), num(full.df[i])];
            if let Some(r) = &reduced {
                row.push(num(r.df[i]));
            }
            row
        })
        .collect();
    out.csv("trajectory.csv", &header, &rows)?;
    out.json(
        "metrics.json",
        &SimulationMetrics {
            vpp: v.name.clone(),
            delta_d_mw: delta_d,
            horizon_s: args.horizon,
            step_s: args.step,
            full: (&full).into(),
            reduced: reduced.as_ref().map(Into::into),
        },
    )?;
    out.finish(inputs)
}

fn build_surface(config: &RunConfig, s: &SystemScenario) -> Result<PwlNadirSurface, CliError> {
    let mut sc = SurfaceConfig::from_scenario(s);
    if let Some(p) = config.planes {
        sc.planes = p;
    }
    let surface = build_pwl_surface(&sc)?;
    info!(
        "surface: {} planes, validation gap {:.4} Hz",
        surface.planes.len(),
        surface.stats.validation_max_gap_hz
    );
    Ok(surface)
}

fn security(
    config: &RunConfig,
    s: &SystemScenario,
    mut out: Outputs,
    inputs: Vec<InputRecord>,
) -> Result<Manifest, CliError> {
    let surface = build_surface(config, s)?;
    out.json("surface.json", &surface)?;
    let rows: Vec<Vec<String>> = surface
        .planes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                i.to_string(),
                num(p.kappa_h_to),
                num(p.kappa_k_g),
                num(p.kappa_k_fm),
                num(p.kappa_k_vpp),
                num(p.constant),
            ]
        })
        .collect();
    out.csv(
        "planes.csv",
        &[
            "plane",
            "kappa_h_to",
            "kappa_k_g",
            "kappa_k_fm",
            "kappa_k_vpp",
            "constant_hz",
        ],
        &rows,
    )?;
    out.finish(inputs)
}

#[derive(Serialize)]
struct ClearingSummary<'a> {
    scenario: &'a str,
    periods: usize,
    planes: usize,
    objective: f64,
    settlement_total_cost: f64,
    report: &'a PipelineReport,
    classes: &'a [vppfr_core::market::ClassSettlement],
}

fn clear(
    config: &RunConfig,
    surface_path: Option<&PathBuf>,
    s: &SystemScenario,
    seed: u64,
    mut out: Outputs,
    mut inputs: Vec<InputRecord>,
) -> Result<Manifest, CliError> {
    let reference = match surface_path {
        Some(p) => {
            let (surface, _, record): (PwlNadirSurface, u64, InputRecord) = read_artifact(p, "security")?;
            inputs.push(record);
            surface
        }
        None => build_surface(config, s)?,
    };
    let surfaces = period_surfaces(s, &reference);
    let offers = OfferBook::draw(s, Some(seed));
    let outcome = solve_pipeline(s, &offers, &surfaces)?;
    let settlement = settle(s, &outcome.solution, &outcome.prices, &offers);
    let file = ClearingFile {
        scenario: s.name.clone(),
        periods: s.periods,
        solution: outcome.solution,
        prices: outcome.prices,
        report: outcome.report,
        offers: outcome.offers,
    };
    out.json("clearing.json", &file)?;
    let (header, rows) = report::settlement_lines(&settlement);
    out.csv("settlement.csv", &header, &rows)?;
    out.json(
        "summary.json",
        &ClearingSummary {
            scenario: &s.name,
            periods: s.periods,
            planes: reference.planes.len(),
            objective: file.solution.objective,
            settlement_total_cost: settlement.total_cost,
            report: &file.report,
            classes: &settlement.classes,
        },
    )?;
    out.finish(inputs)
}

fn read_clearing(
    config: &RunConfig,
    args: &ClearingInput,
    s: &SystemScenario,
    inputs: &mut Vec<InputRecord>,
) -> Result<ClearingFile, CliError> {
    let path = args
        .clearing
        .clone()
        .unwrap_or_else(|| config.out.join("clearing.json"));
    let (c, _, record): (ClearingFile, u64, InputRecord) = read_artifact(&path, "clear")?;
    inputs.push(record);
    report::check_matches(s, &c)?;
    Ok(c)
}

fn audit(
    config: &RunConfig,
    args: &ClearingInput,
    s: &SystemScenario,
    mut out: Outputs,
    mut inputs: Vec<InputRecord>,
) -> Result<Manifest, CliError> {
    let c = read_clearing(config, args, s, &mut inputs)?;
    let a = frequency_audit(&c.solution, s)?;
    let rows: Vec<Vec<String>> = a
        .periods
        .iter()
        .map(|p| {
            vec![
                p.period.to_string(),
                num(p.delta_d),
                num(p.rocof),
                num(p.nadir),
                num(p.nadir_ode),
                num(p.t_nadir),
                num(p.qss),
                p.rocof_ok.to_string(),
                p.nadir_ok.to_string(),
                p.qss_ok.to_string(),
            ]
        })
        .collect();
    out.csv(
        "audit.csv",
        &[
            "period",
            "delta_d_mw",
            "rocof_hz_per_s",
            "nadir_hz",
            "nadir_ode_hz",
            "t_nadir_s",
            "qss_hz",
            "rocof_ok",
            "nadir_ok",
            "qss_ok",
        ],
        &rows,
    )?;
    out.json("audit.json", &a)?;
    let failed: Vec<usize> = a.periods.iter().filter(|p| !p.passes()).map(|p| p.period).collect();
    // the artifacts and manifest are written even when the audit fails
    let manifest = out.finish(inputs)?;
    if failed.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::Audit(failed))
    }
}

fn report_cmd(
    config: &RunConfig,
    args: &ClearingInput,
    s: &SystemScenario,
    mut out: Outputs,
    mut inputs: Vec<InputRecord>,
) -> Result<Manifest, CliError> {
    let c = read_clearing(config, args, s, &mut inputs)?;
    for t in report::tables(s, &c)? {
        let header: Vec<&str> = t.header.iter().map(String::as_str).collect();
        out.csv(&format!("{}.csv", t.name), &header, &t.rows)?;
    }
    out.finish(inputs)
}
