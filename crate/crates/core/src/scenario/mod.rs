//! System scenarios: the structured-text document, its CSV profiles and the
//! resolved in-memory form used by security and market code.

mod bundled;
mod validate;

pub use bundled::{bundled_file, bundled_portfolio, bundled_scenario, BUNDLED_VPPS};
pub use validate::{validate_scenario, Violation};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{aggregate_inertia, assemble_heterogeneous, AggregateVpp, Delays, FitConfig, HostSystem};
use crate::models::VppPortfolio;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("{file} line {line}: {message}")]
    Csv { file: String, line: usize, message: String },
    #[error("unsupported schema_version {0}")]
    Schema(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub rocof_max_hz_per_s: f64,
    pub nadir_max_hz: f64,
    pub qss_max_hz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceModel {
    /// Per-period disturbance as a fraction of total load.
    pub load_fraction: f64,
    /// Distribution used when fitting VPP models, MW.
    pub mean_mw: f64,
    pub std_mw: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Series reactance, p.u. on `base_mva`.
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgUnit {
    pub name: String,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Inertia, MW·s/Hz.
    pub h: f64,
    /// Governor droop, MW/Hz.
    pub k: f64,
    /// Governor lag, s.
    pub t_g: f64,
    pub ramp_mw_per_h: f64,
    #[serde(default)]
    pub min_up_h: usize,
    #[serde(default)]
    pub min_down_h: usize,
    #[serde(default)]
    pub initially_on: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegSource {
    Wind,
    Pv,
}

/// Grid-forming renewable plant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegUnit {
    pub name: String,
    pub bus: usize,
    pub source: RegSource,
    pub capacity_mw: f64,
}

/// Grid-forming storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssUnit {
    pub name: String,
    pub bus: usize,
    pub power_mw: f64,
    pub energy_mwh: f64,
    pub efficiency: f64,
    pub soc0: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

/// Uniform ranges offer prices are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfferRanges {
    pub seed: u64,
    pub sg_energy: [f64; 2],
    pub reg_energy: [f64; 2],
    pub reg_inertia: [f64; 2],
    pub reg_droop: [f64; 2],
    pub ess_energy: [f64; 2],
    pub ess_inertia: [f64; 2],
    pub ess_droop: [f64; 2],
    pub vpp_energy_sg: [f64; 2],
    pub vpp_energy_other: [f64; 2],
    pub vpp_inertia: [f64; 2],
    pub vpp_droop: [f64; 2],
}

impl OfferRanges {
    pub(crate) fn named(&self) -> [(&'static str, [f64; 2]); 11] {
        [
            ("sg_energy", self.sg_energy),
            ("reg_energy", self.reg_energy),
            ("reg_inertia", self.reg_inertia),
            ("reg_droop", self.reg_droop),
            ("ess_energy", self.ess_energy),
            ("ess_inertia", self.ess_inertia),
            ("ess_droop", self.ess_droop),
            ("vpp_energy_sg", self.vpp_energy_sg),
            ("vpp_energy_other", self.vpp_energy_other),
            ("vpp_inertia", self.vpp_inertia),
            ("vpp_droop", self.vpp_droop),
        ]
    }
}

/// Sampling box of the nadir surface, at the day's largest disturbance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecuritySettings {
    pub planes: usize,
    /// Samples per axis.
    pub grid: usize,
    pub h_to: [f64; 2],
    pub k_g: [f64; 2],
    /// Range of `k_FM + k_VPP`.
    pub k_fast: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Profiles {
    load: String,
    reg: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct VppRef {
    name: String,
    bus: usize,
    portfolio: String,
    #[serde(default)]
    aggregate: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ScenarioDoc {
    schema_version: u32,
    name: String,
    periods: usize,
    dt_h: f64,
    base_mva: f64,
    buses: usize,
    reference_bus: usize,
    delays: Delays,
    boundaries: Boundaries,
    disturbance: DisturbanceModel,
    profiles: Profiles,
    offers: OfferRanges,
    security: SecuritySettings,
    #[serde(default)]
    branch: Vec<Branch>,
    #[serde(default)]
    sg: Vec<SgUnit>,
    #[serde(default)]
    reg: Vec<RegUnit>,
    #[serde(default)]
    ess: Vec<EssUnit>,
    #[serde(default)]
    vpp: Vec<VppRef>,
}

/// A VPP as seen by the system operator.
#[derive(Clone, Debug, PartialEq)]
pub struct VppEntry {
    pub name: String,
    pub bus: usize,
    pub portfolio: VppPortfolio,
    /// Fitted model, when one was supplied.
    pub aggregate: Option<AggregateVpp>,
}

/// Market-facing capabilities of a VPP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VppCapability {
    pub h_vppg: f64,
    pub h_vppr: f64,
    pub k_vpp: f64,
}

impl VppEntry {
    /// Inertia split and droop, from the fitted model when present and from
    /// the full-order aggregation otherwise.
    pub fn capability(&self, delays: &Delays) -> VppCapability {
        if let Some(a) = &self.aggregate {
            return VppCapability {
                h_vppg: a.h_vppg,
                h_vppr: a.h_vppr,
                k_vpp: a.k_vpp,
            };
        }
        let (h_vppg, h_vppr) = aggregate_inertia(&self.portfolio);
        let k_vpp = assemble_heterogeneous(&self.portfolio, delays)
            .map(|m| m.total_droop())
            .unwrap_or(0.0);
        VppCapability { h_vppg, h_vppr, k_vpp }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemScenario {
    pub schema_version: u32,
    pub name: String,
    pub periods: usize,
    pub dt_h: f64,
    pub base_mva: f64,
    /// Buses are numbered `1..=buses`.
    pub buses: usize,
    pub reference_bus: usize,
    pub delays: Delays,
    pub boundaries: Boundaries,
    pub disturbance: DisturbanceModel,
    pub offers: OfferRanges,
    pub security: SecuritySettings,
    pub branches: Vec<Branch>,
    pub sgs: Vec<SgUnit>,
    pub regs: Vec<RegUnit>,
    pub ess: Vec<EssUnit>,
    pub vpps: Vec<VppEntry>,
    /// `loads[t][bus - 1]`, MW.
    pub loads: Vec<Vec<f64>>,
    /// `reg_available[t][unit]`, MW.
    pub reg_available: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct LoadRow {
    period: usize,
    node: usize,
    mw: f64,
}

#[derive(Deserialize)]
struct RegRow {
    period: usize,
    unit: String,
    mw: f64,
}

fn parse_err(file: &str, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Parse {
        file: file.to_string(),
        message: e.to_string(),
    }
}

/// Rows of a profile CSV; line numbers count the header as line 1.
fn read_csv<R: serde::de::DeserializeOwned>(file: &str, text: &str) -> Result<Vec<(usize, R)>, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let row: R = rec.map_err(|e| ScenarioError::Csv {
            file: file.to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push((i + 2, row));
    }
    Ok(out)
}

impl SystemScenario {
    /// Parses a scenario document; `resolve` returns the text of files it
    /// references (profiles, portfolios, fitted models).
    pub fn parse(text: &str, resolve: &dyn Fn(&str) -> Result<String, ScenarioError>) -> Result<Self, ScenarioError> {
        let doc: ScenarioDoc = toml::from_str(text).map_err(|e| parse_err("scenario", e))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(doc.schema_version));
        }
        let n_t = doc.periods;

        let mut loads = vec![vec![0.0; doc.buses]; n_t];
        let load_text = resolve(&doc.profiles.load)?;
        for (line, r) in read_csv::<LoadRow>(&doc.profiles.load, &load_text)? {
            if r.period == 0 || r.period > n_t || r.node == 0 || r.node > doc.buses {
                return Err(ScenarioError::Csv {
                    file: doc.profiles.load.clone(),
                    line,
                    message: format!("period {} / node {} out of range", r.period, r.node),
                });
            }
            loads[r.period - 1][r.node - 1] += r.mw;
        }

        let index: BTreeMap<&str, usize> = doc.reg.iter().enumerate().map(|(i, u)| (u.name.as_str(), i)).collect();
        let mut reg_available = vec![vec![0.0; doc.reg.len()]; n_t];
        let reg_text = resolve(&doc.profiles.reg)?;
        for (line, r) in read_csv::<RegRow>(&doc.profiles.reg, &reg_text)? {
            let unit = index.get(r.unit.as_str()).copied();
            match unit {
                Some(j) if r.period >= 1 && r.period <= n_t => reg_available[r.period - 1][j] = r.mw,
                _ => {
                    return Err(ScenarioError::Csv {
                        file: doc.profiles.reg.clone(),
                        line,
                        message: format!("unknown unit {} or period {}", r.unit, r.period),
                    })
                }
            }
        }

        let mut vpps = Vec::new();
        for v in &doc.vpp {
            let ptext = resolve(&v.portfolio)?;
            let portfolio: VppPortfolio = toml::from_str(&ptext).map_err(|e| parse_err(&v.portfolio, e))?;
            let aggregate = match &v.aggregate {
                Some(path) => Some(toml::from_str(&resolve(path)?).map_err(|e| parse_err(path, e))?),
                None => None,
            };
            vpps.push(VppEntry {
                name: v.name.clone(),
                bus: v.bus,
                portfolio,
                aggregate,
            });
        }

        Ok(SystemScenario {
            schema_version: doc.schema_version,
            name: doc.name,
            periods: n_t,
            dt_h: doc.dt_h,
            base_mva: doc.base_mva,
            buses: doc.buses,
            reference_bus: doc.reference_bus,
            delays: doc.delays,
            boundaries: doc.boundaries,
            disturbance: doc.disturbance,
            offers: doc.offers,
            security: doc.security,
            branches: doc.branch,
            sgs: doc.sg,
            regs: doc.reg,
            ess: doc.ess,
            vpps,
            loads,
            reg_available,
        })
    }

    /// Loads a scenario file, resolving references relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| ScenarioError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let text = read(path)?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&text, &|name| read(&dir.join(name)))
    }

    pub fn total_load(&self, t: usize) -> f64 {
        self.loads[t].iter().sum()
    }

    /// Disturbance of period `t`, MW.
    pub fn delta_d(&self, t: usize) -> f64 {
        self.disturbance.load_fraction * self.total_load(t)
    }

    pub fn max_delta_d(&self) -> f64 {
        (0..self.periods).map(|t| self.delta_d(t)).fold(0.0, f64::max)
    }

    /// Droop-weighted governor lag of the SG fleet, s.
    pub fn t_gv(&self) -> f64 {
        let k: f64 = self.sgs.iter().map(|g| g.k).sum();
        if k > 0.0 {
            self.sgs.iter().map(|g| g.k * g.t_g).sum::<f64>() / k
        } else {
            self.sgs.iter().map(|g| g.t_g).sum::<f64>() / self.sgs.len().max(1) as f64
        }
    }

    /// The synchronous fleet with every unit online: the context VPP models
    /// are fitted in.
    pub fn host_system(&self) -> HostSystem {
        HostSystem {
            h_sync: self.sgs.iter().map(|g| g.h).sum(),
            h_gfm: 0.0,
            k_gfm: 0.0,
            k_gov: self.sgs.iter().map(|g| g.k).sum(),
            t_gov: self.t_gv(),
        }
    }

    /// Fit settings with this scenario's disturbance distribution.
    pub fn fit_config(&self, order: usize, seed: u64) -> FitConfig {
        FitConfig {
            order,
            seed,
            disturbance_mean: self.disturbance.mean_mw,
            disturbance_std: self.disturbance.std_mw,
            response_scale_hz: self.boundaries.nadir_max_hz,
            slope_scale_hz_per_s: self.boundaries.rocof_max_hz_per_s,
            ..FitConfig::default()
        }
    }

    /// The same system with its VPPs removed and their rated capacity spread
    /// over the SG, REG and storage fleets in proportion to each fleet's
    /// capacity. Unit ratings and rating-proportional parameters scale
    /// together.
    pub fn without_vpps(&self) -> SystemScenario {
        let vpp_mw: f64 = self.vpps.iter().map(|v| v.portfolio.rated_mw).sum();
        let sg_mw: f64 = self.sgs.iter().map(|g| g.p_max).sum();
        let reg_mw: f64 = self.regs.iter().map(|r| r.capacity_mw).sum();
        let ess_mw: f64 = self.ess.iter().map(|e| e.power_mw).sum();
        let rest = sg_mw + reg_mw + ess_mw;
        let scale = if rest > 0.0 { 1.0 + vpp_mw / rest } else { 1.0 };
        let mut s = self.clone();
        s.vpps.clear();
        for g in &mut s.sgs {
            g.p_min *= scale;
            g.p_max *= scale;
            g.h *= scale;
            g.k *= scale;
            g.ramp_mw_per_h *= scale;
        }
        for r in &mut s.regs {
            r.capacity_mw *= scale;
        }
        for row in &mut s.reg_available {
            for a in row.iter_mut() {
                *a *= scale;
            }
        }
        for e in &mut s.ess {
            e.power_mw *= scale;
            e.energy_mwh *= scale;
        }
        s.name = format!("{}-without-vpps", self.name);
        s
    }
}
