use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vppfr_core::aggregation::AggregateVpp;
use vppfr_core::market::{ClearingSolution, OfferBook, PipelineReport, PriceSchedule};
use vppfr_core::scenario::{bundled_file, validate_scenario, ScenarioError, SystemScenario};

use crate::CliError;

/// Version of every file this front-end writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub subcommand: String,
    pub seed: u64,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<OutputRecord>,
    pub versions: BTreeMap<String, String>,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
}

/// JSON artifacts carry their provenance next to the payload.
#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    subcommand: String,
    seed: u64,
    data: T,
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    subcommand: String,
}

/// Everything `audit` and `report` need from a clearing run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearingFile {
    pub scenario: String,
    pub periods: usize,
    pub solution: ClearingSolution,
    pub prices: PriceSchedule,
    pub report: PipelineReport,
    pub offers: OfferBook,
}

fn sha256(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    if source.kind() == std::io::ErrorKind::NotFound {
        CliError::MissingFile(path.display().to_string())
    } else {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

fn scenario_err(e: ScenarioError) -> CliError {
    match e {
        ScenarioError::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
            CliError::MissingFile(path)
        }
        ScenarioError::Io { path, source } => CliError::Io { path, source },
        ScenarioError::Parse { file, message } => CliError::Schema { file, message },
        ScenarioError::Csv { file, line, message } => CliError::Schema {
            file,
            message: format!("line {line}: {message}"),
        },
        ScenarioError::Schema(v) => CliError::Schema {
            file: "scenario".into(),
            message: format!("unsupported schema_version {v}"),
        },
    }
}

fn read_recorded(path: &Path, records: &RefCell<Vec<InputRecord>>) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    records.borrow_mut().push(InputRecord {
        path: path.display().to_string(),
        sha256: sha256(text.as_bytes()),
        bytes: text.len(),
    });
    Ok(text)
}

/// Reads and validates a scenario, optionally attaching fitted VPP models,
/// and records every file it touched.
pub fn load_scenario(
    path: Option<&Path>,
    aggregates: Option<&Path>,
) -> Result<(SystemScenario, Vec<InputRecord>), CliError> {
    let records = RefCell::new(Vec::new());
    let parsed = match path {
        Some(p) => {
            let dir = p.parent().unwrap_or(Path::new(".")).to_path_buf();
            let text = read_recorded(p, &records)?;
            let resolve = |name: &str| {
                let q = dir.join(name);
                read_recorded(&q, &records).map_err(|e| match e {
                    CliError::MissingFile(path) => ScenarioError::Io {
                        path,
                        source: std::io::ErrorKind::NotFound.into(),
                    },
                    other => ScenarioError::Parse {
                        file: q.display().to_string(),
                        message: other.to_string(),
                    },
                })
            };
            SystemScenario::parse(&text, &resolve)
        }
        None => {
            let resolve = |name: &str| {
                let text = bundled_file(name).ok_or_else(|| ScenarioError::Io {
                    path: format!("bundled:{name}"),
                    source: std::io::ErrorKind::NotFound.into(),
                })?;
                records.borrow_mut().push(InputRecord {
                    path: format!("bundled:{name}"),
                    sha256: sha256(text.as_bytes()),
                    bytes: text.len(),
                });
                Ok(text.to_string())
            };
            resolve("ieee30.toml").and_then(|text| SystemScenario::parse(&text, &resolve))
        }
    };
    let mut s = parsed.map_err(scenario_err)?;
    let violations = validate_scenario(&s);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(CliError::Scenario(list.join("; ")));
    }
    if let Some(dir) = aggregates {
        for v in &mut s.vpps {
            let file = dir.join(format!("{}.toml", v.name));
            let text = read_recorded(&file, &records)?;
            let schema = |message: String| CliError::Schema {
                file: file.display().to_string(),
                message,
            };
            let header: Header = toml::from_str(&text).map_err(|e| schema(e.to_string()))?;
            check_header(&file, header.schema_version, &header.subcommand, "aggregate")?;
            let a: AggregateVpp = toml::from_str(&text).map_err(|e| schema(e.to_string()))?;
            if a.name != v.name {
                return Err(schema(format!("model is for {}, not {}", a.name, v.name)));
            }
            v.aggregate = Some(a);
        }
    }
    Ok((s, records.into_inner()))
}

fn check_header(file: &Path, version: u32, subcommand: &str, expected: &str) -> Result<(), CliError> {
    if version != SCHEMA_VERSION {
        return Err(CliError::Schema {
            file: file.display().to_string(),
            message: format!("unsupported schema_version {version}"),
        });
    }
    if subcommand != expected {
        return Err(CliError::Schema {
            file: file.display().to_string(),
            message: format!("written by `{subcommand}`, expected `{expected}`"),
        });
    }
    Ok(())
}

/// Reads a JSON artifact written by `subcommand`, returning its payload, the
/// seed it was made with and an input record.
pub fn read_artifact<T: DeserializeOwned>(path: &Path, subcommand: &str) -> Result<(T, u64, InputRecord), CliError> {
    let records = RefCell::new(Vec::new());
    let text = read_recorded(path, &records)?;
    let env: Envelope<T> = serde_json::from_str(&text).map_err(|e| CliError::Schema {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    check_header(path, env.schema_version, &env.subcommand, subcommand)?;
    Ok((env.data, env.seed, records.into_inner().remove(0)))
}

/// Writes the artifacts of one run and, last, its manifest.
pub(crate) struct Outputs {
    dir: PathBuf,
    subcommand: &'static str,
    seed: u64,
    records: Vec<OutputRecord>,
    started: Instant,
    started_unix_s: u64,
}

impl Outputs {
    pub fn new(dir: &Path, subcommand: &'static str, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            subcommand,
            seed,
            records: Vec::new(),
            started: Instant::now(),
            started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.records.push(OutputRecord {
            file: rel.to_string(),
            sha256: sha256(bytes),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, data: &T) -> Result<(), CliError> {
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            subcommand: self.subcommand.to_string(),
            seed: self.seed,
            data,
        };
        let mut text = serde_json::to_string_pretty(&env).expect("artifacts serialise");
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// TOML with the provenance keys ahead of the payload.
    pub fn toml<T: Serialize>(&mut self, rel: &str, data: &T) -> Result<(), CliError> {
        let body = toml::to_string(data).expect("artifacts serialise");
        let text = format!(
            "schema_version = {SCHEMA_VERSION}\nsubcommand = \"{}\"\nseed = {}\n{body}",
            self.subcommand, self.seed
        );
        self.write(rel, text.as_bytes())
    }

    /// CSV preceded by one `#` comment line naming schema, subcommand and seed.
    pub fn csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        for r in rows {
            w.write_record(r).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory write");
        let mut bytes = format!(
            "# schema_version={SCHEMA_VERSION} subcommand={} seed={}\n",
            self.subcommand, self.seed
        )
        .into_bytes();
        bytes.extend(body);
        self.write(rel, &bytes)
    }

    pub fn finish(mut self, inputs: Vec<InputRecord>) -> Result<Manifest, CliError> {
        let versions = BTreeMap::from([
            ("vppfr-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("vppfr-core".to_string(), vppfr_core::VERSION.to_string()),
            ("schema".to_string(), SCHEMA_VERSION.to_string()),
        ]);
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            subcommand: self.subcommand.to_string(),
            seed: self.seed,
            inputs,
            outputs: std::mem::take(&mut self.records),
            versions,
            started_unix_s: self.started_unix_s,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join(format!("manifest_{}.json", self.subcommand));
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(manifest)
    }
}
