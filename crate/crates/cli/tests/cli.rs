use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vppfr_cli::{load_scenario, read_artifact, ClearingFile, Manifest};
use vppfr_core::scenario::bundled_file;

const BIN: &str = env!("CARGO_BIN_EXE_vppfr");

fn vppfr(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("VPPFR_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = vppfr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_category(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("not JSON: {text}"));
    v["error"].as_str().unwrap().to_string()
}

/// Writes periods `start..start + len` of the bundled day, loads and
/// renewable availability scaled by `scale`.
fn write_cut(dir: &Path, start: usize, len: usize, scale: f64) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let doc = bundled_file("ieee30.toml")
        .unwrap()
        .replace("periods = 24", &format!("periods = {len}"));
    std::fs::write(dir.join("ieee30.toml"), doc).unwrap();
    for csv in ["ieee30_load.csv", "ieee30_reg.csv"] {
        let mut lines = bundled_file(csv).unwrap().lines();
        let mut text = format!("{}\n", lines.next().unwrap());
        for l in lines {
            let f: Vec<&str> = l.split(',').collect();
            let period: usize = f[0].trim().parse().unwrap();
            if period > start && period <= start + len {
                let mw: f64 = f[2].trim().parse().unwrap();
                text.push_str(&format!("{},{},{}\n", period - start, f[1], mw * scale));
            }
        }
        std::fs::write(dir.join(csv), text).unwrap();
    }
    for v in ["vpp1.toml", "vpp2.toml", "vpp3.toml"] {
        std::fs::write(dir.join(v), bundled_file(v).unwrap()).unwrap();
    }
    dir.join("ieee30.toml")
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Schema version and subcommand in the form each file type carries them.
fn declared_schema(name: &str, bytes: &[u8]) -> Option<(u64, String)> {
    let text = std::str::from_utf8(bytes).ok()?;
    if name.ends_with(".csv") {
        let first = text.lines().next()?;
        let mut fields = BTreeMap::new();
        for kv in first.strip_prefix("# ")?.split(' ') {
            let (k, v) = kv.split_once('=')?;
            fields.insert(k, v);
        }
        Some((
            fields.get("schema_version")?.parse().ok()?,
            fields.get("subcommand")?.to_string(),
        ))
    } else if name.ends_with(".json") {
        let v: serde_json::Value = serde_json::from_str(text).ok()?;
        Some((v["schema_version"].as_u64()?, v["subcommand"].as_str()?.to_string()))
    } else if name.ends_with(".toml") {
        let v: toml::Value = toml::from_str(text).ok()?;
        Some((
            v.get("schema_version")?.as_integer()? as u64,
            v.get("subcommand")?.as_str()?.to_string(),
        ))
    } else {
        None
    }
}

fn csv_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            header
                .iter()
                .zip(r.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn run_pipeline(scenario: &Path, out: &Path) {
    let (sc, o) = (scenario.to_str().unwrap(), out.to_str().unwrap());
    ok(&["--scenario", sc, "--out", o, "--planes", "20", "security"]);
    let surface = out.join("surface.json");
    ok(&[
        "--scenario",
        sc,
        "--out",
        o,
        "clear",
        "--surface",
        surface.to_str().unwrap(),
    ]);
    ok(&["--scenario", sc, "--out", o, "audit"]);
    ok(&["--scenario", sc, "--out", o, "report"]);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = vppfr(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = vppfr(&["--order", "4", "security"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_are_categorised() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = vppfr(&["--out", o, "audit", "--clearing", "/nonexistent/clearing.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_category(&out), "missing_file");

    let out = vppfr(&["--out", o, "--scenario", "/nonexistent/system.toml", "security"]);
    assert_eq!(error_category(&out), "missing_file");

    let cut = write_cut(&dir.path().join("cut"), 0, 2, 1.0);
    std::fs::remove_file(dir.path().join("cut/vpp2.toml")).unwrap();
    let out = vppfr(&["--out", o, "--scenario", cut.to_str().unwrap(), "security"]);
    assert_eq!(error_category(&out), "missing_file");
}

#[test]
fn foreign_or_future_files_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    ok(&["--out", o, "--planes", "4", "security"]);
    // a surface is not a clearing
    let surface = dir.path().join("surface.json");
    let out = vppfr(&["--out", o, "audit", "--clearing", surface.to_str().unwrap()]);
    assert_eq!(error_category(&out), "schema");

    let text = std::fs::read_to_string(&surface)
        .unwrap()
        .replacen("\"schema_version\": 1", "\"schema_version\": 9", 1);
    let future = dir.path().join("future.json");
    std::fs::write(&future, text).unwrap();
    let out = vppfr(&["--out", o, "clear", "--surface", future.to_str().unwrap()]);
    assert_eq!(error_category(&out), "schema");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\nname = 3\n").unwrap();
    let out = vppfr(&["--out", o, "--scenario", bad.to_str().unwrap(), "security"]);
    assert_eq!(error_category(&out), "schema");
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .args(["--planes", "3", "security"])
        .env("VPPFR_OUT", dir.path())
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("surface.json").exists());
    assert!(dir.path().join("manifest_security.json").exists());

    // the flag wins over the environment
    let flagged = dir.path().join("flagged");
    let status = Command::new(BIN)
        .args(["--planes", "3", "--out", flagged.to_str().unwrap(), "security"])
        .env("VPPFR_OUT", dir.path().join("ignored"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flagged.join("surface.json").exists());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn short_pipeline_is_reproducible_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_cut(&dir.path().join("scenario"), 18, 3, 1.0);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_pipeline(&scenario, &a);
    run_pipeline(&scenario, &b);

    let (fa, fb) = (artifacts(&a), artifacts(&b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        if name.starts_with("manifest_") {
            continue;
        }
        assert!(bytes == &fb[name], "{name} differs between identical runs");
    }

    for (name, bytes) in &fa {
        let (version, sub) = declared_schema(name, bytes).unwrap_or_else(|| panic!("{name} declares no schema"));
        assert_eq!(version, 1, "{name}");
        if let Some(expected) = name.strip_prefix("manifest_").and_then(|n| n.strip_suffix(".json")) {
            assert_eq!(sub, expected);
        }
    }

    // manifests hash what they read and record the seed
    let m: Manifest = serde_json::from_slice(&fa["manifest_report.json"]).unwrap();
    assert_eq!(m.seed, 2024);
    assert!(m.inputs.iter().any(|i| i.path.ends_with("clearing.json")));
    assert!(m.inputs.iter().any(|i| i.path.ends_with("ieee30_load.csv")));
    let m: Manifest = serde_json::from_slice(&fa["manifest_clear.json"]).unwrap();
    let names: Vec<&str> = m.outputs.iter().map(|o| o.file.as_str()).collect();
    assert_eq!(names, ["clearing.json", "settlement.csv", "summary.json"]);

    for table in ["energy.csv", "inertia.csv", "droop.csv"] {
        let rows = csv_rows(&a.join(table));
        assert_eq!(rows.len(), 3, "{table}");
        let periods: Vec<&str> = rows.iter().map(|r| r["period"].as_str()).collect();
        assert_eq!(periods, ["0", "1", "2"]);
    }

    let (c, seed, _): (ClearingFile, u64, _) = read_artifact(&a.join("clearing.json"), "clear").unwrap();
    assert_eq!(seed, 2024);
    let summary = csv_rows(&a.join("settlement_summary.csv"));
    let total: f64 = summary.iter().find(|r| r["class"] == "total").unwrap()["cost"]
        .parse()
        .unwrap();
    assert!(
        (total - c.solution.objective).abs() <= 1e-6 * c.solution.objective.abs().max(1.0),
        "settlement {total} vs objective {}",
        c.solution.objective
    );
    let lines = csv_rows(&a.join("settlement.csv"));
    let line_cost: f64 = lines.iter().map(|r| r["cost"].parse::<f64>().unwrap()).sum();
    assert!((line_cost - total).abs() <= 1e-6 * total.abs().max(1.0));

    let audit = csv_rows(&a.join("audit.csv"));
    assert_eq!(audit.len(), 3);
    assert!(audit
        .iter()
        .all(|r| r["rocof_ok"] == "true" && r["nadir_ok"] == "true" && r["qss_ok"] == "true"));

    // a clearing of three periods does not describe a four-period day
    let longer = write_cut(&dir.path().join("longer"), 18, 4, 1.0);
    let out = vppfr(&[
        "--scenario",
        longer.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "report",
    ]);
    assert_eq!(error_category(&out), "mismatch");
}

#[test]
fn zero_load_gives_empty_but_valid_tables() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_cut(&dir.path().join("scenario"), 0, 2, 0.0);
    let out = dir.path().join("out");
    run_pipeline(&scenario, &out);
    for table in ["energy.csv", "inertia.csv", "droop.csv"] {
        let rows = csv_rows(&out.join(table));
        assert_eq!(rows.len(), 2, "{table}");
    }
    let energy = csv_rows(&out.join("energy.csv"));
    assert!(energy.iter().all(|r| r["load_mw"] == "0"));
    let audit = csv_rows(&out.join("audit.csv"));
    assert!(audit.iter().all(|r| r["delta_d_mw"] == "0"));
    let bytes = std::fs::read(out.join("settlement_summary.csv")).unwrap();
    assert_eq!(declared_schema("settlement_summary.csv", &bytes).unwrap().1, "report");
}

#[test]
fn fitted_models_feed_later_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("out");
    let os = o.to_str().unwrap();
    ok(&["--out", os, "--order", "1", "aggregate"]);
    let first = artifacts(&o);
    for v in ["VPP1", "VPP2", "VPP3"] {
        assert!(first.contains_key(&format!("aggregates/{v}.toml")), "{v}");
    }
    let summary = csv_rows(&o.join("aggregate_summary.csv"));
    assert_eq!(summary.len(), 3);
    assert!(summary.iter().all(|r| r["order"] == "1"));

    let agg = o.join("aggregates");
    let (s, inputs) = load_scenario(None, Some(&agg)).unwrap();
    assert!(s
        .vpps
        .iter()
        .all(|v| v.aggregate.as_ref().is_some_and(|a| a.order == 1)));
    assert!(inputs.iter().any(|i| i.path.ends_with("VPP2.toml")));

    ok(&[
        "--out",
        os,
        "--aggregates",
        agg.to_str().unwrap(),
        "simulate",
        "--vpp",
        "VPP2",
    ]);
    let rows = csv_rows(&o.join("trajectory.csv"));
    assert_eq!(rows.len(), 3001);
    let last = &rows[rows.len() - 1];
    let (full, reduced): (f64, f64) = (
        last["df_full_hz"].parse().unwrap(),
        last["df_reduced_hz"].parse().unwrap(),
    );
    assert!(full < 0.0 && reduced < 0.0);
    assert!(
        (full - reduced).abs() < 0.05 * full.abs(),
        "settled {full} vs {reduced}"
    );

    let out = vppfr(&["--out", os, "simulate", "--vpp", "VPP9"]);
    assert_eq!(error_category(&out), "usage");

    // fitting again gives the same bytes
    let again = dir.path().join("again");
    ok(&["--out", again.to_str().unwrap(), "--order", "1", "aggregate"]);
    let second = artifacts(&again);
    for (name, bytes) in second.iter().filter(|(n, _)| n.starts_with("aggregate")) {
        assert!(bytes == &first[name], "{name}");
    }
}
