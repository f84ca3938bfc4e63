use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};
use std::process::Command;

use yamabe_cli::{run, startup_self_tests, RunConfig, RunOptions};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn yamabe(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_yamabe"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_SPHERE: &str = r#"
command = "verify"

[surface]
kind = "sphere"
radius = 1.0

[grid]
nu = 32
nv = 16
"#;

#[test]
fn shipped_configs_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = RunConfig::load(&path).unwrap();
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn every_optional_block_round_trips() {
    let text = r#"
command = "vary"
n = 2
mode = "grid"

[surface]
kind = "parametric"
components = ["cos(u)*sin(v)", "sin(u)*sin(v)", "cos(v)"]
topology = "polar"

[ambient]
kind = "conformal_flat"
omega = "0.1*x*y"

[grid]
nu = 16
nv = 8

[collar]
method = "file"
path = "jets.json"
export = "out.json"

[anomaly]
omega = "u + r"
coordinates = "collar"

[vary]
f = ["1", "x*y"]
t0 = 0.01

[probe]
model = "hyperbolic-disc"
samples = 20

[sweep]
parameter = "geodesic_radius"
start = 0.5
stop = 1.5
steps = 3

[output]
dir = "o"

[tolerances]
scale = 2.0

[tolerances.overrides]
"renvol.energy_split" = 1e-4
"#;
    let cfg = RunConfig::parse(text).unwrap();
    let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.tolerances.get("renvol.energy_split", 1.0), 2e-4);
    assert_eq!(cfg.tolerances.get("other", 1.0), 2.0);
}

#[test]
fn config_errors_are_rejected() {
    for text in [
        "command = \"verify\"\nunknown = 3\n",
        "command = \"launch\"\n",
        "command = \"verify\"\n[surface]\nkind = \"torus\"\nmajor = 1.0\nminor = 2.0\n",
        "command = \"verify\"\n[surface]\nkind = \"ellipsoid\"\naxes = [1.0, 0.0, 1.0]\n",
        "command = \"verify\"\nn = 0\n",
    ] {
        assert!(RunConfig::parse(text).is_err(), "accepted: {text}");
    }
}

#[test]
fn startup_self_tests_pass() {
    let reports = startup_self_tests().unwrap();
    assert_eq!(reports.len(), 6);
}

#[test]
fn verify_unit_sphere_exits_zero_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMALL_SPHERE);
    let out = dir.path().join("out");
    let o = yamabe(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["checks", "config_echo", "fields", "globals"]);
    let checks = json["checks"].as_array().unwrap();
    assert!(checks.len() > 10);
    for c in checks {
        let mut k: Vec<&str> = c.as_object().unwrap().keys().map(String::as_str).collect();
        k.sort_unstable();
        assert_eq!(k, ["name", "pass", "residual", "tol"]);
        assert_eq!(c["pass"], true);
    }
    assert!((json["globals"]["energy"].as_f64().unwrap() + 2.0 * PI).abs() < 1e-10);
    assert_eq!(json["fields"]["phi_0"].as_array().unwrap().len(), 32 * 16);
}

#[test]
fn failed_check_exits_one_and_names_module_and_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMALL_SPHERE);
    let o = yamabe(&cfg, &dir.path().join("out"), &["--tol-scale", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("[renvol]") || err.contains("[yamabe]"), "{err}");
    assert!(err.contains("at node"), "{err}");
    assert!(dir.path().join("out/result.json").exists());
}

#[test]
fn config_and_domain_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "command = \"verify\"\nbogus = 1\n");
    assert_eq!(yamabe(&bad, &dir.path().join("o"), &[]).status.code(), Some(2));
    let missing = write_config(dir.path(), "missing.toml", "command = \"verify\"\n");
    assert_eq!(yamabe(&missing, &dir.path().join("o"), &[]).status.code(), Some(2));
    let domain = write_config(
        dir.path(),
        "domain.toml",
        "command = \"compute\"\nn = 3\n[surface]\nkind = \"torus\"\nmajor = 2.0\nminor = 1.0\n",
    );
    let o = yamabe(&domain, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        yamabe(&dir.path().join("nope.toml"), &dir.path().join("o"), &[])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn identical_configs_give_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMALL_SPHERE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        yamabe(&cfg, &a, &["--seed", "7", "--threads", "3"]).status.code(),
        Some(0)
    );
    assert_eq!(yamabe(&cfg, &b, &["--seed", "7"]).status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.join("result.json")).unwrap(),
        std::fs::read(b.join("result.json")).unwrap()
    );
}

#[test]
fn torus_sweep_finds_clifford_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.toml",
        r#"
command = "sweep"

[surface]
kind = "torus"
major = 2.0
minor = 1.0

[grid]
nu = 24
nv = 48

[sweep]
parameter = "torus_ratio"
start = 1.1
stop = 3.0
steps = 12
"#,
    );
    let out = dir.path().join("out");
    let o = yamabe(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let mut reader = csv::Reader::from_path(out.join("table.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["ratio", "energy", "oracle"]);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    let best = rows.iter().min_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert!((best[0] - SQRT_2).abs() < 0.2);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert!((json["globals"]["ratio_min"].as_f64().unwrap() - SQRT_2).abs() < 1e-3);
    assert!((json["globals"]["energy_min"].as_f64().unwrap() - PI * PI).abs() < 1e-5);
}

#[test]
fn vary_on_ellipsoid_matches_the_variation_formula() {
    let cfg = RunConfig::parse(
        r#"
command = "vary"

[surface]
kind = "ellipsoid"
axes = [1.0, 1.3, 0.7]

[grid]
nu = 64
nv = 64

[vary]
f = ["1", "x*x - y*y"]
"#,
    )
    .unwrap();
    let out = run(&cfg, &RunOptions::default()).unwrap();
    assert!(out.record.passed(), "{:?}", out.record.failures().collect::<Vec<_>>());
    assert!(out.record.globals["willmore_ratio"].is_finite());
    assert!(out.record.globals["willmore_ratio_spread"] < 1e-2);
}

#[test]
fn probe_and_geodesic_sweep_pass() {
    for name in ["probe_ball.toml", "sweep_geodesic.toml"] {
        let cfg = RunConfig::load(&configs_dir().join(name)).unwrap();
        let out = run(&cfg, &RunOptions::default()).unwrap();
        assert!(
            out.record.passed(),
            "{name}: {:?}",
            out.record.failures().collect::<Vec<_>>()
        );
        assert!(out.table.is_some());
    }
}

#[test]
fn anomaly_routes_agree_on_torus() {
    let cfg = RunConfig::load(&configs_dir().join("anomaly_torus.toml")).unwrap();
    let out = run(&cfg, &RunOptions::default()).unwrap();
    assert!(out.record.passed());
    let g = &out.record.globals;
    assert!(g["anomaly_difference"].abs() < 1e-9);
    assert!(g["min_area_anomaly"].is_finite());
}

#[test]
fn collar_export_and_import_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::parse(SMALL_SPHERE).unwrap();
    cfg.command = yamabe_cli::config::Command::Compute;
    cfg.collar.export = Some("jets.json".into());
    let first = run(&cfg, &RunOptions::default()).unwrap();
    let path = dir.path().join("jets.json");
    std::fs::write(&path, first.collar_export.as_ref().unwrap()).unwrap();

    cfg.collar.export = None;
    cfg.collar.method = yamabe_cli::config::CollarSource::File;
    cfg.collar.path = Some(path.to_string_lossy().into_owned());
    let second = run(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(first.record.fields, second.record.fields);
    assert_eq!(first.record.globals, second.record.globals);
}

#[test]
fn homogeneous_three_sphere_has_zero_obstruction() {
    let cfg = RunConfig::load(&configs_dir().join("compute_s3_homogeneous.toml")).unwrap();
    let out = run(&cfg, &RunOptions::default()).unwrap();
    assert!(out.record.fields["obstruction"][0].abs() < 1e-12);
    assert!(out.record.fields.contains_key("phi_2"));
}
