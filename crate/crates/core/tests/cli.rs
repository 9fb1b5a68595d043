//! End-to-end runs of the `subharm` binary: exit codes, manifests, CSVs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const STEP: &str = r#"{"period": 2.0, "segments": [{"start": 0.0, "coeffs": [1.0]}, {"start": 1.0, "coeffs": [-2.0]}]}"#;

fn weight(hi: f64, lo: f64) -> Value {
    json!({"period": 2.0, "segments": [{"start": 0.0, "coeffs": [hi]}, {"start": 1.0, "coeffs": [lo]}]})
}

fn fixture(extra: Value) -> Value {
    let mut v = json!({
        "weight": serde_json::from_str::<Value>(STEP).unwrap(),
        "nonlinearity": {"family": "power", "p": 2.0},
        "rho": 300.0,
        "epsilon": 0.25,
        "harmonic": {"grid": 16}
    });
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    v
}

struct Run {
    out: Output,
    dir: PathBuf,
    _tmp: TempDir,
}

impl Run {
    fn code(&self) -> i32 {
        self.out.status.code().unwrap()
    }
    fn manifest(&self) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.dir.join("manifest.json")).unwrap()).unwrap()
    }
    fn has_manifest(&self) -> bool {
        self.dir.join("manifest.json").exists()
    }
    fn stdout(&self) -> String {
        String::from_utf8_lossy(&self.out.stdout).into_owned()
    }
}

fn run_raw(cmd: &str, config: Option<&str>, flags: &[&str]) -> Run {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("out");
    let mut c = Command::new(env!("CARGO_BIN_EXE_subharm"));
    c.arg(cmd).arg("--out").arg(&dir).args(flags);
    if let Some(cfg) = config {
        let p = tmp.path().join("config.json");
        std::fs::write(&p, cfg).unwrap();
        c.arg("--config").arg(p);
    }
    Run { out: c.output().unwrap(), dir, _tmp: tmp }
}

fn run(cmd: &str, config: &Value, flags: &[&str]) -> Run {
    run_raw(cmd, Some(&config.to_string()), flags)
}

fn without_timings(mut m: Value) -> Value {
    m.as_object_mut().unwrap().remove("timings");
    m
}

#[test]
fn weight_section_for_the_step() {
    let r = run("weight", &fixture(json!({})), &[]);
    assert_eq!(r.code(), 0);
    let w = &r.manifest()["results"]["weight"];
    assert_eq!(w["mean_value"], -1.0);
    assert_eq!(w["m"], 1);
    assert_eq!(w["constants"]["m1"], 0.25);
    assert_eq!(w["constants"]["m2"], 64.0);
    assert_eq!(w["a2_holds"], true);
    assert_eq!(w["f4"]["holds"], true);
    assert_eq!(r.manifest()["artifact"]["name"], "subharm");
}

#[test]
fn positive_integral_flags_a2() {
    let r = run("weight", &fixture(json!({"weight": weight(1.0, -0.5)})), &[]);
    assert_eq!(r.code(), 0);
    assert_eq!(r.manifest()["results"]["weight"]["a2_holds"], false);
}

#[test]
fn config_errors_abort_without_manifest() {
    let no_period = r#"{"weight": {"segments": [{"start": 0.0, "coeffs": [1.0]}]}}"#;
    for (cfg, what) in [
        (no_period.to_string(), "period"),
        (fixture(json!({"colour": 1})).to_string(), "colour"),
        ("{not json".to_string(), "key"),
    ] {
        let r = run_raw("weight", Some(&cfg), &[]);
        assert_eq!(r.code(), 2, "{what}");
        assert!(!r.has_manifest());
        assert!(String::from_utf8_lossy(&r.out.stderr).contains("config error"), "{what}");
    }
    assert_eq!(run_raw("harmonic", None, &[]).code(), 2);
    assert_eq!(run("harmonic", &fixture(json!({})), &["--workers", "0"]).code(), 2);
    assert_eq!(run("harmonic", &fixture(json!({})), &["--tol", "2"]).code(), 2);
}

#[test]
fn harmonic_fixture_and_csv() {
    let r = run("harmonic", &fixture(json!({})), &[]);
    assert_eq!(r.code(), 0);
    let h = &r.manifest()["results"]["harmonic"];
    assert_eq!(h["status"], "found");
    let s = &h["census"]["solutions"][0];
    assert!(s["residual"].as_f64().unwrap() <= 1e-8);
    assert!(s["spectrum"]["lambda0"].as_f64().unwrap() < -1e-8);
    assert!(h["checks"][0]["recurrence_3t"].as_f64().unwrap() < 1e-6);
    let csv = std::fs::read_to_string(r.dir.join("harmonic_1.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,u,du"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn positive_mean_exits_three_with_manifest() {
    let r = run("harmonic", &fixture(json!({"weight": weight(1.0, -0.5)})), &[]);
    assert_eq!(r.code(), 3);
    let h = &r.manifest()["results"]["harmonic"];
    assert_eq!(h["status"], "not_found");
    assert!(h["diagnostic"].as_str().unwrap().contains("mean"));
}

#[test]
fn seeded_runs_are_identical() {
    let cfg = fixture(json!({}));
    let a = run("harmonic", &cfg, &["--seed", "5"]);
    let b = run("harmonic", &cfg, &["--seed", "5"]);
    assert_eq!(a.code(), 0);
    assert_eq!(without_timings(a.manifest()), without_timings(b.manifest()));
    assert_eq!(a.manifest()["config"]["harmonic"]["jitter_seed"], 5);
    let csv = |r: &Run| std::fs::read(r.dir.join("harmonic_1.csv")).unwrap();
    assert_eq!(csv(&a), csv(&b));
}

#[test]
fn subharmonic_orders_and_skips() {
    let cfg = fixture(json!({"subharmonic": {"k": [3, 65], "j": [1, 2, 3]}}));
    let r = run("subharmonic", &cfg, &["--workers", "2"]);
    assert_eq!(r.code(), 4);
    let orders = r.manifest()["results"]["subharmonic"]["orders"].clone();
    let k3 = &orders[0];
    assert_eq!(k3["k"], 3);
    let pairs = k3["pairs"].as_array().unwrap();
    assert_eq!(pairs[0]["status"], "found");
    assert_eq!(pairs[0]["csv"].as_array().unwrap().len(), 2);
    assert_eq!(pairs[1]["status"], "skipped");
    assert_eq!(pairs[2]["status"], "skipped");
    assert!(pairs[2]["reason"].as_str().unwrap().contains("coprime"));
    assert_eq!(orders[1]["status"], "k_star_too_large");
    for f in pairs[0]["csv"].as_array().unwrap() {
        let text = std::fs::read_to_string(r.dir.join(f.as_str().unwrap())).unwrap();
        assert!(text.starts_with("t,u,du"));
    }
}

#[test]
fn subharmonic_at_k_star_exits_zero() {
    let r = run("subharmonic", &fixture(json!({})), &[]);
    assert_eq!(r.code(), 0);
    let s = &r.manifest()["results"]["subharmonic"];
    assert_eq!(s["k_star"], 3);
    let sols = s["orders"][0]["pairs"][0]["search"]["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 2);
    for x in sols {
        assert_eq!(x["zeros"].as_array().unwrap().len(), 2);
        assert!(x["minimal_period"]["distances"].as_object().unwrap().values().all(|d| d.as_f64().unwrap() > 1e-4));
    }
}

#[test]
fn empty_sweep_still_tabulates() {
    let cfg = fixture(json!({"weight": weight(1.0, -1.0), "sweep": {"parameter": "mu", "values": [0.5, 1.0]}}));
    let r = run("sweep", &cfg, &[]);
    assert_eq!(r.code(), 0);
    let s = &r.manifest()["results"]["sweep"];
    assert_eq!(s["rows"].as_array().unwrap().len(), 2);
    assert!(s["rows"].as_array().unwrap().iter().all(|x| x["status"] == "not_found"));
    assert!(s["threshold"].is_null());
}

#[test]
fn verify_passes_and_fault_injection_names_checks() {
    let r = run_raw("verify", None, &[]);
    assert_eq!(r.code(), 0, "{}", r.stdout());
    let v = r.manifest()["results"]["verify"].clone();
    assert_eq!(v["failed"], 0);
    let modules: std::collections::BTreeSet<String> =
        v["checks"].as_array().unwrap().iter().map(|c| c["module"].as_str().unwrap().to_string()).collect();
    assert_eq!(modules.len(), 6);

    let strict = run("verify", &json!({"verify": {"tolerance_scale": 1e-6, "modules": ["flow"]}}), &[]);
    assert_eq!(strict.code(), 1);
    assert!(strict.stdout().contains("FAIL flow::oscillator_closure"), "{}", strict.stdout());
    assert!(strict.has_manifest());

    assert_eq!(run("verify", &json!({"verify": {"modules": ["nope"]}}), &[]).code(), 2);
}

#[test]
fn manifest_path_is_printed() {
    let r = run("weight", &fixture(json!({})), &[]);
    assert!(r.stdout().trim_end().ends_with(&Path::new("out").join("manifest.json").display().to_string()));
}
