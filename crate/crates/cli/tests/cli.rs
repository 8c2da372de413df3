use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    out: PathBuf,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().expect("exit code")
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }

    fn json(&self) -> Value {
        serde_json::from_str(&fs::read_to_string(self.out.join("result.json")).unwrap()).unwrap()
    }
}

fn oscihom(dir: &Path, cmd: &str, config: Option<&str>, extra: &[&str], env: &[(&str, &str)]) -> Run {
    let out = dir.join(format!("out_{cmd}_{}", extra.join("_").replace('-', "")));
    let mut c = Command::new(env!("CARGO_BIN_EXE_oscihom"));
    c.arg(cmd).arg("--out").arg(&out).args(extra).env_remove("OSCIHOM_NODE_CAP");
    if let Some(text) = config {
        let path = dir.join(format!("{cmd}.json"));
        fs::write(&path, text).unwrap();
        c.arg("--config").arg(path);
    }
    for (k, v) in env {
        c.env(k, v);
    }
    Run { out, output: c.output().unwrap() }
}

const SINSIN: &str = "abs(sin(pi*y1)*sin(pi*y2))";

#[test]
fn classify_rational_direction() {
    let dir = TempDir::new().unwrap();
    let r = oscihom(dir.path(), "classify", Some(r#"{"v": [3, 4], "q": 10}"#), &[], &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let j = r.json();
    assert_eq!(j["result"]["class"], "rational");
    assert_eq!(j["result"]["m"], serde_json::json!([3, 4]));
    let csv = fs::read_to_string(r.out.join("result.csv")).unwrap();
    assert!(csv.starts_with("class,m1,m2,m3\nrational,3,4,"));
    for key in ["geometry", "periodic_field", "averaging", "oscillatory_integral", "pde", "cli"] {
        assert!(j["versions"][key].is_string(), "missing version of {key}");
    }
}

#[test]
fn unknown_key_reports_line_and_column() {
    let dir = TempDir::new().unwrap();
    let r = oscihom(dir.path(), "classify", Some("{\"v\": [3, 4],\n \"qq\": 1}"), &[], &[]);
    assert_eq!(r.code(), 1);
    let err = r.stderr();
    assert!(err.contains("classify.json:2:"), "{err}");
    assert!(err.contains("unknown field `qq`"), "{err}");
    assert!(!r.out.join("result.json").exists());
}

#[test]
fn expression_errors_report_the_column() {
    let dir = TempDir::new().unwrap();
    let r = oscihom(dir.path(), "average", Some(r#"{"g": "sin(2*pi*y1"}"#), &[], &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("expression 'g' at column"), "{}", r.stderr());
}

#[test]
fn missing_config_is_an_error() {
    let dir = TempDir::new().unwrap();
    let r = oscihom(dir.path(), "sweep", None, &[], &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("--config"));
}

#[test]
fn strict_rejects_undetermined_directions() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"v": [1, 1e-7], "q": 100}"#;
    let lax = oscihom(dir.path(), "classify", Some(cfg), &[], &[]);
    assert_eq!(lax.code(), 0);
    assert_eq!(lax.json()["result"]["class"], "undetermined");
    let strict = oscihom(dir.path(), "classify", Some(cfg), &["--strict"], &[]);
    assert_eq!(strict.code(), 1);
    assert!(strict.stderr().contains("--strict"));
}

#[test]
fn sandwich_holds_on_an_irrational_square() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        r#"{{"curve": {{"shape": "rotated_square", "origin": [0.1, 0.2], "side": 1, "angle": 0.9553166181245093}},
            "g": "{SINSIN}",
            "schedule": {{"kind": "geometric", "eps0": 1e-3, "ratio": 0.7, "count": 6}}}}"#
    );
    let r = oscihom(dir.path(), "sandwich", Some(&cfg), &[], &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let j = r.json();
    assert_eq!(j["pass"], true);
    assert_eq!(j["result"]["iddc_holds"], true);
    let dat = fs::read_to_string(r.out.join("sweep.dat")).unwrap();
    assert_eq!(dat.lines().count(), 7);
}

#[test]
fn failed_verdict_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"g": "sin(2*pi*y1)^2", "weyl": {"nu_prime": [0.41421356237309503], "n": 1000},
                  "tolerances": {"weyl_tol": 1e-12}}"#;
    let r = oscihom(dir.path(), "average", Some(cfg), &[], &[]);
    assert_eq!(r.code(), 2, "{}", r.stderr());
    assert_eq!(r.json()["verdicts"][0]["pass"], false);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg =
        r#"{"g": "sin(2*pi*y1)^2 + 0.5*abs(cos(pi*y1))", "weyl": {"nu_prime": [0.7071067811865476], "n": 20000}}"#;
    let a = oscihom(dir.path(), "average", Some(cfg), &["--seed", "7"], &[]);
    let first = fs::read(a.out.join("result.json")).unwrap();
    let b = oscihom(dir.path(), "average", Some(cfg), &["--seed", "7"], &[]);
    assert_eq!(a.code(), 0, "{}", a.stderr());
    assert_eq!(first, fs::read(b.out.join("result.json")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("\"weyl\""), "{text}");
}

#[test]
fn node_cap_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        r#"{{"curve": {{"shape": "circle", "center": [0, 0], "radius": 1}}, "g": "{SINSIN}",
            "schedule": {{"kind": "explicit", "epsilons": [1e-2]}}}}"#
    );
    let ok = oscihom(dir.path(), "sweep", Some(&cfg), &[], &[]);
    assert_eq!(ok.code(), 0, "{}", ok.stderr());
    let capped = oscihom(dir.path(), "sweep", Some(&cfg), &[], &[("OSCIHOM_NODE_CAP", "10")]);
    assert_eq!(capped.code(), 1);
    let err = capped.stderr();
    assert!(err.contains("oscillatory_integral") && err.contains("cap is 10"), "{err}");
    let bad = oscihom(dir.path(), "sweep", Some(&cfg), &[], &[("OSCIHOM_NODE_CAP", "lots")]);
    assert_eq!(bad.code(), 1);
}

#[test]
fn dirichlet_on_the_disk_and_slab() {
    let dir = TempDir::new().unwrap();
    let disk = format!(
        r#"{{"domain": {{"kind": "disk", "center": [0, 0], "radius": 1}}, "g": "{SINSIN}", "f": null,
            "gamma0": null, "epsilon_schedule": null, "eval_points": [[0, 0]]}}"#
    );
    let r = oscihom(dir.path(), "dirichlet", Some(&disk), &[], &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let mean = r.json()["result"]["points"][0]["limits"]["mean"].as_f64().unwrap();
    assert!((mean - 4.0 / (std::f64::consts::PI * std::f64::consts::PI)).abs() < 1e-6, "{mean}");

    let slab = r#"{"domain": {"kind": "slab", "nu": [1, 0], "r1": 1, "r2": 1, "m": 0.3},
                   "g": "sin(2*pi*y1)^2", "eval_points": [[0.5, 0]]}"#;
    let r = oscihom(dir.path(), "dirichlet", Some(slab), &["--threads", "1"], &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let p = &r.json()["result"]["points"][0];
    let (lo, me, up) = (p["lower"].as_f64().unwrap(), p["mean"].as_f64().unwrap(), p["upper"].as_f64().unwrap());
    assert!(lo <= me && me <= up);
}

#[test]
fn neumann_rejects_incompatible_flux() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        r#"{{"domain": {{"kind": "disk", "center": [0, 0], "radius": 1}}, "g": "{SINSIN}",
            "eval_points": [[0, 0]]}}"#
    );
    let r = oscihom(dir.path(), "neumann", Some(&cfg), &[], &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("pde"), "{}", r.stderr());
}

#[test]
fn examples_reproduce_the_tables() {
    let dir = TempDir::new().unwrap();
    let r = oscihom(dir.path(), "examples", None, &[], &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let j = r.json();
    assert_eq!(j["pass"], true);
    assert_eq!(j["result"]["height_family"].as_array().unwrap().len(), 5);
    assert!(j["result"]["stadium_discontinuity"]["gap"].as_f64().unwrap() > 5e-3);
    for f in ["result.csv", "irrational_line.dat", "height_family.dat"] {
        assert!(r.out.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn sample_configs_parse() {
    use oscihom_cli::config::*;
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    load::<ClassifyConfig>(&dir.join("classify.json")).unwrap();
    load::<AverageConfig>(&dir.join("average.json")).unwrap();
    load::<TripleConfig>(&dir.join("triple.json")).unwrap();
    load::<SandwichConfig>(&dir.join("sandwich_square.json")).unwrap();
    for f in ["dirichlet_disk", "dirichlet_stadium", "neumann_disk", "slab"] {
        load::<ProblemConfig>(&dir.join(format!("{f}.json"))).unwrap();
    }
    let tmp = TempDir::new().unwrap();
    let slab = oscihom(tmp.path(), "dirichlet", Some(&fs::read_to_string(dir.join("slab.json")).unwrap()), &[], &[]);
    assert_eq!(slab.code(), 0, "{}", slab.stderr());
}
