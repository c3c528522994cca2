use std::fs;
use std::path::Path;
use std::process::Command;

use preclt::harness::config::{load_config, Mode, Overrides};
use preclt::harness::run_cli;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("preclt").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("c.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const PAIR_CONFIG: &str = r#"{
  "mode": "pair",
  "distribution": "uniform",
  "sigma": {"kind": "diagonal", "ramp": true},
  "p": 12,
  "n": 48,
  "replicates": 300
}"#;

#[test]
fn simulate_twice_with_the_same_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), PAIR_CONFIG);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let (code_a, _, err_a) = cli(&["simulate", "--config", &cfg, "--seed", "42", "--workers", "1", "--out", a.to_str().unwrap()]);
    let (code_b, _, _) = cli(&["simulate", "--config", &cfg, "--seed", "42", "--workers", "8", "--out", b.to_str().unwrap()]);
    // 1 only signals a failed statistical verdict on this small run
    assert!(code_a <= 1, "{err_a}");
    assert_eq!(code_a, code_b);
    for file in ["samples.csv", "summary.json", "histogram.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    let c = tmp.path().join("c");
    cli(&["simulate", "--config", &cfg, "--seed", "43", "--out", c.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("samples.csv")).unwrap(), fs::read(c.join("samples.csv")).unwrap());
}

#[test]
fn report_rebuilds_the_summary_from_the_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), PAIR_CONFIG);
    let sim = tmp.path().join("sim");
    let (sim_code, _, err) = cli(&["simulate", "--config", &cfg, "--seed", "7", "--out", sim.to_str().unwrap()]);
    assert!(sim_code <= 1, "{err}");
    let rebuilt = tmp.path().join("rebuilt");
    let summary = sim.join("summary.json");
    let csv = sim.join("samples.csv");
    let (code, _, err) = cli(&[
        "report",
        "--config",
        summary.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        rebuilt.to_str().unwrap(),
    ]);
    assert_eq!(code, sim_code, "{err}");
    assert_eq!(
        fs::read_to_string(summary).unwrap(),
        fs::read_to_string(rebuilt.join("summary.json")).unwrap()
    );
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sim.join("summary.json")).unwrap()).unwrap();
    assert_eq!(echoed["seed"], 7);
    assert_eq!(echoed["config"]["p"], 12);
}

#[test]
fn empty_run_writes_skipped_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("empty");
    let (code, _, err) = cli(&[
        "simulate", "--mode", "single_entry", "--dist", "gaussian", "--p", "5", "--n", "20", "--replicates", "0",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let verdicts = fs::read_to_string(out.join("verdicts.txt")).unwrap();
    assert!(verdicts.contains("skipped"), "{verdicts}");
    let csv = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn sweep_emits_one_row_per_grid_point_with_the_limit_variance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let (code, _, err) = cli(&[
        "sweep", "--grid", "n=200,400,800", "--y", "0.5", "--dist", "uniform", "--replicates", "4", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "rho_limit").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let rho: f64 = row[col].parse().unwrap();
        assert!((rho - 1.4).abs() < 1e-12, "rho_limit {rho}");
    }
}

#[test]
fn exit_codes_cover_usage_check_and_io_failures() {
    assert_eq!(cli(&["frobnicate"]).0, 2);
    assert_eq!(cli(&["simulate", "--config", "/nonexistent/c.json"]).0, 3);
    assert_eq!(cli(&["simulate", "--mode", "single_entry", "--dist", "gaussian", "--p", "200", "--n", "100"]).0, 2);
    let status = Command::new(env!("CARGO_BIN_EXE_preclt")).arg("verify").arg("--fast").output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stdout));
}

#[test]
fn config_defaults_and_validation_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(
        tmp.path(),
        r#"{"mode": "single_entry", "distribution": "gaussian", "p": 50, "n": 200}"#,
    );
    let cfg = load_config(Some(Path::new(&path)), &Overrides::default()).unwrap();
    assert_eq!(cfg.replicates, 10_000);
    assert_eq!(cfg.mode, Mode::SingleEntry);
    assert!((cfg.y() - 0.25).abs() < 1e-15);

    let bad = write_config(tmp.path(), r#"{"mode": "single_entry", "distribution": "gaussian", "p": 200, "n": 100}"#);
    let e = load_config(Some(Path::new(&bad)), &Overrides::default()).unwrap_err();
    assert!(e.to_string().contains("p < n required"), "{e}");

    let wishart = write_config(tmp.path(), r#"{"mode": "wishart_cov", "distribution": "uniform", "p": 10, "n": 60}"#);
    assert!(load_config(Some(Path::new(&wishart)), &Overrides::default()).is_err());

    let broken = write_config(tmp.path(), "{\n  \"mode\": \"pair\",\n  \"p\": oops\n}");
    let e = load_config(Some(Path::new(&broken)), &Overrides::default()).unwrap_err();
    assert!(e.to_string().contains("line 3"), "{e}");
}
