use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use echolab_cli::{CliError, Mode};
use serde_json::Value;

const SMALL: &str = r#"{
    "K": 1, "L": 1, "epsilon": 1e-3,
    "k_max": 2, "eta_max": 2, "p_max": 2,
    "time": {"dt": 0.05, "horizon": 4.0},
    "eta_grid": {"range": 30.0, "step": 0.25},
    "initial_data": {"kind": "modes", "waves": [{"k": 1, "eta": 1}, {"k": 1, "eta": -1}]},
    "kernel": {"modes": [1, 2]},
    "direct": {"modes": 2, "snapshot_every": 40},
    "echoes": {"source": "cascade"}
}"#;

fn echolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echolab")).args(args).output().expect("spawn echolab")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &str, config: &Path, out: &Path) {
    let o = echolab(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn missing_k_exits_with_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"L": 1, "epsilon": 1e-3}"#);
    let o = echolab(&["penrose", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "validation");
    assert_eq!(err["error"]["field"], "K");
}

#[test]
fn parse_errors_carry_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"K\": 1,\n  \"L\": 1\n  \"epsilon\": 1e-3\n}");
    let o = echolab(&["penrose", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
    assert_eq!(err["error"]["line"], 4);
}

#[test]
fn unknown_mode_is_a_usage_error() {
    assert!(!echolab(&["bogus"]).status.success());
    assert!(matches!("bogus".parse::<Mode>(), Err(CliError::Usage(_))));
    for m in Mode::ALL {
        assert_eq!(m.name().parse::<Mode>().unwrap(), m);
    }
}

#[test]
fn tolerance_flag_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = echolab(&["kernel", "--config", cfg.to_str().unwrap(), "--tol=-1"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["field"], "tol");
}

#[test]
fn penrose_reports_margin_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"K": 1, "L": 1, "epsilon": 1e-3}"#);
    let out = dir.path().join("out");
    run_ok("penrose", &cfg, &out);
    let report = json(&out.join("penrose.json"));
    let margin = report["margin"].as_f64().unwrap();
    assert!((margin - 0.484_216_503_46).abs() < 1e-6, "{margin}");
    assert_eq!(report["unstable"], false);
    let resolved = json(&out.join("resolved_config.json"));
    assert!(resolved.as_object().unwrap().len() >= 20);
    assert_eq!(resolved["p_max"], 4);
}

#[test]
fn kernel_and_cascade_csv_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    run_ok("kernel", &cfg, &out);
    run_ok("cascade", &cfg, &out);
    assert_eq!(header(&out.join("kernel.csv")), "k,t,re_G,im_G,envelope_bound");
    assert_eq!(header(&out.join("cascade_layers.csv")), "k,eta,p,t,re_rho,im_rho,re_E,im_E");
    assert_eq!(header(&out.join("cascade_field.csv")), "t,mode,re_E,im_E,sup_x_E");
    let text = fs::read_to_string(out.join("kernel.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 81);
    let row: Vec<&str> = text.lines().nth(5).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    let mantissa = row[2].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.replace('.', "").len(), 17, "{}", row[2]);
    let summary = json(&out.join("kernel_summary.json"));
    for k in summary.as_array().unwrap() {
        assert_eq!(k["envelope_violations"], 0);
        assert!(k["contour"]["max_rel_diff"].as_f64().unwrap() < 1e-3);
    }
}

#[test]
fn direct_writes_history_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    run_ok("direct", &cfg, &out);
    assert_eq!(header(&out.join("direct.csv")), "t,k_prime,re_E,im_E");
    let snaps: Vec<String> = {
        let mut v: Vec<String> = fs::read_dir(out.join("snapshots"))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    };
    assert_eq!(snaps, ["state_000000.bin", "state_000040.bin", "state_000080.bin"]);
    let bytes = fs::read(out.join("snapshots/state_000040.bin")).unwrap();
    assert_eq!(&bytes[..8], b"ECHOSNAP");
    let time = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
    assert!((time - 2.0).abs() < 1e-12);
    let summary = json(&out.join("direct_summary.json"));
    assert!(summary["mass_drift"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn echoes_and_bounds_reports_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    run_ok("echoes", &cfg, &out);
    run_ok("verify-bounds", &cfg, &out);
    let report = json(&out.join("echoes.json"));
    for e in report["echoes"].as_array().unwrap() {
        for field in ["mode", "time", "amplitude", "predicted_time", "order"] {
            assert!(e.get(field).is_some(), "missing {field} in {e}");
        }
    }
    for field in ["rate", "prefactor", "residual"] {
        assert!(report["decay"][field].is_number(), "decay.{field}");
    }
    let per_p = report["bounds"]["per_p"].as_array().unwrap();
    assert_eq!(per_p.len(), 2);
    for b in per_p {
        for field in ["p", "M_f", "M_rho"] {
            assert!(b[field].is_number(), "bounds.{field}");
        }
    }
    let bounds = json(&out.join("bounds.json"));
    assert_eq!(bounds["bounds"], report["bounds"]);
}

#[test]
fn tabulated_gaussian_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = String::from("eta,re_mu_hat,im_mu_hat\n");
    for j in -1200..=1200 {
        let eta = j as f64 * 0.01;
        let v = (2.0 * std::f64::consts::PI).sqrt() * (-eta * eta / 2.0).exp();
        table.push_str(&format!("{eta:.2},{v:.17e},0\n"));
    }
    fs::write(dir.path().join("mu.csv"), table).unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"K": 1, "L": 1, "epsilon": 1e-3,
            "equilibrium": {"kind": "table", "path": "mu.csv"},
            "penrose": {"k_max": 2}}"#,
    );
    let out = dir.path().join("out");
    run_ok("penrose", &cfg, &out);
    let margin = json(&out.join("penrose.json"))["margin"].as_f64().unwrap();
    assert!((margin - 0.484_216_5).abs() < 1e-3, "{margin}");
}

#[test]
fn bad_table_reports_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"K": 1, "L": 1, "epsilon": 1e-3, "equilibrium": {"kind": "table", "path": "absent.csv"}}"#,
    );
    let o = echolab(&["penrose", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["path"].as_str().unwrap().ends_with("absent.csv"));
}
