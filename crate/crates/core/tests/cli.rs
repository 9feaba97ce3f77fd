use std::path::Path;
use std::process::Command;

use cavity_cnot::cli::main_with_args;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["cavity-cnot"];
    full.extend_from_slice(args);
    let code = main_with_args(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_hashed_result_with_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bell.json", r#"{"experiment": {"scenario": "bell"}}"#);
    let out_dir = dir.path().join("out");
    let (code, out, err) = invoke(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("f_bell"));

    let (code, effective, _) = invoke(&["validate-config", "--config", &cfg]);
    assert_eq!(code, 0);
    let effective: serde_json::Value = serde_json::from_str(&effective).unwrap();
    let hash = cavity_cnot::config::Config::from_file(Path::new(&cfg)).unwrap().hash();
    let path = out_dir.join(format!("bell_{hash}.json"));
    let result: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert!(result["metrics"]["f_bell"]["value"].as_f64().unwrap() > 0.8);
    assert_eq!(result["provenance"]["effective_config"], effective);
    assert_eq!(result["provenance"]["config_hash"], hash.as_str());
    assert!(out_dir.join(format!("bell_{hash}.csv")).exists());
}

#[test]
fn malformed_json_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\n  \"seed\": 1,\n  \"device\": {\n}");
    let (code, _, err) = invoke(&["validate-config", "--config", &cfg]);
    assert_eq!(code, 2);
    assert!(err.contains("line") && err.contains("column"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.json", r#"{"pump": {"omega_sbb": 1e6}}"#);
    let (code, _, err) = invoke(&["run", "--config", &cfg]);
    assert_eq!(code, 2);
    assert!(err.contains("pump.omega_sbb"), "{err}");
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let (code, _, err) = invoke(&["run", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read"));
}

#[test]
fn bad_arguments_exit_two_and_help_exits_zero() {
    assert_eq!(invoke(&["frobnicate"]).0, 2);
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("list-scenarios"));
}

#[test]
fn calibrate_reports_timings() {
    let dir = tempfile::tempdir().unwrap();
    let rate = 11e6 / 2f64.sqrt();
    let text = format!(r#"{{"device": {{"chi_t_pump": 1.9e6}}, "pump": {{"omega_sb": {rate}}}}}"#);
    let cfg = write_config(dir.path(), "cal.json", &text);
    let (code, out, err) = invoke(&["calibrate", "--config", &cfg]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let (tp, tw) = (v["t_p_ns"].as_f64().unwrap(), v["t_w_ns"].as_f64().unwrap());
    assert!((44.0..=54.0).contains(&tp), "{tp}");
    assert!((78.0..=88.0).contains(&tw), "{tw}");
    assert_eq!(v["encoding"], "kitten");
}

#[test]
fn list_scenarios_names_all() {
    let (code, out, _) = invoke(&["list-scenarios"]);
    assert_eq!(code, 0);
    for s in cavity_cnot::experiments::Scenario::ALL {
        assert!(out.lines().any(|l| l.starts_with(s.name())), "{}", s.name());
    }
}

#[test]
fn binary_honours_output_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "onoff.json", r#"{"experiment": {"scenario": "onoff_ratio"}}"#);
    let out_dir = dir.path().join("env_out");
    let status = Command::new(env!("CARGO_BIN_EXE_cavity-cnot"))
        .args(["run", "--config", &cfg])
        .env(cavity_cnot::cli::OUT_DIR_ENV, &out_dir)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let names: Vec<String> =
        std::fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().any(|n| n.starts_with("onoff_ratio_") && n.ends_with(".json")), "{names:?}");
}
