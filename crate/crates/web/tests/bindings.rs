use cavity_cnot_web::{calibration, chevron, crosskerr};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn calibration_reports_nanoseconds() {
    let v = parse(calibration(1.9, 1.9, 11.0).unwrap());
    let tp = v["t_p_ns"].as_f64().unwrap();
    assert!((44.0..=54.0).contains(&tp), "{tp}");
    assert!(v["total_ns"].as_f64().unwrap() > tp);
}

#[test]
fn chevron_returns_one_series_per_target() {
    let v = parse(chevron(2, 300.0, 101, false).unwrap());
    let series = v["series"].as_array().unwrap();
    assert_eq!(series.len(), 4);
    assert!(series.iter().all(|s| s["y"].as_array().unwrap().len() == 101));
}

#[test]
fn crosskerr_without_noise_reaches_full_entanglement() {
    let v = parse(crosskerr(2.0, 0.0, 500.0, 41).unwrap());
    let sep = v["series"].as_array().unwrap().iter().find(|s| s["name"] == "concurrence[separable]").unwrap();
    let peak = sep["y"].as_array().unwrap().iter().map(|y| y.as_f64().unwrap()).fold(0.0, f64::max);
    assert!(peak > 0.99, "{peak}");
}
