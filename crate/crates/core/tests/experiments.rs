use cavity_cnot::config::Config;
use cavity_cnot::experiments::*;
use cavity_cnot::gate::Logical;

fn cfg(json: &str) -> Config {
    Config::from_json_str(json).unwrap()
}

fn all_metrics_have_units(r: &ExperimentResult) {
    for (name, m) in &r.metrics {
        assert!(!m.unit.is_empty(), "{name} has no unit");
    }
    for s in &r.series {
        assert!(!s.x_unit.is_empty() && !s.y_unit.is_empty(), "{}", s.name);
        assert_eq!(s.x.len(), s.y.len());
    }
}

#[test]
fn written_files_are_bit_identical_across_runs() {
    let c = cfg(r#"{"experiment": {"scenario": "bell", "tomography": true, "shots": 200}}"#);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = run(&c).unwrap().write(a.path()).unwrap();
    let pb = run(&c).unwrap().write(b.path()).unwrap();
    assert_eq!(pa.len(), pb.len());
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    let stem = format!("bell_{}", c.hash());
    assert!(pa.iter().any(|p| p.file_name().unwrap() == format!("{stem}.json").as_str()));
    assert!(pa.iter().any(|p| p.file_name().unwrap() == format!("{stem}_rho_out.csv").as_str()));
}

#[test]
fn seed_changes_shot_noise_only() {
    let a = run(&cfg(r#"{"seed": 1, "experiment": {"tomography": true, "shots": 300}}"#)).unwrap();
    let b = run(&cfg(r#"{"seed": 2, "experiment": {"tomography": true, "shots": 300}}"#)).unwrap();
    assert_ne!(a.value("f_bell"), b.value("f_bell"));
    let x = run(&cfg(r#"{"seed": 1}"#)).unwrap();
    let y = run(&cfg(r#"{"seed": 2}"#)).unwrap();
    assert_eq!(x.value("f_bell"), y.value("f_bell"));
}

#[test]
fn noise_never_helps() {
    for enc in ["kitten", "single_photon"] {
        let on = run(&cfg(&format!(r#"{{"experiment": {{"encoding": "{enc}", "spam": false}}}}"#))).unwrap();
        let off = run(&cfg(&format!(r#"{{"experiment": {{"encoding": "{enc}", "spam": false, "decoherence": false}}}}"#))).unwrap();
        let spam = run(&cfg(&format!(r#"{{"experiment": {{"encoding": "{enc}"}}}}"#))).unwrap();
        let (f_on, f_off, f_spam) = (on.value("f_bell").unwrap(), off.value("f_bell").unwrap(), spam.value("f_bell").unwrap());
        assert!(f_on < f_off, "{enc}: {f_on} vs {f_off}");
        assert!(f_spam < f_on, "{enc}: {f_spam} vs {f_on}");
        assert!(f_off > 0.98);
        all_metrics_have_units(&spam);
    }
}

#[test]
fn control_in_zero_stays_separable() {
    let r = run(&cfg(r#"{"experiment": {"inputs": [["0", "X+"]]}}"#)).unwrap();
    assert!(r.value("concurrence").unwrap() <= 0.02);
    let r = run(&cfg(r#"{"experiment": {"inputs": [["X+", "0"]], "decoherence": false, "spam": false}}"#)).unwrap();
    assert!(r.value("concurrence").unwrap() > 0.98);
}

#[test]
fn ideal_qpt_recovers_cnot() {
    let r = run(&cfg(r#"{"experiment": {"scenario": "qpt", "decoherence": false, "spam": false}}"#)).unwrap();
    assert!(r.value("f_cnot").unwrap() > 0.99);
    assert!((r.value("f_identity").unwrap() - 1.0).abs() < 1e-9);
    assert!((r.value("chi_trace").unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(r.matrices["chi_cnot"].re.len(), 16);
}

#[test]
fn repeated_gate_fidelity_returns_every_other_gate_without_noise() {
    let r = run(&cfg(
        r#"{"experiment": {"scenario": "repeated_gate", "decoherence": false, "spam": false, "max_repetitions": 4, "inputs": [["1", "0"]]}}"#,
    ))
    .unwrap();
    let s = r.series_named("fidelity[1,0]").unwrap();
    assert_eq!(s.x.len(), 4);
    assert!(s.y.iter().all(|&f| f > 0.98));
    assert!(r.value("loss_per_gate[1,0]").unwrap().abs() < 0.2);
}

#[test]
fn zero_cross_kerr_has_unbounded_onoff_ratio() {
    let r = run(&cfg(r#"{"device": {"chi_ct": 0.0}, "experiment": {"scenario": "onoff_ratio"}}"#)).unwrap();
    assert!(r.value("onoff_ratio").unwrap().is_infinite());
    let json = serde_json::to_value(&r).unwrap();
    assert!(json["metrics"]["onoff_ratio"]["value"].is_null());
    let d = run(&cfg(r#"{"experiment": {"scenario": "onoff_ratio"}}"#)).unwrap();
    // π / (n_C · n̄_T · 2π·χ_CT · t_g) with n_C = 2, n̄_T = 2.
    let chi = d.value("omega_res").unwrap() / 4.0;
    let oracle = 1.0 / (2.0 * 4.0 * chi * d.value("gate_time").unwrap());
    assert!((d.value("onoff_ratio").unwrap() - oracle).abs() < 1e-9 * oracle);
}

#[test]
fn empty_control_gives_flat_chevron() {
    let r = run(&cfg(r#"{"experiment": {"scenario": "chevron", "chevron_control": 0, "chevron_points": 101}}"#)).unwrap();
    for s in &r.series {
        assert!(s.y.iter().all(|&p| p.abs() < 1e-12), "{}", s.name);
    }
    assert_eq!(r.value("sideband_rate"), Some(0.0));
}

#[test]
fn chevron_contrast_drops_off_resonance() {
    let r = run(&cfg(r#"{"experiment": {"scenario": "chevron", "chevron_points": 401}}"#)).unwrap();
    assert!(r.value("oracle_deviation").unwrap() < 1e-6);
    let c2 = r.value("contrast[n_T=2]").unwrap();
    assert!(r.value("contrast[n_T=0]").unwrap() < c2);
    assert!(r.value("contrast[n_T=4]").unwrap() < c2);
    all_metrics_have_units(&r);
}

#[test]
fn noiseless_crosskerr_matches_oracle() {
    let r = run(&cfg(
        r#"{"experiment": {"scenario": "crosskerr_concurrence", "wait_points": 61, "decoherence": false, "spam": false}}"#,
    ))
    .unwrap();
    assert!(r.value("oracle_deviation[separable]").unwrap() <= 1e-6);
    assert!(r.value("oracle_deviation[bell]").unwrap() <= 1e-6);
    let (fit, truth) = (r.value("chi_ct_fit").unwrap(), r.value("chi_ct_config").unwrap());
    assert!((fit - truth).abs() < 0.01 * truth.abs());
}

#[test]
fn concurrence_fit_recovers_synthetic_parameters() {
    let truth = ConcurrenceFit { chi: 2.0 * std::f64::consts::PI * 2e3, gamma: 1.5e3, offset: 0.1, offset_rate: 4e3 };
    let t: Vec<f64> = (0..120).map(|k| k as f64 * 1e-3 / 119.0).collect();
    let sep: Vec<f64> = t.iter().map(|&x| truth.separable(x)).collect();
    let bell: Vec<f64> = t.iter().map(|&x| truth.bell(x)).collect();
    let fit = fit_concurrence(&t, &sep, &bell);
    assert!((fit.chi - truth.chi).abs() < 1e-3 * truth.chi);
    assert!((fit.gamma - truth.gamma).abs() < 0.05 * truth.gamma);
}

#[test]
fn helper_arithmetic() {
    let amps = product_amplitudes(Logical::One, Logical::Zero);
    let twice = cnot_power(amps, 2);
    assert!(amps.iter().zip(&twice).all(|(a, b)| (a - b).norm() < 1e-15));
    let once = cnot_power(amps, 1);
    assert!((once[3].norm() - 1.0).abs() < 1e-15);
    assert!((ols_slope(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-12);
}

#[test]
fn scenario_names_round_trip() {
    for s in Scenario::ALL {
        assert_eq!(Scenario::parse(s.name()), Some(s));
        assert!(!s.description().is_empty());
    }
    assert!(cavity_cnot::config::Config::from_json_str(r#"{"experiment": {"scenario": "nope"}}"#).is_err());
}
