//! Browser bindings. Every export returns a JSON string or throws a string.

use std::f64::consts::PI;

use cavity_cnot::config::Config;
use cavity_cnot::experiments::{run, ExperimentResult, Scenario};
use cavity_cnot::gate::{calibrate, LogicalEncoding};
use cavity_cnot::hamiltonian::PumpParams;
use wasm_bindgen::prelude::*;

const TWO_PI: f64 = 2.0 * PI;

fn to_js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn execute(cfg: &Config) -> Result<String, JsValue> {
    let result: ExperimentResult = run(cfg).map_err(to_js)?;
    serde_json::to_string(&result).map_err(to_js)
}

/// Gate timings for the kitten code. Rates in MHz.
#[wasm_bindgen]
pub fn calibration(chi_t_mhz: f64, chi_t_pump_mhz: f64, sideband_mhz: f64) -> Result<String, JsValue> {
    let mut cfg = Config::default();
    cfg.device.chi_t = TWO_PI * chi_t_mhz * 1e6;
    cfg.device.chi_t_pump = TWO_PI * chi_t_pump_mhz * 1e6;
    // Input is the two-photon branch rate √2·Ω_C.
    cfg.pump = PumpParams::with_rate(TWO_PI * sideband_mhz * 1e6 / 2f64.sqrt());
    cfg.validate().map_err(to_js)?;
    let report = calibrate(&cfg.device, &cfg.pump, LogicalEncoding::Kitten).map_err(to_js)?;
    let mut v = serde_json::to_value(&report).map_err(to_js)?;
    v["t_p_ns"] = serde_json::json!(report.timings.t_p * 1e9);
    v["t_w_ns"] = serde_json::json!(report.timings.t_w * 1e9);
    v["total_ns"] = serde_json::json!(report.timings.total() * 1e9);
    serde_json::to_string(&v).map_err(to_js)
}

/// f-level population against pulse length for several target Fock states.
#[wasm_bindgen]
pub fn chevron(control_photons: usize, t_max_ns: f64, points: usize, pump_shift: bool) -> Result<String, JsValue> {
    let mut cfg = Config::default();
    let spec = &mut cfg.experiment;
    spec.scenario = Scenario::Chevron;
    spec.chevron_control = control_photons;
    spec.chevron_t_max = t_max_ns * 1e-9;
    spec.chevron_points = points;
    spec.chevron_pump_shift = pump_shift;
    execute(&cfg)
}

/// Concurrence under the idle cross-Kerr, single-photon code. A
/// non-positive `t2_us` disables decoherence; T2 is capped at 2·T1.
#[wasm_bindgen]
pub fn crosskerr(chi_ct_khz: f64, t2_us: f64, wait_max_us: f64, points: usize) -> Result<String, JsValue> {
    let mut cfg = Config::default();
    cfg.device.chi_ct = TWO_PI * chi_ct_khz * 1e3;
    if t2_us > 0.0 {
        let coh = &mut cfg.coherence;
        coh.control_t2 = (t2_us * 1e-6).min(2.0 * coh.control_t1);
        coh.target_t2 = (t2_us * 1e-6).min(2.0 * coh.target_t1);
    }
    let spec = &mut cfg.experiment;
    spec.scenario = Scenario::CrosskerrConcurrence;
    spec.encoding = Some(LogicalEncoding::SinglePhoton);
    spec.decoherence = t2_us > 0.0;
    spec.spam = false;
    spec.wait_max = wait_max_us * 1e-6;
    spec.wait_points = points;
    execute(&cfg)
}
