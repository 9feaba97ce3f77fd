//! Named end-to-end scenarios. Each runs from a cold start with only its
//! [`Config`] and returns labelled metrics, series and matrices.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dynamics::{collapse_operators, evolve_lindblad, sideband_trace, CoherenceParams, PulseSegment, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::gate::{
    apply_sequence, calibrate, codeword_vector, cnot_sequence, ideal_cnot_logical, logical_superposition, matched_frame_offset,
    CalibrationReport, GateTimings, Logical, LogicalEncoding, PulseSequence, Role,
};
use crate::hamiltonian::{sideband_omega, static_energy, DeviceParams, Frame};
use crate::hilbert::{c, exp_hermitian, fock, CMatrix, CVector, ModeLayout, QuantumState, C64, F, G};
use crate::par;
use crate::tomography::{
    calibrate_contrast, cavity_state, concurrence, contrast_from_vacuum, default_grid, depolarize_code_space, joint_wigner,
    pauli_labels, process_fidelity, project_to_qubits, qpt, spam_depolarization, state_fidelity, write_matrix_csv,
    MatrixJson, MleOptions, ProcessMatrix, Reconstructor, WignerOptions, PARITY_CONTRAST,
};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Bell,
    Qpt,
    RepeatedGate,
    CrosskerrConcurrence,
    Chevron,
    OnoffRatio,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Bell,
        Scenario::Qpt,
        Scenario::RepeatedGate,
        Scenario::CrosskerrConcurrence,
        Scenario::Chevron,
        Scenario::OnoffRatio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Bell => "bell",
            Scenario::Qpt => "qpt",
            Scenario::RepeatedGate => "repeated_gate",
            Scenario::CrosskerrConcurrence => "crosskerr_concurrence",
            Scenario::Chevron => "chevron",
            Scenario::OnoffRatio => "onoff_ratio",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Bell => "one CNOT on |X+>|0>: input and Bell-state fidelity, concurrence",
            Scenario::Qpt => "process tomography of the CNOT and of the identity (SPAM reference)",
            Scenario::RepeatedGate => "state fidelity after N = 1..max gates with linear-fit loss per gate",
            Scenario::CrosskerrConcurrence => "idle cross-Kerr entanglement for separable and Bell starts",
            Scenario::Chevron => "sideband f-population traces for target Fock states and the kitten",
            Scenario::OnoffRatio => "residual cross-Kerr rate and the on/off ratio pi/(Omega_res t_g)",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }

    fn default_encoding(self) -> LogicalEncoding {
        match self {
            Scenario::CrosskerrConcurrence => LogicalEncoding::SinglePhoton,
            _ => LogicalEncoding::Kitten,
        }
    }
}

/// Scenario selection and settings. Times in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// `null` picks single-photon for the cross-Kerr scenario and kitten otherwise.
    pub encoding: Option<LogicalEncoding>,
    /// Lindblad evolution with `coherence`; otherwise closed-system.
    pub decoherence: bool,
    /// Code-space depolarization of every prepared input.
    pub spam: bool,
    /// Identity-process fidelity the SPAM depolarization reproduces;
    /// `null` gives 0.92 (multiphoton) or 0.98 (single-photon).
    pub f_identity: Option<f64>,
    /// Infer states through joint-Wigner sampling and reconstruction.
    pub tomography: bool,
    /// Parity shots per Wigner point; `null` gives exact expectations.
    pub shots: Option<u64>,
    /// `null` calibrates from the device and pump.
    pub timings: Option<GateTimings>,
    /// Cavity dimensions `[control, target]`; `null` uses the smallest exact layout.
    pub layout: Option<[usize; 2]>,
    /// `[control, target]` logical input labels; `null` uses the scenario default.
    pub inputs: Option<Vec<[Logical; 2]>>,
    pub max_repetitions: usize,
    pub wait_max: f64,
    pub wait_points: usize,
    /// Control Fock number of the chevron traces.
    pub chevron_control: usize,
    pub chevron_targets: Vec<usize>,
    pub chevron_t_max: f64,
    pub chevron_points: usize,
    /// Use χ̃_T^pump in the chevron traces.
    pub chevron_pump_shift: bool,
    /// Gate duration entering the on/off ratio.
    pub gate_time: f64,
    /// Output directory; the CLI flag and environment variable take precedence.
    pub output: Option<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::Bell,
            encoding: None,
            decoherence: true,
            spam: true,
            f_identity: None,
            tomography: false,
            shots: None,
            timings: None,
            layout: None,
            inputs: None,
            max_repetitions: 20,
            wait_max: 1e-3,
            wait_points: 201,
            chevron_control: 2,
            chevron_targets: vec![0, 2, 4],
            chevron_t_max: 500e-9,
            chevron_points: 2001,
            chevron_pump_shift: false,
            gate_time: GateTimings::experimental().total(),
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn encoding(&self) -> LogicalEncoding {
        self.encoding.unwrap_or(self.scenario.default_encoding())
    }

    pub fn inputs(&self) -> Vec<[Logical; 2]> {
        use Logical::*;
        if let Some(v) = &self.inputs {
            return v.clone();
        }
        match self.scenario {
            Scenario::RepeatedGate => vec![[One, XMinus], [XPlus, XMinus], [One, Zero], [YPlus, YPlus], [Zero, XMinus]],
            _ => vec![[XPlus, Zero]],
        }
    }

    pub fn f_identity(&self) -> f64 {
        self.f_identity.unwrap_or(match self.encoding() {
            LogicalEncoding::SinglePhoton => 0.98,
            _ => 0.92,
        })
    }

    /// Full system layout (cavities plus ancilla).
    pub fn system_layout(&self) -> ModeLayout {
        let enc = self.encoding();
        match self.layout {
            Some([dc, dt]) => ModeLayout::system(dc, dt),
            None if self.scenario == Scenario::CrosskerrConcurrence => ModeLayout::system(2, 2),
            None => enc.minimal_layout(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let enc = self.encoding();
        let gate_scenario = matches!(self.scenario, Scenario::Bell | Scenario::Qpt | Scenario::RepeatedGate);
        if gate_scenario && matches!(enc, LogicalEncoding::Fock02 | LogicalEncoding::GeneralizedKitten) {
            return bad(format!("scenario `{}` needs the kitten or single_photon encoding", self.scenario.name()));
        }
        if self.scenario == Scenario::CrosskerrConcurrence && enc != LogicalEncoding::SinglePhoton {
            return bad("crosskerr_concurrence uses the single_photon encoding".into());
        }
        if self.scenario == Scenario::OnoffRatio && enc.control_photons().is_none() {
            return bad(format!("{} has no Fock control photon number", enc.name()));
        }
        if let Some([dc, dt]) = self.layout {
            let min = enc.minimal_layout();
            if dc < min.dims()[0] || dt < min.dims()[1] {
                return bad(format!("layout [{dc}, {dt}] cannot hold {} codewords", enc.name()));
            }
        }
        if let Some(f) = self.f_identity {
            if !(f > 0.0 && f <= 1.0) {
                return bad("f_identity must lie in (0, 1]".into());
            }
        }
        if let Some(t) = &self.timings {
            t.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.scenario == Scenario::RepeatedGate {
            if self.max_repetitions < 2 {
                return bad("repeated_gate needs max_repetitions >= 2".into());
            }
            if self.inputs().is_empty() {
                return bad("repeated_gate needs at least one input".into());
            }
        }
        if self.scenario == Scenario::Bell && self.inputs().is_empty() {
            return bad("bell needs an input".into());
        }
        if self.wait_points < 2 || !(self.wait_max > 0.0) {
            return bad("wait_points must be >= 2 and wait_max positive".into());
        }
        if self.chevron_points < 2 || !(self.chevron_t_max > 0.0) {
            return bad("chevron_points must be >= 2 and chevron_t_max positive".into());
        }
        if !(self.gate_time > 0.0) {
            return bad("gate_time must be positive".into());
        }
        Ok(())
    }
}

/// Scalar result. Non-finite values serialize as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub x_unit: String,
    pub y_label: String,
    pub y_unit: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub effective_config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub metrics: BTreeMap<String, Metric>,
    pub series: Vec<Series>,
    pub matrices: BTreeMap<String, MatrixJson>,
    pub calibration: Option<CalibrationReport>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    fn new(cfg: &Config) -> Self {
        Self {
            scenario: cfg.experiment.scenario,
            metrics: BTreeMap::new(),
            series: Vec::new(),
            matrices: BTreeMap::new(),
            calibration: None,
            provenance: Provenance {
                config_hash: cfg.hash(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                effective_config: serde_json::to_value(cfg).expect("config serializes"),
            },
        }
    }

    fn metric(&mut self, name: impl Into<String>, value: f64, unit: &str) {
        self.metrics.insert(name.into(), Metric { value, unit: unit.into() });
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).map(|m| m.value)
    }

    pub fn series_named(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Base file name `<scenario>_<confighash>`.
    pub fn stem(&self) -> String {
        format!("{}_{}", self.scenario.name(), self.provenance.config_hash)
    }

    /// Writes `<stem>.json`, `<stem>.csv` (long-format series) and one
    /// `<stem>_<matrix>.csv` per matrix. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let io = Error::Io;
        fs::create_dir_all(dir).map_err(io)?;
        let stem = self.stem();
        let mut written = Vec::new();

        let json = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))?;
        fs::write(&json, text + "\n").map_err(io)?;
        written.push(json);

        let csv = dir.join(format!("{stem}.csv"));
        let mut out = String::from("series,x_label,x_unit,y_label,y_unit,x,y\n");
        for s in &self.series {
            for (x, y) in s.x.iter().zip(&s.y) {
                out.push_str(&format!(
                    "{},{},{},{},{},{x:.12e},{y:.12e}\n",
                    s.name, s.x_label, s.x_unit, s.y_label, s.y_unit
                ));
            }
        }
        fs::write(&csv, out).map_err(io)?;
        written.push(csv);

        for (name, m) in &self.matrices {
            let path = dir.join(format!("{stem}_{name}.csv"));
            let mat = CMatrix::from_fn(m.re.len(), m.re.len(), |i, j| c(m.re[i][j], m.im[i][j]));
            let mut buf = Vec::new();
            write_matrix_csv(&mut buf, &mat, &m.basis).map_err(io)?;
            fs::write(&path, buf).map_err(io)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs the scenario selected in `cfg`.
pub fn run(cfg: &Config) -> Result<ExperimentResult> {
    cfg.validate()?;
    match cfg.experiment.scenario {
        Scenario::Bell => run_bell(cfg),
        Scenario::Qpt => run_qpt(cfg),
        Scenario::RepeatedGate => run_repeated_gate(cfg),
        Scenario::CrosskerrConcurrence => run_crosskerr(cfg),
        Scenario::Chevron => run_chevron(cfg),
        Scenario::OnoffRatio => run_onoff_ratio(cfg),
    }
}

/// Logical amplitudes of |a⟩|b⟩, index 2·control + target.
pub fn product_amplitudes(a: Logical, b: Logical) -> [C64; 4] {
    let [a0, a1] = a.amplitudes();
    let [b0, b1] = b.amplitudes();
    [a0 * b0, a0 * b1, a1 * b0, a1 * b1]
}

/// Amplitudes after `n` ideal CNOTs.
pub fn cnot_power(amps: [C64; 4], n: usize) -> [C64; 4] {
    let mut out = amps;
    if n % 2 == 1 {
        out.swap(2, 3);
    }
    out
}

/// Least-squares slope of y against x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn linspace(max: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| max * k as f64 / (points - 1) as f64).collect()
}

fn input_label(io: &[Logical; 2]) -> String {
    format!("{},{}", io[0].label(), io[1].label())
}

/// Infers a two-cavity state from a full-system one: the ancilla-g block,
/// optionally passed through joint-Wigner sampling with the parity
/// contrast, vacuum calibration and reconstruction.
struct Meter {
    grid: Vec<(C64, C64)>,
    recon: Option<Reconstructor>,
    shots: Option<u64>,
    seed: u64,
}

impl Meter {
    /// Reconstructs in the encoding's code-limited truncation regardless of
    /// the simulation layout.
    fn new(spec: &ExperimentSpec, seed: u64) -> Result<Self> {
        let grid = default_grid();
        let recon = if spec.tomography {
            let d = spec.encoding().minimal_layout().dims().to_vec();
            Some(Reconstructor::new(&grid, (d[0], d[1]), &MleOptions::default())?)
        } else {
            None
        };
        Ok(Self { grid, recon, shots: spec.shots, seed })
    }

    fn observe(&self, rho: &QuantumState, index: u64) -> Result<QuantumState> {
        let cav = cavity_state(rho)?;
        let Some(recon) = &self.recon else { return Ok(cav) };
        let seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(2 * index);
        let opts = WignerOptions { contrast: PARITY_CONTRAST, shots: self.shots, seed, ..WignerOptions::default() };
        let raw = joint_wigner(&cav, &self.grid, &opts)?;
        let vacuum = QuantumState::basis(cav.layout(), &[0, 0]);
        let origin = [(c(0.0, 0.0), c(0.0, 0.0))];
        let vac = joint_wigner(&vacuum, &origin, &WignerOptions { seed: seed + 1, ..opts })?;
        let contrast = contrast_from_vacuum(vac[0].value);
        if !(contrast > 0.0) {
            return Err(Error::Numeric(format!("vacuum calibration gave contrast {contrast}")));
        }
        recon.reconstruct(&calibrate_contrast(&raw, contrast))
    }
}

/// Everything a gate scenario needs: calibrated sequence, noise, SPAM and
/// the measurement chain.
struct Bench {
    enc: LogicalEncoding,
    layout: ModeLayout,
    sequence: PulseSequence,
    calibration: Option<CalibrationReport>,
    noise: Option<CoherenceParams>,
    p_spam: f64,
    meter: Meter,
}

impl Bench {
    fn new(cfg: &Config) -> Result<Self> {
        let spec = &cfg.experiment;
        let enc = spec.encoding();
        let layout = spec.system_layout();
        let (timings, calibration) = match spec.timings {
            Some(t) => (t, None),
            None => {
                let report = calibrate(&cfg.device, &cfg.pump, enc)?;
                (report.timings, Some(report))
            }
        };
        let sequence = cnot_sequence(&timings, &cfg.device, &cfg.pump, enc)?;
        let noise = spec.decoherence.then(|| cfg.coherence.clone());
        let p_spam = if spec.spam { spam_depolarization(spec.f_identity()) } else { 0.0 };
        let meter = Meter::new(spec, cfg.seed)?;
        Ok(Self { enc, layout, sequence, calibration, noise, p_spam, meter })
    }

    fn prepare_amps(&self, amps: &[C64; 4]) -> Result<QuantumState> {
        let psi = logical_superposition(self.enc, amps, &self.layout)?;
        if self.p_spam > 0.0 {
            depolarize_code_space(&psi, self.enc, self.p_spam)
        } else {
            Ok(psi)
        }
    }

    /// ⟨ψ|ρ|ψ⟩ for the logical state `amps` on the layout of `seen`.
    fn fidelity(&self, seen: &QuantumState, amps: &[C64; 4]) -> Result<f64> {
        state_fidelity(seen, &logical_superposition(self.enc, amps, seen.layout())?)
    }

    fn gate(&self, state: &QuantumState) -> Result<QuantumState> {
        apply_sequence(state, &self.sequence, self.noise.as_ref())
    }

    fn timing_metrics(&self, res: &mut ExperimentResult) {
        let t = &self.sequence.timings;
        res.metric("t_p", t.t_p, "s");
        res.metric("t_w", t.t_w, "s");
        res.metric("gate_time", t.total(), "s");
        res.metric("spam_depolarization", self.p_spam, "1");
        res.calibration = self.calibration.clone();
    }
}

fn logical_labels() -> Vec<String> {
    ["00", "01", "10", "11"].iter().map(|s| s.to_string()).collect()
}

/// Input and Bell-state fidelity of one gate on the first configured input.
pub fn run_bell(cfg: &Config) -> Result<ExperimentResult> {
    let bench = Bench::new(cfg)?;
    let [a, b] = cfg.experiment.inputs()[0];
    let amps = product_amplitudes(a, b);
    let input = bench.prepare_amps(&amps)?;
    let output = bench.gate(&input)?;
    let seen_in = bench.meter.observe(&input, 0)?;
    let seen_out = bench.meter.observe(&output, 1)?;

    let f_in = bench.fidelity(&seen_in, &amps)?;
    let f_out = bench.fidelity(&seen_out, &cnot_power(amps, 1))?;
    let proj_in = project_to_qubits(&seen_in, bench.enc)?;
    let proj_out = project_to_qubits(&seen_out, bench.enc)?;

    let mut res = ExperimentResult::new(cfg);
    bench.timing_metrics(&mut res);
    res.metric("f_in", f_in, "1");
    res.metric("f_bell", f_out, "1");
    res.metric("concurrence_in", concurrence(&proj_in.rho), "1");
    res.metric("concurrence", concurrence(&proj_out.rho), "1");
    res.metric("leakage", proj_out.leakage, "1");
    res.matrices.insert("rho_in".into(), MatrixJson::new(&proj_in.rho, logical_labels()));
    res.matrices.insert("rho_out".into(), MatrixJson::new(&proj_out.rho, logical_labels()));
    Ok(res)
}

/// Shot-noise stream index derived from the input ket, so parallel jobs
/// stay reproducible.
fn ket_seed(psi: &QuantumState) -> u64 {
    let v = psi.as_ket().expect("tomography inputs are kets");
    v.iter().fold(0u64, |h, z| (h.rotate_left(7) ^ z.re.to_bits() ^ z.im.to_bits().rotate_left(3)).wrapping_mul(0x100_0000_01B3))
        & !1
}

/// Process tomography of the gate and of state preparation alone.
pub fn run_qpt(cfg: &Config) -> Result<ExperimentResult> {
    let bench = Bench::new(cfg)?;
    let prep = |psi: &QuantumState| -> Result<QuantumState> {
        if bench.p_spam > 0.0 {
            depolarize_code_space(psi, bench.enc, bench.p_spam)
        } else {
            Ok(psi.clone())
        }
    };
    let gate_runner = |psi: &QuantumState| -> Result<QuantumState> {
        let out = bench.gate(&prep(psi)?)?;
        bench.meter.observe(&out, ket_seed(psi))
    };
    let id_runner = |psi: &QuantumState| -> Result<QuantumState> {
        bench.meter.observe(&prep(psi)?, ket_seed(psi) ^ 1)
    };
    let chi = qpt(gate_runner, bench.enc, &bench.layout)?;
    let chi_id = qpt(id_runner, bench.enc, &bench.layout)?;

    let ideal = ProcessMatrix::from_unitary(&ideal_cnot_logical());
    let identity = ProcessMatrix::from_unitary(&CMatrix::identity(4, 4));
    let mut res = ExperimentResult::new(cfg);
    bench.timing_metrics(&mut res);
    res.metric("f_cnot", process_fidelity(&ideal, &chi), "1");
    res.metric("f_identity", process_fidelity(&identity, &chi_id), "1");
    res.metric("chi_trace", chi.trace(), "1");
    res.matrices.insert("chi_cnot".into(), MatrixJson::new(&chi.chi, pauli_labels()));
    res.matrices.insert("chi_identity".into(), MatrixJson::new(&chi_id.chi, pauli_labels()));
    Ok(res)
}

/// Fidelity after N = 1..max gates per input, with the OLS loss per gate.
pub fn run_repeated_gate(cfg: &Config) -> Result<ExperimentResult> {
    let bench = Bench::new(cfg)?;
    let spec = &cfg.experiment;
    let inputs = spec.inputs();
    let max = spec.max_repetitions;
    let curves = par::map(&inputs, |io| -> Result<Vec<f64>> {
        let amps = product_amplitudes(io[0], io[1]);
        let mut state = bench.prepare_amps(&amps)?;
        let mut out = Vec::with_capacity(max);
        for n in 1..=max {
            state = bench.gate(&state)?;
            let seen = bench.meter.observe(&state, n as u64)?;
            out.push(bench.fidelity(&seen, &cnot_power(amps, n))?);
        }
        Ok(out)
    });
    let mut res = ExperimentResult::new(cfg);
    bench.timing_metrics(&mut res);
    let xs: Vec<f64> = (1..=max).map(|n| n as f64).collect();
    let mut slopes = Vec::new();
    for (io, curve) in inputs.iter().zip(curves) {
        let curve = curve?;
        let loss = -100.0 * ols_slope(&xs, &curve);
        let label = input_label(io);
        res.metric(format!("loss_per_gate[{label}]"), loss, "%/gate");
        slopes.push(loss);
        res.series.push(Series {
            name: format!("fidelity[{label}]"),
            x_label: "repetitions".into(),
            x_unit: "1".into(),
            y_label: "state fidelity".into(),
            y_unit: "1".into(),
            x: xs.clone(),
            y: curve,
        });
    }
    res.metric("loss_per_gate_mean", slopes.iter().sum::<f64>() / slopes.len() as f64, "%/gate");
    Ok(res)
}

/// Phenomenological concurrence model for the separable (`|sin|`) and
/// Bell (`|cos|`) starts:
/// C(t) = max(0, |trig(χt/2)|·e^{−γt} − a(1 − e^{−κt})).
/// The offset term captures entanglement sudden death.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceFit {
    /// rad/s.
    pub chi: f64,
    /// Envelope decay rate, 1/s.
    pub gamma: f64,
    pub offset: f64,
    /// 1/s.
    pub offset_rate: f64,
}

impl ConcurrenceFit {
    pub fn separable(&self, t: f64) -> f64 {
        self.eval((0.5 * self.chi * t).sin().abs(), t)
    }

    pub fn bell(&self, t: f64) -> f64 {
        self.eval((0.5 * self.chi * t).cos().abs(), t)
    }

    fn eval(&self, trig: f64, t: f64) -> f64 {
        (trig * (-self.gamma * t).exp() - self.offset * (1.0 - (-self.offset_rate * t).exp())).max(0.0)
    }
}

/// Downhill simplex minimization from `x0` with initial edge lengths `step`.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: &[f64], max_iter: usize) -> Vec<f64> {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=n)
        .map(|i| {
            let mut x = x0.to_vec();
            if i > 0 {
                x[i - 1] += step[i - 1];
            }
            let v = f(&x);
            (x, v)
        })
        .collect();
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[n].1 - simplex[0].1).abs() <= 1e-15 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let reflect = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&reflect);
        if fr < simplex[0].1 {
            let expand = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&expand);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract = lerp(&centroid, &worst.0, 0.5);
            let fc = f(&contract);
            if fc < worst.1 {
                simplex[n] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = lerp(&best, &p.0, 0.5);
                    p.1 = f(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0).0
}

/// Joint least-squares fit of [`ConcurrenceFit`] to both curves: a
/// log-spaced χ scan seeds a simplex search over all four parameters.
pub fn fit_concurrence(t: &[f64], separable: &[f64], bell: &[f64]) -> ConcurrenceFit {
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    // Rates are scaled by t_max so every coordinate is of order one.
    let model = |p: &[f64]| ConcurrenceFit {
        chi: p[0].abs() / t_max,
        gamma: p[1].abs() / t_max,
        offset: p[2].abs(),
        offset_rate: p[3].abs() / t_max,
    };
    let cost = |p: &[f64]| -> f64 {
        let m = model(p);
        t.iter()
            .zip(separable.iter().zip(bell))
            .map(|(&t, (&s, &b))| (m.separable(t) - s).powi(2) + (m.bell(t) - b).powi(2))
            .sum()
    };
    // χ·t_max from a tenth of a period to fifty periods.
    let (lo, hi) = ((0.1 * TWO_PI).ln(), (50.0 * TWO_PI).ln());
    let seed = (0..=4000)
        .map(|k| (lo + (hi - lo) * k as f64 / 4000.0).exp())
        .min_by(|a, b| cost(&[*a, 0.0, 0.0, 0.0]).total_cmp(&cost(&[*b, 0.0, 0.0, 0.0])))
        .expect("non-empty scan");
    let mut p = vec![seed, 0.5, 0.1, 2.0];
    for _ in 0..4 {
        p = nelder_mead(cost, &p, &[0.01 * seed, 0.2, 0.05, 0.5], 4000);
    }
    model(&p)
}

/// Idle evolution under the always-on cross-Kerr from a separable and a
/// Bell start, with the concurrence of each.
pub fn run_crosskerr(cfg: &Config) -> Result<ExperimentResult> {
    let spec = &cfg.experiment;
    let enc = spec.encoding();
    let layout = spec.system_layout();
    let times = linspace(spec.wait_max, spec.wait_points);
    let dt = times[1] - times[0];
    let idle = PulseSegment::idle(dt, &cfg.device, 0.0);
    let collapse = if spec.decoherence { collapse_operators(&cfg.coherence, &layout)? } else { Vec::new() };
    let step_u = exp_hermitian(idle.hamiltonian(&layout, 0.0)?.matrix(), c(0.0, -dt));

    let s = c(FRAC_1_SQRT_2, 0.0);
    let zero = c(0.0, 0.0);
    let starts = [
        ("separable", product_amplitudes(Logical::XPlus, Logical::Zero)),
        ("bell", [s, zero, zero, s]),
    ];
    let curves = par::map(&starts, |(_, amps)| -> Result<Vec<f64>> {
        let mut state = logical_superposition(enc, amps, &layout)?.to_density();
        let mut out = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            if k > 0 {
                state = if collapse.is_empty() {
                    let m = &step_u * state.density_matrix() * step_u.adjoint();
                    QuantumState::density(&layout, m)?
                } else {
                    evolve_lindblad(&state, std::slice::from_ref(&idle), &collapse, DEFAULT_TOLERANCE)?
                };
            }
            out.push(concurrence(&project_to_qubits(&state, enc)?.rho));
        }
        Ok(out)
    });
    let mut res = ExperimentResult::new(cfg);
    let chi = cfg.device.chi_ct;
    let mut fitted = Vec::new();
    for ((name, _), curve) in starts.iter().zip(curves) {
        let curve = curve?;
        if !spec.decoherence {
            let dev = times
                .iter()
                .zip(&curve)
                .map(|(&t, &y)| {
                    let ideal = if *name == "bell" { (0.5 * chi * t).cos() } else { (0.5 * chi * t).sin() };
                    (ideal.abs() - y).abs()
                })
                .fold(0.0, f64::max);
            res.metric(format!("oracle_deviation[{name}]"), dev, "1");
        }
        fitted.push(curve.clone());
        res.series.push(Series {
            name: format!("concurrence[{name}]"),
            x_label: "wait time".into(),
            x_unit: "s".into(),
            y_label: "concurrence".into(),
            y_unit: "1".into(),
            x: times.clone(),
            y: curve,
        });
    }
    let fit = fit_concurrence(&times, &fitted[0], &fitted[1]);
    let residual = times
        .iter()
        .enumerate()
        .map(|(k, &t)| (fit.separable(t) - fitted[0][k]).abs().max((fit.bell(t) - fitted[1][k]).abs()))
        .fold(0.0, f64::max);
    res.metric("chi_ct_fit", fit.chi / TWO_PI, "Hz");
    res.metric("chi_ct_config", chi / TWO_PI, "Hz");
    res.metric("envelope_decay_time", if fit.gamma > 0.0 { 1.0 / fit.gamma } else { f64::INFINITY }, "s");
    res.metric("fit_max_residual", residual, "1");
    res.metric("first_maximum", if chi != 0.0 { PI / chi.abs() } else { f64::INFINITY }, "s");
    Ok(res)
}

/// Closed-form detuned Rabi f-population of the |n_C, n_T, g⟩ ↔
/// |n_C−1, n_T, f⟩ pair.
fn detuned_rabi(params: &DeviceParams, omega: f64, delta: f64, n_c: usize, n_t: usize, t: f64) -> f64 {
    if n_c == 0 {
        return 0.0;
    }
    let (nc, nt) = (n_c as f64, n_t as f64);
    let eg = static_energy(params, nc, nt, G, Frame::Rotating);
    let ef = static_energy(params, nc - 1.0, nt, F, Frame::Rotating) + delta;
    // The drive term carries Ω_C/2.
    let v2 = 0.25 * nc * omega * omega;
    let b2 = 0.25 * (eg - ef).powi(2) + v2;
    v2 / b2 * (b2.sqrt() * t).sin().powi(2)
}

/// Sideband f-population versus pulse length for target Fock states and
/// the kitten |0_L⟩, with the contrast of each relative to n_T = 2.
pub fn run_chevron(cfg: &Config) -> Result<ExperimentResult> {
    let spec = &cfg.experiment;
    let params = if spec.chevron_pump_shift { cfg.device.pump_on() } else { cfg.device.clone() };
    let omega = sideband_omega(&cfg.device, &cfg.pump)?;
    let n_c = spec.chevron_control;
    let reference = LogicalEncoding::Kitten.matched_target();
    let delta = if n_c > 0 { matched_frame_offset(&params, n_c, reference)? - cfg.pump.detuning_offset } else { 0.0 };
    let times = linspace(spec.chevron_t_max, spec.chevron_points);
    let dim = spec.chevron_targets.iter().copied().max().unwrap_or(0).max(LogicalEncoding::Kitten.max_photons(Role::Target)) + 1;

    let mut targets: Vec<(String, CVector, Option<usize>)> =
        spec.chevron_targets.iter().map(|&n| (format!("n_T={n}"), fock(dim, n), Some(n))).collect();
    targets.push(("kitten".into(), codeword_vector(LogicalEncoding::Kitten, Role::Target, 0, dim)?, None));
    let traces = par::map(&targets, |(_, v, _)| sideband_trace(n_c, v, &params, omega, delta, &times));

    let mut res = ExperimentResult::new(cfg);
    res.metric("sideband_rate", (n_c as f64).sqrt() * omega / TWO_PI, "Hz");
    let mut contrasts = BTreeMap::new();
    let mut worst_dev = 0.0f64;
    for ((name, _, n_t), trace) in targets.iter().zip(traces) {
        let trace = trace?;
        let contrast = trace.iter().cloned().fold(0.0, f64::max);
        res.metric(format!("contrast[{name}]"), contrast, "1");
        contrasts.insert(name.clone(), contrast);
        if let Some(n_t) = *n_t {
            for (&t, &p) in times.iter().zip(&trace) {
                worst_dev = worst_dev.max((p - detuned_rabi(&params, omega, delta, n_c, n_t, t)).abs());
            }
        }
        res.series.push(Series {
            name: format!("p_f[{name}]"),
            x_label: "pulse length".into(),
            x_unit: "s".into(),
            y_label: "f population".into(),
            y_unit: "1".into(),
            x: times.clone(),
            y: trace,
        });
    }
    res.metric("oracle_deviation", worst_dev, "1");
    if let Some(&c_ref) = contrasts.get(&format!("n_T={reference}")) {
        if c_ref > 0.0 {
            for (name, &cn) in &contrasts {
                if *name != format!("n_T={reference}") {
                    res.metric(format!("contrast_reduction[{name}]"), 1.0 - cn / c_ref, "1");
                }
            }
        }
    }
    Ok(res)
}

/// Residual idle entangling rate Ω_res = n_C·n̄_T·χ_CT and π/(Ω_res t_g).
pub fn run_onoff_ratio(cfg: &Config) -> Result<ExperimentResult> {
    let spec = &cfg.experiment;
    let enc = spec.encoding();
    let n_c = enc.control_photons().ok_or_else(|| Error::Precondition(format!("{} has no Fock control", enc.name())))?;
    let n_t = enc.mean_target_photons();
    let omega_res = n_c as f64 * n_t * cfg.device.chi_ct.abs();
    let ratio = if omega_res > 0.0 { PI / (omega_res * spec.gate_time) } else { f64::INFINITY };
    let mut res = ExperimentResult::new(cfg);
    res.metric("n_c", n_c as f64, "photons");
    res.metric("mean_n_t", n_t, "photons");
    res.metric("omega_res", omega_res / TWO_PI, "Hz");
    res.metric("gate_time", spec.gate_time, "s");
    res.metric("onoff_ratio", ratio, "1");
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 0.01 * v).collect();
        assert!((ols_slope(&x, &y) + 0.01).abs() < 1e-14);
    }

    #[test]
    fn cnot_power_swaps_control_one_block() {
        let a = product_amplitudes(Logical::One, Logical::Zero);
        assert_eq!(cnot_power(a, 1), product_amplitudes(Logical::One, Logical::One));
        assert_eq!(cnot_power(a, 2), a);
    }

    #[test]
    fn scenario_defaults() {
        let spec = ExperimentSpec { scenario: Scenario::CrosskerrConcurrence, ..ExperimentSpec::default() };
        assert_eq!(spec.encoding(), LogicalEncoding::SinglePhoton);
        assert_eq!(spec.system_layout().dims(), &[2, 2, 3]);
        let rep = ExperimentSpec { scenario: Scenario::RepeatedGate, ..ExperimentSpec::default() };
        assert_eq!(rep.inputs().len(), 5);
    }

    #[test]
    fn repeated_gate_needs_two_repetitions() {
        let spec = ExperimentSpec { scenario: Scenario::RepeatedGate, max_repetitions: 1, ..ExperimentSpec::default() };
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn fit_recovers_known_curve() {
        let t = linspace(1e-3, 201);
        let truth = ConcurrenceFit { chi: TWO_PI * 2e3, gamma: 2e3, offset: 0.4, offset_rate: 4e3 };
        let sep: Vec<f64> = t.iter().map(|&t| truth.separable(t)).collect();
        let bell: Vec<f64> = t.iter().map(|&t| truth.bell(t)).collect();
        let fit = fit_concurrence(&t, &sep, &bell);
        assert!((fit.chi / truth.chi - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.gamma / truth.gamma - 1.0).abs() < 1e-2, "{fit:?}");
    }
}
