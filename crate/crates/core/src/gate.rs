//! Logical encodings, the three-segment CNOT sequence, and timing/phase
//! calibration.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    apply_unitary, collapse_operators, envelope_pieces, evolve_lindblad, sequence_propagator,
    CoherenceParams, PulseSegment, DEFAULT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{sideband_omega, static_energy, DeviceParams, Envelope, Frame, PumpParams};
use crate::hilbert::{c, CMatrix, CVector, ModeLayout, Operator, QuantumState, C64, CONTROL, F, G, TARGET};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalEncoding {
    Fock02,
    Kitten,
    SinglePhoton,
    GeneralizedKitten,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Control,
    Target,
}

/// Single-qubit logical states used as inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Logical {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "X+")]
    XPlus,
    #[serde(rename = "X-")]
    XMinus,
    #[serde(rename = "Y+")]
    YPlus,
    #[serde(rename = "Y-")]
    YMinus,
}

impl Logical {
    /// Amplitudes on (|0_L⟩, |1_L⟩).
    pub fn amplitudes(self) -> [C64; 2] {
        let s = FRAC_1_SQRT_2;
        match self {
            Logical::Zero => [c(1.0, 0.0), c(0.0, 0.0)],
            Logical::One => [c(0.0, 0.0), c(1.0, 0.0)],
            Logical::XPlus => [c(s, 0.0), c(s, 0.0)],
            Logical::XMinus => [c(s, 0.0), c(-s, 0.0)],
            Logical::YPlus => [c(s, 0.0), c(0.0, s)],
            Logical::YMinus => [c(s, 0.0), c(0.0, -s)],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Logical::Zero => "0",
            Logical::One => "1",
            Logical::XPlus => "X+",
            Logical::XMinus => "X-",
            Logical::YPlus => "Y+",
            Logical::YMinus => "Y-",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "0" => Logical::Zero,
            "1" => Logical::One,
            "X+" => Logical::XPlus,
            "X-" => Logical::XMinus,
            "Y+" => Logical::YPlus,
            "Y-" => Logical::YMinus,
            _ => return None,
        })
    }
}

/// Tomography input set {|0⟩, |1⟩, |X+⟩, |Y+⟩}.
pub const QPT_INPUTS: [Logical; 4] = [Logical::Zero, Logical::One, Logical::XPlus, Logical::YPlus];

impl LogicalEncoding {
    pub const ALL: [LogicalEncoding; 4] = [
        LogicalEncoding::Fock02,
        LogicalEncoding::Kitten,
        LogicalEncoding::SinglePhoton,
        LogicalEncoding::GeneralizedKitten,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LogicalEncoding::Fock02 => "fock02",
            LogicalEncoding::Kitten => "kitten",
            LogicalEncoding::SinglePhoton => "single_photon",
            LogicalEncoding::GeneralizedKitten => "generalized_kitten",
        }
    }

    /// Fock amplitudes `(n, amplitude)` of a codeword.
    pub fn components(self, role: Role, logical: u8) -> Vec<(usize, f64)> {
        let s = FRAC_1_SQRT_2;
        let sign = if logical == 0 { 1.0 } else { -1.0 };
        match (self, role) {
            (LogicalEncoding::Fock02, _) | (LogicalEncoding::Kitten, Role::Control) => {
                vec![(if logical == 0 { 0 } else { 2 }, 1.0)]
            }
            (LogicalEncoding::Kitten, Role::Target) => vec![(0, 0.5), (2, sign * s), (4, 0.5)],
            (LogicalEncoding::SinglePhoton, Role::Control) => vec![(if logical == 0 { 0 } else { 1 }, 1.0)],
            // Target codewords are |X±⟩ so that a π rotation swaps them.
            (LogicalEncoding::SinglePhoton, Role::Target) => vec![(0, s), (1, sign * s)],
            (LogicalEncoding::GeneralizedKitten, _) => {
                let a = s * 3f64.sqrt() / 2.0;
                vec![(0, a), (2, sign * s), (8, s / 2.0)]
            }
        }
    }

    pub fn max_photons(self, role: Role) -> usize {
        (0..2).flat_map(|l| self.components(role, l)).map(|(n, _)| n).max().unwrap_or(0)
    }

    /// Fock numbers carried by the codewords of `role`.
    pub fn support(self, role: Role) -> Vec<usize> {
        let mut v: Vec<usize> = (0..2).flat_map(|l| self.components(role, l)).map(|(n, _)| n).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Smallest exact layout: photon numbers never grow during the gate.
    pub fn minimal_layout(self) -> ModeLayout {
        ModeLayout::system(self.max_photons(Role::Control) + 1, self.max_photons(Role::Target) + 1)
    }

    /// Photon number of the control |1_L⟩, when it is a Fock state.
    pub fn control_photons(self) -> Option<usize> {
        match self {
            LogicalEncoding::Fock02 | LogicalEncoding::Kitten => Some(2),
            LogicalEncoding::SinglePhoton => Some(1),
            LogicalEncoding::GeneralizedKitten => None,
        }
    }

    /// Target phase-space rotation mapping |0_L⟩ to |1_L⟩.
    pub fn target_rotation(self) -> Option<f64> {
        match self {
            LogicalEncoding::Kitten | LogicalEncoding::GeneralizedKitten => Some(PI / 2.0),
            LogicalEncoding::SinglePhoton => Some(PI),
            LogicalEncoding::Fock02 => None,
        }
    }

    /// Target photon number the pump is matched to.
    pub fn matched_target(self) -> usize {
        match self {
            LogicalEncoding::SinglePhoton => 0,
            _ => 2,
        }
    }

    /// Mean photon number of the product codeword state, used for the
    /// residual cross-Kerr rate.
    pub fn mean_target_photons(self) -> f64 {
        codeword_mean(self, Role::Target)
    }
}

fn codeword_mean(enc: LogicalEncoding, role: Role) -> f64 {
    enc.components(role, 0).iter().map(|&(n, a)| n as f64 * a * a).sum()
}

/// Codeword ket in `dim` Fock levels.
pub fn codeword(encoding: LogicalEncoding, role: Role, logical: u8, dim: usize) -> Result<QuantumState> {
    let v = codeword_vector(encoding, role, logical, dim)?;
    QuantumState::ket(&ModeLayout::single(dim), v)
}

pub fn codeword_vector(encoding: LogicalEncoding, role: Role, logical: u8, dim: usize) -> Result<CVector> {
    if logical > 1 {
        return Err(Error::Precondition("logical index must be 0 or 1".into()));
    }
    let need = encoding.max_photons(role) + 1;
    if dim < need {
        return Err(Error::Truncation(format!("{} codewords need dim >= {need}, got {dim}", encoding.name())));
    }
    let mut v = CVector::zeros(dim);
    for (n, a) in encoding.components(role, logical) {
        v[n] = c(a, 0.0);
    }
    let norm = v.norm();
    Ok(v / c(norm, 0.0))
}

/// Single-mode logical state of `role`.
pub fn logical_vector(encoding: LogicalEncoding, role: Role, state: Logical, dim: usize) -> Result<CVector> {
    let [a0, a1] = state.amplitudes();
    let v0 = codeword_vector(encoding, role, 0, dim)?;
    let v1 = codeword_vector(encoding, role, 1, dim)?;
    Ok(v0 * a0 + v1 * a1)
}

/// Two-cavity logical product state, with the ancilla in g when `layout`
/// has one.
pub fn logical_state(
    encoding: LogicalEncoding,
    control: Logical,
    target: Logical,
    layout: &ModeLayout,
) -> Result<QuantumState> {
    let dims = layout.dims();
    let vc = logical_vector(encoding, Role::Control, control, dims[CONTROL])?;
    let vt = logical_vector(encoding, Role::Target, target, dims[TARGET])?;
    let mut factors = vec![vc, vt];
    if layout.has_ancilla() {
        factors.push(crate::hilbert::fock(3, G));
    }
    QuantumState::product(layout, &factors)
}

/// Two-cavity ket from logical amplitudes `amps[2·i + j]` on |i_L⟩|j_L⟩.
pub fn logical_superposition(encoding: LogicalEncoding, amps: &[C64; 4], layout: &ModeLayout) -> Result<QuantumState> {
    let dims = layout.dims();
    let cw = |role, l, d| codeword_vector(encoding, role, l, d);
    let mut cav = CVector::zeros(dims[CONTROL] * dims[TARGET]);
    for i in 0..2u8 {
        for j in 0..2u8 {
            let a = amps[(2 * i + j) as usize];
            if a.norm() > 0.0 {
                cav += cw(Role::Control, i, dims[CONTROL])?.kronecker(&cw(Role::Target, j, dims[TARGET])?) * a;
            }
        }
    }
    let v = if layout.has_ancilla() { cav.kronecker(&crate::hilbert::fock(3, G)) } else { cav };
    QuantumState::ket(layout, v)
}

/// Pulse durations and local phase corrections of one gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateTimings {
    /// Sideband pulse duration, s.
    pub t_p: f64,
    /// Wait between the pulses, s.
    pub t_w: f64,
    /// Phase of the second pulse relative to the first, rad.
    pub second_phase: f64,
    /// Phase removed from the control |1_L⟩, rad.
    pub control_phase: f64,
    /// Phase removed per target photon, rad.
    pub target_phase: f64,
}

impl GateTimings {
    /// Durations used in the experiment, with opposite pulse phases.
    pub fn experimental() -> Self {
        Self { t_p: 45e-9, t_w: 100e-9, second_phase: PI, control_phase: 0.0, target_phase: 0.0 }
    }

    pub fn total(&self) -> f64 {
        2.0 * self.t_p + self.t_w
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_p >= 0.0) || !(self.t_w >= 0.0) {
            return Err(Error::Precondition("gate durations must be non-negative".into()));
        }
        Ok(())
    }
}

/// Three timed segments plus the trailing number-operator corrections
/// exp(−iφ_c n̂_C/n₁) ⊗ exp(−iφ_t n̂_T).
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pub segments: Vec<PulseSegment>,
    pub control_phase: f64,
    pub target_phase: f64,
    /// n₁, the control photon number of |1_L⟩.
    pub control_photons: usize,
    pub timings: GateTimings,
}

impl PulseSequence {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Diagonal correction unitary on `layout`.
    pub fn correction(&self, layout: &ModeLayout) -> Operator {
        let n = layout.total_dim();
        let scale = self.control_phase / self.control_photons.max(1) as f64;
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            let lv = layout.levels(i);
            m[(i, i)] = C64::from_polar(1.0, -(scale * lv[CONTROL] as f64 + self.target_phase * lv[TARGET] as f64));
        }
        Operator::new_checked_unitary(layout.clone(), m).expect("diagonal matrix matches layout")
    }

    /// Closed-system gate unitary including corrections.
    pub fn propagator(&self, layout: &ModeLayout) -> Result<Operator> {
        let u = sequence_propagator(layout, &self.segments)?;
        Ok(&self.correction(layout) * &u)
    }
}

/// Pump frame offset δ that makes |n_C, n*, g⟩ ↔ |n_C−1, n*, f⟩ resonant
/// under `pulse_params`.
pub fn matched_frame_offset(pulse_params: &DeviceParams, n_c: usize, n_t: usize) -> Result<f64> {
    if n_c == 0 {
        return Err(Error::NoTransition);
    }
    let (nc, nt) = (n_c as f64, n_t as f64);
    Ok(static_energy(pulse_params, nc, nt, G, Frame::Rotating)
        - static_energy(pulse_params, nc - 1.0, nt, F, Frame::Rotating))
}

/// Frame offset actually applied: the explicit pump frequency when given,
/// else the matched value minus the detuning offset.
pub fn applied_frame_offset(params: &DeviceParams, pump: &PumpParams, encoding: LogicalEncoding) -> Result<f64> {
    if let Some(wp) = pump.omega_p {
        return Ok(crate::hamiltonian::frame_offset(params, wp));
    }
    let n1 = encoding
        .control_photons()
        .ok_or_else(|| Error::Precondition(format!("{} has no Fock control state", encoding.name())))?;
    let on = pump.effective_device(params);
    Ok(matched_frame_offset(&on, n1, encoding.matched_target())? - pump.detuning_offset)
}

/// The three-segment sequence for `timings`.
pub fn cnot_sequence(
    timings: &GateTimings,
    params: &DeviceParams,
    pump: &PumpParams,
    encoding: LogicalEncoding,
) -> Result<PulseSequence> {
    timings.validate()?;
    let n1 = encoding
        .control_photons()
        .ok_or_else(|| Error::Precondition(format!("{} has no Fock control state", encoding.name())))?;
    let omega = sideband_omega(params, pump)?;
    let on = pump.effective_device(params);
    let delta = applied_frame_offset(params, pump, encoding)?;
    let phi1 = pump.phase + pump.xi.arg();
    let segments = vec![
        PulseSegment::sideband(timings.t_p, omega, phi1, pump.envelope, &on, delta),
        PulseSegment::idle(timings.t_w, params, delta),
        PulseSegment::sideband(timings.t_p, omega, phi1 + timings.second_phase, pump.envelope, &on, delta),
    ];
    Ok(PulseSequence {
        segments,
        control_phase: timings.control_phase,
        target_phase: timings.target_phase,
        control_photons: n1,
        timings: *timings,
    })
}

/// Applies one gate. The ancilla must start in g.
pub fn apply_cnot(state: &QuantumState, sequence: &PulseSequence, noise: Option<&CoherenceParams>) -> Result<QuantumState> {
    let pg = state.ancilla_population(G);
    if !state.layout().has_ancilla() || (pg - state.trace()).abs() > 1e-9 {
        return Err(Error::Precondition(format!("ancilla must start in g (P_g = {pg:.3e})")));
    }
    apply_sequence(state, sequence, noise)
}

/// Applies the sequence without the ancilla precondition.
pub fn apply_sequence(state: &QuantumState, sequence: &PulseSequence, noise: Option<&CoherenceParams>) -> Result<QuantumState> {
    let layout = state.layout();
    match noise {
        None => apply_unitary(state, &sequence.propagator(layout)?),
        Some(coh) => {
            let ops = collapse_operators(coh, layout)?;
            let out = evolve_lindblad(state, &sequence.segments, &ops, DEFAULT_TOLERANCE)?;
            apply_unitary(&out, &sequence.correction(layout))
        }
    }
}

type M2 = [[C64; 2]; 2];

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// exp(−iHt) for H = [[eg, v*], [v, ef]] in the (g, f) basis.
fn m2_evolve(eg: f64, ef: f64, v: C64, t: f64) -> M2 {
    let a = 0.5 * (eg + ef);
    let bz = 0.5 * (eg - ef);
    let b = (bz * bz + v.norm_sqr()).sqrt();
    let (cs, sinc) = if b * t == 0.0 { (1.0, t) } else { ((b * t).cos(), (b * t).sin() / b) };
    let g = C64::from_polar(1.0, -a * t);
    let mi = c(0.0, -sinc);
    [
        [g * (c(cs, 0.0) + mi * bz), g * mi * v.conj()],
        [g * mi * v, g * (c(cs, 0.0) - mi * bz)],
    ]
}

/// Diagonal energies of one (n_C, n_T) sideband pair.
#[derive(Clone, Copy, Debug)]
struct Branch {
    eg_pulse: f64,
    ef_pulse: f64,
    eg_wait: f64,
    ef_wait: f64,
    /// √n_C·Ω_C.
    rate: f64,
}

/// Closed-form model of the gate restricted to 2×2 branch blocks.
#[derive(Clone, Debug)]
pub struct BranchModel {
    pulse_params: DeviceParams,
    wait_params: DeviceParams,
    omega: f64,
    delta: f64,
    envelope: Envelope,
}

impl BranchModel {
    pub fn new(params: &DeviceParams, pump: &PumpParams, delta: f64) -> Result<Self> {
        Ok(Self {
            pulse_params: pump.effective_device(params),
            wait_params: params.clone(),
            omega: sideband_omega(params, pump)?,
            delta,
            envelope: pump.envelope,
        })
    }

    fn branch(&self, n_c: usize, n_t: usize) -> Branch {
        let (nc, nt) = (n_c as f64, n_t as f64);
        let e = |p: &DeviceParams, nc: f64, anc| static_energy(p, nc, nt, anc, Frame::Rotating);
        if n_c == 0 {
            return Branch {
                eg_pulse: e(&self.pulse_params, 0.0, G),
                ef_pulse: 0.0,
                eg_wait: e(&self.wait_params, 0.0, G),
                ef_wait: 0.0,
                rate: 0.0,
            };
        }
        Branch {
            eg_pulse: e(&self.pulse_params, nc, G),
            ef_pulse: e(&self.pulse_params, nc - 1.0, F) + self.delta,
            eg_wait: e(&self.wait_params, nc, G),
            ef_wait: e(&self.wait_params, nc - 1.0, F) + self.delta,
            rate: nc.sqrt() * self.omega,
        }
    }

    fn pulse(&self, b: &Branch, t_p: f64, phase: f64) -> M2 {
        let mut u = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        for (dt, amp) in envelope_pieces(self.envelope, t_p) {
            let v = C64::from_polar(0.5 * b.rate * amp, phase);
            u = m2_mul(&m2_evolve(b.eg_pulse, b.ef_pulse, v, dt), &u);
        }
        u
    }

    /// Block unitary of the uncorrected sequence on {|n_C,n_T,g⟩, |n_C−1,n_T,f⟩}.
    pub fn unitary(&self, n_c: usize, n_t: usize, t_p: f64, t_w: f64, second_phase: f64) -> [[C64; 2]; 2] {
        let b = self.branch(n_c, n_t);
        if n_c == 0 {
            let ph = C64::from_polar(1.0, -(2.0 * t_p * b.eg_pulse + t_w * b.eg_wait));
            return [[ph, c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        }
        let wait = [
            [C64::from_polar(1.0, -b.eg_wait * t_w), c(0.0, 0.0)],
            [c(0.0, 0.0), C64::from_polar(1.0, -b.ef_wait * t_w)],
        ];
        let p1 = self.pulse(&b, t_p, 0.0);
        let p2 = self.pulse(&b, t_p, second_phase);
        m2_mul(&p2, &m2_mul(&wait, &p1))
    }

    /// f − g energy splitting of a branch during the wait.
    fn wait_splitting(&self, n_c: usize, n_t: usize) -> f64 {
        let b = self.branch(n_c, n_t);
        b.ef_wait - b.eg_wait
    }
}

/// Residual and phase diagnostics of a calibrated gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub timings: GateTimings,
    /// max over branches of the population left outside g.
    pub max_residual: f64,
    /// max over detuned branches of the conditional-phase error, rad.
    pub max_phase_error: f64,
    /// Conditional phases Φ(n₁, n_T) − Φ(0, n_T) relative to the matched branch.
    pub conditional_phases: Vec<(usize, f64)>,
    /// Frame offset δ used, rad/s.
    pub frame_offset: f64,
}

/// Residual excitation allowed per branch.
pub const RESIDUAL_TOL: f64 = 1e-3;
/// Conditional-phase tolerance, rad.
pub const PHASE_TOL: f64 = 1e-2;

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI { y + 2.0 * PI } else { y }
}

struct Problem {
    model: BranchModel,
    n1: usize,
    matched: usize,
    detuned: Vec<usize>,
    support: Vec<usize>,
    theta: f64,
    res_split: f64,
}

impl Problem {
    fn second_phase(&self, t_w: f64) -> f64 {
        wrap(PI - self.res_split * t_w)
    }

    fn residual(&self, t_p: f64, t_w: f64) -> f64 {
        let phi2 = self.second_phase(t_w);
        self.support
            .iter()
            .map(|&n| self.model.unitary(self.n1, n, t_p, t_w, phi2)[1][0].norm_sqr())
            .fold(0.0, f64::max)
    }

    fn detuned_residual(&self, t_p: f64, t_w: f64) -> f64 {
        let phi2 = self.second_phase(t_w);
        self.detuned
            .iter()
            .map(|&n| self.model.unitary(self.n1, n, t_p, t_w, phi2)[1][0].norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Conditional phase δΦ(n) = Φ(n₁, n) − Φ(0, n).
    fn conditional_phase(&self, n: usize, t_p: f64, t_w: f64) -> f64 {
        let phi2 = self.second_phase(t_w);
        let one = self.model.unitary(self.n1, n, t_p, t_w, phi2)[0][0];
        let zero = self.model.unitary(0, n, t_p, t_w, phi2)[0][0];
        (one / zero).arg()
    }

    fn phase_errors(&self, t_p: f64, t_w: f64) -> Vec<f64> {
        let reference = self.conditional_phase(self.matched, t_p, t_w);
        self.detuned
            .iter()
            .map(|&n| {
                let target = self.theta * (n as f64 - self.matched as f64);
                wrap(self.conditional_phase(n, t_p, t_w) - reference - target)
            })
            .collect()
    }

    /// First wait within `window` closing the detuned branches.
    fn closing_wait(&self, t_p: f64, window: f64) -> Option<f64> {
        const GRID: usize = 800;
        let step = window / GRID as f64;
        let f = |t_w: f64| self.detuned_residual(t_p, t_w);
        let mut prev2 = f(0.0);
        let mut prev1 = f(step);
        for k in 2..=GRID {
            let t = k as f64 * step;
            let cur = f(t);
            if prev1 <= prev2 && prev1 <= cur {
                let t_w = golden_min(&f, t - 2.0 * step, t);
                if f(t_w) <= 0.25 * RESIDUAL_TOL {
                    return Some(t_w);
                }
            }
            prev2 = prev1;
            prev1 = cur;
        }
        None
    }
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

fn problem(params: &DeviceParams, pump: &PumpParams, encoding: LogicalEncoding) -> Result<(Problem, f64)> {
    let theta = encoding
        .target_rotation()
        .ok_or_else(|| Error::Precondition(format!("{} target codewords are not related by a rotation", encoding.name())))?;
    let n1 = encoding
        .control_photons()
        .ok_or_else(|| Error::Precondition(format!("{} control codewords are not Fock states", encoding.name())))?;
    let matched = encoding.matched_target();
    let support = encoding.support(Role::Target);
    let detuned: Vec<usize> = support.iter().copied().filter(|&n| n != matched).collect();
    // Detunings must pair up symmetrically about the matched number, or lie on one side only.
    let lo: Vec<usize> = detuned.iter().filter(|&&n| n < matched).map(|&n| matched - n).collect();
    let hi: Vec<usize> = detuned.iter().filter(|&&n| n > matched).map(|&n| n - matched).collect();
    if !lo.is_empty() && !hi.is_empty() && lo.iter().rev().copied().collect::<Vec<_>>() != hi {
        return Err(Error::Precondition(format!("{} detunings are not symmetric about n_T = {matched}", encoding.name())));
    }
    let on = pump.effective_device(params);
    let delta = match pump.omega_p {
        Some(wp) => crate::hamiltonian::frame_offset(params, wp),
        None => matched_frame_offset(&on, n1, matched)?,
    };
    let model = BranchModel::new(params, pump, delta)?;
    if model.omega <= 0.0 {
        return Err(Error::Calibration("sideband rate must be positive".into()));
    }
    let res_split = model.wait_splitting(n1, matched);
    Ok((Problem { model, n1, matched, detuned, support, theta, res_split }, delta))
}

/// Nested search: scan t_p, find the first closing t_w for each, then
/// root-find the conditional-phase error in t_p. Ties go to the shortest gate.
pub fn calibrate_timings(params: &DeviceParams, pump: &PumpParams, encoding: LogicalEncoding) -> Result<GateTimings> {
    Ok(calibrate(params, pump, encoding)?.timings)
}

/// [`calibrate_timings`] with diagnostics.
pub fn calibrate(params: &DeviceParams, pump: &PumpParams, encoding: LogicalEncoding) -> Result<CalibrationReport> {
    let (prob, delta) = problem(params, pump, encoding)?;
    let spread = prob
        .detuned
        .iter()
        .map(|&n| (prob.model.wait_splitting(prob.n1, n) - prob.res_split).abs())
        .fold(f64::INFINITY, f64::min);
    if !(spread > 1e-3) {
        return Err(Error::Calibration("no conditional rotation: target dispersive shift vanishes".into()));
    }
    let window = 4.0 * 2.0 * PI / spread;
    let t_pi = PI / (prob.n1 as f64).sqrt() / prob.model.omega;

    const SCAN: usize = 56;
    let tps: Vec<f64> = (0..=SCAN).map(|k| t_pi * (0.5 + 1.1 * k as f64 / SCAN as f64)).collect();
    let evals: Vec<Option<(f64, f64)>> = par::map(&tps, |&t_p| {
        prob.closing_wait(t_p, window).map(|t_w| (t_w, prob.phase_errors(t_p, t_w)[0]))
    });

    let mut candidates = Vec::new();
    for k in 0..SCAN {
        let (Some((_, ga)), Some((_, gb))) = (evals[k], evals[k + 1]) else { continue };
        if ga.signum() == gb.signum() || ga.abs() > 1.0 || gb.abs() > 1.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (tps[k], tps[k + 1], ga);
        let mut found = None;
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let Some(t_w) = prob.closing_wait(m, window) else { break };
            let g = prob.phase_errors(m, t_w)[0];
            found = Some((m, t_w));
            if g.signum() == fa.signum() {
                a = m;
                fa = g;
            } else {
                b = m;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        if let Some(c) = found {
            candidates.push(c);
        }
    }
    candidates.sort_by(|x, y| (2.0 * x.0 + x.1).total_cmp(&(2.0 * y.0 + y.1)));

    for (t_p, t_w) in candidates {
        let residual = prob.residual(t_p, t_w);
        let errors = prob.phase_errors(t_p, t_w);
        let max_err = errors.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        if residual > RESIDUAL_TOL || max_err > PHASE_TOL {
            log::debug!("rejecting t_p = {t_p:e}, t_w = {t_w:e}: residual {residual:e}, phase {max_err:e}");
            continue;
        }
        let second_phase = prob.second_phase(t_w);
        let (control_phase, target_phase) = local_corrections(&prob, t_p, t_w);
        let reference = prob.conditional_phase(prob.matched, t_p, t_w);
        let conditional_phases = prob
            .support
            .iter()
            .map(|&n| (n, wrap(prob.conditional_phase(n, t_p, t_w) - reference)))
            .collect();
        let timings = GateTimings { t_p, t_w, second_phase, control_phase, target_phase };
        return Ok(CalibrationReport {
            timings,
            max_residual: residual,
            max_phase_error: max_err,
            conditional_phases,
            frame_offset: delta,
        });
    }
    Err(Error::Calibration(format!(
        "no (t_p, t_w) pair closes every branch within {:.0} ns waits",
        window * 1e9
    )))
}

/// Target slope and control offset that turn the branch phases into the
/// ideal conditional rotation.
fn local_corrections(prob: &Problem, t_p: f64, t_w: f64) -> (f64, f64) {
    let phi2 = prob.second_phase(t_w);
    let ns: Vec<f64> = prob.support.iter().map(|&n| n as f64).collect();
    // Unwrap Φ(0, n) along n; consecutive steps are far below π.
    let mut zero = Vec::with_capacity(ns.len());
    for &n in &prob.support {
        let p = prob.model.unitary(0, n, t_p, t_w, phi2)[0][0].arg();
        let p = match zero.last() {
            Some(&last) => last + wrap(p - last),
            None => p,
        };
        zero.push(p);
    }
    let mean_n = ns.iter().sum::<f64>() / ns.len() as f64;
    let mean_p = zero.iter().sum::<f64>() / ns.len() as f64;
    let cov: f64 = ns.iter().zip(&zero).map(|(n, p)| (n - mean_n) * (p - mean_p)).sum();
    let var: f64 = ns.iter().map(|n| (n - mean_n).powi(2)).sum();
    let target_phase = if var > 0.0 { cov / var } else { 0.0 };

    let mut acc = c(0.0, 0.0);
    for &n in &prob.support {
        let one = prob.model.unitary(prob.n1, n, t_p, t_w, phi2)[0][0];
        let zero = prob.model.unitary(0, n, t_p, t_w, phi2)[0][0];
        acc += C64::from_polar(1.0, (one / zero).arg() - prob.theta * n as f64);
    }
    (acc.arg(), target_phase)
}

/// Rate-ratio check for the generalized kitten control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedKittenCheck {
    /// √2 Ω / √8 Ω.
    pub rate_ratio: f64,
    /// f population of |8, g⟩ after a resonant π pulse on |2, g⟩.
    pub n8_excitation: f64,
    /// Mean photon numbers of the two codewords.
    pub mean_photons: [f64; 2],
}

pub fn generalized_kitten_check(params: &DeviceParams, pump: &PumpParams) -> Result<GeneralizedKittenCheck> {
    let omega = sideband_omega(params, pump)?;
    let r2 = 2f64.sqrt() * omega;
    let r8 = 8f64.sqrt() * omega;
    let t_pi = PI / r2;
    let u = m2_evolve(0.0, 0.0, c(0.5 * r8, 0.0), t_pi);
    let mean = |l| {
        let v = codeword_vector(LogicalEncoding::GeneralizedKitten, Role::Control, l, 9).expect("dim 9 holds |8⟩");
        v.iter().enumerate().map(|(n, a)| n as f64 * a.norm_sqr()).sum()
    };
    Ok(GeneralizedKittenCheck { rate_ratio: r2 / r8, n8_excitation: u[1][0].norm_sqr(), mean_photons: [mean(0), mean(1)] })
}

/// Ideal CNOT in the logical basis |c t⟩, index 2c + t.
pub fn ideal_cnot_logical() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = c(1.0, 0.0);
    m[(1, 1)] = c(1.0, 0.0);
    m[(2, 3)] = c(1.0, 0.0);
    m[(3, 2)] = c(1.0, 0.0);
    m
}

/// Gate matrix restricted to the code space with the ancilla in g:
/// G_{ij} = ⟨i_L, g| U |j_L, g⟩.
pub fn logical_gate_matrix(u: &Operator, encoding: LogicalEncoding) -> Result<CMatrix> {
    let layout = u.layout();
    let mut basis = Vec::with_capacity(4);
    for k in 0..4 {
        let mut amps = [c(0.0, 0.0); 4];
        amps[k] = c(1.0, 0.0);
        basis.push(logical_superposition(encoding, &amps, layout)?.as_ket().expect("ket").clone());
    }
    let mut g = CMatrix::zeros(4, 4);
    for j in 0..4 {
        let out = u.matrix() * &basis[j];
        for i in 0..4 {
            g[(i, j)] = basis[i].dotc(&out);
        }
    }
    Ok(g)
}
