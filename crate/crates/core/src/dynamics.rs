//! Piecewise-constant time evolution: closed-system propagators and an
//! adaptive Lindblad integrator.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{build_static, sideband_coupling, DeviceParams, Envelope, Frame};
use crate::hilbert::{
    annihilation, c, embed, exp_hermitian, number, projector, transition, CMatrix, CVector, ModeLayout,
    Operator, QuantumState, StateData, C64, ANCILLA, CONTROL, E, F, G, TARGET,
};

/// Relaxation and dephasing times in seconds. `f64::INFINITY` disables a
/// channel (written as `null` in JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceParams {
    #[serde(with = "infinite_as_null")]
    pub control_t1: f64,
    #[serde(with = "infinite_as_null")]
    pub control_t2: f64,
    #[serde(with = "infinite_as_null")]
    pub target_t1: f64,
    #[serde(with = "infinite_as_null")]
    pub target_t2: f64,
    /// f → e decay.
    #[serde(with = "infinite_as_null")]
    pub ancilla_f_t1: f64,
    /// g–f coherence time.
    #[serde(with = "infinite_as_null")]
    pub ancilla_f_t2: f64,
    /// e → g decay.
    #[serde(with = "infinite_as_null")]
    pub ancilla_e_t1: f64,
    #[serde(with = "infinite_as_null")]
    pub ancilla_e_t2: f64,
    pub thermal_control: f64,
    pub thermal_target: f64,
    pub thermal_ancilla: f64,
}

impl Default for CoherenceParams {
    fn default() -> Self {
        Self {
            control_t1: 2.2e-3,
            control_t2: 0.5e-3,
            target_t1: 2.0e-3,
            target_t2: 0.6e-3,
            ancilla_f_t1: 40e-6,
            ancilla_f_t2: 17e-6,
            ancilla_e_t1: 60e-6,
            ancilla_e_t2: 37e-6,
            thermal_control: 0.0,
            thermal_target: 0.0,
            thermal_ancilla: 0.0,
        }
    }
}

impl CoherenceParams {
    /// Every channel disabled.
    pub fn ideal() -> Self {
        let inf = f64::INFINITY;
        Self {
            control_t1: inf,
            control_t2: inf,
            target_t1: inf,
            target_t2: inf,
            ancilla_f_t1: inf,
            ancilla_f_t2: inf,
            ancilla_e_t1: inf,
            ancilla_e_t2: inf,
            thermal_control: 0.0,
            thermal_target: 0.0,
            thermal_ancilla: 0.0,
        }
    }

    /// Only the ancilla channels of `self`; cavities left ideal.
    pub fn ancilla_only(&self) -> Self {
        let inf = f64::INFINITY;
        Self {
            control_t1: inf,
            control_t2: inf,
            target_t1: inf,
            target_t2: inf,
            thermal_control: 0.0,
            thermal_target: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("control", self.control_t1, self.control_t2),
            ("target", self.target_t1, self.target_t2),
            ("ancilla f", self.ancilla_f_t1, self.ancilla_f_t2),
            ("ancilla e", self.ancilla_e_t1, self.ancilla_e_t2),
        ];
        for (name, t1, t2) in pairs {
            if !(t1 > 0.0) || !(t2 > 0.0) {
                return Err(Error::Physicality(format!("{name}: times must be positive")));
            }
            if t2 > 2.0 * t1 {
                return Err(Error::Physicality(format!("{name}: T2 = {t2:e} s exceeds 2*T1 = {:e} s", 2.0 * t1)));
            }
        }
        for p in [self.thermal_control, self.thermal_target, self.thermal_ancilla] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Physicality("thermal population must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn dephasing_rate(t1: f64, t2: f64) -> f64 {
    (1.0 / t2 - 0.5 / t1).max(0.0)
}

/// Lindblad operators for the given coherence times. Ancilla channels are
/// added only when the layout has an ancilla.
pub fn collapse_operators(coh: &CoherenceParams, layout: &ModeLayout) -> Result<Vec<Operator>> {
    coh.validate()?;
    let mut ops = Vec::new();
    let cavities = [
        (CONTROL, coh.control_t1, coh.control_t2, coh.thermal_control),
        (TARGET, coh.target_t1, coh.target_t2, coh.thermal_target),
    ];
    for (mode, t1, t2, nth) in cavities {
        let dim = layout.dims()[mode];
        if dim < 2 {
            continue;
        }
        let a = embed(&annihilation(dim)?, mode, layout)?;
        if t1.is_finite() {
            ops.push(&a * ((1.0 + nth) / t1).sqrt());
            if nth > 0.0 {
                ops.push(&a.dagger() * (nth / t1).sqrt());
            }
        }
        let gphi = dephasing_rate(t1, t2);
        if gphi > 0.0 {
            ops.push(&embed(&number(dim), mode, layout)? * (2.0 * gphi).sqrt());
        }
    }
    if layout.has_ancilla() {
        let anc = |op: Operator| embed(&op, ANCILLA, layout);
        if coh.ancilla_f_t1.is_finite() {
            ops.push(&anc(transition(3, E, F))? * (1.0 / coh.ancilla_f_t1).sqrt());
        }
        if coh.ancilla_e_t1.is_finite() {
            ops.push(&anc(transition(3, G, E))? * (1.0 / coh.ancilla_e_t1).sqrt());
            if coh.thermal_ancilla > 0.0 {
                ops.push(&anc(transition(3, E, G))? * (coh.thermal_ancilla / coh.ancilla_e_t1).sqrt());
            }
        }
        for (level, t1, t2) in [(E, coh.ancilla_e_t1, coh.ancilla_e_t2), (F, coh.ancilla_f_t1, coh.ancilla_f_t2)] {
            let gphi = dephasing_rate(t1, t2);
            if gphi > 0.0 {
                ops.push(&anc(projector(3, level))? * (2.0 * gphi).sqrt());
            }
        }
    }
    Ok(ops)
}

/// Sideband drive of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drive {
    Off,
    Sideband { omega: f64, phase: f64 },
}

/// One piecewise-constant stretch of the pulse sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSegment {
    pub duration: f64,
    pub drive: Drive,
    pub envelope: Envelope,
    /// Device parameters in effect during the segment.
    pub params: DeviceParams,
    /// Energy of |f⟩ in the pump frame.
    pub frame_offset: f64,
}

const RAMP_PIECES: usize = 16;

impl PulseSegment {
    pub fn idle(duration: f64, params: &DeviceParams, frame_offset: f64) -> Self {
        Self {
            duration,
            drive: Drive::Off,
            envelope: Envelope::Rectangular,
            params: params.clone(),
            frame_offset,
        }
    }

    pub fn sideband(
        duration: f64,
        omega: f64,
        phase: f64,
        envelope: Envelope,
        params: &DeviceParams,
        frame_offset: f64,
    ) -> Self {
        Self {
            duration,
            drive: Drive::Sideband { omega, phase },
            envelope,
            params: params.clone(),
            frame_offset,
        }
    }

    /// Hamiltonian with the drive amplitude scaled by `amplitude`.
    pub fn hamiltonian(&self, layout: &ModeLayout, amplitude: f64) -> Result<Operator> {
        let mut h = build_static(&self.params, layout, Frame::Rotating)?;
        if self.frame_offset != 0.0 {
            h = &h + &(&embed(&projector(3, F), ANCILLA, layout)? * self.frame_offset);
        }
        if let Drive::Sideband { omega, phase } = self.drive {
            if omega != 0.0 && amplitude != 0.0 {
                h = &h + &sideband_coupling(omega * amplitude, phase, layout)?;
            }
        }
        Ok(h)
    }

    /// Constant-amplitude pieces `(dt, amplitude)` approximating the envelope.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        match self.drive {
            Drive::Sideband { .. } => envelope_pieces(self.envelope, self.duration),
            Drive::Off => vec![(self.duration, 1.0)],
        }
    }
}

/// Piecewise-constant approximation `(dt, amplitude)` of a pulse envelope.
pub fn envelope_pieces(envelope: Envelope, duration: f64) -> Vec<(f64, f64)> {
    match envelope {
        Envelope::Ramped { rise } if rise > 0.0 && duration > 0.0 => {
            let rise = rise.min(0.5 * duration);
            let dt = rise / RAMP_PIECES as f64;
            let ramp: Vec<(f64, f64)> =
                (0..RAMP_PIECES).map(|k| (dt, (k as f64 + 0.5) / RAMP_PIECES as f64)).collect();
            let mut out = ramp.clone();
            let flat = duration - 2.0 * rise;
            if flat > 0.0 {
                out.push((flat, 1.0));
            }
            out.extend(ramp.into_iter().rev());
            out
        }
        _ => vec![(duration, 1.0)],
    }
}

fn check_segments(segments: &[PulseSegment]) -> Result<()> {
    if segments.iter().any(|s| !(s.duration >= 0.0)) {
        return Err(Error::Numeric("segment duration must be non-negative".into()));
    }
    Ok(())
}

/// Product of the segment propagators, last segment leftmost.
pub fn sequence_propagator(layout: &ModeLayout, segments: &[PulseSegment]) -> Result<Operator> {
    check_segments(segments)?;
    let n = layout.total_dim();
    let mut u = CMatrix::identity(n, n);
    for seg in segments {
        for (dt, amp) in seg.pieces() {
            if dt == 0.0 {
                continue;
            }
            let h = seg.hamiltonian(layout, amp)?;
            u = exp_hermitian(h.matrix(), c(0.0, -dt)) * u;
        }
    }
    Operator::new_checked_unitary(layout.clone(), u)
}

/// Closed-system evolution of a ket or density matrix.
pub fn evolve_unitary(state: &QuantumState, segments: &[PulseSegment]) -> Result<QuantumState> {
    let u = sequence_propagator(state.layout(), segments)?;
    apply_unitary(state, &u)
}

pub(crate) fn apply_unitary(state: &QuantumState, u: &Operator) -> Result<QuantumState> {
    if u.layout() != state.layout() {
        return Err(Error::Layout("propagator and state layouts differ".into()));
    }
    let data = match state.data() {
        StateData::Ket(v) => StateData::Ket(u.matrix() * v),
        StateData::Density(m) => StateData::Density(u.matrix() * m * u.matrix().adjoint()),
    };
    Ok(QuantumState::from_data(state.layout(), data, state.is_normalized()))
}

/// Compressed sparse row matrix, used only inside the integrator.
struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Csr {
    fn from_dense(m: &CMatrix) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    indices.push(j);
                    values.push(z);
                }
            }
            indptr.push(indices.len());
        }
        Self { indptr, indices, values }
    }

    fn mul(&self, rho: &CMatrix) -> CMatrix {
        let n = rho.ncols();
        let mut out = CMatrix::zeros(self.indptr.len() - 1, n);
        for col in 0..n {
            let src = rho.column(col);
            let mut dst = out.column_mut(col);
            for i in 0..self.indptr.len() - 1 {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.indptr[i]..self.indptr[i + 1] {
                    acc += self.values[k] * src[self.indices[k]];
                }
                dst[i] = acc;
            }
        }
        out
    }
}

struct Liouvillian {
    heff: Csr,
    jumps: Vec<Csr>,
}

impl Liouvillian {
    fn new(h: &Operator, collapse: &[Operator]) -> Self {
        let mut heff = h.matrix().clone();
        for l in collapse {
            heff -= (l.matrix().adjoint() * l.matrix()) * c(0.0, 0.5);
        }
        Self {
            heff: Csr::from_dense(&heff),
            jumps: collapse.iter().map(|l| Csr::from_dense(l.matrix())).collect(),
        }
    }

    /// −i H_eff ρ + i ρ H_eff† + Σ L ρ L†, using ρ = ρ†.
    fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let x = self.heff.mul(rho);
        let mut d = (x.adjoint() - x) * c(0.0, 1.0);
        for l in &self.jumps {
            let y = l.mul(rho);
            d += l.mul(&y.adjoint());
        }
        d
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn integrate(liouv: &Liouvillian, rho: &mut CMatrix, duration: f64, tol: f64, h_guess: f64) -> Result<f64> {
    let mut t = 0.0;
    let mut h = h_guess.min(duration);
    let mut k1 = liouv.rhs(rho);
    let combine = |base: &CMatrix, terms: &[(f64, &CMatrix)], h: f64| {
        let mut out = base.clone();
        for (w, k) in terms {
            if *w != 0.0 {
                out += *k * c(h * w, 0.0);
            }
        }
        out
    };
    while t < duration {
        if duration - t < h {
            h = duration - t;
        }
        if h <= duration * 1e-14 || h <= 1e-30 {
            return Err(Error::Integration(format!("step size underflow at t = {t:e} s")));
        }
        let y = &*rho;
        let k2 = liouv.rhs(&combine(y, &[(A21, &k1)], h));
        let k3 = liouv.rhs(&combine(y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = liouv.rhs(&combine(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = liouv.rhs(&combine(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = liouv.rhs(&combine(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y_new = combine(y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = liouv.rhs(&y_new);
        let err = combine(
            &CMatrix::zeros(y.nrows(), y.ncols()),
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            h,
        );
        let err_norm = err.iter().fold(0.0f64, |a, z| a.max(z.norm())) / tol;
        if err_norm <= 1.0 {
            t += h;
            *rho = y_new;
            k1 = k7;
        }
        let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(h)
}

/// Default per-step error tolerance of [`evolve_lindblad`].
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Open-system evolution with adaptive Dormand–Prince stepping.
pub fn evolve_lindblad(
    rho: &QuantumState,
    segments: &[PulseSegment],
    collapse: &[Operator],
    tol: f64,
) -> Result<QuantumState> {
    check_segments(segments)?;
    let layout = rho.layout().clone();
    if collapse.iter().any(|l| l.layout() != &layout) {
        return Err(Error::Layout("collapse operator layout differs from state".into()));
    }
    let mut m = rho.density_matrix();
    let mut h_guess = 1e-10;
    for seg in segments {
        for (dt, amp) in seg.pieces() {
            if dt == 0.0 {
                continue;
            }
            let h = seg.hamiltonian(&layout, amp)?;
            if h.layout() != &layout {
                return Err(Error::Layout("segment layout differs from state".into()));
            }
            let liouv = Liouvillian::new(&h, collapse);
            h_guess = integrate(&liouv, &mut m, dt, tol, h_guess)?;
        }
    }
    // Remove the antihermitian part accumulated by rounding.
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    Ok(QuantumState::from_data(&layout, StateData::Density(m), rho.is_normalized()))
}

/// Ancilla f-population versus time for a fixed control Fock state |n_C⟩,
/// a target ket, and the ancilla starting in g. The Hamiltonian is the
/// static part of `params` plus a sideband of strength `omega` with the
/// pump frame offset δ.
pub fn sideband_trace(
    n_c: usize,
    target_state: &CVector,
    params: &DeviceParams,
    omega: f64,
    frame_offset: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    let layout = ModeLayout::system((n_c + 1).max(2), target_state.len());
    let seg = PulseSegment::sideband(1.0, omega, 0.0, Envelope::Rectangular, params, frame_offset);
    let h = seg.hamiltonian(&layout, 1.0)?;
    let control = crate::hilbert::fock(layout.dims()[CONTROL], n_c);
    let anc = crate::hilbert::fock(3, G);
    let psi0 = QuantumState::product(&layout, &[control, target_state.clone(), anc])?;
    let psi0 = psi0.as_ket().expect("product state is a ket").clone();
    let eig = SymmetricEigen::new(h.matrix().clone());
    let coeffs = eig.eigenvectors.adjoint() * &psi0;
    let n = layout.total_dim();
    let out = times
        .iter()
        .map(|&t| {
            let mut phased = coeffs.clone();
            for (k, lam) in eig.eigenvalues.iter().enumerate() {
                phased[k] *= C64::from_polar(1.0, -lam * t);
            }
            let psi = &eig.eigenvectors * phased;
            (F..n).step_by(3).map(|i| psi[i].norm_sqr()).sum()
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ideal_coherence_has_no_channels() {
        let layout = ModeLayout::system(3, 3);
        assert!(collapse_operators(&CoherenceParams::ideal(), &layout).unwrap().is_empty());
    }

    #[test]
    fn unphysical_t2_rejected() {
        let coh = CoherenceParams { ancilla_f_t2: 100e-6, ..CoherenceParams::default() };
        assert!(matches!(coh.validate(), Err(Error::Physicality(_))));
    }

    #[test]
    fn coherence_json_null_is_infinite() {
        let j = serde_json::to_value(CoherenceParams::ideal()).unwrap();
        assert!(j["control_t1"].is_null());
        let back: CoherenceParams = serde_json::from_value(j).unwrap();
        assert_eq!(back, CoherenceParams::ideal());
    }

    #[test]
    fn ramp_pieces_cover_duration() {
        let p = DeviceParams::default();
        let seg = PulseSegment::sideband(50e-9, 1e7, 0.0, Envelope::Ramped { rise: 5e-9 }, &p, 0.0);
        let total: f64 = seg.pieces().iter().map(|x| x.0).sum();
        assert_abs_diff_eq!(total, 50e-9, epsilon = 1e-20);
        assert_eq!(seg.pieces().len(), 2 * RAMP_PIECES + 1);
    }

    #[test]
    fn f_decay_is_exponential() {
        let layout = ModeLayout::system(2, 2);
        let coh = CoherenceParams { ancilla_f_t2: 80e-6, ancilla_e_t2: 120e-6, ..CoherenceParams::ideal() };
        let coh = CoherenceParams { ancilla_f_t1: 40e-6, ancilla_e_t1: 60e-6, ..coh };
        let ops = collapse_operators(&coh, &layout).unwrap();
        let p = DeviceParams::default().without_nonlinearities();
        let rho = QuantumState::basis(&layout, &[0, 0, F]).to_density();
        let t = 5e-6;
        let out = evolve_lindblad(&rho, &[PulseSegment::idle(t, &p, 0.0)], &ops, 1e-10).unwrap();
        assert_abs_diff_eq!(out.ancilla_population(F), (-t / 40e-6f64).exp(), epsilon = 1e-8);
        assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-9);
    }
}
