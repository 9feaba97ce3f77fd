//! Static and pumped Hamiltonians of the two-cavity + transmon system, and
//! the pump-derived quantities (frequency matching, sideband rate, Stark
//! shift).
//!
//! All quantities are angular frequencies (rad/s) internally. The serialized
//! form of [`DeviceParams`] uses plain Hz.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, c, embed, number, projector, transition, ModeLayout, Operator, C64, ANCILLA,
    CONTROL, E, F, G, TARGET,
};

const TWO_PI: f64 = 2.0 * PI;

/// Readout-resonator terms. Carried for completeness, never evolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutParams {
    pub omega_r: f64,
    pub chi_re: f64,
    pub chi_rf: f64,
    pub chi_cr: f64,
    pub chi_tr: f64,
    pub kerr_rr: f64,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        Self {
            omega_r: TWO_PI * 7.70e9,
            chi_re: TWO_PI * 1.74e6,
            chi_rf: TWO_PI * 3.3e6,
            chi_cr: TWO_PI * 5e3,
            chi_tr: TWO_PI * 12e3,
            kerr_rr: TWO_PI * 7e3,
        }
    }
}

/// Parameters of the fourth-order system Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "DeviceParamsHz", into = "DeviceParamsHz")]
pub struct DeviceParams {
    /// Control–ancilla f-level dispersive shift.
    pub chi_c: f64,
    /// Target–ancilla f-level dispersive shift.
    pub chi_t: f64,
    /// Target–ancilla f-level dispersive shift while the pump is on.
    pub chi_t_pump: f64,
    pub chi_ce: f64,
    pub chi_te: f64,
    /// Cavity–cavity cross-Kerr.
    pub chi_ct: f64,
    pub kerr_cc: f64,
    pub kerr_tt: f64,
    pub omega_c: f64,
    pub omega_t: f64,
    pub omega_ge: f64,
    pub omega_gf: f64,
    /// Josephson energy over ħ.
    pub ej: f64,
    pub phi_q: f64,
    pub phi_c: f64,
    /// Not reported for this device.
    pub phi_t: Option<f64>,
    pub phi_r: Option<f64>,
    pub readout: ReadoutParams,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            chi_c: TWO_PI * 3.3e6,
            chi_t: TWO_PI * 1.9e6,
            chi_t_pump: TWO_PI * 1.4e6,
            chi_ce: TWO_PI * 1.02e6,
            chi_te: TWO_PI * 1.10e6,
            chi_ct: TWO_PI * 2e3,
            kerr_cc: TWO_PI * 1.6e3,
            kerr_tt: TWO_PI * 3.4e3,
            omega_c: TWO_PI * 4.22e9,
            omega_t: TWO_PI * 5.45e9,
            omega_ge: TWO_PI * 4.79e9,
            omega_gf: TWO_PI * 9.46e9,
            ej: TWO_PI * 21e9,
            phi_q: 0.32,
            phi_c: 0.016,
            phi_t: None,
            phi_r: None,
            readout: ReadoutParams::default(),
        }
    }
}

impl DeviceParams {
    /// Copy with χ̃_T replaced by its pump-on value.
    pub fn pump_on(&self) -> Self {
        Self { chi_t: self.chi_t_pump, ..self.clone() }
    }

    /// Copy with every dispersive, cross-Kerr and self-Kerr term zeroed.
    pub fn without_nonlinearities(&self) -> Self {
        Self {
            chi_c: 0.0,
            chi_t: 0.0,
            chi_t_pump: 0.0,
            chi_ce: 0.0,
            chi_te: 0.0,
            chi_ct: 0.0,
            kerr_cc: 0.0,
            kerr_tt: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let limit = TWO_PI * 100e6;
        let shifts = [
            ("chi_c", self.chi_c),
            ("chi_t", self.chi_t),
            ("chi_t_pump", self.chi_t_pump),
            ("chi_ce", self.chi_ce),
            ("chi_te", self.chi_te),
            ("chi_ct", self.chi_ct),
            ("kerr_cc", self.kerr_cc),
            ("kerr_tt", self.kerr_tt),
        ];
        for (name, v) in shifts {
            if !v.is_finite() || v.abs() >= limit {
                return Err(Error::Config(format!("{name} must be below 100 MHz in magnitude")));
            }
        }
        let freqs = [
            ("omega_c", self.omega_c),
            ("omega_t", self.omega_t),
            ("omega_ge", self.omega_ge),
            ("omega_gf", self.omega_gf),
            ("ej", self.ej),
        ];
        for (name, v) in freqs {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// JSON form of [`DeviceParams`], every rate in Hz.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParamsHz {
    pub chi_c: f64,
    pub chi_t: f64,
    pub chi_t_pump: f64,
    pub chi_ce: f64,
    pub chi_te: f64,
    pub chi_ct: f64,
    pub kerr_cc: f64,
    pub kerr_tt: f64,
    pub omega_c: f64,
    pub omega_t: f64,
    pub omega_ge: f64,
    pub omega_gf: f64,
    pub ej: f64,
    pub phi_q: f64,
    pub phi_c: f64,
    pub phi_t: Option<f64>,
    pub phi_r: Option<f64>,
    pub omega_r: f64,
    pub chi_re: f64,
    pub chi_rf: f64,
    pub chi_cr: f64,
    pub chi_tr: f64,
    pub kerr_rr: f64,
}

impl From<DeviceParamsHz> for DeviceParams {
    fn from(h: DeviceParamsHz) -> Self {
        let w = |x: f64| TWO_PI * x;
        Self {
            chi_c: w(h.chi_c),
            chi_t: w(h.chi_t),
            chi_t_pump: w(h.chi_t_pump),
            chi_ce: w(h.chi_ce),
            chi_te: w(h.chi_te),
            chi_ct: w(h.chi_ct),
            kerr_cc: w(h.kerr_cc),
            kerr_tt: w(h.kerr_tt),
            omega_c: w(h.omega_c),
            omega_t: w(h.omega_t),
            omega_ge: w(h.omega_ge),
            omega_gf: w(h.omega_gf),
            ej: w(h.ej),
            phi_q: h.phi_q,
            phi_c: h.phi_c,
            phi_t: h.phi_t,
            phi_r: h.phi_r,
            readout: ReadoutParams {
                omega_r: w(h.omega_r),
                chi_re: w(h.chi_re),
                chi_rf: w(h.chi_rf),
                chi_cr: w(h.chi_cr),
                chi_tr: w(h.chi_tr),
                kerr_rr: w(h.kerr_rr),
            },
        }
    }
}

impl From<DeviceParams> for DeviceParamsHz {
    fn from(p: DeviceParams) -> Self {
        let hz = |x: f64| x / TWO_PI;
        Self {
            chi_c: hz(p.chi_c),
            chi_t: hz(p.chi_t),
            chi_t_pump: hz(p.chi_t_pump),
            chi_ce: hz(p.chi_ce),
            chi_te: hz(p.chi_te),
            chi_ct: hz(p.chi_ct),
            kerr_cc: hz(p.kerr_cc),
            kerr_tt: hz(p.kerr_tt),
            omega_c: hz(p.omega_c),
            omega_t: hz(p.omega_t),
            omega_ge: hz(p.omega_ge),
            omega_gf: hz(p.omega_gf),
            ej: hz(p.ej),
            phi_q: p.phi_q,
            phi_c: p.phi_c,
            phi_t: p.phi_t,
            phi_r: p.phi_r,
            omega_r: hz(p.readout.omega_r),
            chi_re: hz(p.readout.chi_re),
            chi_rf: hz(p.readout.chi_rf),
            chi_cr: hz(p.readout.chi_cr),
            chi_tr: hz(p.readout.chi_tr),
            kerr_rr: hz(p.readout.kerr_rr),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Rectangular,
    /// Linear rise and fall of `rise` seconds at each edge.
    Ramped { rise: f64 },
}

/// Sideband pump settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PumpParamsJson", into = "PumpParamsJson")]
pub struct PumpParams {
    /// Dimensionless ancilla displacement.
    pub xi: C64,
    /// Pump angular frequency; `None` means "matched for the encoding".
    pub omega_p: Option<f64>,
    pub phase: f64,
    pub envelope: Envelope,
    /// Direct Ω_C override (rad/s); bypasses the Josephson-mixing estimate.
    pub omega_sb: Option<f64>,
    /// Offset added to the matched pump frequency (rad/s).
    pub detuning_offset: f64,
    /// Replace χ̃_T by χ̃_T^pump while a sideband segment is active.
    pub chi_t_switch: bool,
}

impl Default for PumpParams {
    fn default() -> Self {
        Self {
            xi: c(0.5, 0.0),
            omega_p: None,
            phase: 0.0,
            envelope: Envelope::Rectangular,
            omega_sb: None,
            detuning_offset: 0.0,
            chi_t_switch: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpParamsJson {
    /// `[re, im]`.
    pub xi: [f64; 2],
    /// Hz, or null for automatic matching.
    pub omega_p: Option<f64>,
    pub phase: f64,
    pub envelope: Envelope,
    /// Hz, or null to derive Ω_C from `xi`.
    pub omega_sb: Option<f64>,
    /// Hz.
    pub detuning_offset: f64,
    pub chi_t_switch: bool,
}

impl From<PumpParamsJson> for PumpParams {
    fn from(j: PumpParamsJson) -> Self {
        Self {
            xi: c(j.xi[0], j.xi[1]),
            omega_p: j.omega_p.map(|f| TWO_PI * f),
            phase: j.phase,
            envelope: j.envelope,
            omega_sb: j.omega_sb.map(|f| TWO_PI * f),
            detuning_offset: TWO_PI * j.detuning_offset,
            chi_t_switch: j.chi_t_switch,
        }
    }
}

impl From<PumpParams> for PumpParamsJson {
    fn from(p: PumpParams) -> Self {
        Self {
            xi: [p.xi.re, p.xi.im],
            omega_p: p.omega_p.map(|w| w / TWO_PI),
            phase: p.phase,
            envelope: p.envelope,
            omega_sb: p.omega_sb.map(|w| w / TWO_PI),
            detuning_offset: p.detuning_offset / TWO_PI,
            chi_t_switch: p.chi_t_switch,
        }
    }
}

impl PumpParams {
    pub fn with_rate(omega_sb: f64) -> Self {
        Self { omega_sb: Some(omega_sb), ..Self::default() }
    }

    /// Device parameters in effect while this pump is on.
    pub fn effective_device(&self, params: &DeviceParams) -> DeviceParams {
        if self.chi_t_switch {
            params.pump_on()
        } else {
            params.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    /// Every mode co-rotating at its bare frequency.
    Rotating,
}

fn require_ancilla(layout: &ModeLayout) -> Result<()> {
    if !layout.has_ancilla() || layout.num_modes() != 3 {
        return Err(Error::Layout("Hamiltonian needs a [control, target, ancilla] layout".into()));
    }
    Ok(())
}

/// Number-diagonal system Hamiltonian: dispersive e/f shifts, cross-Kerr and
/// self-Kerr, plus bare frequencies in the lab frame. Readout terms omitted.
pub fn build_static(params: &DeviceParams, layout: &ModeLayout, frame: Frame) -> Result<Operator> {
    require_ancilla(layout)?;
    let diag: Vec<f64> = (0..layout.total_dim())
        .map(|i| {
            let lv = layout.levels(i);
            static_energy(params, lv[CONTROL] as f64, lv[TARGET] as f64, lv[ANCILLA], frame)
        })
        .collect();
    Ok(Operator::diagonal(layout, &diag))
}

/// Diagonal element of [`build_static`] for photon numbers `(nc, nt)` and
/// ancilla level `anc`.
pub fn static_energy(params: &DeviceParams, nc: f64, nt: f64, anc: usize, frame: Frame) -> f64 {
    let mut e = -params.chi_ct * nc * nt
        - 0.5 * params.kerr_cc * nc * (nc - 1.0)
        - 0.5 * params.kerr_tt * nt * (nt - 1.0);
    match anc {
        E => e -= params.chi_ce * nc + params.chi_te * nt,
        F => e -= params.chi_c * nc + params.chi_t * nt,
        _ => {}
    }
    if frame == Frame::Lab {
        e += params.omega_c * nc + params.omega_t * nt;
        e += match anc {
            E => params.omega_ge,
            F => params.omega_gf,
            _ => 0.0,
        };
    }
    e
}

/// Ω_C: from the override if present, else √2·E_J·φ_q³·φ_C·|ξ|.
pub fn sideband_omega(params: &DeviceParams, pump: &PumpParams) -> Result<f64> {
    if let Some(w) = pump.omega_sb {
        return Ok(w);
    }
    let strength = params.phi_q * pump.xi.norm();
    if strength >= 0.5 {
        return Err(Error::ExpansionValidity(strength));
    }
    Ok(SQRT_2 * params.ej * params.phi_q.powi(3) * params.phi_c * pump.xi.norm())
}

/// Full sideband oscillation rate √n_C·Ω_C of |n_C, g⟩ ↔ |n_C−1, f⟩.
pub fn sideband_rate(params: &DeviceParams, pump: &PumpParams, n_c: usize) -> Result<f64> {
    if n_c == 0 {
        return Err(Error::NoTransition);
    }
    Ok((n_c as f64).sqrt() * sideband_omega(params, pump)?)
}

/// Pump frequency resonant with |n_C, n_T, g⟩ ↔ |n_C−1, n_T, f⟩.
pub fn pump_frequency(n_c: usize, n_t: usize, params: &DeviceParams) -> Result<f64> {
    if n_c == 0 {
        return Err(Error::NoTransition);
    }
    Ok(params.omega_gf
        - params.omega_c
        - (n_c as f64 - 1.0) * params.chi_c
        - n_t as f64 * params.chi_t)
}

/// Per-excitation ancilla Stark shift −E_J φ_q⁴ |ξ|².
pub fn stark_shift(params: &DeviceParams, pump: &PumpParams) -> f64 {
    -params.ej * params.phi_q.powi(4) * pump.xi.norm_sqr()
}

/// |ξ| inferred from a measured Stark shift (inverse of [`stark_shift`]).
pub fn xi_from_stark_shift(params: &DeviceParams, shift: f64) -> Result<f64> {
    let denom = params.ej * params.phi_q.powi(4);
    if shift > 0.0 || denom <= 0.0 {
        return Err(Error::Numeric("Stark shift must be negative".into()));
    }
    Ok((-shift / denom).sqrt())
}

/// Energy of |f⟩ in the frame co-rotating with the pump: ω_gf − ω_C − ω_p.
pub fn frame_offset(params: &DeviceParams, omega_p: f64) -> f64 {
    params.omega_gf - params.omega_c - omega_p
}

/// δ·|f⟩⟨f| with δ from [`frame_offset`]. Added to every segment so the
/// pumped sideband term is static.
pub fn pump_frame_shift(params: &DeviceParams, omega_p: f64, layout: &ModeLayout) -> Result<Operator> {
    require_ancilla(layout)?;
    let pf = embed(&projector(3, F), ANCILLA, layout)?;
    Ok(&pf * frame_offset(params, omega_p))
}

/// (Ω_C/2)(e^{iφ} a_C |f⟩⟨g| + h.c.), in the pump frame.
pub fn build_sideband(params: &DeviceParams, pump: &PumpParams, layout: &ModeLayout) -> Result<Operator> {
    let omega = sideband_omega(params, pump)?;
    sideband_coupling(omega, pump.phase + pump.xi.arg(), layout)
}

/// Sideband coupling for a given Ω_C and total phase.
pub fn sideband_coupling(omega: f64, phase: f64, layout: &ModeLayout) -> Result<Operator> {
    require_ancilla(layout)?;
    let a = embed(&annihilation(layout.dims()[CONTROL])?, CONTROL, layout)?;
    let fg = embed(&transition(3, F, G), ANCILLA, layout)?;
    let raising = &a * &fg;
    let half = 0.5 * omega;
    let coupling = &raising.scale(C64::from_polar(half, phase)) + &raising.dagger().scale(C64::from_polar(half, -phase));
    Ok(coupling)
}

/// Cross-Kerr term alone, −χ_CT n̂_C n̂_T.
pub fn cross_kerr(params: &DeviceParams, layout: &ModeLayout) -> Result<Operator> {
    let nc = embed(&number(layout.dims()[CONTROL]), CONTROL, layout)?;
    let nt = embed(&number(layout.dims()[TARGET]), TARGET, layout)?;
    Ok(&(&nc * &nt) * (-params.chi_ct))
}
