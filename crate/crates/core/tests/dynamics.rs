mod common;

use std::f64::consts::PI;

use cavity_cnot::dynamics::*;
use cavity_cnot::hamiltonian::{DeviceParams, Envelope};
use cavity_cnot::hilbert::*;
use proptest::prelude::*;

const TWO_PI: f64 = 2.0 * PI;

fn linear() -> DeviceParams {
    DeviceParams::default().without_nonlinearities()
}

fn one_channel(f: impl FnOnce(&mut CoherenceParams)) -> CoherenceParams {
    let mut coh = CoherenceParams::ideal();
    f(&mut coh);
    coh
}

fn control_population(rho: &QuantumState, n: usize) -> f64 {
    let layout = rho.layout().clone();
    let m = rho.density_matrix();
    (0..layout.total_dim()).filter(|&i| layout.levels(i)[CONTROL] == n).map(|i| m[(i, i)].re).sum()
}

#[test]
fn lindblad_without_channels_matches_propagator() {
    let layout = ModeLayout::system(3, 3);
    let params = DeviceParams::default();
    let seg = PulseSegment::sideband(60e-9, TWO_PI * 7.8e6, 0.3, Envelope::Ramped { rise: 5e-9 }, &params, TWO_PI * 3.3e6);
    let psi = QuantumState::product(&layout, &[fock(3, 2), coherent(3, c(0.4, 0.0)), fock(3, G)]).unwrap();
    let u = sequence_propagator(&layout, std::slice::from_ref(&seg)).unwrap();
    let v = u.apply(psi.as_ket().unwrap());
    let rho = evolve_lindblad(&psi, &[seg], &[], 1e-10).unwrap();
    let exact = &v * v.adjoint();
    assert!(common::max_abs(&(rho.density_matrix() - exact)) < 1e-7);
}

#[test]
fn cavity_amplitude_damping_is_exponential() {
    let layout = ModeLayout::system(2, 2);
    let t1 = 10e-6;
    let coh = one_channel(|c| {
        c.control_t1 = t1;
        c.control_t2 = 2.0 * t1;
    });
    let ops = collapse_operators(&coh, &layout).unwrap();
    let psi = QuantumState::basis(&layout, &[1, 0, G]);
    let t = 7e-6;
    let rho = evolve_lindblad(&psi, &[PulseSegment::idle(t, &linear(), 0.0)], &ops, 1e-10).unwrap();
    assert!((control_population(&rho, 1) - (-t / t1).exp()).abs() < 1e-7);
}

#[test]
fn pure_dephasing_decays_coherence_at_t2() {
    let layout = ModeLayout::system(2, 2);
    let t2 = 5e-6;
    let coh = one_channel(|c| c.control_t2 = t2);
    let ops = collapse_operators(&coh, &layout).unwrap();
    let plus = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
    let psi = QuantumState::product(&layout, &[plus, fock(2, 0), fock(3, G)]).unwrap();
    let t = 3e-6;
    let rho = evolve_lindblad(&psi, &[PulseSegment::idle(t, &linear(), 0.0)], &ops, 1e-10).unwrap();
    let m = rho.density_matrix();
    let off = m[(layout.index(&[0, 0, G]), layout.index(&[1, 0, G]))].norm();
    assert!((off - 0.5 * (-t / t2).exp()).abs() < 1e-7, "{off}");
}

#[test]
fn thermal_occupation_relaxes_to_nth() {
    let layout = ModeLayout::system(2, 6);
    let (t1, nth) = (4e-6, 0.05);
    let coh = one_channel(|c| {
        c.target_t1 = t1;
        c.target_t2 = 2.0 * t1;
        c.thermal_target = nth;
    });
    let ops = collapse_operators(&coh, &layout).unwrap();
    let psi = QuantumState::basis(&layout, &[0, 0, G]);
    let t = 6e-6;
    let rho = evolve_lindblad(&psi, &[PulseSegment::idle(t, &linear(), 0.0)], &ops, 1e-10).unwrap();
    let nt = embed(&number(6), TARGET, &layout).unwrap();
    let mean = rho.expectation(&nt).re;
    // ⟨n⟩(t) = n_th (1 − e^{−t/T1}) for an untruncated oscillator.
    assert!((mean - nth * (1.0 - (-t / t1).exp())).abs() < 1e-5, "{mean}");
}

#[test]
fn ancilla_f_cascades_through_e() {
    let layout = ModeLayout::system(2, 2);
    let (tf, te) = (3e-6, 5e-6);
    let coh = one_channel(|c| {
        c.ancilla_f_t1 = tf;
        c.ancilla_f_t2 = 2.0 * tf;
        c.ancilla_e_t1 = te;
        c.ancilla_e_t2 = 2.0 * te;
    });
    let ops = collapse_operators(&coh, &layout).unwrap();
    let psi = QuantumState::basis(&layout, &[0, 0, F]);
    let t = 4e-6;
    let rho = evolve_lindblad(&psi, &[PulseSegment::idle(t, &linear(), 0.0)], &ops, 1e-10).unwrap();
    let (gf, ge) = (1.0 / tf, 1.0 / te);
    let pe = gf / (ge - gf) * ((-gf * t).exp() - (-ge * t).exp());
    assert!((rho.ancilla_population(F) - (-gf * t).exp()).abs() < 1e-7);
    assert!((rho.ancilla_population(E) - pe).abs() < 1e-7);
}

#[test]
fn sideband_trace_matches_detuned_rabi() {
    let params = DeviceParams::default();
    let omega = TWO_PI * 7.8e6;
    let delta = TWO_PI * 1.2e6;
    let times: Vec<f64> = (0..200).map(|k| k as f64 * 2e-9).collect();
    let trace = sideband_trace(1, &fock(2, 0), &params, omega, delta, &times).unwrap();
    // |1,0,g⟩ sits at 0 and |0,0,f⟩ at δ in the pump frame; coupling Ω/2.
    for (&t, &p) in times.iter().zip(&trace) {
        let b = 0.5 * (delta * delta + omega * omega).sqrt();
        let oracle = (omega * omega) / (delta * delta + omega * omega) * (b * t).sin().powi(2);
        assert!((p - oracle).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn negative_duration_rejected() {
    let layout = ModeLayout::system(2, 2);
    let seg = PulseSegment::idle(-1e-9, &linear(), 0.0);
    assert!(sequence_propagator(&layout, &[seg]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn splitting_a_segment_leaves_the_propagator_unchanged(frac in 0.01f64..0.99, phase in 0.0f64..6.28) {
        let layout = ModeLayout::system(3, 3);
        let params = DeviceParams::default();
        let (t, w, d) = (80e-9, TWO_PI * 7.8e6, TWO_PI * 2.0e6);
        let whole = PulseSegment::sideband(t, w, phase, Envelope::Rectangular, &params, d);
        let a = PulseSegment::sideband(frac * t, w, phase, Envelope::Rectangular, &params, d);
        let b = PulseSegment::sideband((1.0 - frac) * t, w, phase, Envelope::Rectangular, &params, d);
        let u1 = sequence_propagator(&layout, &[whole]).unwrap();
        let u2 = sequence_propagator(&layout, &[a, b]).unwrap();
        prop_assert!(common::max_abs(&(u1.matrix() - u2.matrix())) < 1e-10);
    }

    #[test]
    fn lindblad_preserves_trace_and_hermiticity(seed in any::<u64>(), t in 10e-9f64..400e-9) {
        let layout = ModeLayout::system(3, 3);
        let params = DeviceParams::default();
        let mut rng = common::rng(seed);
        let rho0 = QuantumState::density(&layout, common::random_density(&mut rng, layout.total_dim())).unwrap();
        let seg = PulseSegment::sideband(t, TWO_PI * 7.8e6, 0.0, Envelope::Rectangular, &params, 0.0);
        let ops = collapse_operators(&CoherenceParams::default(), &layout).unwrap();
        let rho = evolve_lindblad(&rho0, &[seg], &ops, DEFAULT_TOLERANCE).unwrap();
        let m = rho.density_matrix();
        prop_assert!((rho.trace() - 1.0).abs() < 1e-8);
        prop_assert!(common::max_abs(&(&m - m.adjoint())) < 1e-12);
        prop_assert!(rho.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn propagators_stay_unitary(t in 1e-9f64..1e-6, phase in 0.0f64..6.28) {
        let layout = ModeLayout::system(3, 5);
        let params = DeviceParams::default();
        let seg = PulseSegment::sideband(t, TWO_PI * 7.8e6, phase, Envelope::Ramped { rise: 4e-9 }, &params, TWO_PI * 3.0e6);
        let u = sequence_propagator(&layout, &[seg, PulseSegment::idle(t, &params, 1e6)]).unwrap();
        let n = layout.total_dim();
        prop_assert!(common::max_abs(&(u.matrix().adjoint() * u.matrix() - CMatrix::identity(n, n))) < 1e-10);
    }
}
