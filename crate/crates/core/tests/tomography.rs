mod common;

use cavity_cnot::gate::{ideal_cnot_logical, logical_superposition, LogicalEncoding};
use cavity_cnot::hilbert::*;
use cavity_cnot::tomography::*;
use cavity_cnot::Error;
use proptest::prelude::*;
use rand::Rng;

fn cavities(dc: usize, dt: usize, a: CVector, b: CVector) -> QuantumState {
    QuantumState::product(&ModeLayout::cavities(dc, dt), &[a, b]).unwrap().to_density()
}

fn random_amps(rng: &mut impl Rng) -> [C64; 4] {
    let mut a = [c(0.0, 0.0); 4];
    for z in &mut a {
        *z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    let n = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    a.map(|z| z / n)
}

fn code_state(enc: LogicalEncoding, amps: &[C64; 4]) -> QuantumState {
    let layout = enc.minimal_layout().cavity_part();
    logical_superposition(enc, amps, &layout).unwrap().to_density()
}

#[test]
fn fock_origin_value_alternates_with_total_parity() {
    let origin = [(c(0.0, 0.0), c(0.0, 0.0))];
    for m in 0..3 {
        for n in 0..3 {
            let rho = cavities(3, 3, fock(3, m), fock(3, n));
            let w = joint_wigner(&rho, &origin, &WignerOptions::default()).unwrap()[0].value;
            let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
            assert!((w - sign * 4.0 / (std::f64::consts::PI.powi(2))).abs() < 1e-12);
        }
    }
}

#[test]
fn joint_coherent_state_is_product_gaussian() {
    let (a, b) = (c(0.3, 0.2), c(-0.4, 0.1));
    let rho = cavities(14, 14, coherent(14, a), coherent(14, b));
    let grid = [(c(0.1, 0.0), c(0.0, -0.2)), (a, b), (c(-0.5, 0.5), c(0.2, 0.2))];
    for s in joint_wigner(&rho, &grid, &WignerOptions::default()).unwrap() {
        let oracle = WIGNER_SCALE * (-2.0 * (s.beta_c - a).norm_sqr() - 2.0 * (s.beta_t - b).norm_sqr()).exp();
        assert!((s.value - oracle).abs() < 1e-8);
    }
}

#[test]
fn wigner_integrates_to_trace() {
    let (n, extent) = (13, 3.0);
    let step = 2.0 * extent / (n - 1) as f64;
    let rho = cavities(3, 3, fock(3, 1), fock(3, 0));
    let samples = joint_wigner(&rho, &displacement_grid(n, extent), &WignerOptions::default()).unwrap();
    let integral: f64 = samples.iter().map(|s| s.value).sum::<f64>() * step.powi(4);
    assert!((integral - 1.0).abs() < 0.02, "{integral}");
}

#[test]
fn noiseless_round_trip_on_code_states() {
    let mut rng = common::rng(11);
    for enc in [LogicalEncoding::Kitten, LogicalEncoding::SinglePhoton] {
        let layout = enc.minimal_layout().cavity_part();
        let dims = (layout.dims()[0], layout.dims()[1]);
        let grid = default_grid();
        let rec = Reconstructor::new(&grid, dims, &MleOptions::default()).unwrap();
        for _ in 0..5 {
            let rho = code_state(enc, &random_amps(&mut rng));
            let samples = joint_wigner(&rho, &grid, &WignerOptions::default()).unwrap();
            let back = rec.reconstruct(&samples).unwrap();
            let err = common::max_abs(&(back.density_matrix() - rho.density_matrix()));
            assert!(err < 1e-6, "{enc:?}: {err}");
        }
    }
}

#[test]
fn contrast_calibration_restores_values() {
    let rho = code_state(LogicalEncoding::Kitten, &random_amps(&mut common::rng(3)));
    let grid = displacement_grid(3, 1.0);
    let clean = joint_wigner(&rho, &grid, &WignerOptions::default()).unwrap();
    let opts = WignerOptions { contrast: PARITY_CONTRAST, ..WignerOptions::default() };
    let dimmed = joint_wigner(&rho, &grid, &opts).unwrap();
    let vac = cavities(2, 2, fock(2, 0), fock(2, 0));
    let v0 = joint_wigner(&vac, &[(c(0.0, 0.0), c(0.0, 0.0))], &opts).unwrap()[0].value;
    let k = contrast_from_vacuum(v0);
    assert!((k - PARITY_CONTRAST).abs() < 1e-12);
    for (a, b) in calibrate_contrast(&dimmed, k).iter().zip(&clean) {
        assert!((a.value - b.value).abs() < 1e-12);
    }
}

#[test]
fn shot_noise_is_seeded() {
    let rho = cavities(2, 2, fock(2, 1), fock(2, 0));
    let grid = displacement_grid(2, 0.5);
    let opts = |seed| WignerOptions { shots: Some(500), seed, ..WignerOptions::default() };
    let a = joint_wigner(&rho, &grid, &opts(4)).unwrap();
    let b = joint_wigner(&rho, &grid, &opts(4)).unwrap();
    let d = joint_wigner(&rho, &grid, &opts(5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, d);
    let exact = joint_wigner(&rho, &grid, &WignerOptions::default()).unwrap();
    for (s, e) in a.iter().zip(&exact) {
        assert!((s.value - e.value).abs() < 6.0 * WIGNER_SCALE / 500f64.sqrt());
    }
}

#[test]
fn small_grid_is_underdetermined() {
    let err = Reconstructor::new(&displacement_grid(2, 1.0), (3, 5), &MleOptions::default()).err().unwrap();
    assert!(matches!(err, Error::Underdetermined(_)));
}

#[test]
fn identity_process_tomography() {
    let enc = LogicalEncoding::Kitten;
    let layout = enc.minimal_layout().cavity_part();
    let chi = qpt(|s| Ok(s.clone()), enc, &layout).unwrap();
    let id = ProcessMatrix::from_unitary(&CMatrix::identity(4, 4));
    assert!((process_fidelity(&id, &chi) - 1.0).abs() < 1e-10);
}

#[test]
fn depolarized_identity_fidelity() {
    let ins: Vec<CMatrix> = qpt_inputs().into_iter().map(|x| x.2).collect();
    let id = ProcessMatrix::from_unitary(&CMatrix::identity(4, 4));
    for p in [0.0, 0.05, 0.3, 1.0] {
        let outs: Vec<CMatrix> = ins.iter().map(|m| depolarize(m, p)).collect();
        let f = process_fidelity(&id, &chi_from_io(&ins, &outs).unwrap());
        assert!((f - (1.0 - 15.0 * p / 16.0)).abs() < 1e-10);
    }
}

#[test]
fn code_space_depolarization_matches_logical() {
    let enc = LogicalEncoding::SinglePhoton;
    let rho = code_state(enc, &random_amps(&mut common::rng(8)));
    let p = 0.1;
    let a = project_to_qubits(&depolarize_code_space(&rho, enc, p).unwrap(), enc).unwrap();
    let b = depolarize(&project_to_qubits(&rho, enc).unwrap().rho, p);
    assert!(common::max_abs(&(a.rho - b)) < 1e-12);
    assert!(a.leakage < 1e-12);
}

#[test]
fn matrix_csv_layout() {
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, &CMatrix::identity(2, 2), &fock_labels((1, 2))).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# basis (row-major): |0,0> |0,1>");
    assert_eq!(lines[1], "row,col,re,im");
    assert_eq!(lines.len(), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn concurrence_is_local_unitary_invariant(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let rho = common::random_density(&mut rng, 4);
        let (ua, ub) = (common::random_unitary(&mut rng, 2), common::random_unitary(&mut rng, 2));
        let u = kron(&ua, &ub);
        let rotated = &u * &rho * u.adjoint();
        let (c0, c1) = (concurrence(&rho), concurrence(&rotated));
        prop_assert!((c0 - c1).abs() < 1e-7);
        prop_assert!((0.0..=1.0).contains(&c0));
    }

    #[test]
    fn unitary_channels_give_unit_trace_physical_chi(seed in any::<u64>(), p in 0.0f64..1.0) {
        let mut rng = common::rng(seed);
        let u = common::random_unitary(&mut rng, 4);
        let ins: Vec<CMatrix> = qpt_inputs().into_iter().map(|x| x.2).collect();
        let outs: Vec<CMatrix> = ins.iter().map(|m| depolarize(&(&u * m * u.adjoint()), p)).collect();
        let chi = chi_from_io(&ins, &outs).unwrap();
        prop_assert!((chi.trace() - 1.0).abs() < 1e-9);
        let eig = nalgebra::SymmetricEigen::new(chi.chi.clone()).eigenvalues;
        prop_assert!(eig.iter().all(|&l| l > -1e-9));
        let f = process_fidelity(&ProcessMatrix::from_unitary(&u), &chi);
        prop_assert!((f - (1.0 - 15.0 * p / 16.0)).abs() < 1e-9);
    }

    #[test]
    fn chi_apply_reproduces_outputs(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let rho = common::random_density(&mut rng, 4);
        let cnot = ideal_cnot_logical();
        let chi = ProcessMatrix::from_unitary(&cnot);
        prop_assert!(common::max_abs(&(chi.apply(&rho) - &cnot * &rho * cnot.adjoint())) < 1e-12);
    }
}
