#![allow(dead_code)]

use cavity_cnot::hilbert::{CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = random_matrix(rng, n);
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Full-rank density matrix A A† / Tr.
pub fn random_density(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = random_matrix(rng, n);
    let m = &a * a.adjoint();
    let tr = m.trace();
    m / tr
}

/// Haar-like unitary from the QR factor of a random matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    random_matrix(rng, n).qr().q()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}
