//! Joint Wigner sampling, least-squares maximum-likelihood reconstruction,
//! fidelities, process tomography and concurrence.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{logical_state, logical_superposition, Logical, LogicalEncoding, QPT_INPUTS};
use crate::hilbert::{
    annihilation, c, exp_hermitian, CMatrix, ModeLayout, QuantumState, C64, CONTROL, G, TARGET,
};
use crate::par;

/// 4/π².
pub const WIGNER_SCALE: f64 = 4.0 / (PI * PI);

/// Default Fock levels added when evaluating displaced parity.
pub const WIGNER_GUARD: usize = 40;

/// Measured parity contrast of the vacuum state.
pub const PARITY_CONTRAST: f64 = 0.79;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerSample {
    pub beta_c: C64,
    pub beta_t: C64,
    pub value: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerOptions {
    pub guard: usize,
    /// Parity contrast multiplying every value.
    pub contrast: f64,
    /// Parity shots per point; `None` gives exact expectations.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for WignerOptions {
    fn default() -> Self {
        Self { guard: WIGNER_GUARD, contrast: 1.0, shots: None, seed: 0 }
    }
}

/// `n` evenly spaced points per quadrature in [−extent, extent], for both
/// cavities: n⁴ displacement pairs.
pub fn displacement_grid(n: usize, extent: f64) -> Vec<(C64, C64)> {
    let axis: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        (0..n).map(|k| -extent + 2.0 * extent * k as f64 / (n - 1) as f64).collect()
    };
    let mut single = Vec::with_capacity(n * n);
    for &re in &axis {
        for &im in &axis {
            single.push(c(re, im));
        }
    }
    let mut out = Vec::with_capacity(single.len() * single.len());
    for &bc in &single {
        for &bt in &single {
            out.push((bc, bt));
        }
    }
    out
}

/// Quadrature extent of [`default_grid`]. Keeps the design for code-space
/// truncations up to (3, 5) well conditioned (σ_max/σ_min ≈ 6).
pub const DEFAULT_EXTENT: f64 = 1.1;

/// Default tomography grid: 6 points per quadrature, |Re β|, |Im β| ≤ 1.1.
pub fn default_grid() -> Vec<(C64, C64)> {
    displacement_grid(6, DEFAULT_EXTENT)
}

/// D(β) P D(β)† on the lowest `dim` levels, computed in `dim + guard`.
pub fn displaced_parity(beta: C64, dim: usize, guard: usize) -> Result<CMatrix> {
    let big = dim + guard.max(1);
    let a = annihilation(big)?;
    let gen = (a.dagger().scale(beta) - a.scale(beta.conj())).matrix() * c(0.0, 1.0);
    let d = exp_hermitian(&gen, c(0.0, -1.0));
    let mut dp = d.clone();
    for j in (1..big).step_by(2) {
        for i in 0..big {
            dp[(i, j)] = -dp[(i, j)];
        }
    }
    let full = dp * d.adjoint();
    Ok(full.view((0, 0), (dim, dim)).into_owned())
}

/// Per-mode kernels for every distinct displacement of a grid.
struct Kernels {
    betas: Vec<C64>,
    mats: Vec<CMatrix>,
}

impl Kernels {
    fn new(betas: impl Iterator<Item = C64>, dim: usize, guard: usize) -> Result<Self> {
        let mut uniq: Vec<C64> = Vec::new();
        for b in betas {
            if !uniq.iter().any(|u| (u - b).norm() == 0.0) {
                uniq.push(b);
            }
        }
        let mats = par::map(&uniq, |&b| displaced_parity(b, dim, guard));
        let mats = mats.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self { betas: uniq, mats })
    }

    fn get(&self, b: C64) -> &CMatrix {
        let k = self.betas.iter().position(|u| (u - b).norm() == 0.0).expect("kernel was built for this beta");
        &self.mats[k]
    }
}

fn check_cavity_layout(layout: &ModeLayout) -> Result<(usize, usize)> {
    if layout.has_ancilla() || layout.num_modes() != 2 {
        return Err(Error::Layout("expected a two-cavity layout".into()));
    }
    Ok((layout.dims()[CONTROL], layout.dims()[TARGET]))
}

/// Tr[ρ (A ⊗ B)] for ρ on a dc·dt space.
fn trace_kron(rho: &CMatrix, a: &CMatrix, b: &CMatrix) -> C64 {
    let (dc, dt) = (a.nrows(), b.nrows());
    let mut acc = c(0.0, 0.0);
    for i in 0..dc {
        for k in 0..dc {
            let aik = a[(i, k)];
            if aik.norm() == 0.0 {
                continue;
            }
            for j in 0..dt {
                for l in 0..dt {
                    acc += aik * b[(j, l)] * rho[(k * dt + l, i * dt + j)];
                }
            }
        }
    }
    acc
}

/// W_J(β_C, β_T) = (4/π²) Tr[ρ D P D†] for a two-cavity state, optionally
/// scaled by a contrast and sampled with binomial shot noise.
pub fn joint_wigner(rho: &QuantumState, grid: &[(C64, C64)], opts: &WignerOptions) -> Result<Vec<WignerSample>> {
    let (dc, dt) = check_cavity_layout(rho.layout())?;
    let max_b = grid.iter().fold(0.0f64, |m, (a, b)| m.max(a.norm_sqr()).max(b.norm_sqr()));
    if max_b > opts.guard as f64 / 2.0 {
        log::warn!("displacement |beta|^2 = {max_b:.2} is large for guard {}", opts.guard);
    }
    let kc = Kernels::new(grid.iter().map(|g| g.0), dc, opts.guard)?;
    let kt = Kernels::new(grid.iter().map(|g| g.1), dt, opts.guard)?;
    let m = rho.density_matrix();
    let exact: Vec<f64> = par::map(grid, |&(bc, bt)| trace_kron(&m, kc.get(bc), kt.get(bt)).re);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(grid.len());
    for (&(bc, bt), &parity) in grid.iter().zip(&exact) {
        let scaled = (opts.contrast * parity).clamp(-1.0, 1.0);
        let (value, weight) = match opts.shots {
            None | Some(0) => (WIGNER_SCALE * scaled, 1.0),
            Some(n) => {
                let p_plus = 0.5 * (1.0 + scaled);
                let k = Binomial::new(n, p_plus)
                    .map_err(|e| Error::Numeric(format!("binomial sampling: {e}")))?
                    .sample(&mut rng);
                let est = 2.0 * k as f64 / n as f64 - 1.0;
                // variance floor keeps weights finite at |parity| = 1
                let var = ((1.0 - est * est) / n as f64).max(1.0 / (n as f64 * n as f64));
                (WIGNER_SCALE * est, 1.0 / (WIGNER_SCALE * WIGNER_SCALE * var))
            }
        };
        out.push(WignerSample { beta_c: bc, beta_t: bt, value, weight });
    }
    Ok(out)
}

/// Parity contrast inferred from the vacuum value at the origin.
pub fn contrast_from_vacuum(vacuum_value: f64) -> f64 {
    vacuum_value / WIGNER_SCALE
}

/// Divides every sample by the contrast (weights scale accordingly).
pub fn calibrate_contrast(samples: &[WignerSample], contrast: f64) -> Vec<WignerSample> {
    samples
        .iter()
        .map(|s| WignerSample { value: s.value / contrast, weight: s.weight * contrast * contrast, ..*s })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub guard: usize,
    pub max_iterations: usize,
    /// Stop once the objective improves by less than this per iteration.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { guard: WIGNER_GUARD, max_iterations: 20_000, tolerance: 1e-10 }
    }
}

/// Orthonormal Hermitian basis coordinates of the Hilbert–Schmidt inner
/// product Tr[B_p M] for Hermitian M.
fn hermitian_coords(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let s2 = 2f64.sqrt();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(m[(i, i)].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(s2 * m[(i, j)].re);
            out.push(s2 * m[(i, j)].im);
        }
    }
    out
}

fn from_hermitian_coords(x: &[f64], d: usize) -> CMatrix {
    let s2 = 2f64.sqrt();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = c(x[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = c(x[k], x[k + 1]) / s2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

fn psd_project(m: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(m.clone());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let w = l.max(0.0);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= c(w, 0.0);
        }
    }
    scaled * v.adjoint()
}

/// Weighted least-squares design over a fixed displacement grid.
struct Design {
    a: DMatrix<f64>,
    ata: DMatrix<f64>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lip: f64,
}

impl Design {
    fn new(rows: &[Vec<f64>], np: usize) -> Result<Self> {
        let a = DMatrix::from_fn(rows.len(), np, |i, j| rows[i][j]);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::Underdetermined(format!(
                "design matrix rank-deficient (sigma_min/sigma_max = {:.2e})",
                smin / smax
            )));
        }
        let ata = a.transpose() * &a;
        Ok(Self { a, ata, svd, lip: 2.0 * smax * smax })
    }
}

/// Reusable reconstruction on a fixed grid and Fock truncation.
pub struct Reconstructor {
    dims: (usize, usize),
    grid: Vec<(C64, C64)>,
    /// Unweighted Hermitian-coordinate rows, one per displacement.
    rows: Vec<Vec<f64>>,
    uniform: Design,
    opts: MleOptions,
}

impl Reconstructor {
    pub fn new(grid: &[(C64, C64)], dims: (usize, usize), opts: &MleOptions) -> Result<Self> {
        let (dc, dt) = dims;
        let np = (dc * dt).pow(2);
        if grid.len() < np {
            return Err(Error::Underdetermined(format!("{} displacements for {np} real parameters", grid.len())));
        }
        let kc = Kernels::new(grid.iter().map(|g| g.0), dc, opts.guard)?;
        let kt = Kernels::new(grid.iter().map(|g| g.1), dt, opts.guard)?;
        let rows: Vec<Vec<f64>> = par::map(grid, |&(bc, bt)| {
            let m = kc.get(bc).kronecker(kt.get(bt)) * c(WIGNER_SCALE, 0.0);
            hermitian_coords(&m)
        });
        let uniform = Design::new(&rows, np)?;
        Ok(Self { dims, grid: grid.to_vec(), rows, uniform, opts: opts.clone() })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn reconstruct(&self, samples: &[WignerSample]) -> Result<QuantumState> {
        if samples.len() != self.grid.len()
            || samples.iter().zip(&self.grid).any(|(s, g)| s.beta_c != g.0 || s.beta_t != g.1)
        {
            return Err(Error::Precondition("samples do not match the reconstruction grid".into()));
        }
        let mean_w = samples.iter().map(|s| s.weight).sum::<f64>() / samples.len() as f64;
        if !(mean_w > 0.0) {
            return Err(Error::Numeric("sample weights must be positive".into()));
        }
        let sw: Vec<f64> = samples.iter().map(|s| (s.weight / mean_w).sqrt()).collect();
        let y = nalgebra::DVector::from_iterator(samples.len(), samples.iter().zip(&sw).map(|(s, w)| s.value * w));
        let weighted;
        let design = if sw.iter().all(|&w| (w - 1.0).abs() < 1e-12) {
            &self.uniform
        } else {
            let rows: Vec<Vec<f64>> =
                self.rows.iter().zip(&sw).map(|(r, w)| r.iter().map(|v| v * w).collect()).collect();
            weighted = Design::new(&rows, self.uniform.a.ncols())?;
            &weighted
        };
        let d = self.dims.0 * self.dims.1;
        let x_lin = design.svd.solve(&y, 1e-14).map_err(|e| Error::Numeric(e.to_string()))?;
        let project = |x: &nalgebra::DVector<f64>| {
            let p = psd_project(&from_hermitian_coords(x.as_slice(), d));
            nalgebra::DVector::from_vec(hermitian_coords(&p))
        };
        let a = &design.a;
        let objective = |x: &nalgebra::DVector<f64>| (a * x - &y).norm_squared();
        let aty = a.transpose() * &y;

        let mut x = project(&x_lin);
        let mut f = objective(&x);
        let mut z = x.clone();
        let mut t = 1.0f64;
        for _ in 0..self.opts.max_iterations {
            let grad = (&design.ata * &z - &aty) * 2.0;
            let x_new = project(&(&z - grad / design.lip));
            let f_new = objective(&x_new);
            if f_new > f {
                // momentum overshoot: restart from the last accepted point
                if z == x {
                    break;
                }
                z = x.clone();
                t = 1.0;
                continue;
            }
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
            let improvement = f - f_new;
            x = x_new;
            f = f_new;
            t = t_new;
            if improvement < self.opts.tolerance {
                break;
            }
        }
        let rho = from_hermitian_coords(x.as_slice(), d);
        QuantumState::density_unnormalized(
            &ModeLayout::cavities(self.dims.0, self.dims.1),
            (&rho + rho.adjoint()) * c(0.5, 0.0),
        )
    }
}

/// Positive-semidefinite ρ minimizing Σ w_k (Tr[ρ M_k] − y_k)², with
/// M_k = (4/π²) D P D† in the reconstruction space. The trace is left free.
pub fn mle_reconstruct(samples: &[WignerSample], dims: (usize, usize), opts: &MleOptions) -> Result<QuantumState> {
    let grid: Vec<(C64, C64)> = samples.iter().map(|s| (s.beta_c, s.beta_t)).collect();
    Reconstructor::new(&grid, dims, opts)?.reconstruct(samples)
}

/// ⟨ψ|ρ|ψ⟩, not renormalized.
pub fn state_fidelity(rho: &QuantumState, psi: &QuantumState) -> Result<f64> {
    if rho.layout() != psi.layout() {
        return Err(Error::Layout("fidelity between different layouts".into()));
    }
    let v = psi.as_ket().ok_or_else(|| Error::Precondition("ideal state must be a ket".into()))?;
    Ok(rho.overlap_with_ket(v))
}

/// ⟨ψ, g|ρ|ψ, g⟩ for a full-system ρ and a two-cavity ket ψ.
pub fn fidelity_with_ancilla_g(rho: &QuantumState, psi: &QuantumState) -> Result<f64> {
    state_fidelity(&rho.ancilla_block(G)?, psi)
}

/// Two-cavity (trace < 1 allowed) state with the ancilla projected on g.
pub fn cavity_state(rho: &QuantumState) -> Result<QuantumState> {
    if rho.layout().has_ancilla() {
        rho.ancilla_block(G)
    } else {
        Ok(rho.to_density())
    }
}

/// Trace distance ½‖A − B‖₁ of Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a - b;
    let herm = (&diff + diff.adjoint()) * c(0.5, 0.0);
    0.5 * SymmetricEigen::new(herm).eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}

/// Logical 4×4 block with the weight outside the code space.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedState {
    pub rho: CMatrix,
    pub leakage: f64,
}

fn logical_basis(encoding: LogicalEncoding, layout: &ModeLayout) -> Result<Vec<nalgebra::DVector<C64>>> {
    (0..4)
        .map(|k| {
            let mut amps = [c(0.0, 0.0); 4];
            amps[k] = c(1.0, 0.0);
            Ok(logical_superposition(encoding, &amps, layout)?.as_ket().expect("ket").clone())
        })
        .collect()
}

/// ⟨ij|ρ|kl⟩ in the logical basis, index 2·control + target.
pub fn project_to_qubits(rho: &QuantumState, encoding: LogicalEncoding) -> Result<ProjectedState> {
    let cav = cavity_state(rho)?;
    let basis = logical_basis(encoding, cav.layout())?;
    let m = cav.density_matrix();
    let mut out = CMatrix::zeros(4, 4);
    for i in 0..4 {
        let mi = &m * &basis[i];
        for j in 0..4 {
            out[(j, i)] = basis[j].dotc(&mi);
        }
    }
    let leakage = (rho.trace() - out.trace().re).max(0.0);
    Ok(ProjectedState { rho: out, leakage })
}

/// (1 − p)ρ + p·Tr[ρ]·I/4 on a logical 4×4 matrix.
pub fn depolarize(rho4: &CMatrix, p: f64) -> CMatrix {
    let tr = rho4.trace();
    rho4 * c(1.0 - p, 0.0) + CMatrix::identity(4, 4) * (tr * (p / 4.0))
}

/// Code-space depolarization of a two-cavity (optionally +ancilla g) state:
/// (1 − p)ρ + p·Π/4, Π the code-space projector.
pub fn depolarize_code_space(rho: &QuantumState, encoding: LogicalEncoding, p: f64) -> Result<QuantumState> {
    let layout = rho.layout();
    let basis = logical_basis(encoding, layout)?;
    let mut m = rho.density_matrix() * c(1.0 - p, 0.0);
    for v in &basis {
        m += (v * v.adjoint()) * c(p / 4.0, 0.0);
    }
    QuantumState::density(layout, m)
}

/// Depolarization strength giving the identity-process fidelity `f_id`.
pub fn spam_depolarization(f_id: f64) -> f64 {
    (1.0 - f_id) * 16.0 / 15.0
}

/// Wootters concurrence; renormalizes when the trace is below one.
pub fn concurrence(rho4: &CMatrix) -> f64 {
    let tr = rho4.trace().re;
    if !(tr > 1e-14) {
        return 0.0;
    }
    let rho = (rho4 + rho4.adjoint()) * c(0.5 / tr, 0.0);
    let mut yy = CMatrix::zeros(4, 4);
    // σ_y ⊗ σ_y
    yy[(0, 3)] = c(-1.0, 0.0);
    yy[(1, 2)] = c(1.0, 0.0);
    yy[(2, 1)] = c(1.0, 0.0);
    yy[(3, 0)] = c(-1.0, 0.0);
    let tilde = &yy * rho.conjugate() * &yy;
    let eig = SymmetricEigen::new(rho.clone());
    let mut sqrt_rho = CMatrix::zeros(4, 4);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        sqrt_rho += (v * v.adjoint()) * c(l.max(0.0).sqrt(), 0.0);
    }
    let r = &sqrt_rho * tilde * &sqrt_rho;
    let r = (&r + r.adjoint()) * c(0.5, 0.0);
    let mut lam: Vec<f64> = SymmetricEigen::new(r).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    (lam[0] - lam[1] - lam[2] - lam[3]).clamp(0.0, 1.0)
}

fn pauli(k: usize) -> CMatrix {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    let v = match k {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        _ => [o, z, z, -o],
    };
    CMatrix::from_row_slice(2, 2, &v)
}

/// Two-qubit Paulis in the order {I,X,Y,Z}⊗2, control first.
pub fn pauli_basis() -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(16);
    for a in 0..4 {
        for b in 0..4 {
            out.push(pauli(a).kronecker(&pauli(b)));
        }
    }
    out
}

pub fn pauli_labels() -> Vec<String> {
    let l = ["I", "X", "Y", "Z"];
    l.iter().flat_map(|a| l.iter().map(move |b| format!("{a}{b}"))).collect()
}

/// χ matrix of a two-qubit channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    pub chi: CMatrix,
}

impl ProcessMatrix {
    /// χ of the unitary channel ρ ↦ UρU†.
    pub fn from_unitary(u: &CMatrix) -> Self {
        let coeffs: Vec<C64> = pauli_basis().iter().map(|p| (p * u).trace() / 4.0).collect();
        let chi = CMatrix::from_fn(16, 16, |m, n| coeffs[m] * coeffs[n].conj());
        Self { chi }
    }

    pub fn trace(&self) -> f64 {
        self.chi.trace().re
    }

    /// Eigenvalue clipping onto the positive cone, keeping the trace.
    pub fn project_physical(&self) -> Self {
        let tr = self.trace();
        let p = psd_project(&self.chi);
        let ptr = p.trace().re;
        let chi = if ptr > 0.0 { p * c(tr / ptr, 0.0) } else { p };
        Self { chi }
    }

    /// ε(ρ) = Σ χ_mn E_m ρ E_n.
    pub fn apply(&self, rho4: &CMatrix) -> CMatrix {
        let e = pauli_basis();
        let mut out = CMatrix::zeros(4, 4);
        for m in 0..16 {
            for n in 0..16 {
                let w = self.chi[(m, n)];
                if w.norm() > 0.0 {
                    out += (&e[m] * rho4 * &e[n]) * w;
                }
            }
        }
        out
    }
}

/// Tr[χ_ideal χ].
pub fn process_fidelity(ideal: &ProcessMatrix, actual: &ProcessMatrix) -> f64 {
    (&ideal.chi * &actual.chi).trace().re
}

/// Linear inversion of σ_j = Σ χ_mn E_m ρ_j E_n from ≥16 input/output pairs.
pub fn chi_from_io(inputs: &[CMatrix], outputs: &[CMatrix]) -> Result<ProcessMatrix> {
    if inputs.len() != outputs.len() || inputs.len() < 16 {
        return Err(Error::Underdetermined("process tomography needs 16 input/output pairs".into()));
    }
    let e = pauli_basis();
    let rows = 16 * inputs.len();
    let mut a = CMatrix::zeros(rows, 256);
    let mut b = nalgebra::DVector::<C64>::zeros(rows);
    for (j, (rin, rout)) in inputs.iter().zip(outputs).enumerate() {
        for m in 0..16 {
            let left = &e[m] * rin;
            for n in 0..16 {
                let term = &left * &e[n];
                for r in 0..4 {
                    for s in 0..4 {
                        a[(16 * j + 4 * r + s, 16 * m + n)] = term[(r, s)];
                    }
                }
            }
        }
        for r in 0..4 {
            for s in 0..4 {
                b[16 * j + 4 * r + s] = rout[(r, s)];
            }
        }
    }
    let x = if rows == 256 {
        a.lu().solve(&b).ok_or_else(|| Error::Underdetermined("input states are not tomographically complete".into()))?
    } else {
        a.svd(true, true).solve(&b, 1e-12).map_err(|e| Error::Numeric(e.to_string()))?
    };
    let chi = CMatrix::from_fn(16, 16, |m, n| x[16 * m + n]);
    let chi = (&chi + chi.adjoint()) * c(0.5, 0.0);
    Ok(ProcessMatrix { chi })
}

/// Logical 4×4 density matrices of the 16 tomography inputs, in the order
/// control-major over {|0⟩, |1⟩, |X+⟩, |Y+⟩}.
pub fn qpt_inputs() -> Vec<(Logical, Logical, CMatrix)> {
    let mut out = Vec::with_capacity(16);
    for a in QPT_INPUTS {
        for b in QPT_INPUTS {
            let [a0, a1] = a.amplitudes();
            let [b0, b1] = b.amplitudes();
            let v = nalgebra::DVector::from_vec(vec![a0 * b0, a0 * b1, a1 * b0, a1 * b1]);
            out.push((a, b, &v * v.adjoint()));
        }
    }
    out
}

/// Maximum code-space leakage tolerated in process tomography.
pub const MAX_LEAKAGE: f64 = 0.2;

/// Runs all 16 logical inputs through `runner` on `layout` and inverts for χ.
pub fn qpt<R>(runner: R, encoding: LogicalEncoding, layout: &ModeLayout) -> Result<ProcessMatrix>
where
    R: Fn(&QuantumState) -> Result<QuantumState> + Sync + Send,
{
    let inputs = qpt_inputs();
    let results = par::map(&inputs, |(a, b, _)| -> Result<CMatrix> {
        let psi = logical_state(encoding, *a, *b, layout)?;
        let out = runner(&psi)?;
        let proj = project_to_qubits(&out, encoding)?;
        if proj.leakage > MAX_LEAKAGE {
            return Err(Error::Leakage(format!(
                "input |{}⟩|{}⟩ leaks {:.1}% out of the code space",
                a.label(),
                b.label(),
                100.0 * proj.leakage
            )));
        }
        Ok(proj.rho)
    });
    let outputs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let ins: Vec<CMatrix> = inputs.into_iter().map(|x| x.2).collect();
    chi_from_io(&ins, &outputs)
}

/// Square matrix as CSV rows `row,col,re,im`, preceded by a basis header.
pub fn write_matrix_csv<W: Write>(mut w: W, m: &CMatrix, basis: &[String]) -> std::io::Result<()> {
    writeln!(w, "# basis (row-major): {}", basis.join(" "))?;
    writeln!(w, "row,col,re,im")?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            writeln!(w, "{i},{j},{:.12e},{:.12e}", m[(i, j)].re, m[(i, j)].im)?;
        }
    }
    Ok(())
}

/// Fock labels `|n_C,n_T⟩` of a two-cavity layout.
pub fn fock_labels(dims: (usize, usize)) -> Vec<String> {
    (0..dims.0).flat_map(|a| (0..dims.1).map(move |b| format!("|{a},{b}>"))).collect()
}

/// Real/imaginary row-major arrays for JSON export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub basis: Vec<String>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn new(m: &CMatrix, basis: Vec<String>) -> Self {
        let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
        let im = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
        Self { basis, re, im }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent, fock};
    use approx::assert_abs_diff_eq;

    fn product(dc: usize, dt: usize, a: nalgebra::DVector<C64>, b: nalgebra::DVector<C64>) -> QuantumState {
        QuantumState::product(&ModeLayout::cavities(dc, dt), &[a, b]).unwrap().to_density()
    }

    #[test]
    fn vacuum_and_even_fock_at_origin() {
        let origin = [(c(0.0, 0.0), c(0.0, 0.0))];
        let opts = WignerOptions::default();
        let vac = product(3, 3, fock(3, 0), fock(3, 0));
        assert_abs_diff_eq!(joint_wigner(&vac, &origin, &opts).unwrap()[0].value, WIGNER_SCALE, epsilon = 1e-12);
        let two = product(3, 3, fock(3, 2), fock(3, 0));
        assert_abs_diff_eq!(joint_wigner(&two, &origin, &opts).unwrap()[0].value, WIGNER_SCALE, epsilon = 1e-12);
    }

    #[test]
    fn coherent_state_is_gaussian() {
        let alpha = c(0.6, -0.3);
        let rho = product(16, 2, coherent(16, alpha), fock(2, 0));
        let opts = WignerOptions::default();
        for beta in [c(0.0, 0.0), c(0.6, -0.3), c(1.0, 0.4)] {
            let w = joint_wigner(&rho, &[(beta, c(0.0, 0.0))], &opts).unwrap()[0].value;
            let expect = WIGNER_SCALE * (-2.0 * (beta - alpha).norm_sqr()).exp();
            assert_abs_diff_eq!(w, expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn concurrence_limits() {
        let s = 0.5f64.sqrt();
        let bell = nalgebra::DVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        assert_abs_diff_eq!(concurrence(&(&bell * bell.adjoint())), 1.0, epsilon = 1e-10);
        let prod = nalgebra::DVector::from_vec(vec![c(0.5, 0.0), c(0.0, 0.5), c(0.5, 0.0), c(0.0, 0.5)]);
        assert_abs_diff_eq!(concurrence(&(&prod * prod.adjoint())), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn unitary_chi_round_trip() {
        let cnot = crate::gate::ideal_cnot_logical();
        let ideal = ProcessMatrix::from_unitary(&cnot);
        assert_abs_diff_eq!(ideal.trace(), 1.0, epsilon = 1e-12);
        let ins = qpt_inputs();
        let outs: Vec<CMatrix> = ins.iter().map(|x| &cnot * &x.2 * cnot.adjoint()).collect();
        let ms: Vec<CMatrix> = ins.into_iter().map(|x| x.2).collect();
        let chi = chi_from_io(&ms, &outs).unwrap();
        assert_abs_diff_eq!(process_fidelity(&ideal, &chi), 1.0, epsilon = 1e-10);
        let id = chi_from_io(&ms, &ms).unwrap();
        assert_abs_diff_eq!(id.chi[(0, 0)].re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(id.chi.iter().map(|z| z.norm()).sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn spam_strength() {
        let p = spam_depolarization(0.92);
        let ms: Vec<CMatrix> = qpt_inputs().into_iter().map(|x| x.2).collect();
        let outs: Vec<CMatrix> = ms.iter().map(|m| depolarize(m, p)).collect();
        let chi = chi_from_io(&ms, &outs).unwrap();
        let id = ProcessMatrix::from_unitary(&CMatrix::identity(4, 4));
        assert_abs_diff_eq!(process_fidelity(&id, &chi), 0.92, epsilon = 1e-10);
    }

    #[test]
    fn hermitian_coordinates_round_trip() {
        let m = CMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let h = (&m + m.adjoint()) * c(0.5, 0.0);
        let back = from_hermitian_coords(&hermitian_coords(&h), 3);
        assert!((back - &h).iter().all(|z| z.norm() < 1e-12));
        let g = CMatrix::from_fn(3, 3, |i, j| c(j as f64, (i * j) as f64));
        let gh = (&g + g.adjoint()) * c(0.5, 0.0);
        let lhs: f64 = hermitian_coords(&h).iter().zip(hermitian_coords(&gh)).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(lhs, (&h * &gh).trace().re, epsilon = 1e-10);
    }
}
