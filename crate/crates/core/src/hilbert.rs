//! Truncated Fock spaces and dense operator algebra on the
//! control ⊗ target ⊗ ancilla Hilbert space.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const CONTROL: usize = 0;
pub const TARGET: usize = 1;
pub const ANCILLA: usize = 2;

/// Ancilla transmon levels.
pub const G: usize = 0;
pub const E: usize = 1;
pub const F: usize = 2;

pub const ANCILLA_DIM: usize = 3;

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Ordered list of truncated mode dimensions.
///
/// Mode order is always `[control, target]` optionally followed by the
/// three-level ancilla. Basis index is row-major with the last mode fastest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl ModeLayout {
    pub fn new(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        if dims.is_empty() || dims.len() != labels.len() {
            return Err(Error::Layout(format!(
                "{} dims for {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDimension("zero-dimensional mode".into()));
        }
        if let Some(i) = labels.iter().position(|l| l == "ancilla") {
            if dims[i] != ANCILLA_DIM {
                return Err(Error::Layout(format!(
                    "ancilla must have exactly 3 levels, got {}",
                    dims[i]
                )));
            }
        }
        Ok(Self { dims, labels })
    }

    /// Control, target and the three-level ancilla.
    pub fn system(control: usize, target: usize) -> Self {
        Self::new(
            vec![control, target, ANCILLA_DIM],
            vec!["control".into(), "target".into(), "ancilla".into()],
        )
        .expect("valid system layout")
    }

    /// The two cavities without the ancilla, as used for tomography.
    pub fn cavities(control: usize, target: usize) -> Self {
        Self::new(
            vec![control, target],
            vec!["control".into(), "target".into()],
        )
        .expect("valid cavity layout")
    }

    pub fn single(dim: usize) -> Self {
        Self { dims: vec![dim], labels: vec!["mode".into()] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn has_ancilla(&self) -> bool {
        self.labels.iter().any(|l| l == "ancilla")
    }

    /// Layout of the cavity modes only (ancilla dropped).
    pub fn cavity_part(&self) -> Self {
        if self.has_ancilla() {
            Self::cavities(self.dims[CONTROL], self.dims[TARGET])
        } else {
            self.clone()
        }
    }

    /// Flat basis index of the product state with the given per-mode levels.
    pub fn index(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.dims.len());
        levels
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&l, &d)| {
                debug_assert!(l < d);
                acc * d + l
            })
    }

    /// Per-mode levels of a flat basis index.
    pub fn levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::Layout(format!(
                "mode index {mode} out of range for {} modes",
                self.dims.len()
            )));
        }
        Ok(())
    }
}

impl Default for ModeLayout {
    /// Control 8, target 12, ancilla 3.
    fn default() -> Self {
        Self::system(8, 12)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorFlags {
    pub hermitian: bool,
    pub unitary: bool,
    /// Set when the operator was computed in a truncation that may be too
    /// small for the requested parameters.
    pub truncation_warning: bool,
}

/// Dense complex matrix on a [`ModeLayout`].
#[derive(Clone, Debug)]
pub struct Operator {
    layout: ModeLayout,
    matrix: CMatrix,
    flags: OperatorFlags,
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn unitarity_error(m: &CMatrix) -> f64 {
    let prod = m.adjoint() * m;
    let n = m.nrows();
    max_abs(&(prod - CMatrix::identity(n, n)))
}

impl Operator {
    /// Wraps a matrix; the Hermitian flag is set by direct check.
    pub fn new(layout: ModeLayout, matrix: CMatrix) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Layout(format!(
                "matrix {}x{} does not match layout dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("non-finite operator entry".into()));
        }
        let hermitian = hermiticity_error(&matrix) <= HERMITIAN_TOL;
        Ok(Self {
            layout,
            matrix,
            flags: OperatorFlags { hermitian, ..Default::default() },
        })
    }

    /// Like [`Operator::new`] but also verifies unitarity.
    pub fn new_checked_unitary(layout: ModeLayout, matrix: CMatrix) -> Result<Self> {
        let mut op = Self::new(layout, matrix)?;
        op.flags.unitary = unitarity_error(&op.matrix) <= UNITARY_TOL;
        Ok(op)
    }

    pub fn zeros(layout: &ModeLayout) -> Self {
        let n = layout.total_dim();
        Self {
            layout: layout.clone(),
            matrix: CMatrix::zeros(n, n),
            flags: OperatorFlags { hermitian: true, ..Default::default() },
        }
    }

    pub fn identity(layout: &ModeLayout) -> Self {
        let n = layout.total_dim();
        Self {
            layout: layout.clone(),
            matrix: CMatrix::identity(n, n),
            flags: OperatorFlags { hermitian: true, unitary: true, truncation_warning: false },
        }
    }

    /// Diagonal operator from real entries.
    pub fn diagonal(layout: &ModeLayout, diag: &[f64]) -> Self {
        let n = layout.total_dim();
        assert_eq!(diag.len(), n);
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = c(d, 0.0);
        }
        Self {
            layout: layout.clone(),
            matrix: m,
            flags: OperatorFlags { hermitian: true, ..Default::default() },
        }
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn flags(&self) -> OperatorFlags {
        self.flags
    }

    pub fn is_hermitian(&self) -> bool {
        self.flags.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.flags.unitary
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: self.matrix.adjoint(),
            flags: self.flags,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::from_parts(&self.layout, &self.matrix * s);
        out.flags.truncation_warning = self.flags.truncation_warning;
        out
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        self * other - other * self
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Eigenvalues in ascending order. Requires a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.flags.hermitian {
            return Err(Error::Numeric("eigenvalues requested for non-Hermitian operator".into()));
        }
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(vals)
    }

    fn from_parts(layout: &ModeLayout, matrix: CMatrix) -> Self {
        let hermitian = hermiticity_error(&matrix) <= HERMITIAN_TOL;
        Self {
            layout: layout.clone(),
            matrix,
            flags: OperatorFlags { hermitian, ..Default::default() },
        }
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.layout, rhs.layout, "operator layouts differ");
        Operator::from_parts(&self.layout, &self.matrix + &rhs.matrix)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.layout, rhs.layout, "operator layouts differ");
        Operator::from_parts(&self.layout, &self.matrix - &rhs.matrix)
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.layout, rhs.layout, "operator layouts differ");
        Operator::from_parts(&self.layout, &self.matrix * &rhs.matrix)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(c(rhs, 0.0))
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(c(-1.0, 0.0))
    }
}

/// Ladder operator with √n at (n−1, n).
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("annihilation needs dim >= 2, got {dim}")));
    }
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    Operator::new(ModeLayout::single(dim), m)
}

pub fn number(dim: usize) -> Operator {
    let diag: Vec<f64> = (0..dim).map(|n| n as f64).collect();
    Operator::diagonal(&ModeLayout::single(dim), &diag)
}

/// |i⟩⟨j| on a single mode.
pub fn transition(dim: usize, i: usize, j: usize) -> Operator {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = c(1.0, 0.0);
    Operator::from_parts(&ModeLayout::single(dim), m)
}

pub fn projector(dim: usize, level: usize) -> Operator {
    transition(dim, level, level)
}

/// Single-mode photon-number parity, diag((−1)^n).
pub fn parity(dim: usize) -> Operator {
    let diag: Vec<f64> = (0..dim).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut op = Operator::diagonal(&ModeLayout::single(dim), &diag);
    op.flags.unitary = true;
    op
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Lifts a single-mode operator into the composite space, with identities on
/// every other mode.
pub fn embed(op: &Operator, mode_index: usize, layout: &ModeLayout) -> Result<Operator> {
    layout.check_mode(mode_index)?;
    let d = layout.dims()[mode_index];
    if op.dim() != d {
        return Err(Error::Layout(format!(
            "operator of dimension {} embedded into mode {mode_index} of dimension {d}",
            op.dim()
        )));
    }
    let mut m = CMatrix::identity(1, 1);
    for (k, &dk) in layout.dims().iter().enumerate() {
        m = if k == mode_index {
            kron(&m, op.matrix())
        } else {
            kron(&m, &CMatrix::identity(dk, dk))
        };
    }
    let mut out = Operator::new(layout.clone(), m)?;
    out.flags.unitary = op.flags.unitary;
    Ok(out)
}

/// Product ⊗ over all modes; `factors[k]` acts on mode k.
pub fn tensor(factors: &[&Operator], layout: &ModeLayout) -> Result<Operator> {
    if factors.len() != layout.num_modes() {
        return Err(Error::Layout("one factor per mode required".into()));
    }
    let mut m = CMatrix::identity(1, 1);
    for (k, f) in factors.iter().enumerate() {
        if f.dim() != layout.dims()[k] {
            return Err(Error::Layout(format!("factor {k} has wrong dimension")));
        }
        m = kron(&m, f.matrix());
    }
    Operator::new(layout.clone(), m)
}

/// exp(scale · A).
///
/// Hermitian generators go through an eigendecomposition; anything else
/// uses Padé scaling-and-squaring.
pub fn matrix_exponential(a: &Operator, scale: C64) -> Result<Operator> {
    if a.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || !scale.re.is_finite() || !scale.im.is_finite() {
        return Err(Error::Numeric("non-finite input to matrix exponential".into()));
    }
    let m = if a.flags.hermitian {
        exp_hermitian(&a.matrix, scale)
    } else {
        (&a.matrix * scale).exp()
    };
    let mut out = Operator::new(a.layout.clone(), m)?;
    // exp(h·H) with H Hermitian is unitary whenever h is purely imaginary.
    if a.flags.hermitian && scale.re == 0.0 {
        out.flags.unitary = unitarity_error(&out.matrix) <= UNITARY_TOL;
    }
    Ok(out)
}

/// V diag(exp(s·λ)) V† for Hermitian `h`.
pub(crate) fn exp_hermitian(h: &CMatrix, s: C64) -> CMatrix {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let f = (s * lam).exp();
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= f;
        }
    }
    scaled * v.adjoint()
}

/// Default number of extra Fock levels used when computing displacements.
pub const DEFAULT_DISPLACEMENT_GUARD: usize = 8;

/// Displacement exp(β a† − β* a), computed in `dim + guard` levels and
/// projected back to `dim`.
pub fn displacement(beta: C64, dim: usize, guard: usize) -> Result<Operator> {
    if dim == 0 {
        return Err(Error::InvalidDimension("displacement needs dim >= 1".into()));
    }
    let big = dim + guard;
    let mut out = if big < 2 {
        Operator::identity(&ModeLayout::single(dim))
    } else {
        let a = annihilation(big)?;
        // G = i(β a† − β* a) is Hermitian and D = exp(−i G).
        let gen = a.dagger().scale(beta) - a.scale(beta.conj());
        let herm = gen.matrix() * c(0.0, 1.0);
        let full = exp_hermitian(&herm, c(0.0, -1.0));
        let proj = full.view((0, 0), (dim, dim)).into_owned();
        let mut op = Operator::new(ModeLayout::single(dim), proj)?;
        op.flags.unitary = unitarity_error(op.matrix()) <= 1e-8;
        op
    };
    if beta.norm_sqr() > dim as f64 {
        log::warn!("displacement |beta|^2 = {:.3} exceeds truncation {dim}", beta.norm_sqr());
        out.flags.truncation_warning = true;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateData {
    Ket(CVector),
    Density(CMatrix),
}

/// Pure ket or density matrix tagged with its layout.
#[derive(Clone, Debug)]
pub struct QuantumState {
    layout: ModeLayout,
    data: StateData,
    /// False for unnormalized densities such as reconstruction output or
    /// conditional blocks.
    normalized: bool,
}

const STATE_TOL: f64 = 1e-10;

impl QuantumState {
    /// Normalizes `v` and wraps it as a ket.
    pub fn ket(layout: &ModeLayout, v: CVector) -> Result<Self> {
        if v.len() != layout.total_dim() {
            return Err(Error::Layout(format!(
                "ket of length {} for layout dimension {}",
                v.len(),
                layout.total_dim()
            )));
        }
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numeric("zero or non-finite ket".into()));
        }
        Ok(Self { layout: layout.clone(), data: StateData::Ket(v / c(norm, 0.0)), normalized: true })
    }

    /// Wraps a ket without renormalizing it.
    pub fn ket_raw(layout: &ModeLayout, v: CVector) -> Result<Self> {
        if v.len() != layout.total_dim() {
            return Err(Error::Layout("ket length does not match layout".into()));
        }
        let normalized = (v.norm() - 1.0).abs() <= STATE_TOL;
        Ok(Self { layout: layout.clone(), data: StateData::Ket(v), normalized })
    }

    /// Validated, unit-trace density matrix.
    pub fn density(layout: &ModeLayout, m: CMatrix) -> Result<Self> {
        let s = Self::density_unnormalized(layout, m)?;
        let tr = s.trace();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::Numeric(format!("density trace {tr} differs from 1")));
        }
        let min = s.min_eigenvalue();
        if min < -STATE_TOL {
            return Err(Error::Numeric(format!("density matrix has eigenvalue {min}")));
        }
        Ok(Self { normalized: true, ..s })
    }

    /// Hermitian density matrix whose trace is reported rather than imposed.
    pub fn density_unnormalized(layout: &ModeLayout, m: CMatrix) -> Result<Self> {
        let n = layout.total_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Layout("density matrix size does not match layout".into()));
        }
        let herm = hermiticity_error(&m);
        if herm > 1e-8 * (1.0 + max_abs(&m)) {
            return Err(Error::Numeric(format!("density matrix not Hermitian ({herm:e})")));
        }
        Ok(Self { layout: layout.clone(), data: StateData::Density(m), normalized: false })
    }

    /// Product basis state.
    pub fn basis(layout: &ModeLayout, levels: &[usize]) -> Self {
        let mut v = CVector::zeros(layout.total_dim());
        v[layout.index(levels)] = c(1.0, 0.0);
        Self { layout: layout.clone(), data: StateData::Ket(v), normalized: true }
    }

    /// Tensor product of per-mode kets, in mode order.
    pub fn product(layout: &ModeLayout, factors: &[CVector]) -> Result<Self> {
        if factors.len() != layout.num_modes() {
            return Err(Error::Layout("one factor per mode required".into()));
        }
        let mut v = CVector::from_element(1, c(1.0, 0.0));
        for (k, f) in factors.iter().enumerate() {
            if f.len() != layout.dims()[k] {
                return Err(Error::Layout(format!("factor {k} has wrong length")));
            }
            v = v.kronecker(f);
        }
        Self::ket(layout, v)
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn is_ket(&self) -> bool {
        matches!(self.data, StateData::Ket(_))
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn as_ket(&self) -> Option<&CVector> {
        match &self.data {
            StateData::Ket(v) => Some(v),
            StateData::Density(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.data {
            StateData::Ket(v) => v * v.adjoint(),
            StateData::Density(m) => m.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            data: StateData::Density(self.density_matrix()),
            normalized: self.normalized,
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Ket(v) => v.norm_squared(),
            StateData::Density(m) => m.trace().re,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match &self.data {
            StateData::Ket(_) => 0.0,
            StateData::Density(m) => nalgebra::SymmetricEigen::new(m.clone())
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b)),
        }
    }

    pub fn expectation(&self, op: &Operator) -> C64 {
        match &self.data {
            StateData::Ket(v) => v.dotc(&(op.matrix() * v)),
            StateData::Density(m) => (op.matrix() * m).trace(),
        }
    }

    /// ⟨ψ|ρ|ψ⟩ for a ket ψ of the same layout; not renormalized by the trace.
    pub fn overlap_with_ket(&self, psi: &CVector) -> f64 {
        match &self.data {
            StateData::Ket(v) => psi.dotc(v).norm_sqr(),
            StateData::Density(m) => psi.dotc(&(m * psi)).re,
        }
    }

    /// Unnormalized cavity state conditioned on the ancilla being in `level`,
    /// i.e. ⟨level|ρ|level⟩ over the ancilla.
    pub fn ancilla_block(&self, level: usize) -> Result<Self> {
        if !self.layout.has_ancilla() {
            return Err(Error::Layout("state has no ancilla mode".into()));
        }
        let cav = self.layout.cavity_part();
        let n = cav.total_dim();
        let rho = self.density_matrix();
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = rho[(i * ANCILLA_DIM + level, j * ANCILLA_DIM + level)];
            }
        }
        Self::density_unnormalized(&cav, out)
    }

    /// Embeds a cavity state with the ancilla in `level`.
    pub fn with_ancilla(&self, level: usize) -> Result<Self> {
        if self.layout.has_ancilla() {
            return Err(Error::Layout("state already contains the ancilla".into()));
        }
        let dims = self.layout.dims();
        let full = ModeLayout::system(dims[CONTROL], dims[TARGET]);
        let mut anc = CVector::zeros(ANCILLA_DIM);
        anc[level] = c(1.0, 0.0);
        match &self.data {
            StateData::Ket(v) => Ok(Self {
                layout: full,
                data: StateData::Ket(v.kronecker(&anc)),
                normalized: self.normalized,
            }),
            StateData::Density(m) => {
                let p = &anc * anc.adjoint();
                Ok(Self {
                    layout: full,
                    data: StateData::Density(m.kronecker(&p)),
                    normalized: self.normalized,
                })
            }
        }
    }

    /// Probability of finding the ancilla in `level`.
    pub fn ancilla_population(&self, level: usize) -> f64 {
        let n = self.layout.total_dim();
        let mut p = 0.0;
        match &self.data {
            StateData::Ket(v) => {
                for i in (level..n).step_by(ANCILLA_DIM) {
                    p += v[i].norm_sqr();
                }
            }
            StateData::Density(m) => {
                for i in (level..n).step_by(ANCILLA_DIM) {
                    p += m[(i, i)].re;
                }
            }
        }
        p
    }

    pub(crate) fn from_data(layout: &ModeLayout, data: StateData, normalized: bool) -> Self {
        Self { layout: layout.clone(), data, normalized }
    }
}

/// Single-mode Fock ket |n⟩ in `dim` levels.
pub fn fock(dim: usize, n: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[n] = c(1.0, 0.0);
    v
}

/// Truncated coherent state |α⟩, renormalized in `dim` levels.
pub fn coherent(dim: usize, alpha: C64) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut term = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        v[n] = term;
        term *= alpha / ((n + 1) as f64).sqrt();
    }
    let norm = v.norm();
    v / c(norm, 0.0)
}
