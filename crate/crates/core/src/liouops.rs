//! Operator and superoperator algebra on a finite Hilbert space.
//!
//! Vectorization is column stacking throughout: `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.
//! Because nalgebra stores matrices column-major, `vec` and `devec` are plain
//! reinterpretations of the storage and round-trip bit for bit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::policy;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Declared trace of a density-like operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceClass {
    One,
    Zero,
}

/// Complex square matrix on a Hilbert space with optional Hermiticity and
/// trace declarations that are validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    entries: DMatrix<C64>,
    hermitian: bool,
    trace_class: Option<TraceClass>,
}

impl QOperator {
    /// Wraps a square matrix without further claims.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::Shape(format!(
                "operator must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries, hermitian: false, trace_class: None })
    }

    /// Wraps a matrix and checks Hermiticity.
    pub fn hermitian(entries: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::new(entries)?;
        let dev = op.hermiticity_deviation();
        let scale = op.max_abs();
        if dev > policy().hermiticity_rel * scale.max(f64::MIN_POSITIVE) && dev > 0.0 {
            return Err(Error::Validation(format!(
                "operator is not Hermitian: max|A - A†| = {dev:.3e}, max|A| = {scale:.3e}"
            )));
        }
        op.hermitian = true;
        Ok(op)
    }

    /// Hermitian operator with the given declared trace.
    pub fn density(entries: DMatrix<C64>, trace_class: TraceClass) -> Result<Self> {
        let mut op = Self::hermitian(entries)?;
        let tr = op.trace();
        let target = match trace_class {
            TraceClass::One => 1.0,
            TraceClass::Zero => 0.0,
        };
        let tol = policy().trace_abs;
        if tr.im.abs() > tol || (tr.re - target).abs() > tol {
            return Err(Error::Validation(format!(
                "trace {tr} does not match the declared value {target}"
            )));
        }
        op.trace_class = Some(trace_class);
        Ok(op)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self { entries: DMatrix::from_diagonal(&d), hermitian: true, trace_class: None }
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: DMatrix::identity(dim, dim), hermitian: true, trace_class: None }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: DMatrix::zeros(dim, dim), hermitian: true, trace_class: None }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace_class(&self) -> Option<TraceClass> {
        self.trace_class
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn adjoint(&self) -> QOperator {
        Self { entries: self.entries.adjoint(), hermitian: self.hermitian, trace_class: None }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    /// Scalar multiple; Hermiticity survives real factors only.
    pub fn scale(&self, factor: C64) -> QOperator {
        Self {
            entries: &self.entries * factor,
            hermitian: self.hermitian && factor.im == 0.0,
            trace_class: None,
        }
    }

    /// Expectation value `Tr(self · obs)`.
    pub fn expect(&self, obs: &QOperator) -> C64 {
        (&self.entries * &obs.entries).trace()
    }
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

/// Column-stacking vectorization.
pub fn vec(op: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(op.as_slice())
}

/// Inverse of [`vec`] for a vector of length `dim²`.
pub fn devec(v: &DVector<C64>) -> Result<DMatrix<C64>> {
    let n = v.len();
    let dim = (n as f64).sqrt().round() as usize;
    if dim * dim != n || n == 0 {
        return Err(Error::Shape(format!("vector of length {n} is not a vectorized square matrix")));
    }
    Ok(DMatrix::from_column_slice(dim, dim, v.as_slice()))
}

/// Matrix on the column-stacked Liouville space.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    entries: DMatrix<C64>,
    hilbert_dim: usize,
}

impl SuperOperator {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let n = entries.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if entries.ncols() != n || dim * dim != n || n == 0 {
            return Err(Error::Shape(format!(
                "superoperator must be square with side dim², got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries, hilbert_dim: dim })
    }

    pub fn zeros(hilbert_dim: usize) -> Self {
        let n = hilbert_dim * hilbert_dim;
        Self { entries: DMatrix::zeros(n, n), hilbert_dim }
    }

    /// Liouville dimension.
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    /// Applies the superoperator to an operator.
    pub fn apply(&self, rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        if rho.nrows() != self.hilbert_dim || rho.ncols() != self.hilbert_dim {
            return Err(Error::Shape(format!(
                "operand is {}x{}, superoperator acts on dimension {}",
                rho.nrows(),
                rho.ncols(),
                self.hilbert_dim
            )));
        }
        devec(&(&self.entries * vec(rho)))
    }

    /// `tᵀ M` with `t = vec(1)`; zero for trace-preserving generators.
    pub fn trace_defect(&self) -> f64 {
        let d = self.hilbert_dim;
        let mut worst = 0.0_f64;
        for col in 0..self.dim() {
            let mut s = ZERO;
            for a in 0..d {
                s += self.entries[(a + d * a, col)];
            }
            worst = worst.max(s.norm());
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }
}

impl std::ops::Add for &SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator { entries: &self.entries + &rhs.entries, hilbert_dim: self.hilbert_dim }
    }
}

impl std::ops::Sub for &SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator { entries: &self.entries - &rhs.entries, hilbert_dim: self.hilbert_dim }
    }
}

impl std::ops::Mul<f64> for &SuperOperator {
    type Output = SuperOperator;
    fn mul(self, rhs: f64) -> SuperOperator {
        SuperOperator { entries: &self.entries * C64::new(rhs, 0.0), hilbert_dim: self.hilbert_dim }
    }
}

/// `rate · L(X)` with `L(X)ρ = XρX† − ½{X†X, ρ}`.
pub fn lindblad_dissipator(x: &QOperator, rate: f64) -> Result<SuperOperator> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::Validation(format!("jump rate must be finite and non-negative, got {rate}")));
    }
    let d = x.dim();
    let id = DMatrix::<C64>::identity(d, d);
    let xm = x.entries();
    let xdx = xm.adjoint() * xm;
    let m = xm.conjugate().kronecker(xm)
        - id.kronecker(&xdx) * C64::new(0.5, 0.0)
        - xdx.transpose().kronecker(&id) * C64::new(0.5, 0.0);
    SuperOperator::new(m * C64::new(rate, 0.0))
}

/// Which sign multiplies the commutator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommutatorSign {
    /// `−i[H, ·]`, the generator convention.
    Generator,
    /// `+i[H, ·]`, used for the drive and spectral blocks.
    Drive,
}

/// Commutator superoperator `∓i[H, ·]`.
pub fn hamiltonian_superop(h: &QOperator, sign: CommutatorSign) -> Result<SuperOperator> {
    if !h.is_hermitian() {
        let dev = h.hermiticity_deviation();
        if dev > policy().hermiticity_rel * h.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Validation(format!(
                "Hamiltonian is not Hermitian (max|H - H†| = {dev:.3e})"
            )));
        }
    }
    let d = h.dim();
    let id = DMatrix::<C64>::identity(d, d);
    let hm = h.entries();
    let comm = id.kronecker(hm) - hm.transpose().kronecker(&id);
    let factor = match sign {
        CommutatorSign::Generator => -I,
        CommutatorSign::Drive => I,
    };
    SuperOperator::new(comm * factor)
}

/// One dissipative channel `rate · L(op)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTerm {
    pub op: QOperator,
    pub rate: f64,
}

/// Generator data split into non-driving, spectral and driving parts.
///
/// The full Hamiltonian is `P + H0 + ζ H1`; the dissipator is `Σ rate_j L(X_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    h0: QOperator,
    h1: QOperator,
    p: QOperator,
    jumps: Vec<JumpTerm>,
    rho_th: QOperator,
}

impl LindbladModel {
    pub fn new(
        h0: QOperator,
        h1: QOperator,
        p: QOperator,
        jumps: Vec<JumpTerm>,
        rho_th: QOperator,
    ) -> Result<Self> {
        let d = rho_th.dim();
        for (name, op) in [("h0", &h0), ("h1", &h1), ("p", &p)] {
            if op.dim() != d {
                return Err(Error::Shape(format!("{name} has dimension {}, expected {d}", op.dim())));
            }
        }
        let h0 = ensure_hermitian(h0, "h0")?;
        let h1 = ensure_hermitian(h1, "h1")?;
        let p = ensure_hermitian(p, "p")?;
        for (j, term) in jumps.iter().enumerate() {
            if term.op.dim() != d {
                return Err(Error::Shape(format!(
                    "jump {j} has dimension {}, expected {d}",
                    term.op.dim()
                )));
            }
            if !(term.rate >= 0.0) || !term.rate.is_finite() {
                return Err(Error::Validation(format!("jump {j} has invalid rate {}", term.rate)));
            }
        }
        let rho_th = if rho_th.trace_class() == Some(TraceClass::One) {
            rho_th
        } else {
            QOperator::density(rho_th.into_entries(), TraceClass::One)?
        };
        Ok(Self { h0, h1, p, jumps, rho_th })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.rho_th.dim()
    }

    pub fn h0(&self) -> &QOperator {
        &self.h0
    }

    pub fn h1(&self) -> &QOperator {
        &self.h1
    }

    pub fn p(&self) -> &QOperator {
        &self.p
    }

    pub fn jumps(&self) -> &[JumpTerm] {
        &self.jumps
    }

    pub fn rho_th(&self) -> &QOperator {
        &self.rho_th
    }

    /// Same model with the drive removed.
    pub fn without_drive(&self) -> LindbladModel {
        LindbladModel { p: QOperator::zeros(self.hilbert_dim()), ..self.clone() }
    }

    /// Same model with the drive multiplied by `factor`.
    pub fn with_drive_scaled(&self, factor: f64) -> LindbladModel {
        LindbladModel { p: self.p.scale(C64::new(factor, 0.0)), ..self.clone() }
    }

    /// Dissipator `𝓓 = Σ rate_j L(X_j)`; zero rates contribute nothing.
    pub fn dissipator(&self) -> SuperOperator {
        let mut acc = SuperOperator::zeros(self.hilbert_dim());
        for term in &self.jumps {
            if term.rate == 0.0 {
                continue;
            }
            // validated on construction
            let l = lindblad_dissipator(&term.op, term.rate).expect("validated jump");
            acc = &acc + &l;
        }
        acc
    }

    /// `𝓕₀ = −i[H0, ·] + 𝓓`.
    pub fn f0(&self) -> SuperOperator {
        let h = hamiltonian_superop(&self.h0, CommutatorSign::Generator).expect("validated h0");
        &h + &self.dissipator()
    }

    /// `𝓟 = i[P, ·]`.
    pub fn drive_superop(&self) -> SuperOperator {
        hamiltonian_superop(&self.p, CommutatorSign::Drive).expect("validated p")
    }

    /// `𝓗₁ = i[H1, ·]`.
    pub fn h1_superop(&self) -> SuperOperator {
        hamiltonian_superop(&self.h1, CommutatorSign::Drive).expect("validated h1")
    }
}

fn ensure_hermitian(op: QOperator, name: &str) -> Result<QOperator> {
    if op.is_hermitian() {
        return Ok(op);
    }
    QOperator::hermitian(op.into_entries())
        .map_err(|e| Error::Validation(format!("{name}: {e}")))
}

/// Full generator `𝓜 = −i[P + H0 + ζH1, ·] + 𝓓 = 𝓕₀ − 𝓟 − ζ𝓗₁`.
pub fn build_generator(model: &LindbladModel, zeta: f64) -> SuperOperator {
    let blocks = GeneratorBlocks::new(model);
    blocks.assemble(zeta)
}

/// The three blocks of the generator, kept separate.
#[derive(Debug, Clone)]
pub struct GeneratorBlocks {
    pub f0: SuperOperator,
    pub drive: SuperOperator,
    pub h1: SuperOperator,
}

impl GeneratorBlocks {
    pub fn new(model: &LindbladModel) -> Self {
        Self { f0: model.f0(), drive: model.drive_superop(), h1: model.h1_superop() }
    }

    pub fn assemble(&self, zeta: f64) -> SuperOperator {
        let m = &self.f0 - &self.drive;
        &m - &(&self.h1 * zeta)
    }
}

/// Norms probing the driven/non-driven split around the thermal state.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub dissipator_on_thermal: f64,
    pub h0_commutator: f64,
    pub h1_commutator: f64,
    pub drive_commutator: f64,
    pub dissipator_ok: bool,
    pub h0_ok: bool,
    pub h1_ok: bool,
    pub drive_ok: bool,
}

impl SplitReport {
    pub fn passed(&self) -> bool {
        self.dissipator_ok && self.h0_ok && self.h1_ok && self.drive_ok
    }
}

/// Reports how well the model obeys `𝓓ρ_th = 0`, `[H0,ρ_th] = [H1,ρ_th] = 0`
/// and `[P,ρ_th] ≠ 0`.
pub fn check_split(model: &LindbladModel) -> SplitReport {
    let pol = policy();
    let rho = model.rho_th().entries();
    let d_rho = model.dissipator().apply(rho).expect("dimensions match");
    let dn = max_abs(&d_rho);
    let c0 = max_abs(&commutator(model.h0().entries(), rho));
    let c1 = max_abs(&commutator(model.h1().entries(), rho));
    let cp = max_abs(&commutator(model.p().entries(), rho));
    let h_scale = |op: &QOperator| pol.commutator_thermal * op.max_abs().max(1.0);
    let drive_floor = pol.commutator_thermal * model.p().max_abs().max(1.0);
    SplitReport {
        dissipator_on_thermal: dn,
        h0_commutator: c0,
        h1_commutator: c1,
        drive_commutator: cp,
        dissipator_ok: dn <= pol.dissipator_thermal,
        h0_ok: c0 <= h_scale(model.h0()),
        h1_ok: c1 <= h_scale(model.h1()),
        drive_ok: cp > drive_floor,
    }
}

/// Spin-1/2 operators in the basis `{|↓⟩, |↑⟩}`: `(S_z, S_+, S_-)`.
pub fn spin_half() -> (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>) {
    let sz = DMatrix::from_row_slice(2, 2, &[C64::new(-0.5, 0.0), ZERO, ZERO, C64::new(0.5, 0.0)]);
    let sp = DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]);
    let sm = sp.adjoint();
    (sz, sp, sm)
}

/// Kronecker product of a list of factors, leftmost factor slowest.
pub fn kron_all(factors: &[DMatrix<C64>]) -> DMatrix<C64> {
    let mut acc = DMatrix::from_element(1, 1, ONE);
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

/// Places `op` on site `site` of a tensor product with local dimensions `dims`.
pub fn embed(op: &DMatrix<C64>, site: usize, dims: &[usize]) -> DMatrix<C64> {
    let factors: Vec<DMatrix<C64>> = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| if k == site { op.clone() } else { DMatrix::identity(d, d) })
        .collect();
    kron_all(&factors)
}
