//! Brute-force references: SVD null spaces, time propagation, dense pencil
//! eigenvalues and the small-N full-ensemble cross-check.
//!
//! Everything here works on the complex column-stacked Liouville space built by
//! [`liouops`](crate::liouops), or on its permutation-invariant part, so it
//! shares no assembly or factorization with the real-coordinate and
//! block-tridiagonal solvers it checks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::dicke::{
    build_ensemble_model, density_observables, ensemble_charges, reduced_steady_state, ModelParams,
    Representation,
};
use crate::error::{Error, Result};
use crate::green::{sort_poles, GreenKind, PoleSet};
use crate::liouops::{build_generator, devec, embed, spin_half, vec, GeneratorBlocks, LindbladModel, QOperator, SuperOperator, C64};
use crate::numeric::policy;

/// Largest Liouville dimension accepted by the dense oracles.
pub const DENSE_MAX_DIM: usize = 4096;

/// Largest passive ensemble for [`full_ensemble_crosscheck`].
/// Relative agreement required between shifted runs of the pencil.
pub const SHIFT_AGREEMENT: f64 = 1e-6;
pub const CROSSCHECK_MAX_PASSIVE: usize = 4;

/// One fast-path value checked against its oracle.
///
/// Deviations and the verdict are computed from the stored values on demand.
/// A report without a fast value is reference data and always passes.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub fast: Option<f64>,
    pub oracle: f64,
    /// Passes when `|fast − oracle| ≤ tolerance · max(1, |oracle|)`.
    pub tolerance: f64,
    /// Ratio of the smallest non-kernel to the largest kernel singular value.
    pub kernel_gap: Option<f64>,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, fast: f64, oracle: f64, tolerance: f64) -> Self {
        Self { quantity: quantity.into(), fast: Some(fast), oracle, tolerance, kernel_gap: None }
    }

    pub fn reference(quantity: impl Into<String>, oracle: f64) -> Self {
        Self { quantity: quantity.into(), fast: None, oracle, tolerance: 0.0, kernel_gap: None }
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.kernel_gap = Some(gap);
        self
    }

    pub fn abs_deviation(&self) -> Option<f64> {
        self.fast.map(|f| (f - self.oracle).abs())
    }

    pub fn rel_deviation(&self) -> Option<f64> {
        self.abs_deviation().map(|d| if self.oracle == 0.0 { d } else { d / self.oracle.abs() })
    }

    pub fn passed(&self) -> bool {
        match self.abs_deviation() {
            Some(d) => d <= self.tolerance * self.oracle.abs().max(1.0),
            None => true,
        }
    }
}

impl Serialize for OracleReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            quantity: &'a str,
            fast: Option<f64>,
            oracle: f64,
            abs_deviation: Option<f64>,
            rel_deviation: Option<f64>,
            tolerance: f64,
            pass: bool,
            kernel_gap: Option<f64>,
        }
        View {
            quantity: &self.quantity,
            fast: self.fast,
            oracle: self.oracle,
            abs_deviation: self.abs_deviation(),
            rel_deviation: self.rel_deviation(),
            tolerance: self.tolerance,
            pass: self.passed(),
            kernel_gap: self.kernel_gap,
        }
        .serialize(serializer)
    }
}

/// A steady state read off a null space.
#[derive(Debug, Clone)]
pub struct KernelState {
    pub rho: QOperator,
    pub kernel_dim: usize,
    /// Singular-value gap separating the kernel from the rest of the spectrum.
    pub gap: f64,
}

/// Liouville indices `a + d·b` with `charge[a] == charge[b]`.
pub fn sector_indices(charges: &[i64]) -> Vec<usize> {
    let d = charges.len();
    (0..d * d).filter(|&i| charges[i % d] == charges[i / d]).collect()
}

fn restrict(m: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

fn liouville_indices(m: &SuperOperator, charges: Option<&[i64]>) -> Result<Vec<usize>> {
    match charges {
        None => Ok((0..m.dim()).collect()),
        Some(c) if c.len() == m.hilbert_dim() => Ok(sector_indices(c)),
        Some(c) => Err(Error::Shape(format!(
            "{} charges for Hilbert dimension {}",
            c.len(),
            m.hilbert_dim()
        ))),
    }
}

fn dense_guard(dim: usize) -> Result<()> {
    if dim > DENSE_MAX_DIM {
        return Err(Error::Precondition(format!(
            "Liouville dimension {dim} exceeds the dense oracle limit {DENSE_MAX_DIM}"
        )));
    }
    Ok(())
}

/// SVD of the restricted generator with singular values in descending order.
struct Kernel {
    /// Right kernel vectors as columns.
    right: DMatrix<C64>,
    /// Left kernel vectors as columns, `Lᴴ M = 0`.
    left: DMatrix<C64>,
    gap: f64,
}

fn kernel(m: &DMatrix<C64>, dim_hint: Option<usize>) -> Result<Kernel> {
    let n = m.nrows();
    // Row equilibration leaves the right kernel unchanged and removes the
    // spread of rates from the singular values.
    let row_scale: Vec<f64> = m
        .row_iter()
        .map(|r| {
            let top = r.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
            if top > 0.0 { top.recip() } else { 1.0 }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |r, c| m[(r, c)] * row_scale[r]);
    let svd = scaled.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Validation("singular value decomposition did not converge".into())),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sigma[0].max(f64::MIN_POSITIVE);
    let floor = top * f64::EPSILON;
    let ratio = |k: usize| sigma[n - k - 1] / sigma[n - k].max(floor);
    let dim = match dim_hint {
        Some(d) => d,
        // the kernel ends where the singular values jump by the largest factor
        None => (1..n).max_by(|&a, &b| ratio(a).total_cmp(&ratio(b))).unwrap_or(1),
    };
    if dim == 0 || dim >= n {
        return Err(Error::Validation(format!("kernel dimension {dim} for a {n}x{n} generator")));
    }
    let gap = ratio(dim);
    let cols = &order[n - dim..];
    let right = DMatrix::from_fn(n, dim, |r, c| v_t[(cols[c], r)].conj());
    // Lₛᴴ R M = 0 gives the left kernel L = R Lₛ of M itself.
    let left = DMatrix::from_fn(n, dim, |r, c| u[(r, cols[c])] * row_scale[r]);
    Ok(Kernel { right, left, gap })
}

fn embed_vector(x: &DVector<C64>, idx: &[usize], full: usize) -> DVector<C64> {
    let mut out = DVector::<C64>::zeros(full);
    for (k, &i) in idx.iter().enumerate() {
        out[i] = x[k];
    }
    out
}

/// Normalizes to unit trace and checks Hermiticity and positivity.
fn finish_density(x: DVector<C64>) -> Result<QOperator> {
    let rho = devec(&x)?;
    let tr = rho.trace();
    if !(tr.norm() > 0.0) {
        return Err(Error::Validation("kernel vector has zero trace".into()));
    }
    let rho = rho / tr;
    let scale = rho.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(1.0);
    let herm = (&rho - rho.adjoint()).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let tol = policy().positivity_abs;
    if herm > tol * scale {
        return Err(Error::Validation(format!("steady state is not Hermitian: deviation {herm:.3e}")));
    }
    let sym = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let low = min_eigenvalue(&sym);
    if low < -tol {
        return Err(Error::Validation(format!("steady state has eigenvalue {low:.3e} < 0")));
    }
    QOperator::new(sym)
}

fn min_eigenvalue(herm: &DMatrix<C64>) -> f64 {
    herm.clone().symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, &x| m.min(x))
}

/// The unique steady state of `m` from its SVD kernel.
pub fn nullspace_steady_state(m: &SuperOperator) -> Result<KernelState> {
    nullspace_steady_state_in(m, None)
}

/// As [`nullspace_steady_state`], restricted to the operators connecting
/// basis states of equal charge.
pub fn nullspace_steady_state_in(m: &SuperOperator, charges: Option<&[i64]>) -> Result<KernelState> {
    let idx = liouville_indices(m, charges)?;
    dense_guard(idx.len())?;
    let k = kernel(&restrict(m.entries(), &idx), Some(1))?;
    if k.gap < policy().kernel_gap {
        let loose = kernel(&restrict(m.entries(), &idx), None)?;
        return Err(Error::NonUniqueSteadyState { dim: loose.right.ncols().max(2), gap: k.gap });
    }
    let x = embed_vector(&k.right.column(0).into_owned(), &idx, m.dim());
    Ok(KernelState { rho: finish_density(x)?, kernel_dim: 1, gap: k.gap })
}

/// Long-time limit of `e^{Mt}ρ₀` when the kernel is degenerate: the projection
/// `R (LᴴR)⁻¹ Lᴴ ρ₀` onto the kernel along the range, which keeps every
/// conserved quantity `Lᴴρ` of the initial state.
pub fn conserved_steady_state(m: &SuperOperator, rho0: &QOperator, charges: Option<&[i64]>) -> Result<KernelState> {
    if rho0.dim() != m.hilbert_dim() {
        return Err(Error::Shape("initial state and generator dimensions differ".into()));
    }
    let idx = liouville_indices(m, charges)?;
    dense_guard(idx.len())?;
    let x0 = vec(rho0.entries());
    let outside = (0..m.dim()).filter(|i| idx.binary_search(i).is_err()).fold(0.0_f64, |a, i| a.max(x0[i].norm()));
    if outside > policy().trace_abs {
        return Err(Error::Precondition("initial state has weight outside the charge sector".into()));
    }
    let x0s = DVector::from_fn(idx.len(), |r, _| x0[idx[r]]);
    let (xs, dim, gap) = project_on_kernel(&restrict(m.entries(), &idx), &x0s)?;
    let x = embed_vector(&xs, &idx, m.dim());
    Ok(KernelState { rho: finish_density(x)?, kernel_dim: dim, gap })
}

/// `R (LᴴR)⁻¹ Lᴴ x₀` with the kernel dimension read off the singular values.
fn project_on_kernel(m: &DMatrix<C64>, x0: &DVector<C64>) -> Result<(DVector<C64>, usize, f64)> {
    let k = kernel(m, None)?;
    let lh = k.left.adjoint();
    let overlap = &lh * &k.right;
    let coeffs = overlap.lu().solve(&(&lh * x0)).ok_or(Error::Singular { rcond: 0.0 })?;
    Ok((&k.right * coeffs, k.right.ncols(), k.gap))
}

/// Sparse columns `(c, A_ca)` and rows `(c, A_bc)` of an operator.
struct SparseLines {
    cols: Vec<Vec<(usize, C64)>>,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseLines {
    fn new(a: &DMatrix<C64>) -> Self {
        let d = a.nrows();
        let mut cols = vec![Vec::new(); d];
        let mut rows = vec![Vec::new(); d];
        for c in 0..d {
            for r in 0..d {
                let v = a[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    cols[c].push((r, v));
                    rows[r].push((c, v));
                }
            }
        }
        Self { cols, rows }
    }
}

/// Conserved steady state of the full `2^{N+1}`-dimensional ensemble from a
/// permutation-invariant `rho0`, for unit couplings.
///
/// The generator then commutes with permutations of the passive spins, so the
/// state stays on the operators that are invariant under them. These are
/// spanned by orbit sums of matrix units `|a⟩⟨b|`, labelled by the two active
/// levels and the counts of the four passive pairs `(x_i, y_i)`; the conserved
/// projection is taken on that span.
pub fn symmetric_conserved_steady_state(params: &ModelParams, rho0: &QOperator) -> Result<KernelState> {
    if !params.is_mean_field() {
        return Err(Error::Unsupported("permutation reduction needs unit couplings".into()));
    }
    let n = params.n_passive;
    let model = build_ensemble_model(params, Representation::Full)?;
    let d = model.hilbert_dim();
    if rho0.dim() != d {
        return Err(Error::Shape("initial state and model dimensions differ".into()));
    }
    let m = 1usize << n;
    let charges = ensemble_charges(n, Representation::Full);
    let mut classes: BTreeMap<[usize; 6], Vec<(usize, usize)>> = BTreeMap::new();
    for b in 0..d {
        for a in (0..d).filter(|&a| charges[a] == charges[b]) {
            let (xa, xb) = (a % m, b % m);
            let mut count = [0usize; 4];
            for i in 0..n {
                count[2 * ((xa >> i) & 1) + ((xb >> i) & 1)] += 1;
            }
            classes.entry([a / m, b / m, count[0], count[1], count[2], count[3]]).or_default().push((a, b));
        }
    }
    let orbits: Vec<Vec<(usize, usize)>> = classes.into_values().collect();
    let mut slot = vec![usize::MAX; d * d];
    for (k, orbit) in orbits.iter().enumerate() {
        for &(a, b) in orbit {
            slot[a + d * b] = k;
        }
    }
    let norm: Vec<f64> = orbits.iter().map(|o| (o.len() as f64).sqrt()).collect();

    let h = model.h0().entries() + model.p().entries() + model.h1().entries() * C64::new(params.zeta, 0.0);
    let h = SparseLines::new(&h);
    let jumps: Vec<(SparseLines, SparseLines, f64)> = model
        .jumps()
        .iter()
        .filter(|j| j.rate > 0.0)
        .map(|j| {
            let x = j.op.entries();
            (SparseLines::new(x), SparseLines::new(&(x.adjoint() * x)), j.rate)
        })
        .collect();

    let size = orbits.len();
    let mut reduced = DMatrix::<C64>::zeros(size, size);
    let mut scratch = vec![C64::new(0.0, 0.0); d * d];
    let mut touched: Vec<usize> = Vec::new();
    let minus_i = C64::new(0.0, -1.0);
    for (k, orbit) in orbits.iter().enumerate() {
        let w = C64::new(norm[k].recip(), 0.0);
        let mut add = |r: usize, c: usize, v: C64| {
            let idx = r + d * c;
            if scratch[idx] == C64::new(0.0, 0.0) {
                touched.push(idx);
            }
            scratch[idx] += v;
        };
        for &(a, b) in orbit {
            for &(c, v) in &h.cols[a] {
                add(c, b, minus_i * v * w);
            }
            for &(c, v) in &h.rows[b] {
                add(a, c, -minus_i * v * w);
            }
            for (x, q, rate) in &jumps {
                let r = C64::new(*rate, 0.0);
                for &(c, xa) in &x.cols[a] {
                    for &(e, xb) in &x.cols[b] {
                        add(c, e, r * xa * xb.conj() * w);
                    }
                }
                for &(c, v) in &q.cols[a] {
                    add(c, b, -0.5 * r * v * w);
                }
                for &(c, v) in &q.rows[b] {
                    add(a, c, -0.5 * r * v * w);
                }
            }
        }
        for &idx in &touched {
            let v = std::mem::replace(&mut scratch[idx], C64::new(0.0, 0.0));
            match slot[idx] {
                usize::MAX if v.norm() > 0.0 => {
                    return Err(Error::Validation("generator leaves the charge sector".into()));
                }
                usize::MAX => {}
                j => reduced[(j, k)] += v / norm[j],
            }
        }
        touched.clear();
    }

    let x0 = DVector::from_fn(size, |k, _| {
        orbits[k].iter().fold(C64::new(0.0, 0.0), |acc, &(a, b)| acc + rho0.entries()[(a, b)]) / norm[k]
    });
    let rebuild = |x: &DVector<C64>| {
        let mut out = DMatrix::<C64>::zeros(d, d);
        for (k, orbit) in orbits.iter().enumerate() {
            for &(a, b) in orbit {
                out[(a, b)] = x[k] / norm[k];
            }
        }
        out
    };
    let scale = rho0.max_abs().max(f64::MIN_POSITIVE);
    if (rebuild(&x0) - rho0.entries()).iter().any(|z| z.norm() > 1e-12 * scale) {
        return Err(Error::Precondition("initial state is not permutation invariant within the sector".into()));
    }
    let (x, dim, gap) = project_on_kernel(&reduced, &x0)?;
    Ok(KernelState { rho: finish_density(vec(&rebuild(&x)))?, kernel_dim: dim, gap })
}

/// Result of [`propagate`].
#[derive(Debug, Clone)]
pub struct Propagation {
    pub rho: QOperator,
    /// Largest `|Tr ρ(t) − Tr ρ₀|` over the checkpoints.
    pub trace_drift: f64,
    /// Smallest eigenvalue of the Hermitian part over the checkpoints.
    pub min_eigenvalue: f64,
}

impl Propagation {
    /// Trace within `1e-10` and no eigenvalue below the positivity floor.
    pub fn is_physical(&self) -> bool {
        self.trace_drift <= 1e-10 && self.min_eigenvalue >= -policy().positivity_abs
    }
}

/// `e^{Mt}ρ₀` by repeated application of `e^{M Δt}` (scaling and squaring) at
/// `steps` checkpoints, recording trace drift and positivity at each.
///
/// The drift is bounded below by roughly `ε‖M‖t`, so stiff generators over
/// long times can exceed `1e-10` without any defect in `M`.
pub fn propagate(m: &SuperOperator, rho0: &QOperator, t_final: f64, steps: usize) -> Result<Propagation> {
    if rho0.dim() != m.hilbert_dim() {
        return Err(Error::Shape("initial state and generator dimensions differ".into()));
    }
    if t_final == 0.0 {
        return Ok(Propagation { rho: rho0.clone(), trace_drift: 0.0, min_eigenvalue: min_eigenvalue(rho0.entries()) });
    }
    let dt = t_final / steps as f64;
    if !(t_final > 0.0) || !dt.is_finite() || !(dt > 0.0) || t_final + dt == t_final {
        return Err(Error::Validation(format!("step underflow: t = {t_final:e} over {steps} steps")));
    }
    dense_guard(m.dim())?;
    let step = (m.entries() * C64::new(dt, 0.0)).exp();
    let tr0 = rho0.trace();
    let mut x = vec(rho0.entries());
    let (mut drift, mut low) = (0.0_f64, f64::INFINITY);
    for _ in 0..steps {
        x = &step * x;
        let rho = devec(&x)?;
        drift = drift.max((rho.trace() - tr0).norm());
        let sym = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        low = low.min(min_eigenvalue(&sym));
    }
    Ok(Propagation { rho: QOperator::new(devec(&x)?)?, trace_drift: drift, min_eigenvalue: low })
}

/// Finite poles of the Green function from the dense complex pencil.
///
/// Three shifted inverses `(Â − μB)⁻¹B` of the bordered pencil are
/// diagonalized independently; a pole is kept only when at least two shifts
/// reproduce it within `1e-6` relative; the kept value is their mean.
pub fn pencil_poles_dense(model: &LindbladModel, charges: Option<&[i64]>, kind: GreenKind) -> Result<PoleSet> {
    let blocks = GeneratorBlocks::new(model);
    let idx = liouville_indices(&blocks.f0, charges)?;
    dense_guard(idx.len())?;
    let n = idx.len();
    let d = model.hilbert_dim();
    let base = match kind {
        GreenKind::Driven => blocks.f0.entries() - blocks.drive.entries(),
        GreenKind::NonDriven => blocks.f0.entries().clone(),
    };
    let a = restrict(&base, &idx);
    let h = restrict(blocks.h1.entries(), &idx);
    let mut bordered = DMatrix::<C64>::zeros(n + 1, n + 1);
    bordered.view_mut((0, 0), (n, n)).copy_from(&a);
    for (k, &i) in idx.iter().enumerate() {
        if i % d == i / d {
            bordered[(k, n)] = C64::new(1.0, 0.0);
            bordered[(n, k)] = C64::new(1.0, 0.0);
        }
    }
    let mut b = DMatrix::<C64>::zeros(n + 1, n + 1);
    b.view_mut((0, 0), (n, n)).copy_from(&h);

    let scale = a.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let runs: Vec<Vec<C64>> = [0.37, -0.53, 0.91]
        .iter()
        .map(|&c| shifted_eigenvalues(&bordered, &b, c * scale))
        .collect::<Result<_>>()?;

    // spurious eigenvalues from the infinite cluster move by orders of
    // magnitude between shifts; genuine ones only by the pencil conditioning
    let agree = |z: &C64, w: &C64| (z - w).norm() <= SHIFT_AGREEMENT * z.norm().max(w.norm());
    let mut found: Vec<C64> = Vec::new();
    for (r, run) in runs.iter().enumerate() {
        for z in run {
            if found.iter().any(|f| agree(f, z)) {
                continue;
            }
            let matches: Vec<C64> = runs
                .iter()
                .enumerate()
                .filter(|(s, _)| *s != r)
                .filter_map(|(_, other)| {
                    other.iter().filter(|w| agree(z, w)).min_by(|p, q| (*p - z).norm().total_cmp(&(*q - z).norm()))
                })
                .copied()
                .collect();
            if !matches.is_empty() {
                let sum = matches.iter().fold(*z, |acc, w| acc + w);
                found.push(sum / C64::new((matches.len() + 1) as f64, 0.0));
            }
        }
    }
    if let Some(z) = found.iter().find(|z| z.im == 0.0) {
        return Err(Error::Validation(format!("pencil has a real eigenvalue {z}")));
    }
    let mut poles = Vec::new();
    for z in found.iter().filter(|z| z.im > 0.0) {
        let partner = found
            .iter()
            .filter(|w| w.im < 0.0)
            .min_by(|p, q| (*p - z.conj()).norm().total_cmp(&(*q - z.conj()).norm()));
        match partner {
            Some(w) if agree(&z.conj(), w) => {
                let mid = 0.5 * (z + w.conj());
                poles.extend([mid, mid.conj()]);
            }
            _ => return Err(Error::Validation(format!("pole {z} has no conjugate partner"))),
        }
    }
    sort_poles(&mut poles);
    Ok(PoleSet { poles, residues: None, kind })
}

/// Eigenvalues `ζ = μ + 1/θ` of the pencil from `θ ∈ spec((Â − μB)⁻¹B)`,
/// re-shifting by the golden ratio when `μ` sits on a pole.
fn shifted_eigenvalues(bordered: &DMatrix<C64>, b: &DMatrix<C64>, shift: f64) -> Result<Vec<C64>> {
    let golden = 0.5 * (1.0 + 5.0_f64.sqrt());
    let mut mu = shift;
    for _ in 0..3 {
        let shifted = bordered - b * C64::new(mu, 0.0);
        let lu = shifted.lu();
        let diag = lu.u().diagonal();
        let big = diag.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let small = diag.iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
        if !(small > policy().singular_rcond.max(1e-13) * big) {
            mu *= golden;
            continue;
        }
        let k = lu.solve(b).ok_or(Error::Singular { rcond: 0.0 })?;
        let knorm = k.norm();
        let thetas = k
            .schur()
            .eigenvalues()
            .ok_or_else(|| Error::Validation("complex Schur form is not triangular".into()))?;
        let cutoff = policy().pencil_rank_cutoff * knorm;
        return Ok(thetas.iter().filter(|t| t.norm() > cutoff).map(|t| C64::new(mu, 0.0) + t.inv()).collect());
    }
    Err(Error::ShiftFailure { attempts: 3 })
}

/// Thermal state restricted to the symmetric (Dicke) subspace of `n` passive
/// spins, in the full `2^{n+1}` representation.
pub fn symmetric_thermal(n: usize) -> Result<QOperator> {
    let m = 1usize << n;
    let mut passive = DMatrix::<C64>::zeros(m, m);
    for k in 0..=n {
        let states: Vec<usize> = (0..m).filter(|b| b.count_ones() as usize == k).collect();
        let amp = C64::new(1.0 / states.len() as f64, 0.0);
        for &a in &states {
            for &b in &states {
                passive[(a, b)] = amp;
            }
        }
    }
    passive /= C64::new((n + 1) as f64, 0.0);
    let mut rho = DMatrix::<C64>::zeros(2 * m, 2 * m);
    rho.view_mut((0, 0), (m, m)).copy_from(&passive);
    QOperator::new(rho)
}

/// Compares the full `2^{N+1}`-dimensional ensemble with the Dicke path.
///
/// With unit couplings the full steady state, started in the symmetric
/// subspace, must reproduce the reduced observables. Otherwise the
/// observables are returned as reference data, except that sites with zero
/// coupling are checked to stay unpolarized.
pub fn full_ensemble_crosscheck(params: &ModelParams) -> Result<Vec<OracleReport>> {
    params.validate()?;
    let n = params.n_passive;
    if n > CROSSCHECK_MAX_PASSIVE {
        return Err(Error::Precondition(format!(
            "full cross-check is limited to N <= {CROSSCHECK_MAX_PASSIVE}, got {n}"
        )));
    }
    let model = build_ensemble_model(params, Representation::Full)?;
    let gen = build_generator(&model, params.zeta);
    let charges = ensemble_charges(n, Representation::Full);
    let tol = 1e-9;
    if params.is_mean_field() {
        let start = symmetric_thermal(n)?;
        let full = conserved_steady_state(&gen, &start, Some(&charges))?;
        let obs = density_observables(&full.rho, n, Representation::Full)?;
        let fast = reduced_steady_state(params)?.observables();
        return Ok(vec![
            OracleReport::new("iz", fast.iz, obs.iz, tol).with_gap(full.gap),
            OracleReport::new("iz2", fast.iz2, obs.iz2, tol).with_gap(full.gap),
            OracleReport::new("sz", fast.sz, obs.sz, tol).with_gap(full.gap),
        ]);
    }
    let full = conserved_steady_state(&gen, model.rho_th(), Some(&charges))?;
    let obs = density_observables(&full.rho, n, Representation::Full)?;
    let (sz, _, _) = spin_half();
    let dims = vec![2usize; n];
    let eye = DMatrix::<C64>::identity(2, 2);
    let mut reports = vec![
        OracleReport::reference("iz", obs.iz).with_gap(full.gap),
        OracleReport::reference("sz", obs.sz).with_gap(full.gap),
    ];
    for (site, a) in params.coupling_weights().iter().enumerate() {
        let op = eye.kronecker(&embed(&sz, site, &dims));
        let value = (full.rho.entries() * op).trace().re;
        let name = format!("iz_site_{site}");
        let report = if *a == 0.0 {
            OracleReport::new(name, 0.0, value, tol)
        } else {
            OracleReport::reference(name, value)
        };
        reports.push(report.with_gap(full.gap));
    }
    Ok(reports)
}
