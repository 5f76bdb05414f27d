//! Spectral Green functions of a split Lindblad generator.
//!
//! With `A₀(ζ) = 𝓕₀ − ζ𝓗₁` and `A(ζ) = A₀(ζ) − 𝓟`, the non-driven and driven
//! Green functions `𝓖₀(ζ)` and `𝓖(ζ)` are the inverses of these operators on
//! the traceless subspace. The steady state is `ρ = (1 + 𝓖𝓟)ρ_th`, or
//! equivalently the solution of `(1 − 𝓧₀)ρ = ρ_th` with `𝓧₀ = 𝓖₀𝓟`.
//!
//! Everything here works on a [`SpectralProblem`]: the three blocks as real
//! matrices in some real coordinate system, the trace functional and the
//! thermal state. [`ModelProblem`] builds one from a [`LindbladModel`] in the
//! Hermitian basis of [`crate::realrep`]; the Dicke module builds one in its
//! own reduced coordinates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{complement_basis, lu_rcond, BorderedLu};
use crate::liouops::{LindbladModel, QOperator, TraceClass, C64};
use crate::numeric::policy;
use crate::realrep::{model_terms, RealBasis};

/// Which Green function to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GreenKind {
    /// `(𝓕₀ − 𝓟 − ζ𝓗₁)⁻¹`
    Driven,
    /// `(𝓕₀ − ζ𝓗₁)⁻¹`
    NonDriven,
}

/// Route used by [`SpectralProblem::steady_state`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    /// `ρ_th + 𝓖𝓟ρ_th`
    Direct,
    /// `(1 − 𝓧₀)ρ = ρ_th`
    Dyson,
    /// `Σ_{k ≤ order} 𝓧₀ᵏ ρ_th`
    Series(usize),
    /// Renormalized polynomial in `𝓧₀` from its characteristic polynomial.
    Polynomial,
}

/// Steady state in problem coordinates plus route diagnostics.
#[derive(Debug, Clone)]
pub struct SteadyOutcome {
    pub rho: DVector<f64>,
    /// Spectral radius of `𝓧₀`, computed for the series and polynomial routes.
    pub spectral_radius: Option<f64>,
    /// Set when a truncated series was requested with spectral radius ≥ 1.
    pub nonconvergent: bool,
    /// Norm of the remainder `π₀(𝓧₀)ρ_th / π₀(1)` left by the polynomial route.
    pub annihilation_residual: Option<f64>,
}

/// The split generator in real coordinates.
#[derive(Debug, Clone)]
pub struct SpectralProblem {
    f0: DMatrix<f64>,
    drive: DMatrix<f64>,
    h1: DMatrix<f64>,
    trace: DVector<f64>,
    rho_th: DVector<f64>,
    grading: Option<Vec<u8>>,
    rate_scale: f64,
}

impl SpectralProblem {
    pub fn new(
        f0: DMatrix<f64>,
        drive: DMatrix<f64>,
        h1: DMatrix<f64>,
        trace: DVector<f64>,
        rho_th: DVector<f64>,
    ) -> Result<Self> {
        let n = f0.nrows();
        for (name, m) in [("f0", &f0), ("drive", &drive), ("h1", &h1)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!("{name} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
            }
        }
        if trace.len() != n || rho_th.len() != n {
            return Err(Error::Shape("trace functional and thermal state must match the blocks".into()));
        }
        let tr = trace.dot(&rho_th);
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("thermal state has trace {tr}, expected 1")));
        }
        let rate_scale = (0..n).fold(0.0_f64, |m, i| m.max(f0[(i, i)].abs()));
        let rate_scale = if rate_scale > 0.0 { rate_scale } else { 1.0 };
        Ok(Self { f0, drive, h1, trace, rho_th, grading: None, rate_scale })
    }

    /// Attaches a two-level grading (`0` or `1` per coordinate).
    pub fn with_grading(mut self, grading: Vec<u8>) -> Result<Self> {
        if grading.len() != self.dim() || grading.iter().any(|&g| g > 1) {
            return Err(Error::Shape("grading must label every coordinate with 0 or 1".into()));
        }
        self.grading = Some(grading);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn f0(&self) -> &DMatrix<f64> {
        &self.f0
    }

    pub fn drive(&self) -> &DMatrix<f64> {
        &self.drive
    }

    pub fn h1(&self) -> &DMatrix<f64> {
        &self.h1
    }

    pub fn trace_functional(&self) -> &DVector<f64> {
        &self.trace
    }

    pub fn rho_th(&self) -> &DVector<f64> {
        &self.rho_th
    }

    pub fn grading(&self) -> Option<&[u8]> {
        self.grading.as_deref()
    }

    /// Largest diagonal rate of `𝓕₀`, used to place spectral shifts.
    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    /// Same problem with the drive block multiplied by `factor`.
    pub fn with_drive_scaled(&self, factor: f64) -> Self {
        Self { drive: &self.drive * factor, ..self.clone() }
    }

    /// `𝓕₀ − [𝓟] − ζ𝓗₁`.
    pub fn operator(&self, kind: GreenKind, zeta: f64) -> DMatrix<f64> {
        let mut a = &self.f0 - &self.h1 * zeta;
        if kind == GreenKind::Driven {
            a -= &self.drive;
        }
        a
    }

    /// Generator `𝓜(ζ) = 𝓕₀ − 𝓟 − ζ𝓗₁`.
    pub fn generator(&self, zeta: f64) -> DMatrix<f64> {
        self.operator(GreenKind::Driven, zeta)
    }

    pub fn factor(&self, kind: GreenKind, zeta: f64) -> Result<BorderedLu> {
        BorderedLu::new(&self.operator(kind, zeta), &self.trace)
    }

    fn check_traceless(&self, operand: &DVector<C64>) -> Result<()> {
        let tr = operand.iter().zip(self.trace.iter()).fold(C64::new(0.0, 0.0), |s, (z, t)| s + z * *t);
        let scale = operand.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(1e-300);
        if tr.norm() > 1e-10 * scale.max(1.0) {
            return Err(Error::Precondition(format!("operand has trace {tr}, expected 0")));
        }
        Ok(())
    }

    /// `x = 𝓖(ζ) b` (or `𝓖₀`), i.e. the traceless solution of `A x = b`.
    pub fn green_apply(&self, kind: GreenKind, zeta: f64, operand: &DVector<C64>) -> Result<DVector<C64>> {
        if operand.len() != self.dim() {
            return Err(Error::Shape(format!("operand has length {}, expected {}", operand.len(), self.dim())));
        }
        self.check_traceless(operand)?;
        let lu = self.factor(kind, zeta)?;
        Ok(lu.solve_complex(operand))
    }

    /// `𝓖(ζ)` as a matrix (the leading block of the bordered inverse).
    pub fn green_matrix(&self, kind: GreenKind, zeta: f64) -> Result<DMatrix<f64>> {
        let lu = self.factor(kind, zeta)?;
        Ok(lu.solve_matrix(&DMatrix::identity(self.dim(), self.dim())))
    }

    /// `𝓧(ζ) = 𝓖𝓟` or `𝓧₀(ζ) = 𝓖₀𝓟`.
    pub fn x_matrix(&self, kind: GreenKind, zeta: f64) -> Result<DMatrix<f64>> {
        let lu = self.factor(kind, zeta)?;
        Ok(lu.solve_matrix(&self.drive))
    }

    /// Steady state by the selected route; trace is 1 on success.
    pub fn steady_state(&self, zeta: f64, method: SteadyMethod) -> Result<SteadyOutcome> {
        match method {
            SteadyMethod::Direct => {
                let lu = self.factor(GreenKind::Driven, zeta)?;
                let rhs = &self.drive * &self.rho_th;
                let rho = &self.rho_th + lu.solve(&rhs);
                Ok(SteadyOutcome { rho, spectral_radius: None, nonconvergent: false, annihilation_residual: None })
            }
            SteadyMethod::Dyson => {
                let x0 = self.x_matrix(GreenKind::NonDriven, zeta)?;
                let n = self.dim();
                let lhs = DMatrix::<f64>::identity(n, n) - x0;
                let lu = lhs.lu();
                let rcond = lu_rcond(&lu);
                if !(rcond > policy().singular_rcond) {
                    return Err(Error::Singular { rcond });
                }
                let rho = lu.solve(&self.rho_th).ok_or(Error::Singular { rcond: 0.0 })?;
                Ok(SteadyOutcome { rho, spectral_radius: None, nonconvergent: false, annihilation_residual: None })
            }
            SteadyMethod::Series(order) => {
                if order == 0 {
                    return Err(Error::Validation("series order must be positive".into()));
                }
                let x0 = self.x_matrix(GreenKind::NonDriven, zeta)?;
                let radius = spectral_radius(&x0);
                let mut term = self.rho_th.clone();
                let mut rho = term.clone();
                for _ in 0..order {
                    term = &x0 * term;
                    rho += &term;
                }
                Ok(SteadyOutcome {
                    rho,
                    spectral_radius: Some(radius),
                    nonconvergent: radius >= 1.0,
                    annihilation_residual: None,
                })
            }
            SteadyMethod::Polynomial => {
                let x0 = self.x_matrix(GreenKind::NonDriven, zeta)?;
                let radius = spectral_radius(&x0);
                let (rho, residual) = renormalized_polynomial(&x0, &self.rho_th)?;
                Ok(SteadyOutcome {
                    rho,
                    spectral_radius: Some(radius),
                    nonconvergent: false,
                    annihilation_residual: Some(residual),
                })
            }
        }
    }

    /// Relative residual of `(1 − 𝓖₀𝓟)𝓖 = 𝓖₀` on traceless probes.
    pub fn dyson_residual(&self, zeta: f64, probe: DysonProbe) -> Result<f64> {
        self.dyson_residual_perturbed(zeta, probe, 0.0)
    }

    /// [`SpectralProblem::dyson_residual`] with `𝓖` deliberately perturbed by a
    /// random matrix of relative size `perturbation`; a negative control.
    #[doc(hidden)]
    pub fn dyson_residual_perturbed(&self, zeta: f64, probe: DysonProbe, perturbation: f64) -> Result<f64> {
        let q = self.probe_vectors(probe);
        let lu0 = self.factor(GreenKind::NonDriven, zeta)?;
        let lu = self.factor(GreenKind::Driven, zeta)?;
        let mut gq = lu.solve_matrix(&q);
        if perturbation != 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            let scale = perturbation * gq.amax();
            gq.iter_mut().for_each(|v| *v += scale * (rng.random::<f64>() - 0.5));
        }
        let g0q = lu0.solve_matrix(&q);
        let g0pgq = lu0.solve_matrix(&(&self.drive * &gq));
        let res = (&gq - g0pgq - &g0q).norm();
        Ok(res / g0q.norm().max(f64::MIN_POSITIVE))
    }

    fn probe_vectors(&self, probe: DysonProbe) -> DMatrix<f64> {
        let q = complement_basis(&self.trace);
        match probe {
            DysonProbe::Basis => q,
            DysonProbe::Random { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coeffs = DMatrix::from_fn(q.ncols(), count, |_, _| rng.random::<f64>() - 0.5);
                q * coeffs
            }
        }
    }

    /// Defects of `(1 + 𝓧)(1 − 𝓧₀) = 1` and `[𝓧, 𝓧₀] = 0` on the traceless subspace.
    pub fn commutation_check(&self, zeta: f64) -> Result<CommutationReport> {
        let x = self.x_matrix(GreenKind::Driven, zeta)?;
        let x0 = self.x_matrix(GreenKind::NonDriven, zeta)?;
        let q = complement_basis(&self.trace);
        let n = self.dim();
        let id = DMatrix::<f64>::identity(n, n);
        let inv = ((&id + &x) * (&id - &x0) - &id) * &q;
        let comm = (&x * &x0 - &x0 * &x) * &q;
        let scale = (1.0 + x.norm()) * (1.0 + x0.norm());
        Ok(CommutationReport {
            inverse_defect: inv.norm() / scale,
            commutator_defect: comm.norm() / scale,
            x_norm: x.norm(),
            x0_norm: x0.norm(),
        })
    }

    /// Finite poles of the Green function by shift-invert on the bordered pencil.
    pub fn compute_poles(&self, kind: GreenKind) -> Result<PoleSet> {
        let golden = 0.5 * (1.0 + 5.0_f64.sqrt());
        let mut shift = 0.37 * self.rate_scale;
        for _ in 0..3 {
            match self.poles_at_shift(kind, shift) {
                Ok(poles) => return Ok(PoleSet { poles, residues: None, kind }),
                Err(Error::Singular { .. }) => shift *= golden,
                Err(e) => return Err(e),
            }
        }
        Err(Error::ShiftFailure { attempts: 3 })
    }

    fn poles_at_shift(&self, kind: GreenKind, shift: f64) -> Result<Vec<C64>> {
        let n = self.dim();
        let lu = self.factor(kind, shift)?;
        let mut b = DMatrix::<f64>::zeros(n + 1, n + 1);
        b.view_mut((0, 0), (n, n)).copy_from(&self.h1);
        let k = lu.bordered_inverse() * b;
        let knorm = k.norm();
        let cutoff = policy().pencil_rank_cutoff * knorm;
        let thetas = k.complex_eigenvalues();
        let mut upper: Vec<C64> = Vec::new();
        let mut real: Vec<C64> = Vec::new();
        for theta in thetas.iter() {
            if theta.norm() <= cutoff {
                continue;
            }
            let zeta = C64::new(shift, 0.0) + theta.inv();
            if theta.im > 0.0 {
                // 1/θ with Im θ > 0 has Im < 0; store the upper member of the pair
                upper.push(zeta.conj());
            } else if theta.im == 0.0 {
                real.push(zeta);
            }
        }
        if !real.is_empty() {
            return Err(Error::Validation(format!(
                "pencil has {} real eigenvalue(s), e.g. {}; the traceless problem is singular on the real axis",
                real.len(),
                real[0]
            )));
        }
        let mut poles: Vec<C64> = upper.iter().flat_map(|z| [*z, z.conj()]).collect();
        sort_poles(&mut poles);
        Ok(poles)
    }

    /// Fits the residues of the rational expansion of `𝓖` by least squares on
    /// real probe points spread over the pole range.
    pub fn fit_residues(&self, poles: &PoleSet) -> Result<PoleSet> {
        let m = poles.poles.len();
        let count = 2 * (m + 1);
        let radius = poles.poles.iter().fold(self.rate_scale * 1e-3, |r, z| r.max(z.norm()));
        let probes: Vec<f64> = (0..count)
            .map(|p| {
                let theta = std::f64::consts::PI * ((p as f64 + 0.5) / count as f64 - 0.5);
                radius * theta.tan()
            })
            .collect();
        let n = self.dim();
        // design matrix with unit-norm columns
        let mut phi = DMatrix::<C64>::zeros(count, m + 1);
        for (p, &z) in probes.iter().enumerate() {
            phi[(p, 0)] = C64::new(1.0, 0.0);
            for (r, pole) in poles.poles.iter().enumerate() {
                phi[(p, r + 1)] = (C64::new(z, 0.0) - pole).inv();
            }
        }
        let col_scale: Vec<f64> = (0..=m).map(|j| phi.column(j).norm()).collect();
        for j in 0..=m {
            let s = col_scale[j];
            phi.column_mut(j).iter_mut().for_each(|v| *v /= s);
        }
        let mut y = DMatrix::<C64>::zeros(count, n * n);
        for (p, &z) in probes.iter().enumerate() {
            let g = self.green_matrix(poles.kind, z)?;
            for (idx, v) in g.iter().enumerate() {
                y[(p, idx)] = C64::new(*v, 0.0);
            }
        }
        let svd = phi.svd(true, true);
        let coeffs = svd.solve(&y, 1e-14).map_err(|e| Error::Validation(e.to_string()))?;
        let unpack = |j: usize| {
            let row = coeffs.row(j) / C64::new(col_scale[j], 0.0);
            DMatrix::from_iterator(n, n, row.iter().copied())
        };
        let constant = unpack(0);
        let terms = (1..=m).map(unpack).collect();
        Ok(PoleSet {
            poles: poles.poles.clone(),
            residues: Some(Residues { constant, terms }),
            kind: poles.kind,
        })
    }

    /// Steady-state projections on the two graded subspaces from
    /// `(1 − 𝓧₀²)ρ⁽⁰⁾ = ρ_th`, `ρ⁽¹⁾ = 𝓧₀ρ⁽⁰⁾`.
    pub fn projected_steady_state(&self, zeta: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let (zero, _) = self.validated_grading(zeta)?;
        let x0 = self.x_matrix(GreenKind::NonDriven, zeta)?;
        let x0sq = &x0 * &x0;
        let k = zero.len();
        let lhs = DMatrix::from_fn(k, k, |i, j| {
            let v = -x0sq[(zero[i], zero[j])];
            if i == j {
                1.0 + v
            } else {
                v
            }
        });
        let rhs = DVector::from_iterator(k, zero.iter().map(|&i| self.rho_th[i]));
        let lu = lhs.lu();
        let rcond = lu_rcond(&lu);
        if !(rcond > policy().singular_rcond) {
            return Err(Error::Singular { rcond });
        }
        let sol = lu.solve(&rhs).ok_or(Error::Singular { rcond: 0.0 })?;
        let mut rho0 = DVector::<f64>::zeros(self.dim());
        for (i, &idx) in zero.iter().enumerate() {
            rho0[idx] = sol[i];
        }
        let rho1 = &x0 * &rho0;
        Ok((rho0, rho1))
    }

    /// `𝓐⁽⁰⁾ − 𝓟𝓖₀𝓟` on the `0`-graded coordinates, plus the adiabaticity ratios.
    pub fn adiabatic_generator(&self, zeta: f64) -> Result<(DMatrix<f64>, AdiabaticReport)> {
        let (zero, one) = self.validated_grading(zeta)?;
        let a = self.operator(GreenKind::NonDriven, zeta);
        let sub = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
        };
        let a00 = sub(&a, &zero, &zero);
        let a11 = sub(&a, &one, &one);
        let p01 = sub(&self.drive, &zero, &one);
        let p10 = sub(&self.drive, &one, &zero);
        let lu = a11.clone().lu();
        let rcond = lu_rcond(&lu);
        if !(rcond > policy().singular_rcond) {
            return Err(Error::Singular { rcond });
        }
        let g0p = lu.solve(&p10).ok_or(Error::Singular { rcond: 0.0 })?;
        let reduced = a00 - p01 * g0p;
        let min_eig = a11.complex_eigenvalues().iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
        let drive_norm = self.drive.clone().svd(false, false).singular_values.max();
        let ratio = if drive_norm > 0.0 { min_eig / drive_norm } else { f64::INFINITY };
        Ok((
            reduced,
            AdiabaticReport {
                min_fast_rate: min_eig,
                drive_norm,
                fast_to_drive: ratio,
                drive_to_fast: if min_eig > 0.0 { drive_norm / min_eig } else { f64::INFINITY },
                adiabatic: ratio >= ADIABATIC_RATIO,
            },
        ))
    }

    fn validated_grading(&self, zeta: f64) -> Result<(Vec<usize>, Vec<usize>)> {
        let grading = self
            .grading
            .as_ref()
            .ok_or_else(|| Error::Precondition("problem carries no grading".into()))?;
        let zero: Vec<usize> = (0..self.dim()).filter(|&i| grading[i] == 0).collect();
        let one: Vec<usize> = (0..self.dim()).filter(|&i| grading[i] == 1).collect();
        let a = self.operator(GreenKind::NonDriven, zeta);
        let tol = 1e-12;
        let block_max = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
            rows.iter()
                .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
                .fold(0.0_f64, |acc, (r, c)| acc.max(m[(r, c)].abs()))
        };
        let a_scale = a.amax().max(f64::MIN_POSITIVE);
        let p_scale = self.drive.amax().max(f64::MIN_POSITIVE);
        if block_max(&a, &one, &zero) > tol * a_scale {
            return Err(Error::Precondition("(F0 - zeta H1) maps grade 0 out of grade 0".into()));
        }
        if block_max(&a, &zero, &one) > tol * a_scale {
            return Err(Error::Precondition("(F0 - zeta H1) maps grade 1 out of grade 1".into()));
        }
        if block_max(&self.drive, &zero, &zero) > tol * p_scale {
            return Err(Error::Precondition("drive maps grade 0 into grade 0".into()));
        }
        if block_max(&self.drive, &one, &one) > tol * p_scale {
            return Err(Error::Precondition("drive maps grade 1 into grade 1".into()));
        }
        let th_scale = self.rho_th.amax();
        if one.iter().any(|&i| self.rho_th[i].abs() > tol * th_scale) {
            return Err(Error::Precondition("thermal state has a grade-1 component".into()));
        }
        Ok((zero, one))
    }

    /// `|det(1 − 𝓧₀(ζ))|` on a grid; zeros mark extra poles of `𝓖`.
    pub fn extra_pole_scan(&self, zetas: &[f64]) -> Result<Vec<(f64, f64)>> {
        zetas
            .iter()
            .map(|&z| {
                let x0 = self.x_matrix(GreenKind::NonDriven, z)?;
                let n = self.dim();
                let det = (DMatrix::<f64>::identity(n, n) - x0).determinant();
                Ok((z, det.abs()))
            })
            .collect()
    }
}

const ADIABATIC_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DysonProbe {
    /// Orthonormal basis of the traceless subspace.
    Basis,
    /// Random traceless probes from a fixed seed.
    Random { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutationReport {
    /// `‖((1+𝓧)(1−𝓧₀) − 1)Q‖ / ((1+‖𝓧‖)(1+‖𝓧₀‖))`
    pub inverse_defect: f64,
    /// `‖[𝓧, 𝓧₀]Q‖ / ((1+‖𝓧‖)(1+‖𝓧₀‖))`
    pub commutator_defect: f64,
    pub x_norm: f64,
    pub x0_norm: f64,
}

/// Rates governing adiabatic elimination of the grade-1 subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticReport {
    /// `min |eig 𝓐⁽¹⁾|`
    pub min_fast_rate: f64,
    /// `‖𝓟‖₂`
    pub drive_norm: f64,
    pub fast_to_drive: f64,
    pub drive_to_fast: f64,
    /// `fast_to_drive ≥ 10`: grade-1 dynamics much faster than the exchange.
    pub adiabatic: bool,
}

/// Residues of `𝓖(ζ) = 𝓖⁽⁰⁾ + Σ_r (ζ − ζ_r)⁻¹ 𝓖⁽ʳ⁾`.
#[derive(Debug, Clone)]
pub struct Residues {
    pub constant: DMatrix<C64>,
    pub terms: Vec<DMatrix<C64>>,
}

/// Finite poles of a Green function, in conjugate pairs.
#[derive(Debug, Clone)]
pub struct PoleSet {
    pub poles: Vec<C64>,
    pub residues: Option<Residues>,
    pub kind: GreenKind,
}

impl PoleSet {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// Every pole has its exact conjugate in the set and none is real.
    pub fn is_conjugate_closed(&self) -> bool {
        self.poles.iter().all(|z| z.im != 0.0 && self.poles.iter().any(|w| *w == z.conj()))
    }

    /// Evaluates the rational expansion at real `zeta`.
    pub fn rational_eval(&self, zeta: f64) -> Result<DMatrix<C64>> {
        let res = self
            .residues
            .as_ref()
            .ok_or_else(|| Error::Precondition("pole set carries no residues".into()))?;
        let z = C64::new(zeta, 0.0);
        for pole in &self.poles {
            let dist = (z - pole).norm();
            if dist < 1e-8 * pole.norm() {
                return Err(Error::PoleProximity { zeta, pole: pole.to_string(), distance: dist });
            }
        }
        let mut acc = res.constant.clone();
        for (pole, r) in self.poles.iter().zip(&res.terms) {
            acc += r * (z - pole).inv();
        }
        Ok(acc)
    }
}

/// Sorts by `|Re ζ|`, then `Re ζ`, then `Im ζ`, so conjugates sit together.
pub fn sort_poles(poles: &mut [C64]) {
    poles.sort_by(|a, b| {
        a.re.abs()
            .total_cmp(&b.re.abs())
            .then(a.re.total_cmp(&b.re))
            .then(b.im.total_cmp(&a.im))
    });
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().fold(0.0_f64, |r, z| r.max(z.norm()))
}

/// `q(𝓧₀)ρ_th` with `q(x) = (π(1) − π(x)) / ((1 − x)π(1))`, where `π` is the
/// characteristic polynomial of `𝓧₀` on the Krylov space of `ρ_th`.
///
/// The Krylov space is built with a fully reorthogonalized Arnoldi process, so
/// `q(𝓧₀)ρ_th = β V (1 − H)⁻¹ e₁` with `H` the Hessenberg projection. Power
/// or product expansions of `π` overflow once the spectral radius exceeds
/// one. The second value is the remainder
/// `‖π(𝓧₀)ρ_th / π(1)‖ = ‖ρ_th − (1 − 𝓧₀)ρ‖`.
fn renormalized_polynomial(x0: &DMatrix<f64>, rho_th: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = rho_th.len();
    let beta = rho_th.norm();
    if beta == 0.0 {
        return Ok((DVector::zeros(n), 0.0));
    }
    let breakdown = 1e-14 * x0.norm().max(1.0);
    let mut basis: Vec<DVector<f64>> = vec![rho_th / beta];
    let mut h = DMatrix::<f64>::zeros(n + 1, n);
    let mut m = 0;
    while m < n {
        let mut w = x0 * &basis[m];
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = v.dot(&w);
                h[(i, m)] += c;
                w.axpy(-c, v, 1.0);
            }
        }
        let norm = w.norm();
        h[(m + 1, m)] = norm;
        m += 1;
        if norm <= breakdown {
            break;
        }
        basis.push(w / norm);
    }
    let lhs = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 - h[(i, j)] } else { -h[(i, j)] });
    let lu = lhs.lu();
    let rcond = lu_rcond(&lu);
    if !(rcond > policy().singular_rcond) {
        return Err(Error::Singular { rcond });
    }
    let mut e1 = DVector::zeros(m);
    e1[0] = beta;
    let y = lu.solve(&e1).ok_or(Error::Singular { rcond: 0.0 })?;
    let mut rho = DVector::<f64>::zeros(n);
    for (v, c) in basis.iter().zip(y.iter()) {
        rho.axpy(*c, v, 1.0);
    }
    let remainder = (rho_th - (&rho - x0 * &rho)).amax();
    Ok((rho, remainder))
}

/// A [`SpectralProblem`] built from a [`LindbladModel`] in Hermitian coordinates.
#[derive(Debug, Clone)]
pub struct ModelProblem {
    pub problem: SpectralProblem,
    pub basis: RealBasis,
}

impl ModelProblem {
    /// Uses the full Liouville space.
    pub fn new(model: &LindbladModel) -> Result<Self> {
        Self::in_sector(model, RealBasis::full(model.hilbert_dim()))
    }

    /// Restricts to the invariant sector spanned by `basis`.
    pub fn in_sector(model: &LindbladModel, basis: RealBasis) -> Result<Self> {
        if basis.hilbert_dim() != model.hilbert_dim() {
            return Err(Error::Shape("basis and model act on different Hilbert spaces".into()));
        }
        let (f0, drive, h1) = model_terms(model);
        let f0 = basis.assemble(&f0)?;
        let drive = basis.assemble(&drive)?;
        let h1 = basis.assemble(&h1)?;
        let rho = model.rho_th().entries();
        if basis.outside_weight(rho) > 0.0 {
            return Err(Error::Precondition("thermal state lies outside the sector".into()));
        }
        let rho_th = basis.to_coords(rho).map(|z| z.re);
        let trace = basis.trace_functional();
        let problem = SpectralProblem::new(f0, drive, h1, trace, rho_th)?;
        Ok(Self { problem, basis })
    }

    /// Attaches a grading from a label on matrix units `(a, b)`.
    pub fn with_unit_grading(mut self, label: impl Fn(usize, usize) -> u8) -> Result<Self> {
        use crate::realrep::Coord;
        let grading = self
            .basis
            .coords()
            .iter()
            .map(|c| match *c {
                Coord::Diag(a) => label(a, a),
                Coord::Sym(a, b) | Coord::Anti(a, b) => label(a, b),
            })
            .collect();
        self.problem = self.problem.with_grading(grading)?;
        Ok(self)
    }

    pub fn operator_coords(&self, op: &QOperator) -> Result<DVector<C64>> {
        if op.dim() != self.basis.hilbert_dim() {
            return Err(Error::Shape("operator dimension does not match the model".into()));
        }
        let scale = op.max_abs().max(f64::MIN_POSITIVE);
        if self.basis.outside_weight(op.entries()) > 1e-12 * scale {
            return Err(Error::Precondition("operator lies outside the sector".into()));
        }
        Ok(self.basis.to_coords(op.entries()))
    }

    pub fn density(&self, coords: &DVector<f64>) -> Result<QOperator> {
        let m = self.basis.from_real_coords(coords);
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::Validation(format!("steady state has trace {tr}")));
        }
        // renormalize the last few ulps so the density invariant holds exactly
        QOperator::density(m / tr, TraceClass::One)
    }

    pub fn green_apply(&self, kind: GreenKind, zeta: f64, operand: &QOperator) -> Result<QOperator> {
        let c = self.operator_coords(operand)?;
        let x = self.problem.green_apply(kind, zeta, &c)?;
        QOperator::new(self.basis.from_coords(&x))
    }

    pub fn steady_state(&self, zeta: f64, method: SteadyMethod) -> Result<(QOperator, SteadyOutcome)> {
        let out = self.problem.steady_state(zeta, method)?;
        Ok((self.density(&out.rho)?, out))
    }
}

/// `𝓖(ζ)` or `𝓖₀(ζ)` applied to a traceless operator.
pub fn green_apply(model: &LindbladModel, kind: GreenKind, zeta: f64, operand: &QOperator) -> Result<QOperator> {
    ModelProblem::new(model)?.green_apply(kind, zeta, operand)
}

/// Steady state of the model by the selected route.
pub fn steady_state(model: &LindbladModel, zeta: f64, method: SteadyMethod) -> Result<(QOperator, SteadyOutcome)> {
    ModelProblem::new(model)?.steady_state(zeta, method)
}

pub fn dyson_residual(model: &LindbladModel, zeta: f64, probe: DysonProbe) -> Result<f64> {
    ModelProblem::new(model)?.problem.dyson_residual(zeta, probe)
}

pub fn commutation_check(model: &LindbladModel, zeta: f64) -> Result<CommutationReport> {
    ModelProblem::new(model)?.problem.commutation_check(zeta)
}

pub fn compute_poles(model: &LindbladModel, kind: GreenKind) -> Result<PoleSet> {
    ModelProblem::new(model)?.problem.compute_poles(kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_times_complex;
    use crate::liouops::{spin_half, JumpTerm};
    use approx::assert_relative_eq;

    /// Driven spin with decay and dephasing.
    fn spin_model(omega: f64, decay: f64, dephasing: f64) -> LindbladModel {
        let (sz, sp, sm) = spin_half();
        let sx = (&sp + &sm) * C64::new(0.5, 0.0);
        let mut ground = DMatrix::<C64>::zeros(2, 2);
        ground[(0, 0)] = C64::new(1.0, 0.0);
        LindbladModel::new(
            QOperator::zeros(2),
            QOperator::hermitian(sz.clone()).unwrap(),
            QOperator::hermitian(sx * C64::new(omega, 0.0)).unwrap(),
            vec![
                JumpTerm { op: QOperator::new(sm).unwrap(), rate: decay },
                JumpTerm { op: QOperator::hermitian(sz).unwrap(), rate: 2.0 * dephasing },
            ],
            QOperator::new(ground).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn non_driven_green_function_on_raising_operator() {
        // 𝓕₀S₊ = −ΓS₊ with Γ = Γ₁/2 + Γ₂ and 𝓗₁S₊ = iS₊, so 𝓖₀S₊ = −S₊/(Γ + iζ)
        let zeta = 1.3;
        let model = spin_model(0.0, 0.4, 0.6);
        let gamma2 = 0.8;
        let (_, sp, _) = spin_half();
        let out = green_apply(&model, GreenKind::NonDriven, zeta, &QOperator::new(sp.clone()).unwrap()).unwrap();
        let expect = &sp * (-(C64::new(gamma2, zeta)).inv());
        assert!((out.entries() - expect).camax() < 1e-14);
    }

    #[test]
    fn green_apply_rejects_traced_operand() {
        let model = spin_model(0.4, 1.0, 0.5);
        let err = green_apply(&model, GreenKind::Driven, 0.0, &QOperator::identity(2)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn driven_green_on_thermal_drive_is_traceless_deviation() {
        let model = spin_model(0.7, 1.0, 0.5);
        let mp = ModelProblem::new(&model).unwrap();
        let p = &mp.problem;
        let rhs = (p.drive() * p.rho_th()).map(|v| C64::new(v, 0.0));
        let bar = p.green_apply(GreenKind::Driven, 0.2, &rhs).unwrap();
        let m = p.generator(0.2);
        let full = p.rho_th().map(|v| C64::new(v, 0.0)) + &bar;
        assert!(real_times_complex(&m, &full).camax() < 1e-13);
        let tr: C64 = bar.iter().zip(p.trace_functional().iter()).map(|(z, t)| z * *t).sum();
        assert!(tr.norm() < 1e-14);
    }

    #[test]
    fn driven_equals_composed_route() {
        let model = spin_model(0.9, 1.0, 0.3);
        let p = ModelProblem::new(&model).unwrap().problem;
        let b = DVector::from_vec(vec![0.3, -0.2, 0.5, -0.3]).map(|v| C64::new(v, 0.0));
        let g = p.green_apply(GreenKind::Driven, 0.4, &b).unwrap();
        let g0b = p.green_apply(GreenKind::NonDriven, 0.4, &b).unwrap();
        let pg = real_times_complex(p.drive(), &g);
        let composed = &g0b + p.green_apply(GreenKind::NonDriven, 0.4, &pg).unwrap();
        assert!((g - composed).camax() < 1e-9);
    }

    #[test]
    fn undriven_steady_state_is_thermal_for_every_route() {
        let model = spin_model(0.0, 1.0, 0.3);
        for method in [SteadyMethod::Direct, SteadyMethod::Dyson, SteadyMethod::Series(3), SteadyMethod::Polynomial] {
            let (rho, _) = steady_state(&model, 0.5, method).unwrap();
            assert!((rho.entries() - model.rho_th().entries()).camax() < 1e-15, "{method:?}");
        }
    }

    #[test]
    fn driven_spin_matches_bloch_solution() {
        // H = Ω σ_x/2 on resonance with decay Γ₁ and no extra dephasing:
        // ⟨S_z⟩ = −½ Γ₁²/(Γ₁² + 2Ω²)
        let (omega, g1) = (0.6, 1.1);
        let model = spin_model(omega, g1, 0.0);
        let (rho, _) = steady_state(&model, 0.0, SteadyMethod::Direct).unwrap();
        let (sz, _, _) = spin_half();
        let z = rho.expect(&QOperator::hermitian(sz).unwrap()).re;
        assert_relative_eq!(z, -0.5 * g1 * g1 / (g1 * g1 + 2.0 * omega * omega), epsilon = 1e-14);
    }

    #[test]
    fn routes_agree_on_driven_spin() {
        let model = spin_model(0.3, 1.0, 0.4);
        let mp = ModelProblem::new(&model).unwrap();
        let direct = mp.problem.steady_state(0.7, SteadyMethod::Direct).unwrap().rho;
        for method in [SteadyMethod::Dyson, SteadyMethod::Polynomial] {
            let other = mp.problem.steady_state(0.7, method).unwrap().rho;
            assert!((&other - &direct).camax() < 1e-12, "{method:?}");
        }
    }

    #[test]
    fn series_flags_divergence() {
        let model = spin_model(5.0, 0.2, 0.1);
        let out = ModelProblem::new(&model).unwrap().problem.steady_state(0.0, SteadyMethod::Series(4)).unwrap();
        assert!(out.spectral_radius.unwrap() >= 1.0);
        assert!(out.nonconvergent);
        assert!(ModelProblem::new(&model).unwrap().problem.steady_state(0.0, SteadyMethod::Series(0)).is_err());
    }

    #[test]
    fn dyson_and_commutation_on_spin() {
        let model = spin_model(0.8, 1.0, 0.25);
        assert!(dyson_residual(&model, 0.3, DysonProbe::Basis).unwrap() < 1e-12);
        let rep = commutation_check(&model, 0.3).unwrap();
        assert!(rep.inverse_defect < 1e-12 && rep.commutator_defect < 1e-12);
        let undriven = model.without_drive();
        assert_eq!(dyson_residual(&undriven, 0.3, DysonProbe::Basis).unwrap(), 0.0);
        let rep = commutation_check(&undriven, 0.3).unwrap();
        assert_eq!((rep.inverse_defect, rep.commutator_defect), (0.0, 0.0));
    }

    #[test]
    fn perturbed_green_function_breaks_dyson() {
        let model = spin_model(0.8, 1.0, 0.25);
        let p = ModelProblem::new(&model).unwrap().problem;
        let r = p.dyson_residual_perturbed(0.3, DysonProbe::Random { count: 4, seed: 3 }, 0.05).unwrap();
        assert!(r > 1e-3);
    }

    #[test]
    fn dephased_spin_poles() {
        // non-driven coherences decay at Γ₁/2 + Γ₂, poles at ±i(Γ₁/2 + Γ₂)
        let model = spin_model(0.5, 1.0, 0.25);
        let poles = compute_poles(&model, GreenKind::NonDriven).unwrap();
        assert_eq!(poles.len(), 2);
        assert!(poles.is_conjugate_closed());
        for z in &poles.poles {
            assert_relative_eq!(z.re, 0.0, epsilon = 1e-12);
            assert_relative_eq!(z.im.abs(), 0.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn rational_expansion_reproduces_green_function() {
        let model = spin_model(0.7, 1.0, 0.2);
        let p = ModelProblem::new(&model).unwrap().problem;
        let poles = p.compute_poles(GreenKind::Driven).unwrap();
        let fitted = p.fit_residues(&poles).unwrap();
        for zeta in [-2.3, -0.41, 0.05, 0.9, 3.7] {
            let r = fitted.rational_eval(zeta).unwrap();
            let g = p.green_matrix(GreenKind::Driven, zeta).unwrap().map(|v| C64::new(v, 0.0));
            assert!((&r - &g).camax() <= 1e-9 * g.camax(), "zeta {zeta}");
            assert!(r.iter().all(|z| z.im.abs() < 1e-9));
        }
        let far = fitted.rational_eval(1e9).unwrap();
        let constant = &fitted.residues.as_ref().unwrap().constant;
        assert!((far - constant).camax() < 1e-6);
        let pole = fitted.poles[0];
        assert!(fitted.rational_eval(pole.re).is_ok() || pole.im.abs() < 1e-8);
    }

    #[test]
    fn rational_eval_rejects_pole_neighbourhood() {
        let set = PoleSet {
            poles: vec![C64::new(1.0, 1e-10), C64::new(1.0, -1e-10)],
            residues: Some(Residues {
                constant: DMatrix::zeros(1, 1),
                terms: vec![DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)],
            }),
            kind: GreenKind::Driven,
        };
        assert!(matches!(set.rational_eval(1.0), Err(Error::PoleProximity { .. })));
    }
}
