//! Driven ensemble of one active spin-1/2 coupled by flip-flop exchange to
//! `N` passive spins-1/2.
//!
//! Three representations are available:
//!
//! * full: every passive spin is kept, Hilbert dimension `2^(N+1)`; supports
//!   arbitrary coupling weights,
//! * Dicke: the passive spins are replaced by a collective spin `N/2`,
//!   Hilbert dimension `2(N+1)`,
//! * reduced: the `4N+2` real coordinates of the zero-quantum sector of the
//!   Dicke representation, with a block-tridiagonal generator that scales to
//!   millions of passive spins.
//!
//! Basis states of the Dicke representation are `|s, k⟩` with `s = 0` for the
//! active ground state `|↓⟩`, `s = 1` for `|↑⟩`, and `k = n + N/2` the passive
//! occupation index; the flat index is `s (N+1) + k`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{ModelProblem, SpectralProblem};
use crate::linalg::BlockTridiagonal;
use crate::liouops::{embed, spin_half, JumpTerm, LindbladModel, QOperator, TraceClass, C64};
use crate::realrep::RealBasis;

/// Largest passive count accepted by the full representation.
pub const FULL_MAX_PASSIVE: usize = 6;

/// Model parameters, all rates in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub n_passive: usize,
    pub omega: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(rename = "Gamma1")]
    pub big_gamma1: f64,
    #[serde(rename = "Gamma2")]
    pub big_gamma2: f64,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
}

impl ModelParams {
    /// Ratio `γ₁/Γ` above which the reduced path is flagged as outside its
    /// intended regime.
    pub const REDUCED_VALIDITY_RATIO: f64 = 0.01;

    pub fn validate(&self) -> Result<()> {
        if self.n_passive < 1 {
            return Err(Error::Validation("N must be at least 1".into()));
        }
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("Gamma1", self.big_gamma1),
            ("Gamma2", self.big_gamma2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.omega.is_finite() || !self.zeta.is_finite() {
            return Err(Error::Validation("omega and zeta must be finite".into()));
        }
        if let Some(a) = &self.couplings {
            if a.len() != self.n_passive {
                return Err(Error::Validation(format!(
                    "{} couplings given for N = {}",
                    a.len(),
                    self.n_passive
                )));
            }
            if a.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::Validation("couplings must be nonnegative and finite".into()));
            }
        }
        Ok(())
    }

    /// Active coherence decay rate `Γ = γ₂ + Γ₂ + Γ₁/2`.
    pub fn big_gamma(&self) -> f64 {
        self.gamma2 + self.big_gamma2 + 0.5 * self.big_gamma1
    }

    /// Relative longitudinal relaxation `γ = Γ₁/γ₁`.
    pub fn gamma_ratio(&self) -> f64 {
        self.big_gamma1 / self.gamma1
    }

    /// Resonant saturation `η₀ = 4Ω²/(γ₁Γ)`.
    pub fn eta0(&self) -> f64 {
        4.0 * self.omega * self.omega / (self.gamma1 * self.big_gamma())
    }

    /// Saturation at the configured offset.
    pub fn eta(&self) -> f64 {
        self.eta_at(self.zeta)
    }

    pub fn eta_at(&self, zeta: f64) -> f64 {
        let g = self.big_gamma();
        self.eta0() / (1.0 + (zeta / g).powi(2))
    }

    pub fn eta_bar(&self) -> f64 {
        1.0 + self.eta()
    }

    /// `λ = (N/2) ln(1 + η)`.
    pub fn lambda(&self) -> f64 {
        0.5 * self.n_passive as f64 * self.eta().ln_1p()
    }

    pub fn spin(&self) -> f64 {
        0.5 * self.n_passive as f64
    }

    pub fn reduced_path_valid(&self) -> bool {
        self.gamma1 / self.big_gamma() < Self::REDUCED_VALIDITY_RATIO
    }

    pub fn is_mean_field(&self) -> bool {
        match &self.couplings {
            None => true,
            Some(a) => a.iter().all(|&x| x == a[0]) && a[0] == 1.0,
        }
    }

    pub fn with_zeta(&self, zeta: f64) -> Self {
        Self { zeta, ..self.clone() }
    }

    pub fn coupling_weights(&self) -> Vec<f64> {
        self.couplings.clone().unwrap_or_else(|| vec![1.0; self.n_passive])
    }
}

/// Collective passive operators `(I_z, I_+, I_-)` in the occupation basis.
pub fn collective_operators(n: usize) -> Result<(QOperator, QOperator, QOperator)> {
    if n < 1 {
        return Err(Error::Validation("N must be at least 1".into()));
    }
    let d = n + 1;
    let half = 0.5 * n as f64;
    let iz = DMatrix::from_fn(d, d, |r, c| if r == c { C64::new(r as f64 - half, 0.0) } else { C64::new(0.0, 0.0) });
    let mut ip = DMatrix::<C64>::zeros(d, d);
    for k in 1..d {
        ip[(k, k - 1)] = C64::new(raise_sq(n, k - 1).sqrt(), 0.0);
    }
    let im = ip.adjoint();
    Ok((QOperator::hermitian(iz)?, QOperator::new(ip)?, QOperator::new(im)?))
}

/// `|⟨k+1|I_+|k⟩|² = (N−k)(k+1)`.
fn raise_sq(n: usize, k: usize) -> f64 {
    ((n - k) as f64) * ((k + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Full,
    Dicke,
}

/// Builds the Lindblad model in the requested representation.
pub fn build_ensemble_model(params: &ModelParams, representation: Representation) -> Result<LindbladModel> {
    params.validate()?;
    let n = params.n_passive;
    let (sz, sp, sm) = spin_half();
    let (iz, vp, vm, passive_dim) = match representation {
        Representation::Dicke => {
            if !params.is_mean_field() {
                return Err(Error::Unsupported(
                    "the Dicke representation requires unit couplings; use the full representation".into(),
                ));
            }
            let (iz, ip, im) = collective_operators(n)?;
            (iz.into_entries(), ip.into_entries(), im.into_entries(), n + 1)
        }
        Representation::Full => {
            if n > FULL_MAX_PASSIVE {
                return Err(Error::Unsupported(format!(
                    "full representation is limited to N <= {FULL_MAX_PASSIVE}, got {n}"
                )));
            }
            let dims = vec![2usize; n];
            let weights = params.coupling_weights();
            let d = 1usize << n;
            let mut iz = DMatrix::<C64>::zeros(d, d);
            let mut vp = DMatrix::<C64>::zeros(d, d);
            for (site, a) in weights.iter().enumerate() {
                iz += embed(&sz, site, &dims);
                vp += embed(&sp, site, &dims) * C64::new(*a, 0.0);
            }
            let vm = vp.adjoint();
            (iz, vp, vm, d)
        }
    };
    let eye_s = DMatrix::<C64>::identity(2, 2);
    let eye_i = DMatrix::<C64>::identity(passive_dim, passive_dim);
    let s_op = |m: &DMatrix<C64>| m.kronecker(&eye_i);
    let i_op = |m: &DMatrix<C64>| eye_s.kronecker(m);
    let omega = C64::new(params.omega, 0.0);
    let drive = (sm.kronecker(&vp) + sp.kronecker(&vm)) * omega;
    let total = 2 * passive_dim;
    let jumps = vec![
        JumpTerm { op: QOperator::new(s_op(&sm))?, rate: params.big_gamma1 },
        JumpTerm { op: QOperator::hermitian(s_op(&sz))?, rate: 2.0 * params.big_gamma2 },
        JumpTerm { op: QOperator::new(i_op(&vp))?, rate: 0.5 * params.gamma1 },
        JumpTerm { op: QOperator::new(i_op(&vm))?, rate: 0.5 * params.gamma1 },
        JumpTerm { op: QOperator::hermitian(i_op(&iz))?, rate: 2.0 * params.gamma2 },
    ];
    let mut rho = DMatrix::<C64>::zeros(total, total);
    for k in 0..passive_dim {
        rho[(k, k)] = C64::new(1.0 / passive_dim as f64, 0.0);
    }
    LindbladModel::new(
        QOperator::zeros(total),
        QOperator::hermitian(s_op(&sz))?,
        QOperator::hermitian(drive)?,
        jumps,
        QOperator::density(rho, TraceClass::One)?,
    )
}

/// Total excitation `s + (number of raised passive spins)` of each basis state.
pub fn ensemble_charges(n: usize, representation: Representation) -> Vec<i64> {
    let passive: Vec<i64> = match representation {
        Representation::Dicke => (0..=n as i64).collect(),
        Representation::Full => (0..1usize << n).map(|b| b.count_ones() as i64).collect(),
    };
    let m = passive.len();
    (0..2 * m).map(|idx| (idx / m) as i64 + passive[idx % m]).collect()
}

/// Active level `s` of a basis state.
pub fn active_level(n: usize, representation: Representation, index: usize) -> usize {
    let m = match representation {
        Representation::Dicke => n + 1,
        Representation::Full => 1usize << n,
    };
    index / m
}

/// The model on its zero-quantum sector, graded by active coherence order.
pub fn ensemble_problem(params: &ModelParams, representation: Representation) -> Result<ModelProblem> {
    let model = build_ensemble_model(params, representation)?;
    let n = params.n_passive;
    let basis = RealBasis::from_charges(&ensemble_charges(n, representation));
    ModelProblem::in_sector(&model, basis)?.with_unit_grading(|a, b| {
        u8::from(active_level(n, representation, a) != active_level(n, representation, b))
    })
}

/// `(⟨I_z⟩, ⟨I_z²⟩, ⟨S_z⟩)` of a density operator in either representation.
pub fn density_observables(rho: &QOperator, n: usize, representation: Representation) -> Result<Observables> {
    let m = match representation {
        Representation::Dicke => n + 1,
        Representation::Full => 1usize << n,
    };
    if rho.dim() != 2 * m {
        return Err(Error::Shape(format!("density has dimension {}, expected {}", rho.dim(), 2 * m)));
    }
    let half = 0.5 * n as f64;
    let e = rho.entries();
    let (mut iz, mut iz2, mut sz) = (0.0, 0.0, 0.0);
    for idx in 0..2 * m {
        let p = e[(idx, idx)].re;
        let s = idx / m;
        let k = match representation {
            Representation::Dicke => (idx % m) as f64,
            Representation::Full => (idx % m).count_ones() as f64,
        };
        iz += p * (k - half);
        iz2 += p * (k - half) * (k - half);
        sz += p * (s as f64 - 0.5);
    }
    Ok(Observables { iz, iz2, sz, n_passive: n })
}

/// Steady-state moments of the passive and active polarizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub iz: f64,
    pub iz2: f64,
    pub sz: f64,
    pub n_passive: usize,
}

impl Observables {
    /// `2⟨I_z⟩/N`
    pub fn iz_norm(&self) -> f64 {
        2.0 * self.iz / self.n_passive as f64
    }

    /// `4⟨I_z²⟩/N²`
    pub fn iz2_norm(&self) -> f64 {
        let n = self.n_passive as f64;
        4.0 * self.iz2 / (n * n)
    }
}

/// Zero-quantum steady state in reduced coordinates.
///
/// `u[k]` and `v[k]` are the passive populations summed over the active
/// levels and in the active excited level; `w[k-1]` is the coherence
/// `⟨k,↓|ρ|k−1,↑⟩` for `k = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeReducedState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<C64>,
}

impl DickeReducedState {
    pub fn n_passive(&self) -> usize {
        self.u.len() - 1
    }

    pub fn trace(&self) -> f64 {
        self.u.iter().sum()
    }

    /// Thermal state: uniform passive populations, active spin down.
    pub fn thermal(n: usize) -> Self {
        Self { u: vec![1.0 / (n + 1) as f64; n + 1], v: vec![0.0; n + 1], w: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn observables(&self) -> Observables {
        observables(self)
    }

    /// Flat coordinates in the layout used by [`ReducedGenerator::spectral_problem`].
    pub fn to_coords(&self) -> DVector<f64> {
        let n = self.n_passive();
        let mut x = DVector::zeros(4 * n + 2);
        for k in 0..=n {
            x[flat_index(k, 0)] = self.u[k];
            x[flat_index(k, 1)] = self.v[k];
            if k > 0 {
                x[flat_index(k, 2)] = self.w[k - 1].re;
                x[flat_index(k, 3)] = self.w[k - 1].im;
            }
        }
        x
    }

    pub fn from_coords(x: &DVector<f64>) -> Result<Self> {
        if x.len() < 6 || (x.len() - 2) % 4 != 0 {
            return Err(Error::Shape(format!("{} is not a reduced coordinate count", x.len())));
        }
        let n = (x.len() - 2) / 4;
        Ok(Self {
            u: (0..=n).map(|k| x[flat_index(k, 0)]).collect(),
            v: (0..=n).map(|k| x[flat_index(k, 1)]).collect(),
            w: (1..=n).map(|k| C64::new(x[flat_index(k, 2)], x[flat_index(k, 3)])).collect(),
        })
    }

    /// Density operator in the Dicke representation.
    pub fn to_density(&self) -> Result<QOperator> {
        let n = self.n_passive();
        let m = n + 1;
        let mut rho = DMatrix::<C64>::zeros(2 * m, 2 * m);
        for k in 0..m {
            rho[(k, k)] = C64::new(self.u[k] - self.v[k], 0.0);
            rho[(m + k, m + k)] = C64::new(self.v[k], 0.0);
        }
        for k in 1..m {
            rho[(k, m + k - 1)] = self.w[k - 1];
            rho[(m + k - 1, k)] = self.w[k - 1].conj();
        }
        QOperator::density(rho, TraceClass::One)
    }

    /// Reads the reduced coordinates off a Dicke-representation density;
    /// errors when weight lies outside the zero-quantum sector.
    pub fn from_density(rho: &QOperator) -> Result<Self> {
        let d = rho.dim();
        if d < 4 || d % 2 != 0 {
            return Err(Error::Shape(format!("dimension {d} is not a Dicke representation")));
        }
        let m = d / 2;
        let e = rho.entries();
        let scale = rho.max_abs().max(f64::MIN_POSITIVE);
        for r in 0..d {
            for c in 0..d {
                let charge = |i: usize| i / m + i % m;
                if charge(r) != charge(c) && e[(r, c)].norm() > 1e-12 * scale {
                    return Err(Error::Precondition(format!("density has weight outside the sector at ({r}, {c})")));
                }
            }
        }
        Ok(Self {
            u: (0..m).map(|k| (e[(k, k)] + e[(m + k, m + k)]).re).collect(),
            v: (0..m).map(|k| e[(m + k, m + k)].re).collect(),
            w: (1..m).map(|k| e[(k, m + k - 1)]).collect(),
        })
    }
}

/// `⟨I_z⟩ = Σ n u_n`, `⟨I_z²⟩ = Σ n² u_n`, `⟨S_z⟩ = Σ v − ½`.
pub fn observables(state: &DickeReducedState) -> Observables {
    let n = state.n_passive();
    let half = 0.5 * n as f64;
    let (mut iz, mut iz2) = (0.0, 0.0);
    for (k, u) in state.u.iter().enumerate() {
        let occ = k as f64 - half;
        iz2 += occ * occ * u;
    }
    // mirrored levels are paired so a symmetric population sums to exactly zero
    for k in 0..(n + 1) / 2 {
        iz += (k as f64 - half) * (state.u[k] - state.u[n - k]);
    }
    let sz = state.v.iter().sum::<f64>() - 0.5;
    Observables { iz, iz2, sz, n_passive: n }
}

/// Index of local coordinate `j` of block `k` in the flat `4N+2` layout.
fn flat_index(k: usize, j: usize) -> usize {
    if k == 0 {
        j
    } else {
        2 + 4 * (k - 1) + j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    Id,
    Raise,
    Lower,
    Z,
}

/// Product of an active and a passive ladder factor; maps each basis state
/// to at most one basis state.
#[derive(Debug, Clone, Copy)]
struct Monomial {
    active: Factor,
    passive: Factor,
    scale: f64,
}

impl Monomial {
    fn new(active: Factor, passive: Factor, scale: f64) -> Self {
        Self { active, passive, scale }
    }

    fn act(&self, n: usize, (s, k): (usize, usize)) -> Option<((usize, usize), f64)> {
        let (s2, a) = match self.active {
            Factor::Id => (s, 1.0),
            Factor::Raise => (1, if s == 0 { 1.0 } else { return None }),
            Factor::Lower => (0, if s == 1 { 1.0 } else { return None }),
            Factor::Z => (s, s as f64 - 0.5),
        };
        let (k2, b) = match self.passive {
            Factor::Id => (k, 1.0),
            Factor::Raise if k < n => (k + 1, raise_sq(n, k).sqrt()),
            Factor::Lower if k > 0 => (k - 1, raise_sq(n, k - 1).sqrt()),
            Factor::Z => (k, k as f64 - 0.5 * n as f64),
            _ => return None,
        };
        let amp = self.scale * a * b;
        (amp != 0.0).then_some(((s2, k2), amp))
    }
}

enum Term {
    /// `coef [H, ·]` with `H` Hermitian.
    Commutator(Vec<Monomial>, C64),
    /// `rate L(X)`.
    Jump(Monomial, f64),
}

type State = (usize, usize);

impl Term {
    fn apply(&self, n: usize, a: State, b: State, w: C64, out: &mut Vec<(State, State, C64)>) {
        match self {
            Term::Commutator(h, coef) => {
                let s = *coef * w;
                for m in h {
                    if let Some((a2, amp)) = m.act(n, a) {
                        out.push((a2, b, s * amp));
                    }
                    // E_ab H = |a⟩(H|b⟩)† for Hermitian H
                    if let Some((b2, amp)) = m.act(n, b) {
                        out.push((a, b2, -s * amp));
                    }
                }
            }
            Term::Jump(x, rate) => {
                let xa = x.act(n, a);
                let xb = x.act(n, b);
                if let (Some((a2, pa)), Some((b2, pb))) = (xa, xb) {
                    out.push((a2, b2, w * (rate * pa * pb)));
                }
                let na = xa.map_or(0.0, |(_, p)| p * p);
                let nb = xb.map_or(0.0, |(_, p)| p * p);
                let diag = 0.5 * rate * (na + nb);
                if diag != 0.0 {
                    out.push((a, b, -w * diag));
                }
            }
        }
    }
}

/// Generator of the Dicke model restricted to the zero-quantum sector, in
/// reduced coordinates, split as `𝓕₀`, `𝓟` and `𝓗₁`.
///
/// Block `k` holds `(u_k, v_k, Re w_k, Im w_k)`; block 0 holds only
/// `(u_0, v_0)` and its last two rows and columns are zero.
#[derive(Debug, Clone)]
pub struct ReducedGenerator {
    n: usize,
    f0: BlockTridiagonal<4>,
    drive: BlockTridiagonal<4>,
    h1: BlockTridiagonal<4>,
}

impl ReducedGenerator {
    pub fn n_passive(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        4 * self.n + 2
    }

    pub fn f0(&self) -> &BlockTridiagonal<4> {
        &self.f0
    }

    pub fn drive(&self) -> &BlockTridiagonal<4> {
        &self.drive
    }

    pub fn h1(&self) -> &BlockTridiagonal<4> {
        &self.h1
    }

    /// `𝓕₀ − 𝓟 − ζ𝓗₁` in block form.
    pub fn generator(&self, zeta: f64) -> BlockTridiagonal<4> {
        combine(&self.f0, &self.drive, &self.h1, 1.0, zeta)
    }

    /// Applies `𝓕₀ − 𝓟 − ζ𝓗₁` to a state.
    pub fn apply(&self, zeta: f64, state: &DickeReducedState) -> Result<DickeReducedState> {
        if state.n_passive() != self.n {
            return Err(Error::Shape("state and generator have different N".into()));
        }
        let x = to_blocks(state);
        let y = self.generator(zeta).mul_vec(&x);
        Ok(from_blocks(&y))
    }

    /// Dense [`SpectralProblem`] in the flat `4N+2` layout, graded by the
    /// active coherence order (`w` coordinates carry grade 1).
    pub fn spectral_problem(&self) -> Result<SpectralProblem> {
        let dim = self.dim();
        let dense = |bt: &BlockTridiagonal<4>| {
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            for k in 0..=self.n {
                let width = |b: usize| if b == 0 { 2 } else { 4 };
                let mut put = |blk: &Matrix4<f64>, kc: usize| {
                    for i in 0..width(k) {
                        for j in 0..width(kc) {
                            m[(flat_index(k, i), flat_index(kc, j))] = blk[(i, j)];
                        }
                    }
                };
                put(&bt.diag[k], k);
                if k > 0 {
                    put(&bt.lower[k], k - 1);
                }
                if k < self.n {
                    put(&bt.upper[k], k + 1);
                }
            }
            m
        };
        let mut trace = DVector::zeros(dim);
        for k in 0..=self.n {
            trace[flat_index(k, 0)] = 1.0;
        }
        let rho_th = DickeReducedState::thermal(self.n).to_coords();
        let grading = (0..=self.n)
            .flat_map(|k| if k == 0 { vec![0u8, 0] } else { vec![0, 0, 1, 1] })
            .collect();
        SpectralProblem::new(dense(&self.f0), dense(&self.drive), dense(&self.h1), trace, rho_th)?
            .with_grading(grading)
    }
}

fn combine(
    f0: &BlockTridiagonal<4>,
    drive: &BlockTridiagonal<4>,
    h1: &BlockTridiagonal<4>,
    drive_factor: f64,
    zeta: f64,
) -> BlockTridiagonal<4> {
    let mix = |a: &[Matrix4<f64>], b: &[Matrix4<f64>], c: &[Matrix4<f64>]| {
        a.iter().zip(b).zip(c).map(|((x, y), z)| x - y * drive_factor - z * zeta).collect()
    };
    BlockTridiagonal {
        lower: mix(&f0.lower, &drive.lower, &h1.lower),
        diag: mix(&f0.diag, &drive.diag, &h1.diag),
        upper: mix(&f0.upper, &drive.upper, &h1.upper),
    }
}

fn to_blocks(state: &DickeReducedState) -> Vec<Vector4<f64>> {
    (0..state.u.len())
        .map(|k| {
            let (wr, wi) = if k == 0 { (0.0, 0.0) } else { (state.w[k - 1].re, state.w[k - 1].im) };
            Vector4::new(state.u[k], state.v[k], wr, wi)
        })
        .collect()
}

fn from_blocks(x: &[Vector4<f64>]) -> DickeReducedState {
    DickeReducedState {
        u: x.iter().map(|b| b[0]).collect(),
        v: x.iter().map(|b| b[1]).collect(),
        w: x.iter().skip(1).map(|b| C64::new(b[2], b[3])).collect(),
    }
}

/// Matrix units spanning block `k`: `|↓k⟩⟨↓k|`, `|↑k⟩⟨↑k|`,
/// `|↓k⟩⟨↑,k−1|` and its transpose.
fn block_units(k: usize) -> [(State, State); 4] {
    let down = (0, k);
    let up = (1, k);
    let prev = (1, k.saturating_sub(1));
    [(down, down), (up, up), (down, prev), (prev, down)]
}

/// Hermitian operator of local coordinate `j` as weights on [`block_units`].
fn coordinate_weights(j: usize) -> [C64; 4] {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match j {
        0 => [one, o, o, o],
        1 => [-one, one, o, o],
        2 => [o, o, one, one],
        3 => [o, o, i, -i],
        _ => unreachable!("blocks have four coordinates"),
    }
}

/// Reads reduced coordinates `(block, local, value)` off one matrix entry.
fn read_entry(entry: (State, State, C64), out: &mut Vec<(usize, usize, f64)>) -> Result<()> {
    let ((s, k), (s2, k2), val) = entry;
    if (s, k) == (s2, k2) {
        out.push((k, 0, val.re));
        if s == 1 {
            out.push((k, 1, val.re));
        }
    } else if s == 0 && s2 == 1 && k2 + 1 == k {
        out.push((k, 2, val.re));
        out.push((k, 3, val.im));
    } else if !(s == 1 && s2 == 0 && k + 1 == k2) && val.norm() != 0.0 {
        return Err(Error::Precondition(format!(
            "generator leaves the zero-quantum sector: entry ({s},{k}),({s2},{k2})"
        )));
    }
    Ok(())
}

fn assemble_terms(n: usize, terms: &[Term]) -> Result<BlockTridiagonal<4>> {
    let mut bt = BlockTridiagonal::<4>::zeros(n + 1);
    let mut scratch = ColumnScratch::default();
    for kin in 0..=n {
        let [up, diag, low] = assemble_column(n, kin, terms, &mut scratch)?;
        bt.diag[kin] = diag;
        if kin > 0 {
            bt.upper[kin - 1] = up;
        }
        if kin < n {
            bt.lower[kin + 1] = low;
        }
    }
    Ok(bt)
}

#[derive(Default)]
struct ColumnScratch {
    images: [Vec<(State, State, C64)>; 4],
    coords: Vec<(usize, usize, f64)>,
}

/// Column blocks fed by input block `kin`: into `kin - 1`, `kin` and `kin + 1`.
fn assemble_column(
    n: usize,
    kin: usize,
    terms: &[Term],
    scratch: &mut ColumnScratch,
) -> Result<[Matrix4<f64>; 3]> {
    let mut out = [Matrix4::zeros(); 3];
    let units = block_units(kin);
    let used = if kin == 0 { 2 } else { 4 };
    let ColumnScratch { images, coords } = scratch;
    for (image, &(a, b)) in images.iter_mut().zip(&units).take(used) {
        image.clear();
        for t in terms {
            t.apply(n, a, b, C64::new(1.0, 0.0), image);
        }
    }
    for jin in 0..used {
        coords.clear();
        let weights = coordinate_weights(jin);
        for (image, &cw) in images.iter().zip(&weights).take(used) {
            if cw == C64::new(0.0, 0.0) {
                continue;
            }
            for &(a, b, val) in image {
                read_entry((a, b, val * cw), coords)?;
            }
        }
        for &(kout, jout, val) in coords.iter() {
            let slot = if kout == kin {
                1
            } else if kout == kin + 1 {
                2
            } else if kout + 1 == kin {
                0
            } else {
                return Err(Error::Precondition(format!("coupling from block {kin} to block {kout}")));
            };
            out[slot][(jout, jin)] += val;
        }
    }
    Ok(out)
}

/// Builds the reduced generator by applying each Lindblad term to the
/// operator behind every reduced coordinate.
pub fn reduced_generator(params: &ModelParams) -> Result<ReducedGenerator> {
    let (f0, drive, h1) = reduced_terms(params)?;
    let n = params.n_passive;
    Ok(ReducedGenerator {
        n,
        f0: assemble_terms(n, &f0)?,
        drive: assemble_terms(n, &drive)?,
        h1: assemble_terms(n, &h1)?,
    })
}

type TermGroups = (Vec<Term>, Vec<Term>, Vec<Term>);

fn reduced_terms(params: &ModelParams) -> Result<TermGroups> {
    params.validate()?;
    if !params.is_mean_field() {
        return Err(Error::Unsupported("the reduced representation requires unit couplings".into()));
    }
    let i = C64::new(0.0, 1.0);
    let f0 = vec![
        Term::Jump(Monomial::new(Factor::Lower, Factor::Id, 1.0), params.big_gamma1),
        Term::Jump(Monomial::new(Factor::Z, Factor::Id, 1.0), 2.0 * params.big_gamma2),
        Term::Jump(Monomial::new(Factor::Id, Factor::Raise, 1.0), 0.5 * params.gamma1),
        Term::Jump(Monomial::new(Factor::Id, Factor::Lower, 1.0), 0.5 * params.gamma1),
        Term::Jump(Monomial::new(Factor::Id, Factor::Z, 1.0), 2.0 * params.gamma2),
    ];
    let drive = vec![Term::Commutator(
        vec![
            Monomial::new(Factor::Lower, Factor::Raise, params.omega),
            Monomial::new(Factor::Raise, Factor::Lower, params.omega),
        ],
        i,
    )];
    let h1 = vec![Term::Commutator(vec![Monomial::new(Factor::Z, Factor::Id, 1.0)], i)];
    Ok((f0, drive, h1))
}

/// `𝓜(ζ)` from the closed-form sector equations of motion; agrees with
/// [`reduced_generator`] entry by entry but skips the generic term machinery.
///
/// With `P_k = u_k − v_k`, `Q_k = v_k`, `g_k = Ω√λ_k`:
///
/// ```text
/// u̇_k = γ₁/2 (λ_k u_{k−1} − (λ_k + λ_{k+1}) u_k + λ_{k+1} u_{k+1}) − 2g_k Im w_k + 2g_{k+1} Im w_{k+1}
/// v̇_k = −Γ₁ v_k + γ₁/2 (same stencil on v) + 2g_{k+1} Im w_{k+1}
/// ẇ_k = −(Γ − iζ) w_k + γ₁/2 (√(λ_kλ_{k−1}) w_{k−1} + √(λ_{k+1}λ_k) w_{k+1}
///        − ½(λ_{k+1} + 2λ_k + λ_{k−1}) w_k) − i g_k (v_{k−1} + v_k − u_k)
/// ```
fn generator_at(params: &ModelParams) -> Result<BlockTridiagonal<4>> {
    params.validate()?;
    if !params.is_mean_field() {
        return Err(Error::Unsupported("the reduced representation requires unit couplings".into()));
    }
    let n = params.n_passive;
    let half = 0.5 * params.gamma1;
    let dephase = params.big_gamma();
    let zeta = params.zeta;
    let lam = |k: usize| if k == 0 || k > n { 0.0 } else { raise_sq(n, k - 1) };
    let mut lower = Vec::with_capacity(n + 1);
    let mut diag = Vec::with_capacity(n + 1);
    let mut upper = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (lk, lnext) = (lam(k), lam(k + 1));
        let lprev = if k == 0 { 0.0 } else { lam(k - 1) };
        let g = params.omega * lk.sqrt();
        let gnext = params.omega * lnext.sqrt();
        let hop = half * (lk + lnext);

        let mut d = Matrix4::zeros();
        d[(0, 0)] = -hop;
        d[(1, 1)] = -params.big_gamma1 - hop;
        let mut lo = Matrix4::zeros();
        let mut up = Matrix4::zeros();
        if k > 0 {
            let wd = -dephase - 0.5 * half * (lnext + 2.0 * lk + lprev);
            d[(0, 3)] = -2.0 * g;
            d[(2, 2)] = wd;
            d[(2, 3)] = -zeta;
            d[(3, 2)] = zeta;
            d[(3, 3)] = wd;
            d[(3, 0)] = g;
            d[(3, 1)] = -g;
            lo[(0, 0)] = half * lk;
            lo[(1, 1)] = half * lk;
            lo[(3, 1)] = -g;
            if k > 1 {
                let c = half * (lk * lprev).sqrt();
                lo[(2, 2)] = c;
                lo[(3, 3)] = c;
            }
        }
        if k < n {
            up[(0, 0)] = half * lnext;
            up[(1, 1)] = half * lnext;
            up[(0, 3)] = 2.0 * gnext;
            up[(1, 3)] = 2.0 * gnext;
            if k > 0 {
                let c = half * (lnext * lk).sqrt();
                up[(2, 2)] = c;
                up[(3, 3)] = c;
            }
        }
        lower.push(lo);
        diag.push(d);
        upper.push(up);
    }
    Ok(BlockTridiagonal { lower, diag, upper })
}

/// Grade-0 part `(u, v)` of the steady state in `O(N)`; `w` is left empty.
///
/// Solves `(𝓜 + δ e eᵀ) y = e` with `e` the `u_0` coordinate: the solution
/// is proportional to the kernel of `𝓜`, and is then normalized to unit trace.
pub fn solve_rho0z(params: &ModelParams) -> Result<DickeReducedState> {
    let (u, v, _) = solve_full(generator_at(params)?)?;
    Ok(DickeReducedState { u, v, w: Vec::new() })
}

/// Complete steady state from a single block solve, `w` included.
pub fn reduced_steady_state(params: &ModelParams) -> Result<DickeReducedState> {
    let (u, v, w) = solve_full(generator_at(params)?)?;
    Ok(DickeReducedState { u, v, w })
}

fn solve_full(mut m: BlockTridiagonal<4>) -> Result<(Vec<f64>, Vec<f64>, Vec<C64>)> {
    m.diag[0][(2, 2)] = 1.0;
    m.diag[0][(3, 3)] = 1.0;
    let mut y = anchored_kernel(&mut m, 0)?;
    // The anchor must carry weight in the kernel; re-anchor at the peak otherwise.
    let (peak, top) = y.iter().map(|b| b[0].abs()).enumerate().fold((0, 0.0), |acc, (k, x)| {
        if x > acc.1 {
            (k, x)
        } else {
            acc
        }
    });
    if y[0][0].abs() < 1e-3 * top {
        y = anchored_kernel(&mut m, peak)?;
    }
    let total: f64 = y.iter().map(|b| b[0]).sum();
    if !(total.abs() > 0.0) || !total.is_finite() {
        return Err(Error::Singular { rcond: 0.0 });
    }
    let state = from_blocks(&y.iter().map(|b| b / total).collect::<Vec<_>>());
    Ok((state.u, state.v, state.w))
}

/// Solves `(𝓜 + δ e eᵀ) y = e` with `e` the `u` coordinate of block `anchor`;
/// `y` is then proportional to the kernel of `𝓜`.
fn anchored_kernel(m: &mut BlockTridiagonal<4>, anchor: usize) -> Result<Vec<Vector4<f64>>> {
    let scale = m.diag.iter().fold(0.0_f64, |acc, b| acc.max(b.amax())).max(f64::MIN_POSITIVE);
    m.diag[anchor][(0, 0)] += scale;
    let mut rhs = vec![Vector4::zeros(); m.diag.len()];
    rhs[anchor][0] = 1.0;
    let y = m.solve(&rhs);
    m.diag[anchor][(0, 0)] -= scale;
    y
}

/// Fills `w` from `(u, v)` through `ρ⁽¹⁾ = 𝓖₀𝓟ρ⁽⁰⁾`, a 2×2-block tridiagonal solve.
pub fn rho1_from_rho0(params: &ModelParams, state: &DickeReducedState) -> Result<DickeReducedState> {
    let gen = reduced_generator(params)?;
    rho1_with(&gen, params.zeta, state)
}

fn rho1_with(gen: &ReducedGenerator, zeta: f64, state: &DickeReducedState) -> Result<DickeReducedState> {
    let n = gen.n;
    if state.u.len() != n + 1 || state.v.len() != n + 1 {
        return Err(Error::Shape("state and parameters have different N".into()));
    }
    let a0 = combine(&gen.f0, &gen.drive, &gen.h1, 0.0, zeta);
    let sub = |m: &Matrix4<f64>| Matrix2::new(m[(2, 2)], m[(2, 3)], m[(3, 2)], m[(3, 3)]);
    let mut bt = BlockTridiagonal::<2>::zeros(n);
    for k in 1..=n {
        bt.diag[k - 1] = sub(&a0.diag[k]);
        if k > 1 {
            bt.lower[k - 1] = sub(&a0.lower[k]);
        }
        if k < n {
            bt.upper[k - 1] = sub(&a0.upper[k]);
        }
    }
    let grade0: Vec<Vector4<f64>> =
        (0..=n).map(|k| Vector4::new(state.u[k], state.v[k], 0.0, 0.0)).collect();
    let pr = gen.drive.mul_vec(&grade0);
    let rhs: Vec<Vector2<f64>> = (1..=n).map(|k| Vector2::new(pr[k][2], pr[k][3])).collect();
    let w = bt.solve(&rhs)?;
    Ok(DickeReducedState {
        u: state.u.clone(),
        v: state.v.clone(),
        w: w.iter().map(|b| C64::new(b[0], b[1])).collect(),
    })
}

/// Inputs of the effective flip-flop coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplingParams {
    pub omega1: f64,
    pub avg_coupling: f64,
    pub omega_i: f64,
    pub delta: f64,
    /// `(β, ω_S)` for the thermal polarization diagnostics.
    pub beta_thermal: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveCoupling {
    pub omega: f64,
    pub zeta: f64,
    pub active_polarization: Option<f64>,
    pub passive_polarization: Option<f64>,
}

/// `Ω = ω₁A/(4ω_I)` and `ζ = Δ − ω_I`.
pub fn effective_coupling(p: &EffectiveCouplingParams) -> Result<EffectiveCoupling> {
    if p.omega_i == 0.0 || !p.omega_i.is_finite() {
        return Err(Error::Validation(format!("passive frequency must be nonzero, got {}", p.omega_i)));
    }
    let (ps, pi) = match p.beta_thermal {
        Some((beta, omega_s)) => (Some((0.5 * beta * omega_s).tanh()), Some((0.5 * beta * p.omega_i).tanh())),
        None => (None, None),
    };
    Ok(EffectiveCoupling {
        omega: p.omega1 * p.avg_coupling / (4.0 * p.omega_i),
        zeta: p.delta - p.omega_i,
        active_polarization: ps,
        passive_polarization: pi,
    })
}
