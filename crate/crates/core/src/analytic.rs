//! Closed-form results for the unit-coupling ensemble.
//!
//! All population formulas are evaluated from logarithms with a common shift,
//! so they stay finite for millions of passive spins.

use rayon::prelude::*;
use serde::Serialize;

use crate::dicke::{DickeReducedState, ModelParams, Observables};
use crate::error::{Error, Result};
use crate::green::{sort_poles, GreenKind, PoleSet};
use crate::liouops::C64;

/// Passive populations of the steady state for fast active relaxation; `v = 0`, `w` empty.
pub fn rho0_analytic(params: &ModelParams) -> Result<DickeReducedState> {
    params.validate()?;
    let eta = params.eta();
    if !(eta > 0.0) {
        return Err(Error::Degenerate("saturation is zero; the steady state is thermal".into()));
    }
    let n = params.n_passive;
    let l = eta.ln_1p();
    // u_k = η (1+η)^{-(k+1)} / (1 − (1+η)^{-(N+1)})
    let denom = -(-(n as f64 + 1.0) * l).exp_m1();
    let u = (0..=n).map(|k| eta * (-(k as f64 + 1.0) * l).exp() / denom).collect();
    Ok(DickeReducedState { u, v: vec![0.0; n + 1], w: Vec::new() })
}

/// [`rho0_analytic`], or the thermal state when `η = 0`; the flag is set in
/// the thermal case.
pub fn rho0_or_thermal(params: &ModelParams) -> Result<(DickeReducedState, bool)> {
    params.validate()?;
    if params.eta() == 0.0 {
        return Ok((DickeReducedState::thermal(params.n_passive), true));
    }
    Ok((rho0_analytic(params)?, false))
}

/// Active-passive coherences `w_k = iΩ/(Γ − iζ) √((N−k+1)k) u_k`, `k = 1..=N`.
pub fn rho_plus_analytic(params: &ModelParams) -> Result<Vec<C64>> {
    let state = rho0_analytic(params)?;
    let n = params.n_passive;
    let pref = C64::new(0.0, params.omega) / C64::new(params.big_gamma(), -params.zeta);
    Ok((1..=n)
        .map(|k| pref * (((n - k + 1) as f64) * k as f64).sqrt() * state.u[k])
        .collect())
}

/// Poles of the driven Green function in the fast-relaxation limit:
/// `±iΓ` and `±iΓ √(1 + η₀/2 − i(η₀/2) cot(πm/(N+1)))`, `m = 1..=N`.
pub fn poles_analytic(params: &ModelParams) -> Result<PoleSet> {
    params.validate()?;
    let n = params.n_passive;
    let g = params.big_gamma();
    let half = 0.5 * params.eta0();
    let ig = C64::new(0.0, g);
    let mut poles = vec![ig, -ig];
    // m and N+1−m give conjugate pairs of each other; build them together
    for m in 1..=n / 2 {
        let cot = 1.0 / (std::f64::consts::PI * m as f64 / (n as f64 + 1.0)).tan();
        let z = ig * C64::new(1.0 + half, -half * cot).sqrt();
        poles.extend([z, -z, z.conj(), -z.conj()]);
    }
    if n % 2 == 1 {
        let z = ig * (1.0 + half).sqrt();
        poles.extend([z, -z]);
    }
    sort_poles(&mut poles);
    Ok(PoleSet { poles, residues: None, kind: GreenKind::Driven })
}

/// `Γ √(η₀(N+1)/2π)`, the large-`N` outermost pole modulus.
pub fn spectral_width_estimate(params: &ModelParams) -> f64 {
    params.big_gamma() * (params.eta0() * (params.n_passive as f64 + 1.0) / (2.0 * std::f64::consts::PI)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousMoments {
    pub iz: f64,
    pub iz2: f64,
    pub lambda: f64,
}

/// Continuum approximation of `⟨I_z⟩` and `⟨I_z²⟩` from the populations.
pub fn moments_continuous(params: &ModelParams) -> Result<ContinuousMoments> {
    params.validate()?;
    let lambda = params.lambda();
    let (m1, m2) = normalized_moments(lambda);
    let n = params.n_passive as f64;
    Ok(ContinuousMoments { iz: 0.5 * n * m1, iz2: 0.25 * n * n * m2, lambda })
}

/// `(1/λ − coth λ, 1 + 2/λ² − 2 coth(λ)/λ)`.
pub fn normalized_moments(lambda: f64) -> (f64, f64) {
    let x = lambda;
    if x.abs() < 1e-4 {
        let x2 = x * x;
        (-x / 3.0 + x * x2 / 45.0, 1.0 / 3.0 + 2.0 * x2 / 45.0 - 4.0 * x2 * x2 / 945.0)
    } else if x > 30.0 {
        (1.0 / x - 1.0, 1.0 + 2.0 / (x * x) - 2.0 / x)
    } else {
        let coth = 1.0 / x.tanh();
        (1.0 / x - coth, 1.0 + 2.0 / (x * x) - 2.0 * coth / x)
    }
}

/// Named columns over a one-dimensional grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub grid_name: String,
    pub grid: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }

    /// Index and value of the largest entry of a column.
    pub fn argmax(&self, name: &str) -> Option<(usize, f64)> {
        self.column(name)?
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Total passive polarization magnitude `−ξ⟨I_z⟩` at `ζ = 0` with the active
/// dephasing `Γ₂ = Γ₂⁰ ξ²`.
pub fn concentration_sweep(params: &ModelParams, xi_grid: &[f64], big_gamma2_ref: f64) -> Result<SweepResult> {
    if xi_grid.is_empty() {
        return Err(Error::Validation("concentration grid is empty".into()));
    }
    if xi_grid.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Validation("concentrations must be positive".into()));
    }
    let rows: Vec<ContinuousMoments> = xi_grid
        .par_iter()
        .map(|&xi| {
            let p = ModelParams { big_gamma2: big_gamma2_ref * xi * xi, zeta: 0.0, ..params.clone() };
            moments_continuous(&p)
        })
        .collect::<Result<_>>()?;
    let n = params.n_passive as f64;
    let iz: Vec<f64> = rows.iter().map(|m| m.iz).collect();
    Ok(SweepResult {
        grid_name: "xi".into(),
        grid: xi_grid.to_vec(),
        columns: vec![
            ("total_polarization".into(), xi_grid.iter().zip(&iz).map(|(x, i)| -x * i).collect()),
            ("iz".into(), iz.clone()),
            ("iz_norm".into(), iz.iter().map(|i| 2.0 * i / n).collect()),
        ],
    })
}

/// Steady state for a saturating drive as a function of `γ = Γ₁/γ₁`.
///
/// The active excited populations obey
/// `(2γ + λ_n + λ_{n+1}) v_n = (λ_n + λ_{n+1}) v_{n−1}` with
/// `λ_n = (N/2 − n + 1)(N/2 + n)`; the summed populations are
/// `u_n = v_n + v_{n−1}` above the bottom level and `u = (2γ/N + 2) v` on it.
pub fn saturated_state(n: usize, gamma: f64) -> Result<DickeReducedState> {
    if n < 2 {
        return Err(Error::Validation("the saturated recurrence needs N >= 2".into()));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Validation(format!("relaxation ratio must be positive, got {gamma}")));
    }
    // λ at occupation index k
    let lam = |k: usize| ((n + 1 - k) as f64) * k as f64;
    let mut logv = Vec::with_capacity(n + 1);
    logv.push(0.0_f64);
    for k in 1..=n {
        let s = lam(k) + lam(k + 1);
        logv.push(logv[k - 1] + s.ln() - (2.0 * gamma + s).ln());
    }
    let top = logv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v: Vec<f64> = logv.iter().map(|l| (l - top).exp()).collect();
    let mut u = Vec::with_capacity(n + 1);
    u.push((2.0 * gamma / n as f64 + 2.0) * v[0]);
    for k in 1..=n {
        u.push(v[k] + v[k - 1]);
    }
    let total: f64 = u.iter().sum();
    Ok(DickeReducedState {
        u: u.iter().map(|x| x / total).collect(),
        v: v.iter().map(|x| x / total).collect(),
        w: Vec::new(),
    })
}

/// [`saturated_state`] observables over a grid of `γ`.
pub fn gamma_recurrence(n: usize, gammas: &[f64]) -> Result<SweepResult> {
    if gammas.is_empty() {
        return Err(Error::Validation("relaxation grid is empty".into()));
    }
    let obs: Vec<Observables> = gammas
        .par_iter()
        .map(|&g| saturated_state(n, g).map(|s| s.observables()))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        grid_name: "gamma".into(),
        grid: gammas.to_vec(),
        columns: vec![
            ("sz".into(), obs.iter().map(|o| o.sz).collect()),
            ("iz_norm".into(), obs.iter().map(|o| o.iz_norm()).collect()),
            ("iz".into(), obs.iter().map(|o| o.iz).collect()),
        ],
    })
}
