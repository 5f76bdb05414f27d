//! Parameter presets for the four panels emitted by the `figure` command.
//!
//! Panels (a) and (b) fix only `N`, `η₀` and `Γ`; the individual rates below
//! are one consistent split of `Γ` with the drive set from `η₀`. Panel (c)
//! leaves `Γ₁` open; it is set small enough that `Γ₁/2` is negligible next to
//! `γ₂`.

use crate::dicke::ModelParams;

/// Passive ensemble size of panels (a) and (b).
pub const PANEL_AB_N: usize = 1000;
pub const PANEL_AB_ETA0: f64 = 0.4;
pub const PANEL_AB_BIG_GAMMA: f64 = 1e5;

pub const PANEL_C_OMEGA: f64 = 10.0;
pub const PANEL_C_GAMMA1: f64 = 1e-2;
pub const PANEL_C_GAMMA2: f64 = 1e3;
/// Active dephasing at unit relative concentration, `Γ₂ = Γ₂⁰ξ²`.
pub const PANEL_C_BIG_GAMMA2_REF: f64 = 1e6;
/// Not fixed by the panel; `Γ₁/2 = 10` is 1% of `γ₂`.
pub const PANEL_C_BIG_GAMMA1: f64 = 20.0;
pub const PANEL_C_SIZES: [usize; 3] = [1000, 10_000, 100_000];

pub const PANEL_D_N: usize = 1_000_000;

/// Panel (a)/(b) rates for `n` passive spins: `γ₁ = 10⁻²`, `Γ₁ = 2·10³`,
/// `γ₂ = 10³`, `Γ₂ = Γ − γ₂ − Γ₁/2`, `Ω` from `η₀ = 4Ω²/(γ₁Γ)`.
pub fn panel_a(n: usize) -> ModelParams {
    let gamma1 = 1e-2;
    let big_gamma1 = 2e3;
    let gamma2 = 1e3;
    ModelParams {
        n_passive: n,
        omega: (PANEL_AB_ETA0 * gamma1 * PANEL_AB_BIG_GAMMA / 4.0).sqrt(),
        gamma1,
        gamma2,
        big_gamma1,
        big_gamma2: PANEL_AB_BIG_GAMMA - gamma2 - 0.5 * big_gamma1,
        zeta: 0.0,
        couplings: None,
    }
}

/// `ζ` grid of panel (a): `[-3·10⁶, 3·10⁶]` rad/s in 601 points.
pub fn panel_a_grid() -> Vec<f64> {
    linear_grid(-3e6, 3e6, 601)
}

/// Panel (c) rates at unit concentration; the sweep rescales `Γ₂`.
pub fn panel_c(n: usize) -> ModelParams {
    ModelParams {
        n_passive: n,
        omega: PANEL_C_OMEGA,
        gamma1: PANEL_C_GAMMA1,
        gamma2: PANEL_C_GAMMA2,
        big_gamma1: PANEL_C_BIG_GAMMA1,
        big_gamma2: PANEL_C_BIG_GAMMA2_REF,
        zeta: 0.0,
        couplings: None,
    }
}

/// `ξ ∈ [10⁻², 10]`, 301 logarithmic points.
pub fn panel_c_grid() -> Vec<f64> {
    log_grid(1e-2, 10.0, 301)
}

/// `γ ∈ [10², 10¹⁰]`, 81 logarithmic points around the crossover at `γ = N`.
pub fn panel_d_grid() -> Vec<f64> {
    log_grid(1e2, 1e10, 81)
}

/// `γ = 10⁶` with a weak drive (`η₀ = 10⁻²`), where the banded solution
/// approaches the closed-form populations.
pub fn strong_relaxation(n: usize) -> ModelParams {
    let gamma1: f64 = 1e-3;
    let big_gamma1 = 1e3;
    let gamma2 = 1e3;
    let big_gamma2 = 1e6;
    let big_gamma = gamma2 + big_gamma2 + 0.5 * big_gamma1;
    ModelParams {
        n_passive: n,
        omega: (0.01 * gamma1 * big_gamma / 4.0).sqrt(),
        gamma1,
        gamma2,
        big_gamma1,
        big_gamma2,
        zeta: 0.0,
        couplings: None,
    }
}

/// Panel (a) with `γ₁ = 10⁻⁶` (`γ = 2·10⁹`) at the same `Γ` and `η₀`.
pub fn large_gamma(n: usize) -> ModelParams {
    let mut p = panel_a(n);
    p.gamma1 = 1e-6;
    p.omega = (PANEL_AB_ETA0 * p.gamma1 * PANEL_AB_BIG_GAMMA / 4.0).sqrt();
    p
}

/// `count` evenly spaced points from `min` to `max` inclusive.
pub fn linear_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// `count` logarithmically spaced points from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    let (a, b) = (min.ln(), max.ln());
    linear_grid(a, b, count).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_a_matches_its_caption_values() {
        let p = panel_a(PANEL_AB_N);
        assert!((p.big_gamma() - PANEL_AB_BIG_GAMMA).abs() < 1e-9);
        assert!((p.eta0() - PANEL_AB_ETA0).abs() < 1e-12);
    }

    #[test]
    fn grids_hit_their_end_points() {
        let g = log_grid(1e-2, 10.0, 4);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[3] - 10.0).abs() < 1e-12);
        assert!((g[1] - 0.1).abs() < 1e-14);
        let l = panel_a_grid();
        assert_eq!(l.len(), 601);
        assert_eq!(l[300], 0.0);
        assert_eq!(linear_grid(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn validation_presets_hit_their_relaxation_ratio() {
        assert!((strong_relaxation(3).gamma_ratio() / 1e6 - 1.0).abs() < 1e-12);
        let p = large_gamma(3);
        assert!((p.gamma_ratio() / 2e9 - 1.0).abs() < 1e-12);
        assert!((p.eta0() - PANEL_AB_ETA0).abs() < 1e-12);
    }
}
