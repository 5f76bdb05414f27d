//! Numeric tolerances shared by every module.
//!
//! One record holds all thresholds. It is read through [`policy`]; a binary
//! may install overrides once at startup with [`set_policy`].

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPolicy {
    /// Relative Hermiticity tolerance, `max|A - A^†| <= tol * max|A|`.
    pub hermiticity_rel: f64,
    /// Absolute tolerance on traces of density-like operators.
    pub trace_abs: f64,
    /// Bound on `‖D ρ_th‖` accepted by the split diagnostics.
    pub dissipator_thermal: f64,
    /// Bound on `‖[H0, ρ_th]‖`, `‖[H1, ρ_th]‖`.
    pub commutator_thermal: f64,
    /// Reciprocal condition estimate below which a factorization counts as singular.
    pub singular_rcond: f64,
    /// Relative cutoff on shift-invert eigenvalues `|θ| > cutoff * ‖K‖`.
    pub pencil_rank_cutoff: f64,
    /// Minimum ratio between the two smallest singular values for a unique kernel.
    pub kernel_gap: f64,
    /// Absolute floor on the smallest eigenvalue of a steady state.
    pub positivity_abs: f64,
}

impl NumericPolicy {
    pub const DEFAULT: NumericPolicy = NumericPolicy {
        hermiticity_rel: 1e-12,
        trace_abs: 1e-12,
        dissipator_thermal: 1e-10,
        commutator_thermal: 1e-12,
        singular_rcond: 1e-15,
        pencil_rank_cutoff: 1e-10,
        kernel_gap: 1e6,
        positivity_abs: 1e-9,
    };
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::DEFAULT
    }
}

static POLICY: OnceLock<NumericPolicy> = OnceLock::new();

/// The active policy (defaults unless [`set_policy`] ran first).
pub fn policy() -> &'static NumericPolicy {
    POLICY.get_or_init(NumericPolicy::default)
}

/// Installs a policy. Returns `false` if one was already in use.
pub fn set_policy(p: NumericPolicy) -> bool {
    POLICY.set(p).is_ok()
}
