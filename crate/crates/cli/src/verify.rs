use clap::ValueEnum;
use lindblad_green::analytic::{moments_continuous, poles_analytic, rho0_analytic};
use lindblad_green::dicke::{
    build_ensemble_model, density_observables, ensemble_charges, ensemble_problem, reduced_generator,
    reduced_steady_state, solve_rho0z, ModelParams, Representation,
};
use lindblad_green::green::{DysonProbe, GreenKind, SteadyMethod};
use lindblad_green::liouops::{build_generator, C64};
use lindblad_green::oracle::{full_ensemble_crosscheck, nullspace_steady_state_in, pencil_poles_dense, OracleReport, CROSSCHECK_MAX_PASSIVE};
use lindblad_green::panels::{large_gamma, panel_a, strong_relaxation};
use lindblad_green::Result;
use serde::Serialize;

use crate::commands::PENCIL_MAX_PASSIVE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Green,
    Dicke,
    Analytic,
    All,
}

#[derive(Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub passed: bool,
    pub reports: Vec<OracleReport>,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

/// Model used when no configuration is given: panel (a) rates at size `n`.
pub fn default_params(n: usize) -> ModelParams {
    panel_a(n)
}

pub fn run(suite: Suite, params: Option<&ModelParams>, n: usize) -> Result<VerifyReport> {
    let chosen = |fallback: fn(usize) -> ModelParams| match params {
        Some(p) => ModelParams { n_passive: n, ..p.clone() },
        None => fallback(n),
    };
    let mut suites = Vec::new();
    if matches!(suite, Suite::Green | Suite::All) {
        suites.push(finish("green", green_suite(&chosen(default_params))?));
    }
    if matches!(suite, Suite::Dicke | Suite::All) {
        suites.push(finish("dicke", dicke_suite(&chosen(default_params))?));
    }
    if matches!(suite, Suite::Analytic | Suite::All) {
        suites.push(finish(
            "analytic",
            analytic_suite(&chosen(strong_relaxation), &chosen(default_params), &chosen(large_gamma))?,
        ));
    }
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { n, passed, suites })
}

fn finish(suite: &'static str, reports: Vec<OracleReport>) -> SuiteReport {
    SuiteReport { suite, passed: reports.iter().all(OracleReport::passed), reports }
}

fn deviation(name: String, value: f64, tol: f64) -> OracleReport {
    OracleReport::new(name, value, 0.0, tol)
}

/// Steady-state routes against the sector null space, the Dyson identity and
/// the commutation relations, at `ζ ∈ {0, Γ, −3Γ}`.
fn green_suite(p: &ModelParams) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let model = build_ensemble_model(p, Representation::Dicke)?;
    let charges = ensemble_charges(p.n_passive, Representation::Dicke);
    let problem = ensemble_problem(p, Representation::Dicke)?;
    let gamma = p.big_gamma();
    for zeta in [0.0, gamma, -3.0 * gamma] {
        let kernel = nullspace_steady_state_in(&build_generator(&model, zeta), Some(&charges))?;
        for (name, method) in
            [("direct", SteadyMethod::Direct), ("dyson", SteadyMethod::Dyson), ("polynomial", SteadyMethod::Polynomial)]
        {
            let (rho, _) = problem.steady_state(zeta, method)?;
            let sup = (rho.entries() - kernel.rho.entries()).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
            out.push(deviation(format!("steady_state_{name}_sup_deviation@zeta={zeta:?}"), sup, 1e-10).with_gap(kernel.gap));
        }
        let residual = problem.problem.dyson_residual(zeta, DysonProbe::Basis)?;
        out.push(deviation(format!("dyson_residual@zeta={zeta:?}"), residual, 1e-10));
        let comm = problem.problem.commutation_check(zeta)?;
        out.push(deviation(format!("inverse_defect@zeta={zeta:?}"), comm.inverse_defect, 1e-10));
        out.push(deviation(format!("commutator_defect@zeta={zeta:?}"), comm.commutator_defect, 1e-10));
    }
    Ok(out)
}

/// Banded path against the dense sector, the full ensemble for small `N`,
/// and the dense pencil against the Hessenberg pole solver.
fn dicke_suite(p: &ModelParams) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let banded = reduced_steady_state(p)?.observables();
    let problem = ensemble_problem(p, Representation::Dicke)?;
    let (rho, _) = problem.steady_state(p.zeta, SteadyMethod::Direct)?;
    let dense = density_observables(&rho, p.n_passive, Representation::Dicke)?;
    out.push(OracleReport::new("banded_iz", banded.iz, dense.iz, 1e-10));
    out.push(OracleReport::new("banded_iz2", banded.iz2, dense.iz2, 1e-10));
    out.push(OracleReport::new("banded_sz", banded.sz, dense.sz, 1e-10));
    if p.n_passive <= CROSSCHECK_MAX_PASSIVE {
        for r in full_ensemble_crosscheck(p)? {
            out.push(OracleReport { quantity: format!("full_ensemble_{}", r.quantity), ..r });
        }
    }
    if p.n_passive <= PENCIL_MAX_PASSIVE {
        let model = build_ensemble_model(p, Representation::Dicke)?;
        let charges = ensemble_charges(p.n_passive, Representation::Dicke);
        let pencil = pencil_poles_dense(&model, Some(&charges), GreenKind::Driven)?;
        let reference = reduced_generator(p)?.spectral_problem()?.compute_poles(GreenKind::Driven)?;
        out.push(OracleReport::new("pole_count", pencil.len() as f64, reference.len() as f64, 0.0));
        out.push(deviation("pole_relative_deviation".into(), nearest_deviation(&pencil.poles, &reference.poles), 1e-6));
    }
    Ok(out)
}

fn nearest_deviation(found: &[C64], reference: &[C64]) -> f64 {
    found
        .iter()
        .map(|z| reference.iter().map(|w| (z - w).norm() / w.norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Closed forms against the banded solver, the discrete sums and the pencil.
fn analytic_suite(strong: &ModelParams, panel: &ModelParams, limit: &ModelParams) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let solved = solve_rho0z(strong)?;
    let exact = rho0_analytic(strong)?;
    let du = solved.u.iter().zip(&exact.u).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let vnorm = solved.v.iter().map(|x| x * x).sum::<f64>().sqrt();
    out.push(deviation("populations_max_deviation".into(), du, 1e-6));
    out.push(deviation("excited_populations_norm".into(), vnorm, 1e-6));

    let discrete = rho0_analytic(panel)?.observables();
    let cont = moments_continuous(panel)?;
    out.push(deviation("continuous_iz_relative".into(), ((cont.iz - discrete.iz) / discrete.iz).abs(), 1e-3));
    out.push(deviation("continuous_iz2_relative".into(), ((cont.iz2 - discrete.iz2) / discrete.iz2).abs(), 1e-3));

    let poles = poles_analytic(panel)?;
    out.push(OracleReport::new("pole_count", poles.len() as f64, 2.0 * (panel.n_passive as f64 + 1.0), 0.0));
    out.push(OracleReport::new("poles_conjugate_closed", f64::from(u8::from(poles.is_conjugate_closed())), 1.0, 0.0));

    if limit.n_passive <= PENCIL_MAX_PASSIVE {
        let model = build_ensemble_model(limit, Representation::Dicke)?;
        let charges = ensemble_charges(limit.n_passive, Representation::Dicke);
        let pencil = pencil_poles_dense(&model, Some(&charges), GreenKind::Driven)?;
        let exact = poles_analytic(limit)?;
        out.push(deviation("pencil_vs_closed_form_relative".into(), nearest_deviation(&pencil.poles, &exact.poles), 1e-6));
        out.push(OracleReport::new("pencil_pole_count", pencil.len() as f64, exact.len() as f64, 0.0));
    }
    Ok(out)
}
