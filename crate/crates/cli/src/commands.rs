use clap::ValueEnum;
use lindblad_green::analytic::{concentration_sweep, gamma_recurrence, poles_analytic, rho0_or_thermal};
use lindblad_green::dicke::{
    build_ensemble_model, density_observables, ensemble_charges, reduced_steady_state, ModelParams, Observables,
    Representation, FULL_MAX_PASSIVE,
};
use lindblad_green::green::{GreenKind, PoleSet};
use lindblad_green::liouops::build_generator;
use lindblad_green::oracle::{conserved_steady_state, pencil_poles_dense, symmetric_conserved_steady_state};
use rayon::prelude::*;
use serde::Serialize;

use crate::grid::Span;
use crate::output::{config_hash, fmt_f64, Csv};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    Analytic,
    Reduced,
    Full,
}

impl SweepMethod {
    fn name(self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::Reduced => "reduced",
            Self::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PoleMethod {
    Analytic,
    Pencil,
}

/// Largest `N` accepted by the dense pencil.
pub const PENCIL_MAX_PASSIVE: usize = 20;

/// Largest `N` for the dense full-ensemble path with non-uniform couplings.
pub const FULL_DENSE_MAX_PASSIVE: usize = 5;

/// Steady state of the `2^{N+1}`-dimensional ensemble reached from the
/// thermal state, which mixes every total-spin sector.
fn full_observables(p: &ModelParams) -> lindblad_green::Result<Observables> {
    let model = build_ensemble_model(p, Representation::Full)?;
    let state = if p.is_mean_field() {
        symmetric_conserved_steady_state(p, model.rho_th())?
    } else {
        let charges = ensemble_charges(p.n_passive, Representation::Full);
        conserved_steady_state(&build_generator(&model, p.zeta), model.rho_th(), Some(&charges))?
    };
    density_observables(&state.rho, p.n_passive, Representation::Full)
}

pub fn sweep_rows(params: &ModelParams, method: SweepMethod, grid: &[f64]) -> Result<Vec<[f64; 4]>, CliError> {
    if method == SweepMethod::Full && params.n_passive > FULL_MAX_PASSIVE {
        return Err(CliError::Usage(format!(
            "method full is limited to N <= {FULL_MAX_PASSIVE}, got N = {}",
            params.n_passive
        )));
    }
    if method == SweepMethod::Full && !params.is_mean_field() && params.n_passive > FULL_DENSE_MAX_PASSIVE {
        return Err(CliError::Usage(format!(
            "method full with non-uniform couplings is limited to N <= {FULL_DENSE_MAX_PASSIVE}"
        )));
    }
    grid.par_iter()
        .map(|&zeta| {
            let p = params.with_zeta(zeta);
            let obs = match method {
                SweepMethod::Analytic => rho0_or_thermal(&p).map(|(s, _)| s.observables()),
                SweepMethod::Reduced => reduced_steady_state(&p).map(|s| s.observables()),
                SweepMethod::Full => full_observables(&p),
            }
            .map_err(|e| CliError::Runtime(format!("zeta = {zeta}: {e}")))?;
            Ok([zeta, obs.iz_norm(), obs.iz2_norm(), obs.sz])
        })
        .collect()
}

#[derive(Serialize)]
struct SweepOptions {
    method: SweepMethod,
    zeta_span: Span,
}

pub fn sweep(command: &str, params: &ModelParams, method: SweepMethod, span: Span) -> Result<String, CliError> {
    let rows = sweep_rows(params, method, &span.points())?;
    let hash = config_hash(command, params, &SweepOptions { method, zeta_span: span });
    let header = ["zeta_rad_s", "iz_norm", "iz2_norm", "sz"].map(String::from);
    let mut csv = Csv::new(&hash, command, method.name(), &header);
    for r in rows {
        csv.row(r.map(fmt_f64));
    }
    Ok(csv.into_string())
}

/// Pole rows `(re, im, pair)` with each upper-half-plane pole followed by its conjugate.
pub fn pole_rows(set: &PoleSet) -> Result<Vec<(f64, f64, usize)>, CliError> {
    let mut rows = Vec::with_capacity(set.len());
    let mut upper: Vec<_> = set.poles.iter().filter(|z| z.im > 0.0).collect();
    upper.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    for (pair, z) in upper.into_iter().enumerate() {
        if !set.poles.contains(&z.conj()) {
            return Err(CliError::Runtime(format!("pole {z} has no conjugate partner")));
        }
        rows.push((z.re, z.im, pair));
        rows.push((z.re, -z.im, pair));
    }
    if rows.len() != set.len() {
        return Err(CliError::Runtime("pole set is not closed under conjugation".into()));
    }
    Ok(rows)
}

pub fn poles(command: &str, params: &ModelParams, method: PoleMethod) -> Result<String, CliError> {
    let set = match method {
        PoleMethod::Analytic => poles_analytic(params),
        PoleMethod::Pencil => {
            if params.n_passive > PENCIL_MAX_PASSIVE {
                return Err(CliError::Usage(format!(
                    "method pencil is limited to N <= {PENCIL_MAX_PASSIVE}, got N = {}",
                    params.n_passive
                )));
            }
            build_ensemble_model(params, Representation::Dicke).and_then(|m| {
                pencil_poles_dense(&m, Some(&ensemble_charges(params.n_passive, Representation::Dicke)), GreenKind::Driven)
            })
        }
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let hash = config_hash(command, params, &method);
    let name = match method {
        PoleMethod::Analytic => "analytic",
        PoleMethod::Pencil => "pencil",
    };
    let header = ["re_zeta_rad_s", "im_zeta_rad_s", "pair_index"].map(String::from);
    let mut csv = Csv::new(&hash, command, name, &header);
    for (re, im, pair) in pole_rows(&set)? {
        csv.row([fmt_f64(re), fmt_f64(im), pair.to_string()]);
    }
    Ok(csv.into_string())
}

#[derive(Serialize)]
struct ConcentrationOptions<'a> {
    sizes: &'a [usize],
    xi_span: Span,
    big_gamma2_ref: f64,
}

/// Panel (c): `−ξ⟨I_z⟩` and `2⟨I_z⟩/N` over `ξ`, one column pair per size.
pub fn concentration(
    command: &str,
    base: &ModelParams,
    sizes: &[usize],
    span: Span,
    big_gamma2_ref: f64,
) -> Result<String, CliError> {
    if !(big_gamma2_ref > 0.0) || !big_gamma2_ref.is_finite() {
        return Err(CliError::Usage("reference active dephasing must be positive".into()));
    }
    let grid = span.points();
    let sweeps = sizes
        .iter()
        .map(|&n| {
            let p = ModelParams { n_passive: n, couplings: None, ..base.clone() };
            concentration_sweep(&p, &grid, big_gamma2_ref).map_err(|e| CliError::Runtime(format!("N = {n}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hash = config_hash(command, base, &ConcentrationOptions { sizes, xi_span: span, big_gamma2_ref });
    let mut header = vec!["xi".to_string()];
    for n in sizes {
        header.push(format!("total_polarization_n{n}"));
        header.push(format!("iz_norm_n{n}"));
    }
    let mut csv = Csv::new(&hash, command, "analytic", &header);
    for (i, xi) in grid.iter().enumerate() {
        let mut fields = vec![fmt_f64(*xi)];
        for s in &sweeps {
            fields.push(fmt_f64(s.column("total_polarization").expect("column")[i]));
            fields.push(fmt_f64(s.column("iz_norm").expect("column")[i]));
        }
        csv.row(fields);
    }
    Ok(csv.into_string())
}

#[derive(Serialize)]
struct RelaxationOptions {
    n: usize,
    gamma_span: Span,
}

/// Panel (d): saturated-limit observables over the relaxation ratio `γ`.
pub fn relaxation(command: &str, base: &ModelParams, n: usize, span: Span) -> Result<String, CliError> {
    let sweep = gamma_recurrence(n, &span.points()).map_err(|e| CliError::Runtime(e.to_string()))?;
    let hash = config_hash(command, base, &RelaxationOptions { n, gamma_span: span });
    let header = ["gamma", "sz", "iz_norm"].map(String::from);
    let mut csv = Csv::new(&hash, command, "recurrence", &header);
    let (sz, iz) = (sweep.column("sz").expect("column"), sweep.column("iz_norm").expect("column"));
    for ((g, s), i) in sweep.grid.iter().zip(sz).zip(iz) {
        csv.row([fmt_f64(*g), fmt_f64(*s), fmt_f64(*i)]);
    }
    Ok(csv.into_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use lindblad_green::panels::panel_a;

    #[test]
    fn pole_rows_pair_conjugates() {
        let set = poles_analytic(&panel_a(3)).unwrap();
        let rows = pole_rows(&set).unwrap();
        assert_eq!(rows.len(), 8);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].0, pair[1].0);
            assert_eq!(pair[0].1, -pair[1].1);
            assert_eq!(pair[0].2, pair[1].2);
        }
    }

    #[test]
    fn full_method_is_size_guarded() {
        let err = sweep_rows(&panel_a(FULL_MAX_PASSIVE + 1), SweepMethod::Full, &[0.0]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn full_method_agrees_with_banded_path_for_one_spin() {
        // N = 1 has a single total-spin sector, so both paths share the steady state
        let p = panel_a(1);
        let full = sweep_rows(&p, SweepMethod::Full, &[0.0, 4e4]).unwrap();
        let banded = sweep_rows(&p, SweepMethod::Reduced, &[0.0, 4e4]).unwrap();
        for (f, b) in full.iter().zip(&banded) {
            for c in 1..4 {
                assert!((f[c] - b[c]).abs() < 1e-9, "{f:?} {b:?}");
            }
        }
    }
}
