//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr and
//! asserts the verdict. Tests share a lock so the timing criteria are not
//! disturbed by siblings running in parallel.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use lindblad_green::analytic::{
    concentration_sweep, gamma_recurrence, moments_continuous, poles_analytic, rho0_analytic,
    spectral_width_estimate,
};
use lindblad_green::dicke::{
    build_ensemble_model, ensemble_charges, ensemble_problem, reduced_generator, reduced_steady_state,
    solve_rho0z, ModelParams, Representation,
};
use lindblad_green::green::{DysonProbe, GreenKind, ModelProblem, SteadyMethod};
use lindblad_green::liouops::{build_generator, JumpTerm, LindbladModel, QOperator, C64};
use lindblad_green::oracle::{nullspace_steady_state, pencil_poles_dense};
use lindblad_green::panels::{
    large_gamma, log_grid, panel_a, panel_c, panel_c_grid, panel_d_grid, strong_relaxation, PANEL_C_BIG_GAMMA2_REF, PANEL_C_SIZES, PANEL_D_N,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("{} [{id:>2}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn sup_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

fn cmax(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

#[test]
fn c01_steady_state_routes_match_kernel() {
    let _g = lock();
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut routes = 0;
    for n in 1..=3 {
        let base = panel_a(n);
        let gamma = base.big_gamma();
        for zeta in [0.0, gamma, -gamma, 3.0 * gamma, -3.0 * gamma] {
            let p = base.with_zeta(zeta);
            let model = build_ensemble_model(&p, Representation::Dicke).unwrap();
            let kernel = nullspace_steady_state(&build_generator(&model, zeta)).unwrap();
            let problem = ensemble_problem(&p, Representation::Dicke).unwrap();
            let mut methods = vec![SteadyMethod::Direct, SteadyMethod::Dyson, SteadyMethod::Polynomial];
            let probe = problem.problem.steady_state(zeta, SteadyMethod::Series(1)).unwrap();
            if let Some(r) = probe.spectral_radius.filter(|r| *r < 0.9) {
                let order = (1e-15_f64.ln() / r.max(1e-3).ln()).ceil() as usize + 2;
                methods.push(SteadyMethod::Series(order));
            }
            for m in methods {
                let (rho, _) = problem.steady_state(zeta, m).unwrap();
                worst = worst.max(sup_diff(rho.entries(), kernel.rho.entries()));
                routes += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "steady-state routes vs kernel",
        worst <= 1e-10 && secs < 10.0,
        &format!("{routes} route evaluations, max sup deviation {worst:.2e} (tol 1e-10), {secs:.2} s (limit 10 s)"),
    );
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> QOperator {
    let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    QOperator::hermitian((&a + a.adjoint()) * C64::new(0.5 * scale, 0.0)).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng, d: usize) -> LindbladModel {
    let h0 = random_hermitian(rng, d, 1.0);
    let h1 = random_hermitian(rng, d, 1.0);
    let p = random_hermitian(rng, d, 0.5);
    let count = rng.random_range(2..=3);
    // Hermitian jumps keep the maximally mixed state stationary under the dissipator
    let jumps = (0..count)
        .map(|_| JumpTerm { op: random_hermitian(rng, d, 1.0), rate: rng.random_range(0.2..2.0) })
        .collect();
    let rho_th = QOperator::identity(d).scale(C64::new(1.0 / d as f64, 0.0));
    LindbladModel::new(h0, h1, p, jumps, rho_th).unwrap()
}

#[test]
fn c02_dyson_identity_on_random_models() {
    let _g = lock();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0_f64;
    for i in 0..20 {
        let d = 2 + i % 7;
        let model = random_model(&mut rng, d);
        let problem = ModelProblem::new(&model).unwrap();
        for zeta in [-2.3, -0.7, 0.0, 0.9, 2.6] {
            worst = worst.max(problem.problem.dyson_residual(zeta, DysonProbe::Basis).unwrap());
        }
    }
    report(2, "Dyson identity", worst <= 1e-10, &format!("20 models x 5 zeta, max residual {worst:.2e} (tol 1e-10)"));
}

fn moderate(n: usize) -> ModelParams {
    ModelParams {
        n_passive: n,
        omega: 0.7,
        gamma1: 0.3,
        gamma2: 0.4,
        big_gamma1: 1.1,
        big_gamma2: 0.9,
        zeta: 0.0,
        couplings: None,
    }
}

#[test]
fn c03_rational_expansion_matches_direct_solve() {
    let _g = lock();
    let held_out = [-2.7, -1.3, -0.61, -0.23, -0.05, 0.07, 0.29, 0.83, 1.7, 3.1];
    let mut worst = 0.0_f64;
    for n in 1..=4 {
        for params in [moderate(n), panel_a(n)] {
            let problem = reduced_generator(&params).unwrap().spectral_problem().unwrap();
            let poles = problem.compute_poles(GreenKind::Driven).unwrap();
            let fitted = problem.fit_residues(&poles).unwrap();
            let scale = params.big_gamma();
            for s in held_out {
                let zeta = s * scale;
                let direct = problem.green_matrix(GreenKind::Driven, zeta).unwrap().map(|x| C64::new(x, 0.0));
                let rational = fitted.rational_eval(zeta).unwrap();
                worst = worst.max(sup_diff(&rational, &direct) / cmax(&direct));
            }
        }
    }
    report(
        3,
        "rational expansion",
        worst <= 1e-7,
        &format!("N <= 4, two rate sets, 10 held-out zeta, max relative deviation {worst:.2e} (tol 1e-7)"),
    );
}

#[test]
fn c04_projected_steady_state() {
    let _g = lock();
    let mut worst = 0.0_f64;
    for n in 1..=3 {
        for params in [moderate(n), panel_a(n)] {
            let problem = ensemble_problem(&params, Representation::Dicke).unwrap().problem;
            let grading = problem.grading().unwrap().to_vec();
            for zeta in [0.0, 0.5 * params.big_gamma(), -1.7 * params.big_gamma()] {
                let full = problem.steady_state(zeta, SteadyMethod::Direct).unwrap().rho;
                let (r0, r1) = problem.projected_steady_state(zeta).unwrap();
                for (i, &g) in grading.iter().enumerate() {
                    let (want0, want1) = if g == 0 { (full[i], 0.0) } else { (0.0, full[i]) };
                    worst = worst.max((r0[i] - want0).abs()).max((r1[i] - want1).abs());
                }
            }
        }
    }
    report(4, "graded projection", worst <= 1e-10, &format!("N <= 3, max deviation {worst:.2e} (tol 1e-10)"));
}

#[test]
fn c05_polynomial_route_matches_dyson() {
    let _g = lock();
    let mut worst = 0.0_f64;
    let mut models = 0;
    for n in 1..=7 {
        for params in [moderate(n), panel_a(n)] {
            let model = build_ensemble_model(&params, Representation::Dicke).unwrap();
            let problem = ModelProblem::new(&model).unwrap();
            assert!(problem.problem.dim() <= 256);
            for zeta in [0.0, 0.8 * params.big_gamma()] {
                let poly = problem.problem.steady_state(zeta, SteadyMethod::Polynomial).unwrap().rho;
                let dyson = problem.problem.steady_state(zeta, SteadyMethod::Dyson).unwrap().rho;
                worst = worst.max((poly - dyson).amax());
            }
            models += 1;
        }
    }
    report(
        5,
        "renormalized polynomial",
        worst <= 1e-8,
        &format!("{models} models up to Liouville dim 256, max deviation {worst:.2e} (tol 1e-8)"),
    );
}

#[test]
fn c06_banded_solve_matches_closed_form() {
    let _g = lock();
    let (mut du, mut vn): (f64, f64) = (0.0, 0.0);
    for n in [1, 10, 100] {
        let p = strong_relaxation(n);
        assert!((p.gamma_ratio() - 1e6).abs() < 1e-6);
        let solved = solve_rho0z(&p).unwrap();
        let exact = rho0_analytic(&p).unwrap();
        du = solved.u.iter().zip(&exact.u).fold(du, |m, (a, b)| m.max((a - b).abs()));
        vn = vn.max(solved.v.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    report(
        6,
        "closed-form populations",
        du <= 1e-6 && vn <= 1e-6,
        &format!("N in {{1,10,100}}, max |du| {du:.2e}, max ||v|| {vn:.2e} (tol 1e-6)"),
    );
}

#[test]
fn c07_pencil_poles_match_closed_form() {
    let _g = lock();
    let mut worst = 0.0_f64;
    let mut counts_ok = true;
    let mut pairing_ok = true;
    let mut counts = Vec::new();
    for n in [1, 2, 3, 4, 10, 20] {
        let p = large_gamma(n);
        let model = build_ensemble_model(&p, Representation::Dicke).unwrap();
        let charges = ensemble_charges(n, Representation::Dicke);
        let pencil = pencil_poles_dense(&model, Some(&charges), GreenKind::Driven).unwrap();
        let exact = poles_analytic(&p).unwrap();
        for z in &pencil.poles {
            let nearest = exact.poles.iter().map(|w| (z - w).norm() / w.norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
        counts_ok &= pencil.len() == 2 * (n + 1);
        pairing_ok &= pencil.is_conjugate_closed() && exact.is_conjugate_closed();
        counts.push(format!("N={n}:{}/{}", pencil.len(), 2 * (n + 1)));
    }
    report(
        7,
        "pole positions",
        worst <= 1e-6 && counts_ok && pairing_ok,
        &format!(
            "max relative deviation {worst:.2e} (tol 1e-6), conjugate pairing {pairing_ok}, counts pencil/expected [{}]",
            counts.join(" ")
        ),
    );
}

#[test]
fn c08_continuous_moments() {
    let _g = lock();
    let mut worst = 0.0_f64;
    let mut per_n = Vec::new();
    for n in [100, 1000, 10_000] {
        let mut local = 0.0_f64;
        for zeta in [0.0, 3e4, -1e5] {
            let p = panel_a(n).with_zeta(zeta);
            let discrete = rho0_analytic(&p).unwrap().observables();
            let cont = moments_continuous(&p).unwrap();
            local = local
                .max(((cont.iz - discrete.iz) / discrete.iz).abs())
                .max(((cont.iz2 - discrete.iz2) / discrete.iz2).abs());
        }
        per_n.push(format!("N={n}:{local:.1e}"));
        worst = worst.max(local);
    }
    let point = moments_continuous(&panel_a(1000)).unwrap();
    let iz_norm = 2.0 * point.iz / 1000.0;
    let point_ok = (iz_norm + 0.994).abs() <= 1e-3;
    report(
        8,
        "continuous moments",
        worst <= 1e-3 && point_ok,
        &format!(
            "relative deviation [{}] (tol 1e-3), panel point 2<Iz>/N = {iz_norm:.5} (want -0.994 +- 0.001)",
            per_n.join(" ")
        ),
    );
}

#[test]
fn c09_spectral_width_scaling() {
    let _g = lock();
    let mut worst = 0.0_f64;
    for n in [1000, 10_000] {
        let p = panel_a(n);
        let outer = poles_analytic(&p).unwrap().poles.iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max((outer / spectral_width_estimate(&p) - 1.0).abs());
    }
    report(9, "spectral width", worst <= 0.02, &format!("N in {{1e3,1e4}}, max relative deviation {worst:.4} (tol 0.02)"));
}

#[test]
fn c10_relaxation_crossover() {
    let _g = lock();
    let n = 10_000;
    let nf = n as f64;
    let grid = log_grid(1.0, 1e8, 161);
    let start = Instant::now();
    let sweep = gamma_recurrence(n, &grid).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (iz, sz) = (sweep.column("iz").unwrap(), sweep.column("sz").unwrap());
    let (mut low, mut high, mut relation) = (0.0_f64, 0.0_f64, 0.0_f64);
    for ((&g, &i), &s) in grid.iter().zip(iz).zip(sz) {
        if g <= nf / 3.0 {
            low = low.max((i / (-g / 2.0) - 1.0).abs());
        }
        if g >= 3.0 * nf {
            high = high.max((i / (-nf / 2.0) - 1.0).abs());
        }
        relation = relation.max((s + i / g + 0.5).abs());
    }
    let start = Instant::now();
    gamma_recurrence(PANEL_D_N, &panel_d_grid()).unwrap();
    let big = start.elapsed().as_secs_f64();
    report(
        10,
        "relaxation crossover",
        low <= 0.05 && high <= 0.05 && relation <= 1e-9 && secs < 5.0 && big < 60.0,
        &format!(
            "N=1e4: low-gamma dev {low:.3}, high-gamma dev {high:.3} (tol 0.05), relation {relation:.1e} (tol 1e-9), \
             {secs:.2} s (limit 5 s); N=1e6 panel {big:.2} s (limit 60 s)"
        ),
    );
}

#[test]
fn c11_concentration_optimum() {
    let _g = lock();
    let grid = panel_c_grid();
    let mut interior = true;
    let mut monotone = true;
    let mut prev: Option<(f64, f64)> = None;
    let mut found = Vec::new();
    for n in PANEL_C_SIZES {
        let sweep = concentration_sweep(&panel_c(n), &grid, PANEL_C_BIG_GAMMA2_REF).unwrap();
        let (i, value) = sweep.argmax("total_polarization").unwrap();
        interior &= i > 0 && i + 1 < grid.len();
        if let Some((x, v)) = prev {
            monotone &= grid[i] >= x && value >= v;
        }
        prev = Some((grid[i], value));
        found.push(format!("N={n}: xi={:.3} value={value:.4e}", grid[i]));
    }
    report(
        11,
        "concentration optimum",
        interior && monotone,
        &format!("interior {interior}, nondecreasing {monotone}; [{}]", found.join("; ")),
    );
}

#[test]
fn c12_large_ensemble_runtime() {
    let _g = lock();
    let p = panel_a(1_000_000);
    let start = Instant::now();
    let obs = reduced_steady_state(&p).unwrap().observables();
    let secs = start.elapsed().as_secs_f64();
    report(
        12,
        "N=1e6 banded steady state",
        secs < 2.0 && obs.iz_norm().is_finite(),
        &format!("{secs:.2} s (limit 2 s), 2<Iz>/N = {:.5}", obs.iz_norm()),
    );
}
