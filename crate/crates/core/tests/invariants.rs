use lindblad_green::analytic::{poles_analytic, rho0_analytic};
use lindblad_green::dicke::{
    density_observables, ensemble_problem, reduced_steady_state, solve_rho0z, ModelParams, Representation,
};
use lindblad_green::green::SteadyMethod;
use lindblad_green::oracle::OracleReport;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (1usize..=5, 0.05..2.0, 0.05..2.0, 0.05..2.0, 0.05..2.0, 0.05..2.0, -3.0..3.0).prop_map(
        |(n, omega, gamma1, gamma2, big_gamma1, big_gamma2, zeta)| ModelParams {
            n_passive: n,
            omega,
            gamma1,
            gamma2,
            big_gamma1,
            big_gamma2,
            zeta,
            couplings: None,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn banded_state_is_a_density(p in params()) {
        let s = reduced_steady_state(&p).unwrap();
        prop_assert!((s.trace() - 1.0).abs() < 1e-12);
        prop_assert!(s.u.iter().all(|&x| x > -1e-12));
        prop_assert!(s.u.iter().zip(&s.v).all(|(u, v)| *v <= u + 1e-12 && *v > -1e-12));
        let o = s.observables();
        prop_assert!(o.iz_norm().abs() <= 1.0 + 1e-12);
        prop_assert!(o.sz.abs() <= 0.5 + 1e-12);
        prop_assert!(o.iz2 + 1e-12 >= o.iz * o.iz);
    }

    #[test]
    fn banded_path_matches_dense_sector(p in params()) {
        let banded = reduced_steady_state(&p).unwrap().observables();
        let problem = ensemble_problem(&p, Representation::Dicke).unwrap();
        let (rho, _) = problem.steady_state(p.zeta, SteadyMethod::Direct).unwrap();
        let dense = density_observables(&rho, p.n_passive, Representation::Dicke).unwrap();
        prop_assert!((banded.iz - dense.iz).abs() < 1e-10);
        prop_assert!((banded.iz2 - dense.iz2).abs() < 1e-10);
        prop_assert!((banded.sz - dense.sz).abs() < 1e-10);
    }

    #[test]
    fn polynomial_route_matches_direct(p in params()) {
        let problem = ensemble_problem(&p, Representation::Dicke).unwrap().problem;
        let direct = problem.steady_state(p.zeta, SteadyMethod::Direct).unwrap().rho;
        let poly = problem.steady_state(p.zeta, SteadyMethod::Polynomial).unwrap();
        prop_assert!((&poly.rho - &direct).amax() < 1e-10);
        prop_assert!(poly.annihilation_residual.unwrap() < 1e-12);
    }

    #[test]
    fn closed_form_poles_come_in_conjugate_pairs(n in 1usize..60, eta0 in 0.01f64..2.0) {
        let gamma1: f64 = 1e-2;
        let p = ModelParams {
            n_passive: n,
            omega: (eta0 * gamma1 * 1e5 / 4.0).sqrt(),
            gamma1,
            gamma2: 1e3,
            big_gamma1: 2e3,
            big_gamma2: 1e5 - 1e3 - 1e3,
            zeta: 0.0,
            couplings: None,
        };
        let poles = poles_analytic(&p).unwrap();
        prop_assert_eq!(poles.len(), 2 * (n + 1));
        prop_assert!(poles.is_conjugate_closed());
        prop_assert!(poles.poles.iter().all(|z| z.im.abs() >= p.big_gamma() * (1.0 - 1e-12)));
    }

    #[test]
    fn closed_form_populations_are_normalized(n in 1usize..500, zeta in -3e5..3e5) {
        let p = lindblad_green::panels::panel_a(n).with_zeta(zeta);
        let s = rho0_analytic(&p).unwrap();
        prop_assert!((s.trace() - 1.0).abs() < 1e-12);
        prop_assert!(s.u.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn report_verdict_is_monotone_in_tolerance(fast in -1e3..1e3, oracle in -1e3..1e3, tol in 1e-12..1.0) {
        let tight = OracleReport::new("q", fast, oracle, tol);
        let loose = OracleReport::new("q", fast, oracle, 2.0 * tol);
        prop_assert!(!tight.passed() || loose.passed());
        prop_assert!(OracleReport::new("q", oracle, oracle, tol).passed());
        prop_assert!(OracleReport::reference("q", oracle).passed());
    }
}

#[test]
fn rho0_solver_tracks_closed_form_in_the_strong_relaxation_limit() {
    let gamma1: f64 = 1e-3;
    let big_gamma = 1e3 + 1e6 + 500.0;
    let p = ModelParams {
        n_passive: 40,
        omega: (0.01 * gamma1 * big_gamma / 4.0).sqrt(),
        gamma1,
        gamma2: 1e3,
        big_gamma1: 1e3,
        big_gamma2: 1e6,
        zeta: 2e5,
        couplings: None,
    };
    let solved = solve_rho0z(&p).unwrap();
    let exact = rho0_analytic(&p).unwrap();
    let du = solved.u.iter().zip(&exact.u).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(du < 1e-6, "{du}");
}
