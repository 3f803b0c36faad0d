use biofilm_core::analysis::{self, fit_decay, functional_n};
use biofilm_core::dissipativity::{self, dissipation_matrix, equilibrium, is_totally_dissipative};
use biofilm_core::model::{self, delta, eta, in_hyperbolic_domain, reaction, velocity_bound};
use biofilm_core::solver::{self, BoundaryCondition, Grid1D, Perturbation, Preset, Profile, SimConfig};
use biofilm_core::{FitWindow, ModelParams, NormTrace, PhaseState, SobolevLevel};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams<f64>> {
    (
        -7.0..-4.0f64,
        -7.0..-4.0f64,
        0.02..0.9f64,
        -7.0..-4.0f64,
        -8.0..-5.0f64,
        0.05..1.0f64,
        0.5..2.0f64,
        -7.0..-5.0f64,
    )
        .prop_map(|(kb, ke, kd_frac, kn, eps, alpha, gamma, m)| {
            let k_b = 10f64.powf(kb);
            ModelParams {
                k_b,
                k_e: 10f64.powf(ke),
                k_d: kd_frac * k_b,
                k_n: 10f64.powf(kn),
                eps: 10f64.powf(eps),
                alpha,
                gamma,
                friction: 10f64.powf(m),
            }
        })
}

/// Solid fractions from a point on the open simplex, plus a velocity
/// strictly inside the symmetrizable range.
fn admissible_state(p: ModelParams<f64>) -> impl Strategy<Value = PhaseState<f64>> {
    (0.05..1.0f64, 0.05..1.0f64, 0.05..1.0f64, 0.05..1.0f64, -0.95..0.95f64).prop_map(
        move |(w1, w2, w3, w4, frac)| {
            let s = w1 + w2 + w3 + w4;
            let mut u = PhaseState::new(w1 / s, w2 / s, w3 / s, 0.0);
            u.v = frac * velocity_bound(&u, &p).unwrap();
            u
        },
    )
}

fn params_and_state() -> impl Strategy<Value = (ModelParams<f64>, PhaseState<f64>)> {
    params().prop_flat_map(|p| (Just(p), admissible_state(p)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reaction_factorizes_through_dissipation_matrix((p, u) in params_and_state()) {
        let ubar = equilibrium(&p).unwrap();
        let d = dissipation_matrix(&u, &ubar, &p).unwrap();
        let w = u.sub(&ubar.state()).to_array();
        let lhs = d.mul_vec(&w);
        let g = reaction(&u, &p).unwrap().to_array();
        // only v is unchanged by the factorization; compare componentwise
        // against the scale of the individual products
        for k in 0..3 {
            let scale = (0..4).map(|j| (d[(k, j)] * w[j]).abs()).fold(g[k].abs(), f64::max);
            prop_assert!((lhs[k] - g[k]).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE),
                "row {}: {} vs {}", k, lhs[k], g[k]);
        }
        prop_assert!((lhs[3] - g[3]).abs() <= 1e-12 * g[3].abs().max(1e-300));
    }

    #[test]
    fn delta_dominates_eta_inside_domain((p, u) in params_and_state()) {
        prop_assert!(in_hyperbolic_domain(&u, &p));
        let e = eta(&u, &p).unwrap();
        let dl = delta(&u, &p).unwrap();
        prop_assert!(e > 0.0);
        if u.v != 0.0 {
            prop_assert!(dl > e);
        } else {
            prop_assert_eq!(dl, e);
        }
    }

    #[test]
    fn symmetrizer_symmetrizes_jacobian((p, u) in params_and_state()) {
        let a0 = model::symmetrizer(&u, &p).unwrap();
        prop_assert!(a0.diagonal().iter().all(|x| *x > 0.0));
        let s = a0 * model::jacobian(&u, &p).unwrap();
        prop_assert!(s.max_asymmetry() <= 1e-13 * s.max_abs());
    }

    #[test]
    fn closed_form_speeds_match_numerical_eigenvalues((p, u) in params_and_state()) {
        let ev = model::eigenvalues(&u, &p).unwrap();
        let num = model::jacobian(&u, &p).unwrap().eigenvalues();
        let scale = ev.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
        for (k, (re, im)) in num.iter().enumerate() {
            prop_assert!(im.abs() <= 1e-6 * scale);
            prop_assert!((re - ev[k]).abs() <= 1e-6 * scale, "{:?} vs {:?}", ev, num);
        }
    }

    #[test]
    fn equilibrium_zeroes_reaction(p in params()) {
        let ubar = equilibrium(&p).unwrap();
        let u = ubar.state();
        prop_assert!(ubar.b > 0.0 && ubar.e > 0.0 && ubar.d > 0.0);
        prop_assert!((u.liquid_fraction() - p.k_d / p.k_b).abs() <= 1e-12);
        let g = reaction(&u, &p).unwrap().to_array();
        let rate = p.max_rate();
        for x in g {
            prop_assert!(x.abs() <= 1e-12 * rate);
        }
    }

    #[test]
    fn verdict_is_scale_invariant(p in params(), s in -3.0..3.0f64) {
        let base = is_totally_dissipative(&p).unwrap();
        let scaled = is_totally_dissipative(&p.with_rates_scaled(10f64.powf(s))).unwrap();
        if base.definiteness != dissipativity::Definiteness::Marginal {
            prop_assert_eq!(base.verdict, scaled.verdict);
        }
    }

    #[test]
    fn decay_fit_is_time_translation_invariant(
        beta in 0.01..2.0f64,
        c0 in 1e-6..1.0f64,
        shift in -50.0..50.0f64,
    ) {
        let rows = |tau: f64| {
            (0..40).map(move |i| {
                let t = 0.25 * i as f64;
                let h = c0 * (-beta * t).exp() * (1.0 + 0.01 * (3.0 * t).sin());
                (t + tau, h, h, h)
            })
        };
        let a = NormTrace::from_norms(0.01, rows(0.0)).unwrap();
        let b = NormTrace::from_norms(0.01, rows(shift)).unwrap();
        let fa = fit_decay(&a, FitWindow::second_half(&a).unwrap()).unwrap();
        let fb = fit_decay(&b, FitWindow::second_half(&b).unwrap()).unwrap();
        prop_assert!((fa.beta - fb.beta).abs() <= 1e-9 * fa.beta.abs().max(1.0));
        prop_assert!((fa.r_squared - fb.r_squared).abs() <= 1e-9);
    }

    #[test]
    fn functional_n_is_nondecreasing(norms in prop::collection::vec(0.0..1.0f64, 2..40)) {
        let trace = NormTrace::from_norms(
            0.1,
            norms.iter().enumerate().map(|(i, &x)| (0.5 * i as f64, x, x, x)),
        ).unwrap();
        for s in trace.samples() {
            prop_assert_eq!(s.energy, 0.5 * s.h2 * s.h2);
        }
        let mut prev = 0.0;
        for k in 0..(4 * norms.len() - 3) {
            let t = 0.125 * k as f64;
            let n = functional_n(&trace, SobolevLevel::H2, t).unwrap();
            prop_assert!(n >= prev, "N dropped at t = {}", t);
            prev = n;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn small_perturbations_stay_admissible(
        amps in prop::array::uniform4(-1e-3..1e-3f64),
        k in 1u32..6,
        periodic in any::<bool>(),
    ) {
        let mut cfg = SimConfig::new(ModelParams::fast(), Grid1D::new(-1.0, 1.0, 64).unwrap());
        cfg.preset = Preset::Fast;
        cfg.t_end = 0.5;
        cfg.bc = if periodic { BoundaryCondition::Periodic } else { BoundaryCondition::EquilibriumDirichlet };
        cfg.perturbation = Perturbation {
            profile: Profile::Sine { wavenumber: k as f64 },
            amplitude: amps,
        };
        let (snaps, report) = solver::simulate(cfg).unwrap();
        prop_assert!(report.stayed_in_omega);
        let p = cfg.params;
        for f in &snaps {
            prop_assert!(f.cells.iter().all(|u| in_hyperbolic_domain(u, &p)));
        }
    }
}

#[test]
fn h2_integral_converges_for_dissipative_run() {
    let mut cfg = SimConfig::new(ModelParams::fast(), Grid1D::new(-1.0, 1.0, 64).unwrap());
    cfg.preset = Preset::Fast;
    cfg.t_end = 40.0;
    cfg.perturbation = Perturbation {
        profile: Profile::Gaussian { width: 0.2, center: 0.0 },
        amplitude: [1e-4, -1e-4, 0.0, 1e-5],
    };
    let (_, report) = solver::simulate(cfg).unwrap();
    assert!(report.dissipative);
    let trace = &report.trace;
    let (t0, t1) = trace.extent().unwrap();
    let sup_sq = trace.samples().iter().map(|s| s.h2 * s.h2).fold(0.0, f64::max);
    let integral = |t: f64| {
        let n = functional_n(trace, SobolevLevel::H2, t).unwrap();
        n * n - sup_sq
    };
    let total = integral(t1);
    let late = total - integral(t0 + 0.9 * (t1 - t0));
    assert!(total > 0.0);
    assert!(late <= 0.01 * total, "late increment {late:e} of {total:e}");
}

#[test]
fn norms_vanish_on_equilibrium_and_grow_with_deviation() {
    let p = ModelParams::<f64>::table1();
    let ubar = equilibrium(&p).unwrap();
    let flat = vec![ubar.state(); 32];
    let n0 = analysis::discrete_norms(&flat, &ubar, 0.1, BoundaryCondition::Periodic).unwrap();
    assert_eq!((n0.l2, n0.h1, n0.h2), (0.0, 0.0, 0.0));
    let bumped: Vec<_> = (0..32)
        .map(|i| {
            let mut u = ubar.state();
            u.b += 1e-4 * (i as f64 * 0.3).sin();
            u
        })
        .collect();
    let n = analysis::discrete_norms(&bumped, &ubar, 0.1, BoundaryCondition::Periodic).unwrap();
    assert!(0.0 < n.l2 && n.l2 <= n.h1 && n.h1 <= n.h2);
}

#[test]
fn single_precision_pipeline() {
    let p = ModelParams::<f32>::fast();
    let report = is_totally_dissipative(&p).unwrap();
    assert!(report.verdict);
    let mut cfg = SimConfig::new(p, Grid1D::new(-1.0f32, 1.0, 32).unwrap());
    cfg.t_end = 0.2;
    cfg.perturbation = Perturbation {
        profile: Profile::Sine { wavenumber: 1.0 },
        amplitude: [1e-3, 0.0, 0.0, 0.0],
    };
    let (_, report) = solver::simulate(cfg).unwrap();
    assert!(report.stayed_in_omega);
    assert!(report.trace.samples().iter().all(|s| s.h2.is_finite()));
}
