//! Property tests for the invariants of each module.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use waveguide_stability::admissible::{
    build_pair, check_decay_class, make_perturbation, FactoryParams, PerturbationParams, PerturbationShape,
};
use waveguide_stability::carleman::{check_assumption, quadratic_candidate, WeightSpec};
use waveguide_stability::elliptic::solve_dirichlet;
use waveguide_stability::geometry::{axial_fourier, dirichlet_laplacian, h_norm};
use waveguide_stability::harness::RunConfig;
use waveguide_stability::inverse::{holder_exponent, parameter_recipe, y_of_mu, Recipe, StabilityParams};
use waveguide_stability::schrodinger::CrankNicolson;
use waveguide_stability::{CrossSection, CylinderGrid, GridFunction, C64};

fn grid(nx: usize, nn: usize, l: f64) -> Arc<CylinderGrid> {
    Arc::new(CylinderGrid::build(0.0, 1.0, nx, l, nn, 1.0, 16).unwrap())
}

fn noise(g: &Arc<CylinderGrid>, seed: u64, zero_boundary: bool) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = GridFunction::from_fn(g, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    if zero_boundary {
        f.zero_boundary();
    }
    f
}

fn pp(shape: PerturbationShape) -> PerturbationParams {
    PerturbationParams::new(1.0, 1.0, 2.0, 1.0, shape).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 32,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn fourier_round_trip_and_parseval(seed in any::<u64>(), nx in 8usize..20, log_n in 3u32..7) {
        let g = grid(nx, 1 << log_n, 4.0);
        let f = noise(&g, seed, false);
        let spec = axial_fourier(&f);
        let back = spec.inverse();
        prop_assert!((&back - &f).l2_norm() <= 1e-12 * f.l2_norm());
        prop_assert!((spec.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn h_norm_is_a_norm(seed in any::<u64>(), k in 0usize..4, alpha in -5.0f64..5.0) {
        let g = grid(17, 32, 4.0);
        let u = noise(&g, seed, false);
        let w = noise(&g, seed.wrapping_add(1), false);
        let nu = h_norm(&u, k).unwrap();
        let scaled = h_norm(&u.scale(C64::new(alpha, 0.0)), k).unwrap();
        prop_assert!((scaled - alpha.abs() * nu).abs() <= 1e-12 * nu.max(1.0) * alpha.abs().max(1.0));
        let sum = h_norm(&(&u + &w), k).unwrap();
        prop_assert!(sum <= (nu + h_norm(&w, k).unwrap()) * (1.0 + 1e-12));
    }

    #[test]
    fn dirichlet_solver_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let g = grid(17, 32, 4.0);
        let p1 = noise(&g, seed, true);
        let p2 = noise(&g, seed ^ 0x5555, true);
        let a = C64::new(alpha, 0.5);
        let mut combo = p1.scale(a);
        combo.axpy(C64::new(1.0, 0.0), &p2);
        let mut expect = solve_dirichlet(&p1).unwrap().scale(a);
        expect.axpy(C64::new(1.0, 0.0), &solve_dirichlet(&p2).unwrap());
        let got = solve_dirichlet(&combo).unwrap();
        prop_assert!((&got - &expect).l2_norm() <= 1e-12 * expect.l2_norm());
    }

    #[test]
    fn discrete_laplacian_self_adjoint(seed in any::<u64>()) {
        let g = grid(13, 16, 3.0);
        let u = noise(&g, seed, true);
        let w = noise(&g, seed ^ 0xabcdef, true);
        let a = u.inner(&dirichlet_laplacian(&w));
        let b = dirichlet_laplacian(&u).inner(&w);
        prop_assert!((a - b).norm() <= 1e-11 * (a.norm() + b.norm()));
    }

    #[test]
    fn unitary_steps(seed in any::<u64>(), amp in 0.0f64..1.0) {
        let g = grid(11, 16, 3.0);
        let q = GridFunction::from_real_fn(&g, |x, z| amp * (3.0 * x + z).sin());
        let cn = CrankNicolson::new(&q, 0.01).unwrap();
        let zero = GridFunction::zeros(&g);
        let mut v = noise(&g, seed, true);
        let n0 = v.l2_norm();
        for _ in 0..8 {
            let (next, _) = cn.step(&v, &zero, None).unwrap();
            prop_assert!((next.l2_norm() - v.l2_norm()).abs() <= 1e-12 * n0);
            v = next;
        }
    }

    #[test]
    fn perturbations_stay_in_class(amp in 1e-6f64..1.0, p in 2u32..7, k in 0.0f64..3.0) {
        let g = Arc::new(CylinderGrid::build(0.0, 1.0, 64, 8.0, 64, 1.0, 16).unwrap());
        let pair = build_pair(&FactoryParams::background(1.0, 1.0, 0.15, 0.3), &g).unwrap();
        let params = pp(PerturbationShape { cross_power: p, axial_frequency: k });
        let rho = make_perturbation(&params, &g, amp).unwrap();
        let report = check_decay_class(&(pair.q0() + &rho), pair.q0(), &params).unwrap();
        prop_assert!(report.pass, "{report:?}");
        prop_assert!(rho.boundary_sup() <= 1e-14 * amp);
    }

    #[test]
    fn decay_exponent_bound_enforced(eps in 0.01f64..3.0, frac in 0.0f64..1.0) {
        let d_min = 2.0 * (1.0 + eps) / 3.0;
        prop_assert!(PerturbationParams::new(1.0, 1.0, d_min * frac, eps, PerturbationShape::default()).is_err());
        prop_assert!(PerturbationParams::new(1.0, 1.0, d_min * 1.01, eps, PerturbationShape::default()).is_ok());
    }

    #[test]
    fn weights_positive(
        left in any::<bool>(),
        gap in 0.01f64..3.0,
        r in 1.01f64..4.0,
        lambda in 0.01f64..2.0,
        horizon in 0.1f64..3.0,
        t_frac in -0.999f64..0.999,
    ) {
        let cross = CrossSection::new(0.0, 1.0, 33).unwrap();
        let x0 = if left { -gap } else { 1.0 + gap };
        let (beta, _) = quadratic_candidate(x0, &cross).unwrap();
        let ws = WeightSpec::new(Arc::new(beta), &cross, r, lambda, horizon).unwrap();
        for &x in cross.nodes() {
            let (phi, eta) = ws.weights(t_frac * horizon, x).unwrap();
            prop_assert!(phi > 0.0 && eta > 0.0, "phi {phi}, eta {eta} at x = {x}");
        }
    }

    #[test]
    fn quadratic_candidate_always_certified(
        a in -2.0f64..2.0,
        len in 0.1f64..3.0,
        n in 8usize..80,
        left in any::<bool>(),
        gap in 0.01f64..5.0,
    ) {
        let cross = CrossSection::new(a, a + len, n).unwrap();
        let x0 = if left { a - gap } else { a + len + gap };
        let (beta, gamma) = quadratic_candidate(x0, &cross).unwrap();
        let report = check_assumption(&beta, &gamma, &cross);
        prop_assert!(report.passes(), "{report}");
        let ws = WeightSpec::new(Arc::new(beta), &cross, 2.0, 0.1, 1.0).unwrap();
        for &side in gamma.sides() {
            prop_assert!(ws.normal_derivative(&cross, side) >= 0.0);
        }
    }

    #[test]
    fn holder_exponent_range(b in 0.01f64..10.0, frac in 1e-6f64..0.999999) {
        let delta = frac * b;
        let theta = holder_exponent(b, delta);
        prop_assert!(theta > 0.0 && theta < 0.5);
        prop_assert!(0.5 - theta <= delta / (2.0 * b) * (1.0 + 1e-12));
    }

    #[test]
    fn y_strictly_decreasing(u1 in 1e-12f64..1.0, stretch in 1.001f64..1e6, delta_frac in 0.05f64..0.95) {
        let sp = StabilityParams::new(&pp(PerturbationShape::default()), 1.0, delta_frac).unwrap();
        let mu1 = sp.mu_delta() * u1;
        let mu2 = (mu1 * stretch).min(sp.mu_delta());
        prop_assume!(mu2 > mu1 * 1.0001);
        let (y1, y2) = (y_of_mu(mu1, &sp).unwrap(), y_of_mu(mu2, &sp).unwrap());
        prop_assert!(y1 > y2 && y2 >= 0.0, "y({mu1}) = {y1}, y({mu2}) = {y2}");
        match (parameter_recipe(mu1, &sp, 1.0).unwrap(), parameter_recipe(mu2, &sp, 1.0).unwrap()) {
            (Recipe::Small { s: s1, .. }, Recipe::Small { s: s2, .. }) => prop_assert!(s1 >= s2),
            (Recipe::Small { .. }, Recipe::LargeData) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn config_round_trip(seed in any::<u64>(), delta in 0.01f64..0.99, n in 8usize..200) {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.inverse.delta = delta;
        cfg.geometry.n_cross = n;
        prop_assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
