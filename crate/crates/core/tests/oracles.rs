//! Oracle-backed checks of the two inner solvers, beyond what the
//! per-module unit tests cover.

mod common;

use despeckle_core::newton::{solve_field, solve_pixel, PixelProblem};
use despeckle_core::noise::{to_log, SpeckleModel};
use despeckle_core::solver::{SolverConfig, SolverState};
use despeckle_core::tv::{denoise, ChambolleConfig};
use despeckle_core::ImageGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn frozen_pixel_example_matches_oracle() {
    // g = 0, a = 1, c = 1 reduces to z = e^(-z)
    let z_oracle = common::bisect_pixel_oracle(0.0, 1.0, 1.0, 1e-12);
    assert!((z_oracle - 0.567_143_290_409_783_8).abs() < 1e-10);
    let p = PixelProblem::new(0.0, 1.0, 1.0).unwrap();
    let z = solve_pixel(&p, 4, 1e-8);
    assert!((z - z_oracle).abs() < 1e-10, "{z} vs {z_oracle}");
}

#[test]
fn random_field_matches_per_pixel_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let side = 8;
    let g = ImageGrid::from_fn(side, side, |_, _| rng.random_range(-3.0..3.0));
    let u = ImageGrid::from_fn(side, side, |_, _| rng.random_range(-3.0..3.0));
    let b = ImageGrid::from_fn(side, side, |_, _| rng.random_range(-0.5..0.5));
    let tau = 1.3;
    let looks = 4.0;

    let z = solve_field(&g, &u, &b, tau, looks, 4).unwrap();
    let a = tau / looks;
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        let oracle = common::bisect_pixel_oracle(
            g.as_slice()[i],
            u.as_slice()[i] + b.as_slice()[i],
            a,
            1e-12,
        );
        worst = worst.max((z.as_slice()[i] - oracle).abs());
    }
    assert!(worst < 1e-8, "max deviation {worst}");
}

#[test]
fn four_newton_steps_suffice_on_practical_corpus() {
    // |phi'| <= 1e-6 after four plain Newton steps on at least 99% of
    // g, c in [-5, 5], a in [1e-3, 10]
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let total = 20_000;
    let mut good = 0usize;
    for _ in 0..total {
        let g = rng.random_range(-5.0..5.0);
        let c = rng.random_range(-5.0..5.0);
        let a = rng.random_range(1e-3..10.0f64);
        let p = PixelProblem::new(g, c, a).unwrap();

        // plain undamped Newton from the production initializer, no safeguards
        let mut z = (c - 1.0 / a).max(g - (a * (g - c).max(0.0)).ln_1p());
        for _ in 0..4 {
            let fp = p.residual(z);
            let fpp = p.curvature(z);
            let next = z - fp / fpp;
            if !next.is_finite() {
                break;
            }
            z = next;
        }
        if p.residual(z).abs() <= 1e-6 {
            good += 1;
        }
    }
    let frac = good as f64 / total as f64;
    assert!(frac >= 0.99, "only {frac} of the corpus converged");
}

#[test]
fn denoiser_matches_projected_gradient_oracle_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let v = ImageGrid::from_fn(4, 4, |_, _| rng.random_range(-2.0..2.0));
    let cfg = ChambolleConfig {
        step: 0.248,
        max_iters: 200_000,
        tol: 1e-12,
    };
    let (u, _) = denoise(&v, 0.3, &cfg, None).unwrap();
    let u_oracle = common::projected_gradient_denoise(&v, 0.3, 400_000);
    let worst = u
        .as_slice()
        .iter()
        .zip(u_oracle.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "max deviation {worst}");
}

#[test]
fn data_subproblem_is_optimal_at_every_outer_iteration() {
    // replicate the (u, b) the z-update consumes and check |phi'| there
    let x = despeckle_core::synth::phantom(12, 12);
    let model = SpeckleModel::new(3.0).unwrap();
    let speckle = model.sample_speckle(12, 12, 9);
    let y = despeckle_core::noise::apply_speckle(&x, &speckle).unwrap();
    let obs = to_log(&y, 1e-12).unwrap();
    let cfg = SolverConfig::new(1.1);
    let mut state = SolverState::new(&obs, &cfg).unwrap();

    for _ in 0..6 {
        let u_before = state.u().clone();
        let b_before = state.b().clone();
        state.step(&obs, &model, &cfg).unwrap();
        let a = cfg.tau / model.looks();
        for i in 0..obs.grid().len() {
            let p = PixelProblem {
                g: obs.grid().as_slice()[i],
                c: u_before.as_slice()[i] + b_before.as_slice()[i],
                a,
            };
            let resid = p.residual(state.z().as_slice()[i]);
            assert!(resid.abs() <= 1e-8, "pixel {i}: residual {resid}");
        }
    }
}
