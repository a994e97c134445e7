//! Structural invariants over randomized configurations.

mod common;

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::Rng;
use szego_lab::cmv::{EigenEngine, FiniteCMV};
use szego_lab::cocycle::{
    lyapunov_norm, lyapunov_poly, polynomials, step_matrix, transfer, transfer_identity_residual,
    det,
};
use szego_lab::experiments::{base_point, lyapunov_scaling, ExperimentPlan};
use szego_lab::fit::linear_fit;
use szego_lab::greens::{green_direct, reconstruction_residual, BoundaryConvention};
use szego_lab::prufer::{self, default_horizon, expansion_diagnostics};
use szego_lab::sampling::{autocorrelation_exact, correlation_cutoff};
use szego_lab::torus::TorusPoint;
use szego_lab::verblunsky::{random_point, rho_of};
use szego_lab::{CorrelationSpectrum, SpectralPoint, ToralAutomorphism, TrigPolynomial, VerblunskyConfig};

use common::{random_automorphism, random_config, random_trig, rng, unimodular};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5EED),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn orbit_composition_is_exact(seed in any::<u64>(), m in -50i64..=50, n in -50i64..=50) {
        let mut r = rng(seed);
        let a = random_automorphism(&mut r);
        let q = 1u64 << r.random_range(1..20);
        let p = TorusPoint::from_fraction(r.random_range(0..q as i64), r.random_range(0..q as i64), q);
        prop_assert_eq!(a.iterate(p, m + n), a.iterate(a.iterate(p, m), n));
        let x = random_point(seed);
        prop_assert_eq!(a.iterate(x, m + n), a.iterate(a.iterate(x, m), n));
    }

    #[test]
    fn pushforward_composes(seed in any::<u64>(), m in -40i64..=40, n in -40i64..=40) {
        let mut r = rng(seed);
        let a = random_automorphism(&mut r);
        let k = (r.random_range(-5..=5), r.random_range(-5..=5));
        if let (Ok(direct), Ok(first)) = (a.frequency_pushforward(k, m + n), a.frequency_pushforward(k, m)) {
            if let Ok(second) = a.frequency_pushforward(first, n) {
                prop_assert_eq!(direct, second);
            }
        }
    }

    #[test]
    fn correlations_vanish_past_cutoff(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_automorphism(&mut r);
        let alpha = random_trig(&mut r);
        let nc = correlation_cutoff(&alpha, &a).unwrap() as i64;
        for n in nc + 1..nc + 6 {
            prop_assert_eq!(autocorrelation_exact(&alpha, &a, n).unwrap(), Complex64::new(0.0, 0.0));
            prop_assert_eq!(autocorrelation_exact(&alpha, &a, -n).unwrap(), Complex64::new(0.0, 0.0));
        }
        let spec = CorrelationSpectrum::new(&alpha, &a).unwrap();
        for k in 0..16 {
            prop_assert!(spec.evaluate(TAU * k as f64 / 16.0).is_ok());
        }
    }

    #[test]
    fn coefficients_stay_in_disk(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, 0.99);
        let bound = cfg.lambda() * cfg.alpha().sup_bound();
        for (a, rho) in cfg.sequence(2000) {
            prop_assert!((a.norm_sqr() + rho * rho - 1.0).abs() <= 1e-15);
            prop_assert!(a.norm() < bound + 1e-15);
            prop_assert!(a.norm() < 1.0);
        }
    }

    #[test]
    fn step_matrices_are_unimodular(seed in any::<u64>()) {
        let mut r = rng(seed);
        for _ in 0..200 {
            let s = SpectralPoint::new(r.random_range(0.0..TAU));
            let alpha = Complex64::from_polar(r.random_range(0.0..0.9), r.random_range(0.0..TAU));
            let d = det(&step_matrix(alpha, &s).unwrap());
            prop_assert!((d - 1.0).norm() <= 1e-14, "det = {}", d);
            // near the circle the entries grow like 1/ρ² and cancel in the determinant
            let alpha = Complex64::from_polar(r.random_range(0.9..0.999), r.random_range(0.0..TAU));
            let d = det(&step_matrix(alpha, &s).unwrap());
            let rho2 = 1.0 - alpha.norm_sqr();
            prop_assert!((d - 1.0).norm() <= 4.0 * f64::EPSILON / rho2, "det = {}", d);
        }
    }

    #[test]
    fn transfer_norm_and_identity(seed in any::<u64>(), n in 1usize..1000) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, 0.95);
        let s = SpectralPoint::new(r.random_range(0.0..TAU));
        prop_assert!(transfer(&cfg, &s, n).log_norm() >= (1.0f64 - 1e-10).ln());
        prop_assert!(transfer_identity_residual(&cfg, &s, n) <= 1e-8);
        // σ_max² ≤ |φ|² + |ψ|² ≤ 2σ_max² on the circle
        let diff = (lyapunov_norm(&cfg, &s, n) - lyapunov_poly(&cfg, &s, n)).abs();
        prop_assert!(diff <= 1e-3 + 1.0 / n as f64);
    }

    #[test]
    fn zeta_stays_consistent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, 0.95);
        let s = SpectralPoint::new(r.random_range(0.0..TAU));
        let run = prufer::run(&cfg, &s, 10_000, 1000);
        prop_assert!(run.max_zeta_drift <= 1e-9);
        for st in &run.trace {
            prop_assert!((st.zeta - st.zeta_from_theta(&s)).norm() <= 1e-9);
        }
    }

    #[test]
    fn truncation_structure(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, 0.95);
        let a = r.random_range(0..=6);
        let b = a + r.random_range(2..40);
        let c = FiniteCMV::build(&cfg, a, b, unimodular(&mut r), unimodular(&mut r)).unwrap();
        let m = c.dim();
        let (l, mm) = c.factors();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let prod: Complex64 = (0..m).map(|k| l.get(i, k) * mm.get(k, j)).sum();
                worst = worst.max((prod - c.matrix().get(i, j)).norm());
            }
        }
        prop_assert!(worst <= 1e-14, "ℒℳ rebuild {}", worst);
        for (j, blk) in c.theta_blocks() {
            if j < a || j + 1 > b {
                continue;
            }
            let f = if j % 2 == 0 { l } else { mm };
            let t = blk.matrix();
            for (di, row) in t.iter().enumerate() {
                for (dj, v) in row.iter().enumerate() {
                    prop_assert_eq!(f.get(j - a + di, j - a + dj), *v);
                }
            }
        }
        let eig = c.eigenpairs(EigenEngine::Dense, 1e-8).unwrap();
        prop_assert_eq!(eig.len(), m);
        let grid_max = (0..256)
            .map(|k| c.char_poly(Complex64::from_polar(1.0, TAU * k as f64 / 256.0)).log_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        for e in &eig {
            prop_assert!((e.z.norm() - 1.0).abs() <= 1e-8);
            prop_assert!(c.char_poly(e.z).log_abs - grid_max <= 1e-6f64.ln());
        }
        let z = unimodular(&mut r);
        let dist = eig.iter().map(|e| (e.z - z).norm()).fold(f64::INFINITY, f64::min);
        for n in [a, (a + b) / 2, b] {
            if let Ok(g) = green_direct(&c, z, n, n) {
                prop_assert!(g.norm() <= (1.0 + 1e-9) / dist);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn prufer_radius_matches_polynomial(seed in any::<u64>(), n in 1usize..100_000) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, 0.95);
        let s = SpectralPoint::new(r.random_range(0.0..TAU));
        let log_r = prufer::run(&cfg, &s, n, n).last.log_r;
        let quad = polynomials(&cfg, &s, n);
        prop_assert!((log_r - quad.log_abs_phi()).exp_m1().abs() <= 1e-8);
        // |φ*| = |φ| on the circle
        prop_assert!((quad.phi_star.norm() / quad.phi.norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn eigenvectors_reconstruct_from_boundary(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, 0.8);
        let big = FiniteCMV::build(&cfg, 0, 80, unimodular(&mut r), unimodular(&mut r)).unwrap();
        let raw: Vec<_> = (0..=80).map(|j| big.raw_coefficient(j)).collect();
        let eig = big.eigenpairs(EigenEngine::Dense, 1e-10).unwrap();
        let a = r.random_range(1..30);
        let b = a + r.random_range(10..40);
        let (beta, gamma) = (unimodular(&mut r), unimodular(&mut r));
        for k in [0, 17, 40, 79] {
            let e = &eig[k];
            let res = reconstruction_residual(&raw, e.z, a, b, beta, gamma, &e.vector, BoundaryConvention::Factorized).unwrap();
            prop_assert!(res <= 1e-6, "residual {}", res);
        }
    }
}

#[test]
fn orbit_equidistributes() {
    let a = ToralAutomorphism::cat_map();
    for seed in 0..8 {
        let avg: Complex64 = a
            .orbit(random_point(seed))
            .take(10_000)
            .map(|p| Complex64::from_polar(1.0, p.x() + p.y()))
            .sum::<Complex64>()
            / 10_000.0;
        assert!(avg.norm() <= 0.05, "seed {seed}: {avg}");
    }
}

#[test]
fn coefficient_mean_vanishes() {
    let cfg = VerblunskyConfig::cat(0.99, random_point(3), TrigPolynomial::alpha0()).unwrap();
    let mean: Complex64 = cfg.coefficients().take(100_000).sum::<Complex64>() / 100_000.0;
    assert!(mean.norm() <= 0.05, "{mean}");
    let max = cfg.coefficients().take(100_000).map(|a| a.norm()).fold(0.0, f64::max);
    assert!(max < 0.99 * cfg.alpha().sup_bound());
    assert!(cfg.coefficients().take(10).all(|a| (a.norm_sqr() + rho_of(a).powi(2) - 1.0).abs() <= 1e-15));
}

#[test]
fn first_expansion_term_matches_mean_square() {
    let cat = ToralAutomorphism::cat_map();
    let alpha = TrigPolynomial::alpha1();
    let lambda = 0.2;
    let s = SpectralPoint::new(FRAC_PI_2);
    let vals: Vec<f64> = (0..32)
        .map(|i| {
            let cfg = VerblunskyConfig::new(lambda, base_point(7, 0, i), cat.clone(), alpha.clone()).unwrap();
            expansion_diagnostics(&cfg, &s, 5000, 3).unwrap().i1
        })
        .collect();
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
    let target = lambda * lambda * alpha.mean_square() / 2.0;
    assert!((mean - target).abs() <= 3.0 * se, "{mean} vs {target} ± {se}");
}

#[test]
fn expansion_residual_scales_cubically() {
    let cat = ToralAutomorphism::cat_map();
    let s = SpectralPoint::new(FRAC_PI_2);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for lambda in [0.2f64, 0.1, 0.05] {
        let cfg = VerblunskyConfig::new(lambda, base_point(11, 0, 0), cat.clone(), TrigPolynomial::alpha0()).unwrap();
        let d = expansion_diagnostics(&cfg, &s, 100_000, default_horizon(lambda, &cat)).unwrap();
        xs.push(lambda.ln());
        ys.push(d.residual_123.ln());
    }
    let fit = linear_fit(&xs, &ys, 3).unwrap();
    assert!(fit.slope >= 2.5, "slope {}", fit.slope);
}

#[test]
fn scaling_cells_are_worker_independent() {
    let plan = ExperimentPlan {
        lambdas: vec![0.1, 0.3],
        etas: vec![1.0, 2.0],
        ns: vec![500, 2000],
        base_points: 3,
        master_seed: 99,
        ..Default::default()
    };
    let one = lyapunov_scaling(&ExperimentPlan { jobs: Some(1), ..plan.clone() }).unwrap();
    let many = lyapunov_scaling(&ExperimentPlan { jobs: Some(5), ..plan }).unwrap();
    assert_eq!(one, many);
    for row in &one.rows {
        assert!((row.l_n - row.l_norm).abs() <= 1e-3 + 1.0 / row.n as f64);
        assert!(row.l_n_se.is_some());
    }
}
