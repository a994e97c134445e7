#![allow(dead_code)]

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use szego_lab::verblunsky::random_point;
use szego_lab::{ToralAutomorphism, TrigPolynomial, VerblunskyConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_automorphism(rng: &mut ChaCha8Rng) -> ToralAutomorphism {
    const MATS: [[[i64; 2]; 2]; 5] = [
        [[2, 1], [1, 1]],
        [[1, 1], [1, 2]],
        [[3, 1], [2, 1]],
        [[2, 3], [1, 2]],
        [[5, 2], [2, 1]],
    ];
    ToralAutomorphism::new(MATS[rng.random_range(0..MATS.len())]).unwrap()
}

/// One to four low frequencies with Σ|α̂| ≤ 1.
pub fn random_trig(rng: &mut ChaCha8Rng) -> TrigPolynomial {
    let terms = rng.random_range(1..=4);
    let mut coeffs = Vec::new();
    while coeffs.len() < terms {
        let k = (rng.random_range(-3..=3), rng.random_range(-3..=3));
        if k != (0, 0) {
            let c = Complex64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..TAU));
            coeffs.push((k, c));
        }
    }
    let total: f64 = coeffs.iter().map(|(_, c)| c.norm()).sum();
    let scale = rng.random_range(0.3..1.0) / total;
    TrigPolynomial::new(coeffs.into_iter().map(|(k, c)| (k, c * scale))).unwrap()
}

/// A configuration with λ·sup α up to `max_coupling`.
pub fn random_config(rng: &mut ChaCha8Rng, max_coupling: f64) -> VerblunskyConfig {
    let a = random_automorphism(rng);
    let alpha = random_trig(rng);
    let lambda = rng.random_range(0.01..max_coupling) / alpha.sup_bound();
    VerblunskyConfig::new(lambda, random_point(rng.random()), a, alpha).unwrap()
}

pub fn unimodular(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..TAU))
}

/// Writes one line straight to the process stdout, past the test harness capture.
pub fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
