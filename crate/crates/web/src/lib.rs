//! wasm-bindgen entry points for the browser demo in `www/`.
//!
//! Every function returns a flat `Vec<f64>` of interleaved columns so the
//! page can plot without any serialization layer.

use std::f64::consts::PI;

use szego_lab::cmv::{EigenEngine, FiniteCMV};
use szego_lab::cocycle::lyapunov_poly;
use szego_lab::experiments::{base_point, eigenvector_decay};
use szego_lab::{CorrelationSpectrum, SpectralPoint, ToralAutomorphism, TrigPolynomial, VerblunskyConfig};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn alpha(text: &str) -> Result<TrigPolynomial, JsValue> {
    TrigPolynomial::parse(text).map_err(err)
}

fn automorphism(text: &str) -> Result<ToralAutomorphism, JsValue> {
    if text.trim().is_empty() {
        Ok(ToralAutomorphism::cat_map())
    } else {
        ToralAutomorphism::parse(text).map_err(err)
    }
}

/// `[η₀, 𝒥(η₀), η₁, 𝒥(η₁), …]` on `points` equally spaced angles in [0, 2π].
#[wasm_bindgen]
pub fn j_curve(alpha_text: &str, a_text: &str, points: usize) -> Result<Vec<f64>, JsValue> {
    let spectrum = CorrelationSpectrum::new(&alpha(alpha_text)?, &automorphism(a_text)?).map_err(err)?;
    let points = points.max(2);
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let eta = 2.0 * PI * i as f64 / (points - 1) as f64;
        out.push(eta);
        out.push(spectrum.evaluate(eta).map_err(err)?);
    }
    Ok(out)
}

/// `[η, L_N(η), λ²𝒥(η)/2, …]` on `points` angles inside (δ, π − δ).
#[wasm_bindgen]
pub fn lyapunov_curve(
    alpha_text: &str,
    a_text: &str,
    lambda: f64,
    n: usize,
    points: usize,
    seed: u64,
) -> Result<Vec<f64>, JsValue> {
    let alpha = alpha(alpha_text)?;
    let a = automorphism(a_text)?;
    let spectrum = CorrelationSpectrum::new(&alpha, &a).map_err(err)?;
    let cfg = VerblunskyConfig::new(lambda, base_point(seed, 0, 0), a, alpha).map_err(err)?;
    let points = points.max(2);
    let delta = 0.1;
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let eta = delta + (PI - 2.0 * delta) * i as f64 / (points - 1) as f64;
        out.push(eta);
        out.push(lyapunov_poly(&cfg, &SpectralPoint::new(eta), n));
        out.push(lambda * lambda * spectrum.evaluate(eta).map_err(err)? / 2.0);
    }
    Ok(out)
}

/// Eigenvector of the size-`n` truncation whose eigenangle is closest to
/// `eta`. Returns `[eigenangle, fitted decay rate, log|ξ_0|, log|ξ_1|, …]`.
#[wasm_bindgen]
pub fn eigenvector_profile(
    alpha_text: &str,
    a_text: &str,
    lambda: f64,
    n: usize,
    eta: f64,
    seed: u64,
) -> Result<Vec<f64>, JsValue> {
    let cfg = VerblunskyConfig::new(lambda, base_point(seed, 0, 0), automorphism(a_text)?, alpha(alpha_text)?)
        .map_err(err)?;
    let one = num_complex::Complex64::new(1.0, 0.0);
    let cmv = FiniteCMV::build(&cfg, 0, n, one, one).map_err(err)?;
    let pairs = cmv.eigenpairs(EigenEngine::Dense, 1e-8).map_err(err)?;
    let angular = |x: f64| {
        let d = (x - eta).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    };
    let best = pairs
        .iter()
        .min_by(|p, q| angular(p.eta).total_cmp(&angular(q.eta)))
        .ok_or_else(|| err("no eigenvalues"))?;
    let rate = eigenvector_decay(&best.vector).map(|(_, fit)| fit.slope.abs()).unwrap_or(f64::NAN);
    let mut out = vec![best.eta, rate];
    out.extend(best.vector.iter().map(|c| c.norm().max(1e-300).ln()));
    Ok(out)
}
