//! Sampling functions on 𝕋² given as trigonometric polynomials, their orbit
//! autocorrelations ⟨F̄₀Fₙ⟩ (Fₙ = α∘Aⁿ) and the correlation spectral
//! function 𝒥(η) = Σₙ e^{inη}⟨F̄₀Fₙ⟩.
//!
//! Finite frequency support makes the correlations exactly computable: the
//! pushforward (Aᵀ)ⁿ eventually carries every support frequency off the
//! support, after which ⟨F̄₀Fₙ⟩ vanishes identically.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{eigenvector, ToralAutomorphism, TorusPoint, PUSHFORWARD_CAP};

/// Slack allowed on Σ|α̂(k)| ≤ 1 for coefficients typed in decimal.
const SUP_SLACK: f64 = 1e-12;

/// α(x, y) = Σ α̂(k) e^{i(k₁x + k₂y)} with ⟨α⟩ = 0 and Σ|α̂| ≤ 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    coeffs: BTreeMap<(i64, i64), Complex64>,
}

impl TrigPolynomial {
    pub fn new<I>(coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((i64, i64), Complex64)>,
    {
        let mut map = BTreeMap::new();
        for (k, c) in coeffs {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidSampling(format!(
                    "non-finite coefficient at {k:?}"
                )));
            }
            *map.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| c.norm() > 0.0);
        if map.contains_key(&(0, 0)) {
            return Err(Error::InvalidSampling(
                "constant term must vanish (mean-zero sampling function)".into(),
            ));
        }
        if map.is_empty() {
            return Err(Error::InvalidSampling("no nonzero coefficients".into()));
        }
        let p = Self { coeffs: map };
        if p.sup_bound() > 1.0 + SUP_SLACK {
            return Err(Error::InvalidSampling(format!(
                "sum of |coefficients| = {} exceeds 1",
                p.sup_bound()
            )));
        }
        Ok(p)
    }

    /// α₀ = (e^{ix} + e^{iy})/2; its orbit correlations vanish for n ≠ 0.
    pub fn alpha0() -> Self {
        Self::new([
            ((1, 0), Complex64::new(0.5, 0.0)),
            ((0, 1), Complex64::new(0.5, 0.0)),
        ])
        .expect("valid preset")
    }

    /// α₁ = (e^{ix} + e^{i(2x+y)})/2; under the cat map 𝒥(η) = cos²(η/2).
    pub fn alpha1() -> Self {
        Self::new([
            ((1, 0), Complex64::new(0.5, 0.0)),
            ((2, 1), Complex64::new(0.5, 0.0)),
        ])
        .expect("valid preset")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "alpha0" => Some(Self::alpha0()),
            "alpha1" => Some(Self::alpha1()),
            _ => None,
        }
    }

    /// Parses `"(k1,k2): re,im; (k1,k2): re"` (imaginary part optional) or a
    /// preset name.
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(p) = Self::preset(s.trim()) {
            return Ok(p);
        }
        let bad = |msg: &str| Error::Config(format!("sampling function '{s}': {msg}"));
        let mut entries = Vec::new();
        for item in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let (freq, val) = item.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let freq = freq
                .trim()
                .strip_prefix('(')
                .and_then(|f| f.strip_suffix(')'))
                .ok_or_else(|| bad("frequency must look like (k1,k2)"))?;
            let (k1, k2) = freq.split_once(',').ok_or_else(|| bad("frequency pair"))?;
            let k1: i64 = k1.trim().parse().map_err(|_| bad("k1"))?;
            let k2: i64 = k2.trim().parse().map_err(|_| bad("k2"))?;
            let mut parts = val.split(',').map(str::trim);
            let re: f64 = parts
                .next()
                .ok_or_else(|| bad("real part"))?
                .parse()
                .map_err(|_| bad("real part"))?;
            let im: f64 = match parts.next() {
                Some(t) => t.parse().map_err(|_| bad("imaginary part"))?,
                None => 0.0,
            };
            if parts.next().is_some() {
                return Err(bad("too many components"));
            }
            entries.push(((k1, k2), Complex64::new(re, im)));
        }
        Self::new(entries).map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn coeffs(&self) -> &BTreeMap<(i64, i64), Complex64> {
        &self.coeffs
    }

    pub fn coefficient(&self, k: (i64, i64)) -> Complex64 {
        self.coeffs
            .get(&k)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Σ|α̂(k)|, an upper bound for sup|α|.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// K = Σ‖k‖·|α̂(k)|, a bound for the gradient of α.
    pub fn grad_bound(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(&(k1, k2), c)| (k1 as f64).hypot(k2 as f64) * c.norm())
            .sum()
    }

    /// ⟨|α|²⟩ by Parseval.
    pub fn mean_square(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    #[inline]
    pub fn evaluate(&self, p: TorusPoint) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&(k1, k2), &c)| c * Complex64::from_polar(1.0, p.phase(k1, k2)))
            .sum()
    }

    /// Largest frequency norm in the support.
    fn support_radius(&self) -> f64 {
        self.coeffs
            .keys()
            .map(|&(k1, k2)| (k1 as f64).hypot(k2 as f64))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for TrigPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|(&(k1, k2), c)| format!("({k1},{k2}): {},{}", c.re, c.im))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// ⟨F̄₀Fₙ⟩ = Σₖ conj(α̂((Aᵀ)ⁿk))·α̂(k), exactly.
pub fn autocorrelation_exact(
    alpha: &TrigPolynomial,
    a: &ToralAutomorphism,
    n: i64,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (&k, &c) in alpha.coeffs() {
        let pushed = a.frequency_pushforward(k, n)?;
        acc += alpha.coefficient(pushed).conj() * c;
    }
    Ok(acc)
}

/// Monte Carlo estimate with per-component standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub samples: usize,
}

impl McEstimate {
    /// True when `value` lies within `k` standard errors in both components.
    /// A floor of `1e-15` absorbs rounding when the sample variance is 0.
    pub fn agrees_with(&self, value: Complex64, k: f64) -> bool {
        (self.mean.re - value.re).abs() <= k * self.se_re + 1e-15
            && (self.mean.im - value.im).abs() <= k * self.se_im + 1e-15
    }
}

/// Average of conj(α(p))·α(Aⁿp) over `samples` uniform points.
pub fn autocorrelation_birkhoff(
    alpha: &TrigPolynomial,
    a: &ToralAutomorphism,
    n: i64,
    samples: usize,
    seed: u64,
) -> McEstimate {
    assert!(samples >= 1, "need at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sr, mut si, mut sr2, mut si2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let p = TorusPoint::from_fixed(rng.random(), rng.random());
        let v = alpha.evaluate(p).conj() * alpha.evaluate(a.iterate(p, n));
        sr += v.re;
        si += v.im;
        sr2 += v.re * v.re;
        si2 += v.im * v.im;
    }
    let m = samples as f64;
    let (mr, mi) = (sr / m, si / m);
    let se = |s2: f64, mu: f64| {
        if samples > 1 {
            ((s2 / m - mu * mu).max(0.0) * m / (m - 1.0) / m).sqrt()
        } else {
            f64::INFINITY
        }
    };
    McEstimate {
        mean: Complex64::new(mr, mi),
        se_re: se(sr2, mr),
        se_im: se(si2, mi),
        samples,
    }
}

/// Smallest N_c such that ⟨F̄₀Fₙ⟩ = 0 for every |n| > N_c.
///
/// Writing k = a·u⁺ + b·u⁻ in the eigenbasis of Aᵀ, ‖(Aᵀ)ⁿk‖ ≥ |a||ϱ|ⁿ − |b|,
/// which exceeds the support radius beyond an explicit n; correlations are
/// then evaluated exactly up to that bound and trailing zeros trimmed.
pub fn correlation_cutoff(alpha: &TrigPolynomial, a: &ToralAutomorphism) -> Result<usize> {
    let [[p, q], [r, s]] = a.entries();
    let at = [[p, r], [q, s]];
    let up = eigenvector(at, a.rho());
    let um = eigenvector(at, a.rho_minus());
    let det = up[0] * um[1] - up[1] * um[0];
    let radius = alpha.support_radius();
    let growth = a.rho().abs();
    let mut bound = 0usize;
    for &(k1, k2) in alpha.coeffs().keys() {
        let (k1, k2) = (k1 as f64, k2 as f64);
        let ca = (k1 * um[1] - k2 * um[0]) / det;
        let cb = (up[0] * k2 - up[1] * k1) / det;
        let mut n = 0usize;
        while ca.abs() * growth.powi(n as i32) - cb.abs() <= radius * (1.0 + 1e-9) + 1e-9 {
            n += 1;
            if n as i64 > PUSHFORWARD_CAP {
                return Err(Error::InvalidSampling(
                    "support frequency is not ejected by the pushforward".into(),
                ));
            }
        }
        bound = bound.max(n + 1);
    }
    let mut last = 0usize;
    for n in 0..=bound {
        if autocorrelation_exact(alpha, a, n as i64)?.norm() > 0.0 {
            last = n;
        }
    }
    Ok(last)
}

/// The exact correlation sequence ⟨F̄₀Fₙ⟩ for |n| ≤ N_c.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpectrum {
    /// Index `n + N_c` holds ⟨F̄₀Fₙ⟩.
    correlations: Vec<Complex64>,
    truncation: usize,
}

impl CorrelationSpectrum {
    /// Uses the exact cutoff from [`correlation_cutoff`].
    pub fn new(alpha: &TrigPolynomial, a: &ToralAutomorphism) -> Result<Self> {
        let nc = correlation_cutoff(alpha, a)?;
        Self::build(alpha, a, nc)
    }

    /// Uses a caller-chosen N_c; rejected if a correlation beyond it survives.
    pub fn with_truncation(
        alpha: &TrigPolynomial,
        a: &ToralAutomorphism,
        truncation: usize,
    ) -> Result<Self> {
        let needed = correlation_cutoff(alpha, a)?;
        if needed > truncation {
            return Err(Error::TruncationTooSmall {
                given: truncation,
                needed,
            });
        }
        Self::build(alpha, a, truncation)
    }

    fn build(alpha: &TrigPolynomial, a: &ToralAutomorphism, nc: usize) -> Result<Self> {
        let nc_i = nc as i64;
        let correlations = (-nc_i..=nc_i)
            .map(|n| autocorrelation_exact(alpha, a, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            correlations,
            truncation: nc,
        })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// ⟨F̄₀Fₙ⟩, zero outside the truncation.
    pub fn correlation(&self, n: i64) -> Complex64 {
        let nc = self.truncation as i64;
        if n.abs() > nc {
            Complex64::new(0.0, 0.0)
        } else {
            self.correlations[(n + nc) as usize]
        }
    }

    /// 𝒥(η), rejecting an imaginary residue above 1e-10.
    pub fn evaluate(&self, eta: f64) -> Result<f64> {
        let nc = self.truncation as i64;
        let j: Complex64 = (-nc..=nc)
            .map(|n| Complex64::from_polar(1.0, n as f64 * eta) * self.correlation(n))
            .sum();
        if j.im.abs() > 1e-10 {
            return Err(Error::NonRealSpectrum(j.im));
        }
        Ok(j.re)
    }

    /// Upper bound on max 𝒥 used to short-circuit window searches.
    pub fn max_bound(&self) -> f64 {
        self.correlations.iter().map(|c| c.norm()).sum()
    }
}

/// 𝒥(η) truncated at N_c; fails if correlations survive beyond N_c.
pub fn spectral_function(
    alpha: &TrigPolynomial,
    a: &ToralAutomorphism,
    eta: f64,
    truncation: usize,
) -> Result<f64> {
    CorrelationSpectrum::with_truncation(alpha, a, truncation)?.evaluate(eta)
}

/// Closed η-interval, in radians.
pub type EtaInterval = (f64, f64);

/// Sub-intervals of [δ, π−δ] ∪ [π+δ, 2π−δ] on which 𝒥(η) > c.
pub fn spectral_window(
    spectrum: &CorrelationSpectrum,
    delta: f64,
    c: f64,
) -> Result<Vec<EtaInterval>> {
    if !(delta > 0.0 && delta < PI / 4.0) {
        return Err(Error::Config(format!("delta = {delta} must lie in (0, π/4)")));
    }
    if c <= 0.0 {
        return Err(Error::Config(format!("threshold c = {c} must be positive")));
    }
    let mut out = Vec::new();
    for (lo, hi) in [(delta, PI - delta), (PI + delta, TAU - delta)] {
        scan_segment(spectrum, lo, hi, c, &mut out)?;
    }
    Ok(out)
}

fn scan_segment(
    spectrum: &CorrelationSpectrum,
    lo: f64,
    hi: f64,
    c: f64,
    out: &mut Vec<EtaInterval>,
) -> Result<()> {
    let steps = ((hi - lo) / 1e-3).ceil() as usize;
    let h = (hi - lo) / steps as f64;
    let above = |eta: f64| -> Result<bool> { Ok(spectrum.evaluate(eta)? > c) };
    let refine = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if above(mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };
    let mut start: Option<f64> = None;
    let mut prev_eta = lo;
    let mut prev_in = false;
    for i in 0..=steps {
        let eta = if i == steps { hi } else { lo + i as f64 * h };
        let inside = above(eta)?;
        match (prev_in, inside, i) {
            (_, true, 0) => start = Some(lo),
            (false, true, _) => start = Some(refine(eta, prev_eta)?),
            (true, false, _) => {
                let end = refine(prev_eta, eta)?;
                out.push((start.take().expect("open interval"), end));
            }
            _ => {}
        }
        prev_eta = eta;
        prev_in = inside;
    }
    if let Some(s) = start {
        out.push((s, hi));
    }
    Ok(())
}
