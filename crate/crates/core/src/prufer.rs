//! Prüfer variables on the unit circle: φₙ = rₙ·e^{i(nη + θₙ)} with the
//! auxiliary phase ζₙ = e^{i[(n+1)η + 2θₙ]}, and the small-coupling
//! expansion of (1/2N)·log|φ_N|² into the terms I₁ … I₆.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cocycle::SpectralPoint;
use crate::error::{Error, Result};
use crate::torus::ToralAutomorphism;
use crate::verblunsky::VerblunskyConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruferState {
    /// log rₙ = log|φₙ|.
    pub log_r: f64,
    /// θₙ, unwrapped with |θₙ₊₁ − θₙ| < π.
    pub theta: f64,
    pub zeta: Complex64,
    pub n: usize,
}

impl PruferState {
    /// φ₀ = 1: r = 1, θ = 0, ζ = z.
    pub fn init(s: &SpectralPoint) -> Self {
        Self {
            log_r: 0.0,
            theta: 0.0,
            zeta: s.z(),
            n: 0,
        }
    }

    /// Advances by one coefficient. Returns the modulus drift |ζₙ₊₁| − 1
    /// accumulated by the update before renormalization.
    pub fn step(&mut self, alpha: Complex64, s: &SpectralPoint) -> Result<f64> {
        let a2 = alpha.norm_sqr();
        if a2 >= 1.0 {
            return Err(Error::CoefficientOutsideDisk(a2.sqrt()));
        }
        let w = alpha * self.zeta;
        let one_minus = Complex64::new(1.0 - w.re, -w.im);
        let num = 1.0 + a2 - 2.0 * w.re;
        let h = num / (1.0 - a2);
        assert!(h > 0.0, "H_n = {h} must be positive for |α| < 1");
        self.log_r += 0.5 * h.ln();
        // Re(1 − αζ) ≥ 1 − |α| > 0, so the principal argument is the branch
        // with |Δθ| < π/2.
        debug_assert!(one_minus.re > 0.0);
        self.theta -= one_minus.arg();
        let next = s.z() * self.zeta * num / (one_minus * one_minus);
        let drift = next.norm() - 1.0;
        self.zeta = next / next.norm();
        self.n += 1;
        Ok(drift)
    }

    /// e^{i[(n+1)η + 2θ]} rebuilt from (n, θ), for consistency checks.
    pub fn zeta_from_theta(&self, s: &SpectralPoint) -> Complex64 {
        Complex64::from_polar(1.0, (self.n + 1) as f64 * s.eta() + 2.0 * self.theta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruferRun {
    /// States at n = 0, k, 2k, …; ⌊N/k⌋ + 1 entries.
    pub trace: Vec<PruferState>,
    pub last: PruferState,
    pub max_zeta_drift: f64,
}

pub fn run_from<I>(coeffs: I, s: &SpectralPoint, thin: usize) -> Result<PruferRun>
where
    I: IntoIterator<Item = Complex64>,
{
    assert!(thin >= 1, "thinning must be at least 1");
    let mut st = PruferState::init(s);
    let mut trace = vec![st];
    let mut max_drift: f64 = 0.0;
    for a in coeffs {
        max_drift = max_drift.max(st.step(a, s)?.abs());
        if st.n.is_multiple_of(thin) {
            trace.push(st);
        }
    }
    Ok(PruferRun {
        trace,
        last: st,
        max_zeta_drift: max_drift,
    })
}

pub fn run(cfg: &VerblunskyConfig, s: &SpectralPoint, n: usize, thin: usize) -> PruferRun {
    run_from(cfg.coefficients().take(n), s, thin).expect("configuration keeps |α| < 1")
}

/// T = ⌈log(1/λ)/log|ϱ|⌉, at least 1.
pub fn default_horizon(lambda: f64, a: &ToralAutomorphism) -> usize {
    if lambda <= 0.0 || lambda >= 1.0 {
        return 1;
    }
    ((1.0 / lambda).ln() / a.rho().abs().ln()).ceil().max(1.0) as usize
}

/// The expansion terms for one orbit; all sums run over n = 0..N−1 (the
/// T-lagged ones over n = T..N−1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionDiagnostics {
    pub n: usize,
    pub t: usize,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub i6: f64,
    /// (1/2N)·log|φ_N|².
    pub lhs: f64,
    pub residual_123: f64,
    pub residual_456: f64,
}

impl ExpansionDiagnostics {
    pub const CSV_HEADER: &'static str = "N,T,I1,I2,I3,I4,I5,I6,lhs,residual_123,residual_456";
}

/// Written in terms of αₙ = λFₙ, so λ and the sign convention are absorbed:
///
/// I₁ = (1/2N)Σ|αₙ|², I₂ = −(1/N)ΣRe(ζₙαₙ), I₃ = −(1/2N)ΣRe(ζₙ²αₙ²),
/// I₄ = −(1/N)ΣRe(z^T ζₙ₋T αₙ), I₅ = (1/N)ΣΣₛ Re(zˢ ᾱₙ₋ₛ αₙ),
/// I₆ = −(1/N)ΣΣₛ Re(z^{2T−s} ζ²ₙ₋T αₙ₋ₛ αₙ), s = 1..T.
pub fn expansion_diagnostics_from(
    coeffs: &[Complex64],
    s: &SpectralPoint,
    t: usize,
) -> Result<ExpansionDiagnostics> {
    let n = coeffs.len();
    if t < 1 || t >= n {
        return Err(Error::InvalidQuery(format!(
            "horizon T = {t} must satisfy 1 ≤ T < N = {n}"
        )));
    }
    let mut st = PruferState::init(s);
    let mut zetas = Vec::with_capacity(n);
    let (mut i1, mut i2, mut i3) = (0.0, 0.0, 0.0);
    for &a in coeffs {
        let w = st.zeta * a;
        i1 += a.norm_sqr();
        i2 += w.re;
        i3 += (w * w).re;
        zetas.push(st.zeta);
        st.step(a, s)?;
    }
    let z = s.z();
    let zpow: Vec<Complex64> = (0..=2 * t).map(|k| z.powi(k as i32)).collect();
    let (mut i4, mut i5, mut i6) = (0.0, 0.0, 0.0);
    for m in t..n {
        let a = coeffs[m];
        let zt = zetas[m - t];
        i4 += (zpow[t] * zt * a).re;
        let zt2 = zt * zt;
        for sh in 1..=t {
            let b = coeffs[m - sh];
            i5 += (zpow[sh] * b.conj() * a).re;
            i6 += (zpow[2 * t - sh] * zt2 * b * a).re;
        }
    }
    let nf = n as f64;
    let i1 = i1 / (2.0 * nf);
    let i2 = -i2 / nf;
    let i3 = -i3 / (2.0 * nf);
    let i4 = -i4 / nf;
    let i5 = i5 / nf;
    let i6 = -i6 / nf;
    let lhs = st.log_r / nf;
    Ok(ExpansionDiagnostics {
        n,
        t,
        i1,
        i2,
        i3,
        i4,
        i5,
        i6,
        lhs,
        residual_123: (lhs - (i1 + i2 + i3)).abs(),
        residual_456: (i2 - (i4 + i5 + i6)).abs(),
    })
}

pub fn expansion_diagnostics(
    cfg: &VerblunskyConfig,
    s: &SpectralPoint,
    n: usize,
    t: usize,
) -> Result<ExpansionDiagnostics> {
    let coeffs: Vec<_> = cfg.coefficients().take(n).collect();
    expansion_diagnostics_from(&coeffs, s, t)
}
