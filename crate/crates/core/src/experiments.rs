//! Desk-scale experiments: Lyapunov asymptotics L ≈ λ²𝒥(η)/2, large
//! deviation fractions, and eigenfunction localization.
//!
//! Every random base point comes from a seed derived from (master seed, cell,
//! sample) alone, and parallel results are collected in index order, so
//! outputs do not depend on the worker count.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cmv::{EigenEngine, FiniteCMV};
use crate::cocycle::{lyapunov_norm, lyapunov_poly, SpectralPoint};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, FitResult};
use crate::prufer::{default_horizon, expansion_diagnostics};
use crate::sampling::{spectral_window, CorrelationSpectrum, EtaInterval, TrigPolynomial};
use crate::torus::{ToralAutomorphism, TorusPoint};
use crate::verblunsky::{random_point, VerblunskyConfig};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one sample of one cell.
pub fn derive_seed(master: u64, cell: u64, sample: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ sample.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn base_point(master: u64, cell: u64, sample: u64) -> TorusPoint {
    random_point(derive_seed(master, cell, sample))
}

/// Maps `f` over `0..n` with up to `jobs` workers; results in index order.
pub fn par_map<T, F>(n: usize, jobs: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let run = || (0..n).into_par_iter().map(&f).collect();
        match jobs {
            Some(1) => (0..n).map(&f).collect(),
            Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
                Ok(pool) => pool.install(run),
                Err(_) => (0..n).map(&f).collect(),
            },
            None => run(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        (0..n).map(f).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub automorphism: ToralAutomorphism,
    pub alpha: TrigPolynomial,
    pub lambdas: Vec<f64>,
    pub etas: Vec<f64>,
    pub ns: Vec<usize>,
    /// Monte Carlo samples M per cell.
    pub samples: usize,
    /// Base points R averaged per Lyapunov cell.
    pub base_points: usize,
    pub master_seed: u64,
    /// Worker count; `None` uses all available cores.
    pub jobs: Option<usize>,
    /// Minimal distance of every η from {0, π}.
    pub delta: f64,
    /// Spectral-window threshold c in 𝒥(η) > c.
    pub window_c: f64,
    pub beta: Complex64,
    pub gamma: Complex64,
    /// Deviation threshold; λ³ when unset.
    pub threshold: Option<f64>,
    /// Prüfer horizon T; ⌈log(1/λ)/log ϱ⌉ when unset.
    pub horizon: Option<usize>,
    /// Orbit length for the Lyapunov estimate compared with decay rates.
    pub lyapunov_len: usize,
    /// Base point for single-orbit experiments; derived from the seed when unset.
    pub base: Option<TorusPoint>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            automorphism: ToralAutomorphism::cat_map(),
            alpha: TrigPolynomial::alpha0(),
            lambdas: vec![0.1],
            etas: vec![PI / 2.0],
            ns: vec![1000],
            samples: 1000,
            base_points: 8,
            master_seed: 0,
            jobs: None,
            delta: 0.1,
            window_c: 0.25,
            beta: Complex64::new(1.0, 0.0),
            gamma: Complex64::new(1.0, 0.0),
            threshold: None,
            horizon: None,
            lyapunov_len: 100_000,
            base: None,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.lambdas.is_empty() || self.etas.is_empty() || self.ns.is_empty() {
            return bad("lambda, eta and N grids must be nonempty".into());
        }
        for &l in &self.lambdas {
            if !(l >= 0.0 && l * self.alpha.sup_bound() < 1.0) {
                return bad(format!("lambda = {l}: need 0 <= lambda * sup_bound < 1"));
            }
        }
        for &e in &self.etas {
            let e = e.rem_euclid(2.0 * PI);
            let d = e.min((e - PI).abs()).min(2.0 * PI - e);
            if d < self.delta {
                return bad(format!("eta = {e} lies within delta = {} of {{0, pi}}", self.delta));
            }
        }
        if self.ns.contains(&0) {
            return bad("N must be positive".into());
        }
        if self.samples == 0 || self.base_points == 0 {
            return bad("samples and base_points must be positive".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        Ok(())
    }

    fn config(&self, lambda: f64, base: TorusPoint) -> Result<VerblunskyConfig> {
        VerblunskyConfig::new(lambda, base, self.automorphism.clone(), self.alpha.clone())
    }

    pub fn single_base(&self) -> TorusPoint {
        self.base
            .unwrap_or_else(|| base_point(self.master_seed, 0, 0))
    }

    pub fn spectrum(&self) -> Result<CorrelationSpectrum> {
        CorrelationSpectrum::new(&self.alpha, &self.automorphism)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRow {
    pub lambda: f64,
    pub eta: f64,
    pub n: usize,
    /// Mean of (1/2N)log(|φ_N|² + |ψ_N|²) over the base points.
    pub l_n: f64,
    /// Mean of (1/N)log‖M_N‖ over the same base points.
    pub l_norm: f64,
    pub prediction: f64,
    pub residual: f64,
    /// Standard error of l_n across base points; absent for R = 1.
    pub l_n_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovScaling {
    pub rows: Vec<LyapunovRow>,
    /// log(median residual) against log λ, over the distinct λ.
    pub fit: Option<FitResult>,
}

pub fn lyapunov_scaling(plan: &ExperimentPlan) -> Result<LyapunovScaling> {
    plan.validate()?;
    let spectrum = plan.spectrum()?;
    let mut cells = Vec::new();
    for &lambda in &plan.lambdas {
        for &eta in &plan.etas {
            for &n in &plan.ns {
                cells.push((lambda, eta, n));
            }
        }
    }
    let r = plan.base_points;
    let values = par_map(cells.len() * r, plan.jobs, |k| -> Result<(f64, f64)> {
        let (ci, si) = (k / r, k % r);
        let (lambda, eta, n) = cells[ci];
        let cfg = plan.config(lambda, base_point(plan.master_seed, ci as u64, si as u64))?;
        let s = SpectralPoint::new(eta);
        Ok((lyapunov_poly(&cfg, &s, n), lyapunov_norm(&cfg, &s, n)))
    });
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(cells.len());
    for (ci, &(lambda, eta, n)) in cells.iter().enumerate() {
        let vals = &values[ci * r..(ci + 1) * r];
        let rf = r as f64;
        let l_n = vals.iter().map(|v| v.0).sum::<f64>() / rf;
        let l_norm = vals.iter().map(|v| v.1).sum::<f64>() / rf;
        let l_n_se = (r > 1).then(|| {
            (vals.iter().map(|v| (v.0 - l_n).powi(2)).sum::<f64>() / (rf - 1.0) / rf).sqrt()
        });
        let prediction = lambda * lambda * spectrum.evaluate(eta)? / 2.0;
        rows.push(LyapunovRow {
            lambda,
            eta,
            n,
            l_n,
            l_norm,
            prediction,
            residual: (l_n - prediction).abs(),
            l_n_se,
        });
    }
    let mut lambdas = plan.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &l in &lambdas {
        let mut res: Vec<f64> = rows
            .iter()
            .filter(|row| row.lambda == l)
            .map(|row| row.residual)
            .collect();
        let med = median(&mut res);
        if l > 0.0 && med > 0.0 {
            xs.push(l.ln());
            ys.push(med.ln());
        }
    }
    let fit = linear_fit(&xs, &ys, 2).ok();
    Ok(LyapunovScaling { rows, fit })
}

/// Median; NaN for an empty slice.
pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// p-th empirical quantile by nearest rank.
fn quantile(v: &mut [f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

/// One-sided 95% Clopper–Pearson upper bound for zero successes in m trials.
pub fn zero_count_upper_bound(m: usize) -> f64 {
    1.0 - 0.05f64.powf(1.0 / m as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeviationEvent {
    /// |(1/N)Σ Fₙ| > δ for the unscaled sampling function.
    Birkhoff { delta: f64 },
    /// |L_N − λ²𝒥(η)/2| > threshold at the plan's first λ and η.
    Lyapunov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdtRow {
    pub family: String,
    pub n: usize,
    pub samples: usize,
    pub count: usize,
    pub fraction: f64,
    /// Equal to `fraction` unless the count is zero, then the 95% bound.
    pub upper_bound: f64,
    pub threshold: f64,
    /// 95th percentile of the deviation statistic, for calibration.
    pub p95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdtResult {
    pub family: String,
    pub rows: Vec<LdtRow>,
    /// log(fraction) against N over the cells with nonzero counts.
    pub fit: Option<FitResult>,
    pub strictly_decreasing: bool,
}

fn summarize(family: &str, ns: &[usize], devs: Vec<Vec<f64>>, threshold: f64) -> LdtResult {
    let mut rows = Vec::new();
    for (&n, mut d) in ns.iter().zip(devs) {
        let m = d.len();
        let count = d.iter().filter(|&&x| x > threshold).count();
        let fraction = count as f64 / m as f64;
        let upper_bound = if count == 0 {
            zero_count_upper_bound(m)
        } else {
            fraction
        };
        rows.push(LdtRow {
            family: family.to_string(),
            n,
            samples: m,
            count,
            fraction,
            upper_bound,
            threshold,
            p95: quantile(&mut d, 0.95),
        });
    }
    let nz: Vec<_> = rows.iter().filter(|r| r.count > 0).collect();
    let xs: Vec<f64> = nz.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = nz.iter().map(|r| r.fraction.ln()).collect();
    let fit = linear_fit(&xs, &ys, 2).ok();
    let strictly_decreasing = rows.windows(2).all(|w| w[1].fraction < w[0].fraction);
    LdtResult {
        family: family.to_string(),
        rows,
        fit,
        strictly_decreasing,
    }
}

/// Empirical measure of base points in the deviation event, per N.
pub fn ldt_deviation(plan: &ExperimentPlan, event: DeviationEvent) -> Result<LdtResult> {
    plan.validate()?;
    let m = plan.samples;
    let lambda = plan.lambdas[0];
    let eta = plan.etas[0];
    let (family, threshold) = match event {
        DeviationEvent::Birkhoff { delta } => ("birkhoff", delta),
        DeviationEvent::Lyapunov => ("lyapunov", plan.threshold.unwrap_or(lambda.powi(3))),
    };
    let prediction = lambda * lambda * plan.spectrum()?.evaluate(eta)? / 2.0;
    let mut devs = Vec::with_capacity(plan.ns.len());
    for (ci, &n) in plan.ns.iter().enumerate() {
        let d = par_map(m, plan.jobs, |k| -> Result<f64> {
            let p = base_point(plan.master_seed, ci as u64, k as u64);
            Ok(match event {
                DeviationEvent::Birkhoff { .. } => {
                    let sum: Complex64 = plan
                        .automorphism
                        .orbit(p)
                        .take(n)
                        .map(|q| plan.alpha.evaluate(q))
                        .sum();
                    (sum / n as f64).norm()
                }
                DeviationEvent::Lyapunov => {
                    let cfg = plan.config(lambda, p)?;
                    (lyapunov_poly(&cfg, &SpectralPoint::new(eta), n) - prediction).abs()
                }
            })
        });
        devs.push(d.into_iter().collect::<Result<Vec<_>>>()?);
    }
    Ok(summarize(family, &plan.ns, devs, threshold))
}

/// The Prüfer-expansion term families and their deviation statistics.
pub const TERM_FAMILIES: [&str; 4] = ["I1", "I3", "I4", "I5"];

/// Deviation fractions of the expansion terms from their limits, per N:
/// I₁ from (λ²/2)⟨|F|²⟩, I₃ and I₄ from 0, I₅ from
/// λ²Σₛ Re(zˢ⟨F̄₀Fₛ⟩)·(N−T)/N.
pub fn prufer_term_ldt(plan: &ExperimentPlan) -> Result<Vec<LdtResult>> {
    plan.validate()?;
    let m = plan.samples;
    let lambda = plan.lambdas[0];
    let s = SpectralPoint::new(plan.etas[0]);
    let threshold = plan.threshold.unwrap_or(lambda.powi(3));
    let t = plan
        .horizon
        .unwrap_or_else(|| default_horizon(lambda, &plan.automorphism));
    let spectrum = plan.spectrum()?;
    let mean_sq = plan.alpha.mean_square();
    let lag_sum: f64 = (1..=t)
        .map(|sh| (s.z().powi(sh as i32) * spectrum.correlation(sh as i64)).re)
        .sum();
    let mut per_family: Vec<Vec<Vec<f64>>> = vec![Vec::new(); TERM_FAMILIES.len()];
    for (ci, &n) in plan.ns.iter().enumerate() {
        if n <= t {
            return Err(Error::Config(format!("N = {n} must exceed the horizon T = {t}")));
        }
        let d = par_map(m, plan.jobs, |k| -> Result<[f64; 4]> {
            let cfg = plan.config(lambda, base_point(plan.master_seed, ci as u64, k as u64))?;
            let e = expansion_diagnostics(&cfg, &s, n, t)?;
            let i5_limit = lambda * lambda * lag_sum * (n - t) as f64 / n as f64;
            Ok([
                (e.i1 - lambda * lambda * mean_sq / 2.0).abs(),
                e.i3.abs(),
                e.i4.abs(),
                (e.i5 - i5_limit).abs(),
            ])
        });
        let d = d.into_iter().collect::<Result<Vec<_>>>()?;
        for (f, fam) in per_family.iter_mut().enumerate() {
            fam.push(d.iter().map(|x| x[f]).collect());
        }
    }
    Ok(TERM_FAMILIES
        .iter()
        .zip(per_family)
        .map(|(name, devs)| summarize(name, &plan.ns, devs, threshold))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub eta: f64,
    pub peak: usize,
    pub decay_rate: f64,
    pub r2: f64,
    /// 1/decay_rate, absent unless the rate is positive.
    pub localization_length: Option<f64>,
    pub lyapunov: f64,
    /// decay_rate / lyapunov, absent unless finite.
    pub ratio: Option<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub lambda: f64,
    pub n: usize,
    pub window: Vec<EtaInterval>,
    pub rows: Vec<LocalizationRow>,
    pub median_ratio: Option<f64>,
    /// Fraction of rows with r² ≥ 0.8 and positive decay rate.
    pub good_fraction: Option<f64>,
}

impl LocalizationResult {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Sites within this distance of either end are left out of decay fits.
pub const BOUNDARY_DISCARD: usize = 5;

/// Fits log|ξ(n)| against |n − peak| from the peak outward.
pub fn eigenvector_decay(xi: &[Complex64]) -> Result<(usize, FitResult)> {
    let m = xi.len();
    if m <= 2 * BOUNDARY_DISCARD + 2 {
        return Err(Error::InsufficientData {
            needed: 2 * BOUNDARY_DISCARD + 3,
            got: m,
        });
    }
    let lo = BOUNDARY_DISCARD;
    let hi = m - 1 - BOUNDARY_DISCARD;
    let peak = (lo..=hi)
        .max_by(|&i, &j| xi[i].norm().total_cmp(&xi[j].norm()))
        .expect("nonempty range");
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (n, c) in xi.iter().enumerate().take(hi + 1).skip(lo) {
        let v = c.norm();
        if v > 0.0 {
            xs.push(n.abs_diff(peak) as f64);
            ys.push(v.ln());
        }
    }
    Ok((peak, linear_fit(&xs, &ys, 10)?))
}

/// Eigenpairs of 𝒞^{β,γ}_{[0,N]} with η in the spectral window, with their
/// decay fits and Lyapunov exponents at the same (λ, η). Uses the first λ,
/// first N and the plan's first base point.
pub fn localization(plan: &ExperimentPlan) -> Result<LocalizationResult> {
    plan.validate()?;
    let lambda = plan.lambdas[0];
    let n = plan.ns[0];
    let window = spectral_window(&plan.spectrum()?, plan.delta, plan.window_c)?;
    let cfg = plan.config(lambda, plan.single_base())?;
    let cmv = FiniteCMV::build(&cfg, 0, n, plan.beta, plan.gamma)?;
    let inside = |eta: f64| window.iter().any(|&(lo, hi)| eta >= lo && eta <= hi);
    let pairs: Vec<_> = if window.is_empty() {
        Vec::new()
    } else {
        cmv.eigenpairs(EigenEngine::Dense, 1e-8)?
            .into_iter()
            .filter(|p| inside(p.eta))
            .collect()
    };
    let rows = par_map(pairs.len(), plan.jobs, |k| -> Result<LocalizationRow> {
        let p = &pairs[k];
        let (peak, fit) = eigenvector_decay(&p.vector)?;
        let rate = -fit.slope;
        let lyap = lyapunov_poly(&cfg, &SpectralPoint::new(p.eta), plan.lyapunov_len);
        Ok(LocalizationRow {
            eta: p.eta,
            peak,
            decay_rate: rate,
            r2: fit.r2,
            localization_length: (rate > 0.0).then(|| 1.0 / rate),
            lyapunov: lyap,
            ratio: Some(rate / lyap).filter(|r| r.is_finite()),
            residual: p.residual,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let good = rows.iter().filter(|r| r.r2 >= 0.8 && r.decay_rate > 0.0).count();
    Ok(LocalizationResult {
        lambda,
        n,
        window,
        median_ratio: Some(median(&mut ratios)).filter(|m| m.is_finite()),
        good_fraction: (!rows.is_empty()).then(|| good as f64 / rows.len() as f64),
        rows,
    })
}
