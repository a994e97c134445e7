//! Finite-volume Green's functions G = (𝒞^{β,γ}_{[a,b]} − z)⁻¹: the direct
//! banded solve, the boundary-polynomial ratio formula for |G|, boundary
//! vectors and the reconstruction of solutions, and decay-rate profiles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::banded::BandLu;
use crate::cmv::{char_poly_recursion, FiniteCMV, LeftEdge};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, FitResult};
use crate::verblunsky::{rho_of, VerblunskyConfig};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Solves above this norm are treated as hitting the spectrum.
const BLOWUP_NORM: f64 = 1e12;

/// A Green's-function query on a truncation built from a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenQuery {
    pub cfg: VerblunskyConfig,
    pub a: usize,
    pub b: usize,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub z: Complex64,
    pub n1: usize,
    pub n2: usize,
}

impl GreenQuery {
    pub fn build(&self) -> Result<FiniteCMV> {
        FiniteCMV::build(&self.cfg, self.a, self.b, self.beta, self.gamma)
    }

    pub fn direct(&self) -> Result<Complex64> {
        green_direct(&self.build()?, self.z, self.n1, self.n2)
    }

    pub fn modulus_formula(&self) -> Result<f64> {
        green_modulus_formula(&self.build()?, self.z, self.n1, self.n2)
    }
}

const UNIT_CIRCLE_TOL: f64 = 1e-12;

/// A factored 𝒞 − z for repeated column solves.
pub struct Resolvent<'a> {
    cmv: &'a FiniteCMV,
    z: Complex64,
    lu: BandLu,
}

impl<'a> Resolvent<'a> {
    pub fn new(cmv: &'a FiniteCMV, z: Complex64) -> Result<Self> {
        let mut s = cmv.matrix().clone();
        s.add_diagonal(-z);
        let lu = s.lu();
        if lu.is_singular() {
            return Err(Error::ResolventBlowup { distance: 0.0 });
        }
        Ok(Self { cmv, z, lu })
    }

    /// Column G(·, n) in local indices (offset a).
    pub fn column(&self, n: usize) -> Result<Vec<Complex64>> {
        let (a, b) = self.cmv.interval();
        if !(a..=b).contains(&n) {
            return Err(Error::InvalidQuery(format!("index {n} outside [{a}, {b}]")));
        }
        let m = self.cmv.dim();
        let mut e = vec![ZERO; m];
        e[n - a] = ONE;
        let u = self.lu.solve(&e)?;
        let norm = u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > BLOWUP_NORM {
            return Err(Error::ResolventBlowup {
                distance: 1.0 / norm,
            });
        }
        // relative residual of the solve
        let cu = self.cmv.apply(&u)?;
        let res = cu
            .iter()
            .zip(&u)
            .zip(&e)
            .map(|((x, y), t)| (x - self.z * y - t).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = (1.0 + self.z.norm()) * norm;
        if res > 1e-10 * scale.max(1.0) {
            return Err(Error::ResolventBlowup {
                distance: 1.0 / norm,
            });
        }
        Ok(u)
    }

    pub fn entry(&self, n1: usize, n2: usize) -> Result<Complex64> {
        let (a, b) = self.cmv.interval();
        if !(a..=b).contains(&n1) {
            return Err(Error::InvalidQuery(format!("index {n1} outside [{a}, {b}]")));
        }
        Ok(self.column(n2)?[n1 - a])
    }
}

/// G(n₁, n₂) by a banded solve of (𝒞 − z)u = e_{n₂}; global indices.
pub fn green_direct(cmv: &FiniteCMV, z: Complex64, n1: usize, n2: usize) -> Result<Complex64> {
    Resolvent::new(cmv, z)?.entry(n1, n2)
}

/// |G(n₁, n₂)| = |Φ^{β,·}_{[a,lo−1]}·Φ^{·,γ}_{[hi+1,b]} / Φ^{β,γ}_{[a,b]}|·ρ_lo⋯ρ_{hi−1}
/// with lo = min(n₁, n₂), hi = max(n₁, n₂); equivalently
/// (1/ρ_hi)·|φ^{β,·}φ^{·,γ}/φ^{β,γ}| in normalized polynomials. "·" marks an
/// unmodified edge. Queries with hi = b are rejected since ρᵦ = 0 there.
///
/// The identity holds for z on the unit circle only; other z are rejected.
pub fn green_modulus_formula(cmv: &FiniteCMV, z: Complex64, n1: usize, n2: usize) -> Result<f64> {
    if (z.norm() - 1.0).abs() > UNIT_CIRCLE_TOL {
        return Err(Error::InvalidQuery(format!(
            "|z| = {} is off the unit circle",
            z.norm()
        )));
    }
    let (a, b) = cmv.interval();
    let (lo, hi) = (n1.min(n2), n1.max(n2));
    if lo < a || hi > b {
        return Err(Error::InvalidQuery(format!(
            "({n1}, {n2}) outside [{a}, {b}]"
        )));
    }
    if hi == b {
        return Err(Error::InvalidQuery(format!(
            "index {b} carries the unimodular coefficient; 1/rho is undefined there"
        )));
    }
    let alpha = |j: usize| cmv.raw_coefficient(j);
    let left_edge = if a == 0 {
        LeftEdge::HalfLine
    } else {
        LeftEdge::Straddle(cmv.beta())
    };
    let left = if lo == a {
        0.0
    } else {
        let inner: Vec<_> = (a..lo - 1).map(alpha).collect();
        char_poly_recursion(&inner, left_edge, Some(alpha(lo - 1)), z).log_abs
    };
    let inner: Vec<_> = (hi + 1..b).map(alpha).collect();
    let right =
        char_poly_recursion(&inner, LeftEdge::Straddle(alpha(hi)), Some(cmv.gamma()), z).log_abs;
    let full = cmv.char_poly(z).log_abs;
    if !full.is_finite() {
        return Err(Error::ResolventBlowup { distance: 0.0 });
    }
    let rho_sum: f64 = (lo..hi).map(|j| rho_of(alpha(j)).ln()).sum();
    Ok((left + right - full + rho_sum).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Left,
    Right,
}

/// Which boundary-vector formulas to use in the reconstruction identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryConvention {
    /// The case formulas as commonly displayed:
    /// a even: (zβ̄ − αₐ)ξ(a) − ρₐξ(a+1); a odd: (zαₐ − β)ξ(a) + zρₐξ(a+1);
    /// b even: (zγ̄ − αᵦ)ξ(b) − ρᵦξ(b−1); b odd: (zαᵦ − γ)ξ(b) + zρ_{b−1}ξ(b−1).
    Displayed,
    /// Formulas derived from the ℒℳ truncation used here, for which
    /// ξ(n) = G(n,a)ξ̃(a) + G(n,b)ξ̃(b) holds exactly for a < n < b.
    Factorized,
}

/// ξ̃ at one endpoint. `xi` and `alphas` are indexed globally and must cover
/// the endpoint and its inward neighbour.
pub fn boundary_vector(
    xi: &[Complex64],
    alphas: &[Complex64],
    endpoint: Endpoint,
    n: usize,
    bdata: Complex64,
    z: Complex64,
    convention: BoundaryConvention,
) -> Complex64 {
    let rho = |j: usize| rho_of(alphas[j]);
    let even = n.is_multiple_of(2);
    match (convention, endpoint) {
        (BoundaryConvention::Displayed, Endpoint::Left) => {
            let al = alphas[n];
            if even {
                (z * bdata.conj() - al) * xi[n] - rho(n) * xi[n + 1]
            } else {
                (z * al - bdata) * xi[n] + z * rho(n) * xi[n + 1]
            }
        }
        (BoundaryConvention::Displayed, Endpoint::Right) => {
            let al = alphas[n];
            if even {
                (z * bdata.conj() - al) * xi[n] - rho(n) * xi[n - 1]
            } else {
                (z * al - bdata) * xi[n] + z * rho(n - 1) * xi[n - 1]
            }
        }
        (BoundaryConvention::Factorized, Endpoint::Left) => {
            let (al, r) = (alphas[n], rho(n));
            let bc = bdata.conj();
            if n == 0 {
                ZERO
            } else if even {
                z * ((ONE + z * bc * al) * xi[n] + z * bc * r * xi[n + 1])
            } else {
                -(z + bdata * al.conj()) * xi[n] - bdata * r * xi[n + 1]
            }
        }
        (BoundaryConvention::Factorized, Endpoint::Right) => {
            let (al, r) = (alphas[n - 1], rho(n - 1));
            if even {
                bdata.conj() * (r * xi[n - 1] - al * xi[n]) - z * xi[n]
            } else {
                z * ((ONE + z * bdata * al.conj()) * xi[n] - z * bdata * r * xi[n - 1])
            }
        }
    }
}

/// max over a < n < b of |ξ(n) − G(n,a)ξ̃(a) − G(n,b)ξ̃(b)| / ‖ξ|_{[a,b]}‖.
#[allow(clippy::too_many_arguments)]
pub fn reconstruction_residual(
    alphas: &[Complex64],
    z: Complex64,
    a: usize,
    b: usize,
    beta: Complex64,
    gamma: Complex64,
    xi: &[Complex64],
    convention: BoundaryConvention,
) -> Result<f64> {
    if b < a + 2 || b >= xi.len() || b >= alphas.len() {
        return Err(Error::InvalidInterval(a, b));
    }
    let norm = xi[a..=b].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let start = a.saturating_sub(1);
    let cmv = FiniteCMV::from_raw(&alphas[start..=b], a, b, beta, gamma)?;
    let res = Resolvent::new(&cmv, z)?;
    let (ga, gb) = (res.column(a)?, res.column(b)?);
    let xa = boundary_vector(xi, alphas, Endpoint::Left, a, beta, z, convention);
    let xb = boundary_vector(xi, alphas, Endpoint::Right, b, gamma, z, convention);
    // G(n, a) is row n of column a
    let worst = (a + 1..b)
        .map(|n| (xi[n] - ga[n - a] * xa - gb[n - a] * xb).norm())
        .fold(0.0, f64::max);
    Ok(worst / norm)
}

/// Decay fit of log|G(n₁, n₂)| against |n₁ − n₂|; `fit.slope` is minus the
/// decay rate, reported positive in `rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub rate: f64,
    pub fit: FitResult,
    /// (n₁, n₂, log|G|) rows.
    pub rows: Vec<(usize, usize, f64)>,
}

impl DecayProfile {
    pub const CSV_HEADER: &'static str = "n1,n2,log_abs_G";
}

/// Samples columns n₂ ∈ {N/4, N/2, 3N/4} and rows n₁ over [5, N−5].
pub fn decay_profile(
    cfg: &VerblunskyConfig,
    z: Complex64,
    n: usize,
    beta: Complex64,
    gamma: Complex64,
) -> Result<DecayProfile> {
    let cmv = FiniteCMV::build(cfg, 0, n, beta, gamma)?;
    decay_profile_of(&cmv, z)
}

pub fn decay_profile_of(cmv: &FiniteCMV, z: Complex64) -> Result<DecayProfile> {
    let (a, b) = cmv.interval();
    let m = b - a;
    let res = Resolvent::new(cmv, z)?;
    let stride = (m / 100).max(1);
    let mut rows = Vec::new();
    for n2 in [a + m / 4, a + m / 2, a + 3 * m / 4] {
        let col = match res.column(n2) {
            Ok(c) => c,
            Err(Error::ResolventBlowup { .. }) => continue,
            Err(e) => return Err(e),
        };
        let lo = (a + 5).min(b);
        let hi = b.saturating_sub(5).max(lo);
        for n1 in (lo..=hi).step_by(stride) {
            let g = col[n1 - a].norm();
            if g > 0.0 && n1 != n2 {
                rows.push((n1, n2, g.ln()));
            }
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0.abs_diff(r.1) as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let fit = linear_fit(&xs, &ys, 10)?;
    Ok(DecayProfile {
        rate: -fit.slope,
        fit,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmv::EigenEngine;
    use crate::sampling::TrigPolynomial;
    use crate::verblunsky::random_point;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn random_raw(len: usize, r: f64, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| Complex64::from_polar(rng.random_range(0.0..r), rng.random_range(0.0..TAU)))
            .collect()
    }

    #[test]
    fn direct_matches_dense_inverse() {
        let c = FiniteCMV::from_raw(&[ZERO; 3], 0, 2, ONE, ONE).unwrap();
        let z = Complex64::new(2.0, 0.0);
        let inv = (c.to_dense() - DMatrix::identity(3, 3) * z).try_inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((green_direct(&c, z, i, j).unwrap() - inv[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn formula_matches_direct_both_orders() {
        for (a, b, seed) in [(0, 12, 1), (0, 15, 2), (3, 20, 3), (4, 17, 4)] {
            let raw = random_raw(b + 1 - usize::saturating_sub(a, 1), 0.7, seed);
            let c = FiniteCMV::from_raw(&raw, a, b, Complex64::from_polar(1.0, 0.5), Complex64::from_polar(1.0, -1.0)).unwrap();
            let z = Complex64::from_polar(1.0, 1.234);
            for n1 in a..b {
                for n2 in a..b {
                    let d = green_direct(&c, z, n1, n2).unwrap().norm();
                    let f = green_modulus_formula(&c, z, n1, n2).unwrap();
                    assert!((d - f).abs() <= 1e-9 * d, "[{a},{b}] ({n1},{n2}) {d} {f}");
                }
            }
            assert!(green_modulus_formula(&c, z, a, b).is_err());
            assert!(green_modulus_formula(&c, z * 0.9, a, a + 1).is_err());
        }
    }

    #[test]
    fn resolvent_bound() {
        let raw = random_raw(30, 0.5, 7);
        let c = FiniteCMV::from_raw(&raw, 0, 29, ONE, ONE).unwrap();
        let eig = c.eigenpairs(EigenEngine::Dense, 1e-8).unwrap();
        let z = Complex64::from_polar(1.0, 0.77);
        let dist = eig.iter().map(|e| (e.z - z).norm()).fold(f64::INFINITY, f64::min);
        for n in [0, 10, 28] {
            assert!(green_direct(&c, z, n, n).unwrap().norm() <= 1.0 / dist + 1e-10);
        }
        assert!(matches!(
            green_direct(&c, eig[4].z, 3, 3),
            Err(Error::ResolventBlowup { .. })
        ));
    }

    #[test]
    fn displayed_boundary_examples() {
        let z = Complex64::new(0.6, 0.8);
        let xi = [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25), Complex64::new(3.0, 0.0)];
        let alphas = [ZERO; 3];
        let d = BoundaryConvention::Displayed;
        let left = boundary_vector(&xi, &alphas, Endpoint::Left, 0, ONE, z, d);
        assert!((left - (z * xi[0] - xi[1])).norm() < 1e-15);
        let right = boundary_vector(&xi, &alphas, Endpoint::Right, 1, ONE, z, d);
        assert!((right - (-xi[1] + z * xi[0])).norm() < 1e-15);
        let zeros = [ZERO; 3];
        for conv in [d, BoundaryConvention::Factorized] {
            assert_eq!(boundary_vector(&zeros, &alphas, Endpoint::Left, 1, ONE, z, conv), ZERO);
            assert_eq!(boundary_vector(&zeros, &alphas, Endpoint::Right, 2, ONE, z, conv), ZERO);
        }
    }

    #[test]
    fn reconstruction_of_eigenvectors() {
        let m = 40;
        let raw = random_raw(2 * m + 1, 0.6, 21);
        let big = FiniteCMV::from_raw(&raw, 0, 2 * m, ONE, ONE).unwrap();
        let eig = big.eigenpairs(EigenEngine::Dense, 1e-10).unwrap();
        let beta = Complex64::from_polar(1.0, 0.4);
        let gamma = Complex64::from_polar(1.0, 1.9);
        for (a, b) in [(m / 2, 3 * m / 2), (m / 2 + 1, 3 * m / 2 + 1), (0, m), (m / 2 + 1, 3 * m / 2)] {
            for k in [3, 30, 61] {
                let r = reconstruction_residual(&raw, eig[k].z, a, b, beta, gamma, &eig[k].vector, BoundaryConvention::Factorized).unwrap();
                assert!(r <= 1e-6, "[{a},{b}] k={k}: {r}");
            }
        }
        // a vector that does not solve the equation
        let junk: Vec<_> = (0..=2 * m).map(|i| Complex64::new(1.0, (i as f64).cos())).collect();
        let r = reconstruction_residual(&raw, eig[5].z, m / 2, 3 * m / 2, beta, gamma, &junk, BoundaryConvention::Factorized).unwrap();
        assert!(r > 1e-2);
        let zero = vec![ZERO; 2 * m + 1];
        assert_eq!(reconstruction_residual(&raw, eig[5].z, m / 2, 3 * m / 2, beta, gamma, &zero, BoundaryConvention::Displayed).unwrap(), 0.0);
    }

    #[test]
    fn decay_profiles() {
        let cfg = VerblunskyConfig::cat(0.5, random_point(42), TrigPolynomial::alpha0()).unwrap();
        let z = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 + 0.013);
        let p = decay_profile(&cfg, z, 300, ONE, ONE).unwrap();
        assert!(p.rate > 0.0);
        assert!((0.0..=1.0).contains(&p.fit.r2));
        let free = VerblunskyConfig::cat(0.0, random_point(42), TrigPolynomial::alpha0()).unwrap();
        // the free spectrum consists of m-th roots of a unimodular number;
        // pick z halfway between two of them
        let c = FiniteCMV::build(&free, 0, 60, ONE, ONE).unwrap();
        let eig = c.eigenpairs(EigenEngine::Dense, 1e-8).unwrap();
        let mid = (eig[10].eta + eig[11].eta) / 2.0;
        let p = decay_profile_of(&c, Complex64::from_polar(1.0, mid)).unwrap();
        assert!(p.rate.abs() < 0.01, "{}", p.rate);
    }
}
