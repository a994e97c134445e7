//! The determinant-one Szegő cocycle, overflow-safe transfer products, the
//! scalar recursion for (φ, φ*, ψ, ψ*) and finite-scale Lyapunov exponents.
//!
//! All matrix norms are operator (largest singular value) norms.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::verblunsky::{rho_of, VerblunskyConfig};

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];

#[inline]
pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[inline]
pub fn det(m: &Mat2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Largest singular value, in closed form.
pub fn spectral_norm(m: &Mat2) -> f64 {
    let f: f64 = m.iter().flatten().map(|c| c.norm_sqr()).sum();
    let d = det(m).norm();
    let disc = ((f - 2.0 * d) * (f + 2.0 * d)).max(0.0).sqrt();
    (0.5 * (f + disc)).sqrt()
}

fn max_entry(m: &Mat2) -> f64 {
    m.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
}

/// z = e^{iη} on the unit circle with the branch √z = e^{iη/2}, η ∈ [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    eta: f64,
    z: Complex64,
    sqrt_z: Complex64,
    flipped: bool,
}

impl SpectralPoint {
    pub fn new(eta: f64) -> Self {
        let eta = eta.rem_euclid(TAU);
        let eta = if eta >= TAU { 0.0 } else { eta };
        Self {
            eta,
            z: Complex64::from_polar(1.0, eta),
            sqrt_z: Complex64::from_polar(1.0, 0.5 * eta),
            flipped: false,
        }
    }

    /// The same z with the opposite square-root branch.
    pub fn flipped_branch(self) -> Self {
        Self {
            sqrt_z: -self.sqrt_z,
            flipped: !self.flipped,
            ..self
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn sqrt_z(&self) -> Complex64 {
        self.sqrt_z
    }

    /// √z^{−n}, with the angle reduced before exponentiation.
    pub fn sqrt_z_pow_neg(&self, n: usize) -> Complex64 {
        let c = Complex64::from_polar(1.0, (-(n as f64) * 0.5 * self.eta).rem_euclid(TAU));
        if self.flipped && n % 2 == 1 {
            -c
        } else {
            c
        }
    }
}

fn check_disk(alpha: Complex64) -> Result<()> {
    let r = alpha.norm();
    if r < 1.0 {
        Ok(())
    } else {
        Err(Error::CoefficientOutsideDisk(r))
    }
}

/// Aₙ = ρ⁻¹·[[√z, −ᾱ/√z], [−α√z, 1/√z]], determinant one.
pub fn step_matrix(alpha: Complex64, s: &SpectralPoint) -> Result<Mat2> {
    check_disk(alpha)?;
    Ok(step_unchecked(alpha, s))
}

#[inline]
fn step_unchecked(alpha: Complex64, s: &SpectralPoint) -> Mat2 {
    let inv_rho = 1.0 / rho_of(alpha);
    let w = s.sqrt_z;
    let wi = w.conj();
    [
        [w * inv_rho, -alpha.conj() * wi * inv_rho],
        [-alpha * w * inv_rho, wi * inv_rho],
    ]
}

/// A 2×2 product kept at unit scale: true product = e^{log_scale}·matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledProduct {
    matrix: Mat2,
    log_scale: f64,
    steps: usize,
}

impl Default for ScaledProduct {
    fn default() -> Self {
        Self::identity()
    }
}

impl ScaledProduct {
    pub fn identity() -> Self {
        Self {
            matrix: IDENTITY,
            log_scale: 0.0,
            steps: 0,
        }
    }

    /// M ← A·M, then rescale so the largest entry has modulus one.
    #[inline]
    pub fn push(&mut self, a: &Mat2) {
        let m = mat_mul(a, &self.matrix);
        let s = max_entry(&m);
        self.matrix = m.map(|row| row.map(|c| c / s));
        self.log_scale += s.ln();
        self.steps += 1;
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// log‖M‖ in the operator norm.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + spectral_norm(&self.matrix).ln()
    }

    /// log|det M|; zero for a product of determinant-one factors. Only
    /// informative while e^{−2·log_scale} is well above machine precision,
    /// since the normalized matrix becomes numerically rank one.
    pub fn log_abs_det(&self) -> f64 {
        2.0 * self.log_scale + det(&self.matrix).norm().ln()
    }

    /// The true product; overflows once log_scale exceeds ~700.
    pub fn recover(&self) -> Mat2 {
        let s = self.log_scale.exp();
        self.matrix.map(|row| row.map(|c| c * s))
    }
}

/// M_N = A_{N−1}⋯A₀ over the given coefficients.
pub fn transfer_from<I>(coeffs: I, s: &SpectralPoint) -> Result<ScaledProduct>
where
    I: IntoIterator<Item = Complex64>,
{
    let mut p = ScaledProduct::identity();
    for a in coeffs {
        check_disk(a)?;
        p.push(&step_unchecked(a, s));
    }
    Ok(p)
}

pub fn transfer(cfg: &VerblunskyConfig, s: &SpectralPoint, n: usize) -> ScaledProduct {
    transfer_from(cfg.coefficients().take(n), s).expect("configuration keeps |α| < 1")
}

/// (φ_N, φ*_N, ψ_N, ψ*_N) sharing the scale e^{log_r}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialQuad {
    pub log_r: f64,
    pub phi: Complex64,
    pub phi_star: Complex64,
    pub psi: Complex64,
    pub psi_star: Complex64,
    pub n: usize,
}

impl PolynomialQuad {
    pub fn initial() -> Self {
        Self {
            log_r: 0.0,
            phi: ONE,
            phi_star: ONE,
            psi: ONE,
            psi_star: ONE,
            n: 0,
        }
    }

    /// One Szegő step with coefficient α (ψ-pair uses −α).
    #[inline]
    pub fn step(&mut self, alpha: Complex64, z: Complex64) {
        let inv_rho = 1.0 / rho_of(alpha);
        let ac = alpha.conj();
        let (p, ps) = (self.phi, self.phi_star);
        let (q, qs) = (self.psi, self.psi_star);
        let phi = (z * p - ac * ps) * inv_rho;
        let phi_star = (ps - alpha * z * p) * inv_rho;
        let psi = (z * q + ac * qs) * inv_rho;
        let psi_star = (qs + alpha * z * q) * inv_rho;
        let s = phi
            .norm()
            .max(phi_star.norm())
            .max(psi.norm())
            .max(psi_star.norm());
        let inv = 1.0 / s;
        self.phi = phi * inv;
        self.phi_star = phi_star * inv;
        self.psi = psi * inv;
        self.psi_star = psi_star * inv;
        self.log_r += s.ln();
        self.n += 1;
    }

    pub fn log_abs_phi(&self) -> f64 {
        self.log_r + self.phi.norm().ln()
    }

    pub fn log_abs_psi(&self) -> f64 {
        self.log_r + self.psi.norm().ln()
    }

    /// Unscaled values; overflow for large log_r.
    pub fn values(&self) -> [Complex64; 4] {
        let s = self.log_r.exp();
        [self.phi, self.phi_star, self.psi, self.psi_star].map(|c| c * s)
    }
}

pub fn polynomials_from<I>(coeffs: I, s: &SpectralPoint) -> Result<PolynomialQuad>
where
    I: IntoIterator<Item = Complex64>,
{
    let mut q = PolynomialQuad::initial();
    for a in coeffs {
        check_disk(a)?;
        q.step(a, s.z);
    }
    Ok(q)
}

pub fn polynomials(cfg: &VerblunskyConfig, s: &SpectralPoint, n: usize) -> PolynomialQuad {
    polynomials_from(cfg.coefficients().take(n), s).expect("configuration keeps |α| < 1")
}

/// ‖M_N − z^{−N/2}·½[[φ+ψ, φ−ψ], [φ*−ψ*, φ*+ψ*]]‖ / ‖M_N‖.
pub fn transfer_identity_residual_from(coeffs: &[Complex64], s: &SpectralPoint) -> Result<f64> {
    let m = transfer_from(coeffs.iter().copied(), s)?;
    let q = polynomials_from(coeffs.iter().copied(), s)?;
    let c = s.sqrt_z_pow_neg(coeffs.len()) * 0.5 * (q.log_r - m.log_scale).exp();
    let rhs: Mat2 = [
        [(q.phi + q.psi) * c, (q.phi - q.psi) * c],
        [(q.phi_star - q.psi_star) * c, (q.phi_star + q.psi_star) * c],
    ];
    let lhs = m.matrix;
    let diff: Mat2 = std::array::from_fn(|i| std::array::from_fn(|j| lhs[i][j] - rhs[i][j]));
    Ok(spectral_norm(&diff) / spectral_norm(&lhs))
}

pub fn transfer_identity_residual(cfg: &VerblunskyConfig, s: &SpectralPoint, n: usize) -> f64 {
    let coeffs: Vec<_> = cfg.coefficients().take(n).collect();
    transfer_identity_residual_from(&coeffs, s).expect("configuration keeps |α| < 1")
}

/// L_N = (1/2N)·log(|φ_N|² + |ψ_N|²).
pub fn lyapunov_poly_from<I>(coeffs: I, s: &SpectralPoint) -> Result<f64>
where
    I: IntoIterator<Item = Complex64>,
{
    let q = polynomials_from(coeffs, s)?;
    assert!(q.n > 0, "need at least one coefficient");
    let log_sum = 2.0 * q.log_r + (q.phi.norm_sqr() + q.psi.norm_sqr()).ln();
    Ok(log_sum / (2.0 * q.n as f64))
}

pub fn lyapunov_poly(cfg: &VerblunskyConfig, s: &SpectralPoint, n: usize) -> f64 {
    lyapunov_poly_from(cfg.coefficients().take(n), s).expect("configuration keeps |α| < 1")
}

/// (1/N)·log‖M_N‖.
pub fn lyapunov_norm_from<I>(coeffs: I, s: &SpectralPoint) -> Result<f64>
where
    I: IntoIterator<Item = Complex64>,
{
    let m = transfer_from(coeffs, s)?;
    assert!(m.steps > 0, "need at least one coefficient");
    Ok(m.log_norm() / m.steps as f64)
}

pub fn lyapunov_norm(cfg: &VerblunskyConfig, s: &SpectralPoint, n: usize) -> f64 {
    lyapunov_norm_from(cfg.coefficients().take(n), s).expect("configuration keeps |α| < 1")
}
