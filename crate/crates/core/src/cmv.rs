//! Finite CMV truncations 𝒞^{β,γ}_{[a,b]} = ℒℳ built from Θ-blocks, their
//! characteristic polynomials and eigenpairs.
//!
//! Index convention: the block Θⱼ acts on sites (j, j+1); ℒ collects the even
//! blocks and ℳ the odd ones, with ℳ starting 1 ⊕ Θ₁ ⊕ … on the half line.
//! On [a, b] the coefficient of the block straddling (a−1, a) is replaced by
//! β (only when a ≥ 1) and αᵦ by γ, so both edge blocks restrict to unimodular
//! 1×1 entries (−β at (a, a), γ̄ at (b, b)) and the truncation is unitary.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::verblunsky::{rho_of, VerblunskyConfig};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Hard limit for the dense eigensolver.
pub const DENSE_LIMIT: usize = 5000;

/// Θ = [[ᾱ, ρ], [ρ, −α]].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBlock {
    pub alpha: Complex64,
}

impl ThetaBlock {
    pub fn rho(&self) -> f64 {
        rho_of(self.alpha)
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let r = Complex64::new(self.rho(), 0.0);
        [[self.alpha.conj(), r], [r, -self.alpha]]
    }
}

/// A complex number stored as log-modulus and unit phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_abs: f64,
    pub phase: Complex64,
}

impl LogComplex {
    pub fn one() -> Self {
        Self {
            log_abs: 0.0,
            phase: ONE,
        }
    }

    pub fn from_complex(c: Complex64) -> Self {
        let m = c.norm();
        if m == 0.0 {
            Self {
                log_abs: f64::NEG_INFINITY,
                phase: ZERO,
            }
        } else {
            Self {
                log_abs: m.ln(),
                phase: c / m,
            }
        }
    }

    /// Overflows for log_abs above ~709.
    pub fn value(&self) -> Complex64 {
        self.phase * self.log_abs.exp()
    }
}

impl std::ops::Mul for LogComplex {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        Self {
            log_abs: self.log_abs + o.log_abs,
            phase: self.phase * o.phase,
        }
    }
}

impl std::ops::Div for LogComplex {
    type Output = Self;

    fn div(self, o: Self) -> Self {
        Self {
            log_abs: self.log_abs - o.log_abs,
            phase: self.phase * o.phase.conj(),
        }
    }
}

/// Left edge data for the characteristic-polynomial recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LeftEdge {
    /// a = 0: ℳ starts with 1.
    HalfLine,
    /// The coefficient of the block straddling (a−1, a), modified or not.
    Straddle(Complex64),
}

/// det(z − P𝒞̃P*) on [a, b] where 𝒞̃ has interior coefficients `inner`
/// = (αₐ, …, α_{b−1}), the left edge `left` and αᵦ replaced by `right`.
/// Unmodified edges give truncations of the full operator, modified ones the
/// unitary 𝒞^{β,γ}. An empty interval (`inner` empty and `right` None) is 1.
pub fn char_poly_recursion(
    inner: &[Complex64],
    left: LeftEdge,
    right: Option<Complex64>,
    z: Complex64,
) -> LogComplex {
    let Some(r) = right else {
        return LogComplex::one();
    };
    let (mut v1, mut v2) = match left {
        LeftEdge::HalfLine => (ONE, ONE),
        LeftEdge::Straddle(l) => (ONE, -l),
    };
    let mut log = 0.0;
    for &a in inner {
        let n1 = z * v1 - a.conj() * v2;
        let n2 = v2 - a * z * v1;
        let s = n1.norm().max(n2.norm());
        if s == 0.0 {
            return LogComplex::from_complex(ZERO);
        }
        v1 = n1 / s;
        v2 = n2 / s;
        log += s.ln();
    }
    let mut out = LogComplex::from_complex(z * v1 - r.conj() * v2);
    out.log_abs += log;
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteCMV {
    a: usize,
    b: usize,
    beta: Complex64,
    gamma: Complex64,
    /// Unmodified α_j for j = a.saturating_sub(1) ..= b.
    raw: Vec<Complex64>,
    ell: Banded,
    emm: Banded,
    matrix: Banded,
    unitarity_residual: f64,
}

fn check_unimodular(c: Complex64) -> Result<()> {
    let d = (c.norm() - 1.0).abs();
    if d <= 1e-15 * 4.0 {
        Ok(())
    } else {
        Err(Error::NotUnimodularBoundary(c.norm()))
    }
}

impl FiniteCMV {
    pub fn build(
        cfg: &VerblunskyConfig,
        a: usize,
        b: usize,
        beta: Complex64,
        gamma: Complex64,
    ) -> Result<Self> {
        let start = a.saturating_sub(1);
        let raw: Vec<_> = cfg
            .coefficients_from(start)
            .take(b + 1 - start.min(b + 1))
            .collect();
        Self::from_raw(&raw, a, b, beta, gamma)
    }

    /// `raw` holds α_j for j = a.saturating_sub(1) ..= b.
    pub fn from_raw(
        raw: &[Complex64],
        a: usize,
        b: usize,
        beta: Complex64,
        gamma: Complex64,
    ) -> Result<Self> {
        if b < a + 2 {
            return Err(Error::InvalidInterval(a, b));
        }
        check_unimodular(beta)?;
        check_unimodular(gamma)?;
        let start = a.saturating_sub(1);
        if raw.len() != b + 1 - start {
            return Err(Error::DimensionMismatch {
                expected: b + 1 - start,
                got: raw.len(),
            });
        }
        if let Some(bad) = raw.iter().find(|c| c.norm() >= 1.0) {
            return Err(Error::CoefficientOutsideDisk(bad.norm()));
        }
        let mut c = Self {
            a,
            b,
            beta,
            gamma,
            raw: raw.to_vec(),
            ell: Banded::zeros(0, 1, 1),
            emm: Banded::zeros(0, 1, 1),
            matrix: Banded::zeros(0, 2, 2),
            unitarity_residual: 0.0,
        };
        c.ell = c.factor(0);
        c.emm = c.factor(1);
        c.matrix = band_product(&c.ell, &c.emm);
        c.unitarity_residual = unitarity_residual(&c.matrix);
        if c.unitarity_residual > 1e-10 {
            return Err(Error::NotUnitary(c.unitarity_residual));
        }
        Ok(c)
    }

    /// α̃_j: β at the left straddle, γ at b, α_j otherwise.
    pub fn modified_coefficient(&self, j: usize) -> Complex64 {
        if self.a >= 1 && j + 1 == self.a {
            self.beta
        } else if j == self.b {
            self.gamma
        } else {
            self.raw_coefficient(j)
        }
    }

    /// Unmodified α_j for a−1 ≤ j ≤ b.
    pub fn raw_coefficient(&self, j: usize) -> Complex64 {
        self.raw[j - self.a.saturating_sub(1)]
    }

    /// The Θ-blocks touching [a, b], as (j, block) pairs.
    pub fn theta_blocks(&self) -> Vec<(usize, ThetaBlock)> {
        (self.a.saturating_sub(1)..=self.b)
            .map(|j| {
                (
                    j,
                    ThetaBlock {
                        alpha: self.modified_coefficient(j),
                    },
                )
            })
            .collect()
    }

    /// ℒ (parity 0) or ℳ (parity 1) restricted to [a, b].
    fn factor(&self, parity: usize) -> Banded {
        let m = self.dim();
        let mut f = Banded::zeros(m, 1, 1);
        if parity == 1 && self.a == 0 {
            f.set(0, 0, ONE);
        }
        for (j, blk) in self.theta_blocks() {
            if j % 2 != parity {
                continue;
            }
            let t = blk.matrix();
            for (di, row) in t.iter().enumerate() {
                for (dj, &v) in row.iter().enumerate() {
                    let (gi, gj) = (j + di, j + dj);
                    if (self.a..=self.b).contains(&gi) && (self.a..=self.b).contains(&gj) {
                        f.set(gi - self.a, gj - self.a, v);
                    }
                }
            }
        }
        f
    }

    pub fn interval(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn gamma(&self) -> Complex64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.b - self.a + 1
    }

    pub fn matrix(&self) -> &Banded {
        &self.matrix
    }

    pub fn factors(&self) -> (&Banded, &Banded) {
        (&self.ell, &self.emm)
    }

    /// max |(𝒞*𝒞 − I)ᵢⱼ| measured at construction.
    pub fn unitarity_residual(&self) -> f64 {
        self.unitarity_residual
    }

    /// Entry (n₁, n₂) in global indices.
    pub fn entry(&self, n1: usize, n2: usize) -> Complex64 {
        self.matrix.get(n1 - self.a, n2 - self.a)
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.matrix.matvec(v)
    }

    pub fn apply_adjoint(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.matrix.adjoint_matvec(v)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| self.matrix.get(i, j))
    }

    /// Φ(z) = det(z − 𝒞) by banded LU.
    pub fn char_poly_lu(&self, z: Complex64) -> LogComplex {
        let mut s = self.matrix.clone();
        s.add_diagonal(-z);
        let (log, phase) = s.lu().log_det();
        // det(z − 𝒞) = (−1)^m det(𝒞 − z)
        let sign = if self.dim().is_multiple_of(2) { ONE } else { -ONE };
        LogComplex {
            log_abs: log,
            phase: phase * sign,
        }
    }

    /// Φ(z) = det(z − 𝒞) by the Szegő-type recursion.
    pub fn char_poly(&self, z: Complex64) -> LogComplex {
        let left = if self.a == 0 {
            LeftEdge::HalfLine
        } else {
            LeftEdge::Straddle(self.beta)
        };
        let inner: Vec<_> = (self.a..self.b).map(|j| self.raw_coefficient(j)).collect();
        char_poly_recursion(&inner, left, Some(self.gamma), z)
    }

    /// log of ρₐ⋯ρᵦ with the unimodular index b left out.
    pub fn log_rho_product(&self) -> f64 {
        (self.a..self.b)
            .map(|j| rho_of(self.raw_coefficient(j)).ln())
            .sum()
    }

    /// φ^{β,γ}(z) = Φ(z)/(ρₐ⋯ρ_{b−1}).
    pub fn normalized_char_poly(&self, z: Complex64) -> LogComplex {
        let mut p = self.char_poly(z);
        p.log_abs -= self.log_rho_product();
        p
    }

    pub fn eigenpairs(&self, engine: EigenEngine, tol: f64) -> Result<Vec<Eigenpair>> {
        match engine {
            EigenEngine::Dense => self.eigenpairs_dense(tol),
            EigenEngine::Scan => self.eigenpairs_scan(tol),
        }
    }

    fn eigenpairs_dense(&self, tol: f64) -> Result<Vec<Eigenpair>> {
        let m = self.dim();
        if m > DENSE_LIMIT {
            return Err(Error::EigenFailure(format!(
                "dimension {m} exceeds dense limit {DENSE_LIMIT}"
            )));
        }
        let schur = Schur::try_new(self.to_dense(), f64::EPSILON, 100 * m)
            .ok_or_else(|| Error::EigenFailure("Schur iteration did not converge".into()))?;
        let (q, t) = schur.unpack();
        let mut out = Vec::with_capacity(m);
        for k in 0..m {
            let z = t[(k, k)];
            let v: Vec<Complex64> = q.column(k).iter().copied().collect();
            out.push(self.finish_pair(z, v, tol)?);
        }
        sort_pairs(&mut out);
        Ok(out)
    }

    /// Local minima of |Φ(e^{iη})| on a fine grid, golden-section refined,
    /// with eigenvectors from inverse iteration.
    fn eigenpairs_scan(&self, tol: f64) -> Result<Vec<Eigenpair>> {
        let m = self.dim();
        let grid = 64 * m;
        let h = TAU / grid as f64;
        let f = |eta: f64| self.char_poly(Complex64::from_polar(1.0, eta)).log_abs;
        let vals: Vec<f64> = (0..grid).map(|i| f(i as f64 * h)).collect();
        let mut etas = Vec::new();
        for i in 0..grid {
            let prev = vals[(i + grid - 1) % grid];
            let next = vals[(i + 1) % grid];
            if vals[i] <= prev && vals[i] < next {
                etas.push(golden_min(&f, (i as f64 - 1.0) * h, (i as f64 + 1.0) * h));
            }
        }
        if etas.len() != m {
            return Err(Error::EigenFailure(format!(
                "circle scan resolved {} of {m} eigenvalues",
                etas.len()
            )));
        }
        let mut out = Vec::with_capacity(m);
        for (k, &eta) in etas.iter().enumerate() {
            let z = Complex64::from_polar(1.0, eta);
            let v = self.inverse_iteration(z, k as u64)?;
            out.push(self.finish_pair(z, v, tol)?);
        }
        sort_pairs(&mut out);
        Ok(out)
    }

    fn inverse_iteration(&self, z: Complex64, seed: u64) -> Result<Vec<Complex64>> {
        let m = self.dim();
        let mut s = self.matrix.clone();
        // a tiny offset keeps the factorization nonsingular at an exact eigenvalue
        s.add_diagonal(-z * (1.0 + 1e-14));
        let lu = s.lu();
        let mut v: Vec<Complex64> = (0..m)
            .map(|i| {
                let t = (i as f64 + 1.0) * (0.618_033_988_75 + seed as f64 * 0.1);
                Complex64::new(t.sin(), t.cos())
            })
            .collect();
        for _ in 0..3 {
            v = match lu.solve(&v) {
                Ok(x) => x,
                Err(_) => break,
            };
            normalize(&mut v);
        }
        Ok(v)
    }

    fn finish_pair(&self, z: Complex64, mut v: Vec<Complex64>, tol: f64) -> Result<Eigenpair> {
        normalize(&mut v);
        let mut z = z / z.norm();
        let mut residual = self.residual(z, &v)?;
        if residual > tol {
            // refine the vector, then the eigenvalue by the Rayleigh quotient
            let mut w = self.inverse_iteration(z, 7)?;
            normalize(&mut w);
            let cw = self.apply(&w)?;
            let rq: Complex64 = w.iter().zip(&cw).map(|(x, y)| x.conj() * y).sum();
            let zr = rq / rq.norm();
            let r2 = self.residual(zr, &w)?;
            if r2 < residual {
                v = w;
                z = zr;
                residual = r2;
            }
        }
        let eta = z.arg().rem_euclid(TAU);
        Ok(Eigenpair {
            eta,
            z,
            vector: v,
            residual,
            converged: residual <= tol,
        })
    }

    /// ‖𝒞v − zv‖ for unit v.
    pub fn residual(&self, z: Complex64, v: &[Complex64]) -> Result<f64> {
        let cv = self.apply(v)?;
        Ok(cv
            .iter()
            .zip(v)
            .map(|(x, y)| (x - z * y).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Nonzero entries as `row,col,re,im` lines (global indices).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Config(format!("csv output: {e}"));
        wr.write_record(["row", "col", "re", "im"]).map_err(io)?;
        for (i, j, v) in self.matrix.nonzeros() {
            wr.serialize((i + self.a, j + self.a, v.re, v.im)).map_err(io)?;
        }
        wr.flush()
            .map_err(|e| Error::Config(format!("csv output: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenEngine {
    /// Complex Schur decomposition of the dense matrix.
    Dense,
    /// Zeros of |Φ| along the circle plus inverse iteration.
    Scan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    /// Argument of z in [0, 2π).
    pub eta: f64,
    pub z: Complex64,
    /// Unit vector indexed from a.
    pub vector: Vec<Complex64>,
    pub residual: f64,
    pub converged: bool,
}

fn sort_pairs(v: &mut [Eigenpair]) {
    v.sort_by(|x, y| x.eta.total_cmp(&y.eta));
}

fn normalize(v: &mut [Complex64]) {
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|c| *c /= n);
    }
}

fn golden_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    (0.5 * (lo + hi)).rem_euclid(TAU)
}

/// Product of two tridiagonal band matrices, pentadiagonal result.
fn band_product(l: &Banded, r: &Banded) -> Banded {
    let m = l.dim();
    let mut out = Banded::zeros(m, 2, 2);
    for i in 0..m {
        for k in i.saturating_sub(2)..(i + 3).min(m) {
            let s: Complex64 = (i.saturating_sub(1)..(i + 2).min(m))
                .map(|j| l.get(i, j) * r.get(j, k))
                .sum();
            if s != ZERO {
                out.set(i, k, s);
            }
        }
    }
    out
}

/// max |(C*C − I)ᵢⱼ| for a pentadiagonal C.
fn unitarity_residual(c: &Banded) -> f64 {
    let m = c.dim();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in i.saturating_sub(4)..(i + 5).min(m) {
            let s: Complex64 = (0..m)
                .skip(i.max(j).saturating_sub(2))
                .take(5)
                .map(|k| c.get(k, i).conj() * c.get(k, j))
                .sum();
            let e = if i == j { s - ONE } else { s };
            worst = worst.max(e.norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_raw(len: usize, r: f64, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| Complex64::from_polar(rng.random_range(0.0..r), rng.random_range(0.0..TAU)))
            .collect()
    }

    fn dense_det(c: &FiniteCMV, z: Complex64) -> Complex64 {
        let m = c.dim();
        (DMatrix::identity(m, m) * z - c.to_dense()).determinant()
    }

    #[test]
    fn free_five_by_five() {
        let c = FiniteCMV::from_raw(&[ZERO; 5], 0, 4, ONE, ONE).unwrap();
        // ℒ = swap ⊕ swap ⊕ 1, ℳ = 1 ⊕ swap ⊕ swap
        let l = DMatrix::from_row_slice(5, 5, &[
            0., 1., 0., 0., 0.,
            1., 0., 0., 0., 0.,
            0., 0., 0., 1., 0.,
            0., 0., 1., 0., 0.,
            0., 0., 0., 0., 1.,
        ]);
        let mm = DMatrix::from_row_slice(5, 5, &[
            1., 0., 0., 0., 0.,
            0., 0., 1., 0., 0.,
            0., 1., 0., 0., 0.,
            0., 0., 0., 0., 1.,
            0., 0., 0., 1., 0.,
        ]);
        let want = (l * mm).map(|x| Complex64::new(x, 0.0));
        assert_eq!(c.to_dense(), want);
        assert_eq!(c.unitarity_residual(), 0.0);
    }

    #[test]
    fn unitary_and_banded_for_all_parities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (seed, a) in (0..12).zip([0usize, 1, 2, 3].into_iter().cycle()) {
            let b = a + 5 + seed as usize % 4;
            let raw = random_raw(b + 1 - a.saturating_sub(1), 0.95, seed);
            let beta = Complex64::from_polar(1.0, rng.random_range(0.0..TAU));
            let gamma = Complex64::from_polar(1.0, rng.random_range(0.0..TAU));
            let c = FiniteCMV::from_raw(&raw, a, b, beta, gamma).unwrap();
            assert!(c.unitarity_residual() <= 1e-12);
            let d = c.to_dense();
            for i in 0..c.dim() {
                for j in 0..c.dim() {
                    if i.abs_diff(j) > 2 {
                        assert_eq!(d[(i, j)], ZERO);
                    }
                }
            }
            let (l, m) = c.factors();
            let rebuilt = DMatrix::from_fn(c.dim(), c.dim(), |i, j| l.get(i, j))
                * DMatrix::from_fn(c.dim(), c.dim(), |i, j| m.get(i, j));
            assert!((rebuilt - d).iter().all(|e| e.norm() <= 1e-14));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let raw = random_raw(6, 0.5, 3);
        assert!(FiniteCMV::from_raw(&raw, 0, 5, Complex64::new(0.9, 0.0), ONE).is_err());
        assert!(FiniteCMV::from_raw(&raw[..3], 0, 2, ONE, Complex64::new(1.1, 0.0)).is_err());
        assert!(FiniteCMV::from_raw(&raw[..2], 0, 1, ONE, ONE).is_err());
        assert!(FiniteCMV::from_raw(&raw[..4], 0, 5, ONE, ONE).is_err());
    }

    #[test]
    fn char_poly_three_routes() {
        for (a, b) in [(0, 4), (0, 7), (1, 6), (2, 9), (3, 8)] {
            let raw = random_raw(b + 1 - usize::saturating_sub(a, 1), 0.9, (a * 10 + b) as u64);
            let c = FiniteCMV::from_raw(&raw, a, b, Complex64::from_polar(1.0, 0.4), Complex64::from_polar(1.0, 2.0)).unwrap();
            for z in [Complex64::new(0.3, 0.8), Complex64::from_polar(1.0, 1.1), Complex64::new(0.0, 0.0)] {
                let want = dense_det(&c, z);
                let rec = c.char_poly(z).value();
                let lu = c.char_poly_lu(z).value();
                assert!((rec - want).norm() < 1e-12 * (1.0 + want.norm()), "[{a},{b}]");
                assert!((lu - want).norm() < 1e-12 * (1.0 + want.norm()), "[{a},{b}]");
            }
            // |det(−𝒞)| = 1
            assert!(c.char_poly(ZERO).log_abs.abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_recursion_matches_dense() {
        // unmodified edges: the plain restriction of a larger unitary matrix
        let raw = random_raw(14, 0.8, 5);
        let big = FiniteCMV::from_raw(&raw, 0, 13, ONE, ONE).unwrap();
        let full = big.to_dense();
        for (a, b) in [(0usize, 5usize), (2, 7), (3, 10), (1, 1), (4, 4)] {
            let sub = full.view((a, a), (b - a + 1, b - a + 1)).into_owned();
            let z = Complex64::new(0.2, -0.7);
            let want = (DMatrix::identity(b - a + 1, b - a + 1) * z - sub).determinant();
            let left = if a == 0 { LeftEdge::HalfLine } else { LeftEdge::Straddle(raw[a - 1]) };
            let got = char_poly_recursion(&raw[a..b], left, Some(raw[b]), z).value();
            assert!((got - want).norm() < 1e-12, "[{a},{b}]");
        }
        let empty = char_poly_recursion(&[], LeftEdge::HalfLine, None, ONE);
        assert_eq!(empty, LogComplex::one());
    }

    #[test]
    fn apply_preserves_norm_and_columns() {
        let raw = random_raw(21, 0.9, 8);
        let c = FiniteCMV::from_raw(&raw, 1, 20, Complex64::new(0.0, 1.0), -ONE).unwrap();
        let v: Vec<_> = (0..20).map(|i| Complex64::new((i as f64).sin(), 1.0 / (1.0 + i as f64))).collect();
        let nv: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        let cv = c.apply(&v).unwrap();
        let ncv: f64 = cv.iter().map(|x| x.norm_sqr()).sum();
        assert!((nv - ncv).abs() < 1e-12 * nv);
        let back = c.apply_adjoint(&cv).unwrap();
        for (x, y) in back.iter().zip(&v) {
            assert!((x - y).norm() < 1e-12);
        }
        let mut e = vec![ZERO; 20];
        e[6] = ONE;
        let col = c.apply(&e).unwrap();
        for (i, x) in col.iter().enumerate() {
            assert_eq!(*x, c.entry(i + 1, 7));
        }
        assert!(c.apply(&v[..5]).is_err());
    }

    #[test]
    fn engines_agree() {
        let raw = random_raw(9, 0.6, 13);
        let c = FiniteCMV::from_raw(&raw, 0, 8, ONE, Complex64::from_polar(1.0, 0.3)).unwrap();
        let d = c.eigenpairs(EigenEngine::Dense, 1e-8).unwrap();
        let s = c.eigenpairs(EigenEngine::Scan, 1e-8).unwrap();
        assert_eq!(d.len(), 9);
        for (x, y) in d.iter().zip(&s) {
            assert!((x.z - y.z).norm() < 1e-8);
            assert!(x.converged && y.converged);
            assert!((x.z.norm() - 1.0).abs() < 1e-8);
            assert!(c.char_poly(x.z).log_abs < -15.0);
        }
        for i in 0..9 {
            for j in 0..9 {
                let ip: Complex64 = d[i].vector.iter().zip(&d[j].vector).map(|(p, q)| p.conj() * q).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip.norm() - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn csv_dump() {
        let c = FiniteCMV::from_raw(&[ZERO; 5], 0, 4, ONE, ONE).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("row,col,re,im\n"));
        assert_eq!(s.lines().count(), 6);
    }
}
