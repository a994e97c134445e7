//! Complex band matrices with an LU factorization using partial pivoting.
//!
//! Row pivoting widens the upper band from `ku` to `ku + kl`; row `i` is
//! stored for columns `i − kl ..= i + kl + ku` so the fill fits in place.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![ZERO; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if i < self.n && j < self.n && off >= 0 && (off as usize) < self.width {
            Some(i * self.width + off as usize)
        } else {
            None
        }
    }

    /// True when (i, j) lies inside the declared band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self.slot(i, j) {
            Some(k) => self.data[k],
            None => ZERO,
        }
    }

    /// Panics outside the declared band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.slot(i, j).expect("in band");
        self.data[k] = v;
    }

    pub fn add_diagonal(&mut self, shift: Complex64) {
        for i in 0..self.n {
            let v = self.get(i, i);
            self.set(i, i, v + shift);
        }
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(v.len())?;
        Ok((0..self.n)
            .map(|i| self.cols(i).map(|j| self.get(i, j) * v[j]).sum())
            .collect())
    }

    /// A*·v.
    pub fn adjoint_matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(v.len())?;
        let mut out = vec![ZERO; self.n];
        for i in 0..self.n {
            for j in self.cols(i) {
                out[j] += self.get(i, j).conj() * v[i];
            }
        }
        Ok(out)
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got == self.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n,
                got,
            })
        }
    }

    /// Nonzero entries (row, col, value) in row-major order.
    pub fn nonzeros(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in self.cols(i) {
                let v = self.get(i, j);
                if v != ZERO {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn lu(&self) -> BandLu {
        BandLu::factor(self.clone())
    }
}

/// PA = LU with unit-lower L stored as per-column multipliers.
#[derive(Clone, Debug)]
pub struct BandLu {
    u: Banded,
    mult: Vec<Complex64>,
    piv: Vec<usize>,
    swaps: usize,
    max_pivot: f64,
    min_pivot: f64,
}

impl BandLu {
    fn factor(mut a: Banded) -> Self {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut mult = vec![ZERO; n * kl.max(1)];
        let mut piv = vec![0; n];
        let mut swaps = 0;
        let (mut max_pivot, mut min_pivot) = (0.0f64, f64::INFINITY);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&x, &y| a.get(x, k).norm().total_cmp(&a.get(y, k).norm()))
                .expect("nonempty");
            piv[k] = p;
            if p != k {
                swaps += 1;
                for j in k..=last_col {
                    let (x, y) = (a.get(k, j), a.get(p, j));
                    let (sk, sp) = (a.slot(k, j).expect("fill slot"), a.slot(p, j).expect("fill slot"));
                    a.data[sk] = y;
                    a.data[sp] = x;
                }
            }
            let d = a.get(k, k);
            max_pivot = max_pivot.max(d.norm());
            min_pivot = min_pivot.min(d.norm());
            if d == ZERO {
                continue;
            }
            for i in k + 1..=last_row {
                let l = a.get(i, k) / d;
                mult[k * kl + (i - k - 1)] = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..=last_col {
                    let s = a.slot(i, j).expect("fill slot");
                    let ukj = a.get(k, j);
                    a.data[s] -= l * ukj;
                }
            }
        }
        Self {
            u: a,
            mult,
            piv,
            swaps,
            max_pivot,
            min_pivot,
        }
    }

    pub fn dim(&self) -> usize {
        self.u.n
    }

    /// Smallest over largest pivot modulus; zero when singular.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    pub fn is_singular(&self) -> bool {
        self.min_pivot == 0.0
    }

    /// (log|det|, det/|det|); log|det| = −∞ for a singular matrix.
    pub fn log_det(&self) -> (f64, Complex64) {
        let mut log = 0.0;
        let mut phase = if self.swaps.is_multiple_of(2) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        };
        for k in 0..self.u.n {
            let d = self.u.get(k, k);
            let m = d.norm();
            if m == 0.0 {
                return (f64::NEG_INFINITY, Complex64::new(0.0, 0.0));
            }
            log += m.ln();
            phase *= d / m;
        }
        (log, phase)
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let (n, kl) = (self.u.n, self.u.kl);
        self.u.check_len(b.len())?;
        if self.is_singular() {
            return Err(Error::ResolventBlowup { distance: 0.0 });
        }
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.mult[k * kl + (i - k - 1)] * xk;
            }
        }
        let reach = self.u.kl + self.u.ku;
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.u.get(k, j) * x[j];
            }
            x[k] = s / self.u.get(k, k);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> Banded {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Banded::zeros(n, kl, ku);
        for i in 0..n {
            for j in 0..n {
                if a.in_band(i, j) {
                    // small diagonal forces pivoting
                    let scale = if i == j { 1e-3 } else { 1.0 };
                    let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    a.set(i, j, v * scale);
                }
            }
        }
        a
    }

    fn dense(a: &Banded) -> DMatrix<Complex64> {
        DMatrix::from_fn(a.dim(), a.dim(), |i, j| a.get(i, j))
    }

    #[test]
    fn solve_matches_dense() {
        for (n, kl, ku, seed) in [(1, 2, 2, 1), (2, 2, 2, 2), (9, 2, 2, 3), (40, 1, 3, 4), (25, 3, 0, 5)] {
            let a = random_band(n, kl, ku, seed);
            let b: Vec<_> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
            let x = a.lu().solve(&b).unwrap();
            let ax = a.matvec(&x).unwrap();
            // backward error relative to ‖A‖·‖x‖
            let xn = x.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (u, v) in ax.iter().zip(&b) {
                assert!((u - v).norm() < 1e-12 * (kl + ku + 1) as f64 * 2.0 * xn, "n={n}");
            }
        }
    }

    #[test]
    fn determinant_matches_dense() {
        let a = random_band(12, 2, 2, 9);
        let (log, phase) = a.lu().log_det();
        let d = dense(&a).determinant();
        assert!((d.norm().ln() - log).abs() < 1e-10);
        assert!((d / d.norm() - phase).norm() < 1e-10);
    }

    #[test]
    fn adjoint_and_dims() {
        let a = random_band(7, 2, 2, 11);
        let v: Vec<_> = (0..7).map(|i| Complex64::new(1.0, i as f64)).collect();
        let w = a.adjoint_matvec(&v).unwrap();
        let want = dense(&a).adjoint() * nalgebra::DVector::from_vec(v.clone());
        for i in 0..7 {
            assert!((w[i] - want[i]).norm() < 1e-12);
        }
        assert!(a.matvec(&v[..3]).is_err());
    }

    #[test]
    fn singular_is_reported() {
        let a = Banded::zeros(4, 1, 1);
        let lu = a.lu();
        assert!(lu.is_singular());
        assert_eq!(lu.log_det().0, f64::NEG_INFINITY);
        assert!(lu.solve(&[Complex64::new(1.0, 0.0); 4]).is_err());
    }
}
