//! Hyperbolic toral automorphisms of 𝕋² = ℝ²/2πℤ².
//!
//! Points are stored in 64-bit fixed point, one unit being 2⁻⁶⁴ of a full
//! turn. An integer matrix with det = 1 acts on this grid as a bijection when
//! the arithmetic wraps modulo 2⁶⁴, so every orbit computed here is an exact
//! orbit of a dyadic rational point of the torus. Floating-point iteration of
//! a hyperbolic map would instead lose log₂ϱ bits per step and lose
//! all information about the seed after roughly 40 steps.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TURN: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Largest |n| accepted by [`ToralAutomorphism::frequency_pushforward`].
pub const PUSHFORWARD_CAP: i64 = 200;

/// A point of 𝕋² in fixed-point turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusPoint {
    x: u64,
    y: u64,
}

impl TorusPoint {
    /// Builds a point from coordinates in radians, reducing modulo 2π.
    pub fn from_radians(x: f64, y: f64) -> Self {
        Self {
            x: radians_to_fixed(x),
            y: radians_to_fixed(y),
        }
    }

    /// Builds a point from raw fixed-point coordinates (units of 2⁻⁶⁴ turn).
    pub const fn from_fixed(x: u64, y: u64) -> Self {
        Self { x, y }
    }

    /// The rational point (2π·px/q, 2π·py/q), rounded to the fixed-point grid.
    pub fn from_fraction(px: i64, py: i64, q: u64) -> Self {
        Self {
            x: fraction_to_fixed(px, q),
            y: fraction_to_fixed(py, q),
        }
    }

    pub fn origin() -> Self {
        Self { x: 0, y: 0 }
    }

    /// x in radians, in [0, 2π).
    pub fn x(&self) -> f64 {
        fixed_to_radians(self.x)
    }

    /// y in radians, in [0, 2π).
    pub fn y(&self) -> f64 {
        fixed_to_radians(self.y)
    }

    pub fn fixed(&self) -> (u64, u64) {
        (self.x, self.y)
    }

    /// The phase k₁x + k₂y reduced modulo 2π, computed exactly on the grid.
    pub fn phase(&self, k1: i64, k2: i64) -> f64 {
        let p = (k1 as u64)
            .wrapping_mul(self.x)
            .wrapping_add((k2 as u64).wrapping_mul(self.y));
        fixed_to_radians(p)
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x(), self.y())
    }
}

fn radians_to_fixed(r: f64) -> u64 {
    let t = (r / TAU).rem_euclid(1.0);
    let v = t * TURN;
    if v >= TURN {
        0
    } else {
        v as u64
    }
}

fn fraction_to_fixed(p: i64, q: u64) -> u64 {
    assert!(q > 0, "denominator must be positive");
    let q = q as i128;
    let r = (p as i128).rem_euclid(q);
    // round(r * 2^64 / q)
    let scaled = ((r << 64) + q / 2) / q;
    scaled as u64
}

fn fixed_to_radians(v: u64) -> f64 {
    v as f64 / TURN * TAU
}

/// A 2×2 integer matrix acting on 𝕋², wrapping modulo 2⁶⁴ in fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct WrapMat([u64; 4]);

impl WrapMat {
    const IDENTITY: WrapMat = WrapMat([1, 0, 0, 1]);

    fn mul(&self, o: &WrapMat) -> WrapMat {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = o.0;
        WrapMat([
            a.wrapping_mul(e).wrapping_add(b.wrapping_mul(g)),
            a.wrapping_mul(f).wrapping_add(b.wrapping_mul(h)),
            c.wrapping_mul(e).wrapping_add(d.wrapping_mul(g)),
            c.wrapping_mul(f).wrapping_add(d.wrapping_mul(h)),
        ])
    }

    fn pow(&self, mut n: u64) -> WrapMat {
        let mut base = *self;
        let mut acc = WrapMat::IDENTITY;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            n >>= 1;
        }
        acc
    }

    fn apply(&self, p: TorusPoint) -> TorusPoint {
        let [a, b, c, d] = self.0;
        TorusPoint {
            x: a.wrapping_mul(p.x).wrapping_add(b.wrapping_mul(p.y)),
            y: c.wrapping_mul(p.x).wrapping_add(d.wrapping_mul(p.y)),
        }
    }
}

/// An integer matrix with det = 1 and |trace| > 2, with its eigen-data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToralAutomorphism {
    entries: [[i64; 2]; 2],
    rho: f64,
    rho_minus: f64,
    v_plus: [f64; 2],
    v_minus: [f64; 2],
}

impl ToralAutomorphism {
    /// Validates `m` and computes ϱ, ϱ₋ and unit eigenvectors in closed form.
    pub fn new(m: [[i64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = m;
        let det = a
            .checked_mul(d)
            .and_then(|ad| b.checked_mul(c).and_then(|bc| ad.checked_sub(bc)))
            .ok_or_else(|| Error::Config("matrix entries too large".into()))?;
        if det != 1 {
            return Err(Error::NotUnimodular(det));
        }
        let trace = a + d;
        if trace.abs() <= 2 {
            return Err(Error::NotHyperbolic(trace));
        }
        let t = trace as f64;
        let disc = (t * t - 4.0).sqrt();
        // roots of μ² − tμ + 1; the expanding one has the sign of the trace
        let rho = (t + t.signum() * disc) / 2.0;
        let rho_minus = 1.0 / rho;
        let v_plus = eigenvector(m, rho);
        let v_minus = eigenvector(m, rho_minus);
        Ok(Self {
            entries: m,
            rho,
            rho_minus,
            v_plus,
            v_minus,
        })
    }

    /// The Arnold cat map [[2,1],[1,1]].
    pub fn cat_map() -> Self {
        Self::new([[2, 1], [1, 1]]).expect("cat map is hyperbolic")
    }

    /// Parses four comma-separated integers in row-major order, e.g. "2,1,1,1".
    pub fn parse(s: &str) -> Result<Self> {
        let v: Vec<i64> = s
            .split(',')
            .map(|t| t.trim().parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("automorphism '{s}': {e}")))?;
        if v.len() != 4 {
            return Err(Error::Config(format!(
                "automorphism '{s}' needs 4 integers, got {}",
                v.len()
            )));
        }
        Self::new([[v[0], v[1]], [v[2], v[3]]])
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.entries
    }

    pub fn trace(&self) -> i64 {
        self.entries[0][0] + self.entries[1][1]
    }

    /// Expanding eigenvalue ϱ, |ϱ| > 1.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Contracting eigenvalue ϱ₋ = 1/ϱ.
    pub fn rho_minus(&self) -> f64 {
        self.rho_minus
    }

    pub fn v_plus(&self) -> [f64; 2] {
        self.v_plus
    }

    pub fn v_minus(&self) -> [f64; 2] {
        self.v_minus
    }

    fn inverse_entries(&self) -> [[i64; 2]; 2] {
        let [[a, b], [c, d]] = self.entries;
        [[d, -b], [-c, a]]
    }

    fn wrap(m: [[i64; 2]; 2]) -> WrapMat {
        WrapMat([
            m[0][0] as u64,
            m[0][1] as u64,
            m[1][0] as u64,
            m[1][1] as u64,
        ])
    }

    /// Aⁿ(p) for any signed n; negative n uses the integer inverse.
    pub fn iterate(&self, p: TorusPoint, n: i64) -> TorusPoint {
        let m = if n >= 0 {
            Self::wrap(self.entries)
        } else {
            Self::wrap(self.inverse_entries())
        };
        m.pow(n.unsigned_abs()).apply(p)
    }

    /// A single forward step A(p).
    #[inline]
    pub fn step(&self, p: TorusPoint) -> TorusPoint {
        Self::wrap(self.entries).apply(p)
    }

    /// Infinite forward orbit p, A(p), A²(p), ...
    pub fn orbit(&self, p: TorusPoint) -> Orbit {
        Orbit {
            map: Self::wrap(self.entries),
            current: p,
        }
    }

    /// (Aᵀ)ⁿk in exact integer arithmetic, |n| ≤ [`PUSHFORWARD_CAP`].
    pub fn frequency_pushforward(&self, k: (i64, i64), n: i64) -> Result<(i64, i64)> {
        if n.abs() > PUSHFORWARD_CAP {
            return Err(Error::PushforwardCap(n, PUSHFORWARD_CAP));
        }
        let m = if n >= 0 {
            self.entries
        } else {
            self.inverse_entries()
        };
        let overflow = || Error::FrequencyOverflow {
            k1: k.0,
            k2: k.1,
            n,
        };
        let (a, b, c, d) = (
            m[0][0] as i128,
            m[0][1] as i128,
            m[1][0] as i128,
            m[1][1] as i128,
        );
        let (mut u, mut v) = (k.0 as i128, k.1 as i128);
        for _ in 0..n.unsigned_abs() {
            // transpose: (a c; b d)
            let nu = a
                .checked_mul(u)
                .zip(c.checked_mul(v))
                .and_then(|(x, y)| x.checked_add(y))
                .ok_or_else(overflow)?;
            let nv = b
                .checked_mul(u)
                .zip(d.checked_mul(v))
                .and_then(|(x, y)| x.checked_add(y))
                .ok_or_else(overflow)?;
            u = nu;
            v = nv;
        }
        let u = i64::try_from(u).map_err(|_| overflow())?;
        let v = i64::try_from(v).map_err(|_| overflow())?;
        Ok((u, v))
    }
}

impl fmt::Display for ToralAutomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a, b], [c, d]] = self.entries;
        write!(f, "{a},{b},{c},{d}")
    }
}

/// Unit eigenvector of `m` for the eigenvalue `mu`.
pub(crate) fn eigenvector(m: [[i64; 2]; 2], mu: f64) -> [f64; 2] {
    let [[a, b], [c, d]] = m;
    let v = if b != 0 {
        [b as f64, mu - a as f64]
    } else {
        [mu - d as f64, c as f64]
    };
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Forward orbit iterator; yields the current point then advances.
#[derive(Clone, Debug)]
pub struct Orbit {
    map: WrapMat,
    current: TorusPoint,
}

impl Iterator for Orbit {
    type Item = TorusPoint;

    #[inline]
    fn next(&mut self) -> Option<TorusPoint> {
        let p = self.current;
        self.current = self.map.apply(p);
        Some(p)
    }
}
