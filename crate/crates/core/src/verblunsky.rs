//! Dynamically defined Verblunsky coefficients αₙ = λ·α(Aⁿ(x, y)).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::TrigPolynomial;
use crate::torus::{Orbit, ToralAutomorphism, TorusPoint};

/// First kind (+αₙ) or second kind (−αₙ) coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerblunskyConfig {
    lambda: f64,
    base: TorusPoint,
    automorphism: ToralAutomorphism,
    alpha: TrigPolynomial,
    sign: Sign,
}

impl VerblunskyConfig {
    /// Requires λ ≥ 0 and λ·Σ|α̂| < 1, so every ρₙ is positive. λ = 0 is
    /// accepted and gives the free sequence αₙ ≡ 0.
    pub fn new(
        lambda: f64,
        base: TorusPoint,
        automorphism: ToralAutomorphism,
        alpha: TrigPolynomial,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidCoupling(format!("lambda = {lambda}")));
        }
        if lambda * alpha.sup_bound() >= 1.0 {
            return Err(Error::InvalidCoupling(format!(
                "lambda * sup_bound = {} must be < 1",
                lambda * alpha.sup_bound()
            )));
        }
        Ok(Self {
            lambda,
            base,
            automorphism,
            alpha,
            sign: Sign::Plus,
        })
    }

    /// Cat map with the given sampling function.
    pub fn cat(lambda: f64, base: TorusPoint, alpha: TrigPolynomial) -> Result<Self> {
        Self::new(lambda, base, ToralAutomorphism::cat_map(), alpha)
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    pub fn with_base(mut self, base: TorusPoint) -> Self {
        self.base = base;
        self
    }

    /// The same configuration with coefficients −αₙ.
    pub fn second_kind(&self) -> Self {
        let sign = match self.sign {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        };
        self.clone().with_sign(sign)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn base(&self) -> TorusPoint {
        self.base
    }

    pub fn automorphism(&self) -> &ToralAutomorphism {
        &self.automorphism
    }

    pub fn alpha(&self) -> &TrigPolynomial {
        &self.alpha
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// Upper bound λ·Σ|α̂| on every |αₙ|.
    pub fn coefficient_bound(&self) -> f64 {
        self.lambda * self.alpha.sup_bound()
    }

    #[inline]
    fn at_point(&self, p: TorusPoint) -> Complex64 {
        self.alpha.evaluate(p) * (self.sign.factor() * self.lambda)
    }

    pub fn coefficient(&self, n: usize) -> Complex64 {
        self.at_point(self.automorphism.iterate(self.base, n as i64))
    }

    pub fn rho(&self, n: usize) -> f64 {
        rho_of(self.coefficient(n))
    }

    /// (αₙ, ρₙ) for n = 0..N−1.
    pub fn sequence(&self, len: usize) -> Vec<(Complex64, f64)> {
        self.coefficients().take(len).map(|a| (a, rho_of(a))).collect()
    }

    /// Streams α₀, α₁, ... one orbit step per item.
    pub fn coefficients(&self) -> Coefficients<'_> {
        self.coefficients_from(0)
    }

    /// Streams αₛ, αₛ₊₁, ...
    pub fn coefficients_from(&self, start: usize) -> Coefficients<'_> {
        Coefficients {
            cfg: self,
            orbit: self
                .automorphism
                .orbit(self.automorphism.iterate(self.base, start as i64)),
        }
    }
}

/// ρ = √(1 − |α|²).
#[inline]
pub fn rho_of(alpha: Complex64) -> f64 {
    (1.0 - alpha.norm_sqr()).max(0.0).sqrt()
}

pub struct Coefficients<'a> {
    cfg: &'a VerblunskyConfig,
    orbit: Orbit,
}

impl Iterator for Coefficients<'_> {
    type Item = Complex64;

    #[inline]
    fn next(&mut self) -> Option<Complex64> {
        self.orbit.next().map(|p| self.cfg.at_point(p))
    }
}

/// Parses a base point given as `"x,y"` in radians or `"rand:SEED"`.
pub fn parse_base(s: &str) -> Result<TorusPoint> {
    let s = s.trim();
    if let Some(seed) = s.strip_prefix("rand:") {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad base seed '{seed}'")))?;
        return Ok(random_point(seed));
    }
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| Error::Config(format!("base '{s}' must be 'x,y' or 'rand:SEED'")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Config(format!("bad base coordinate '{t}'")))
    };
    Ok(TorusPoint::from_radians(parse(x)?, parse(y)?))
}

/// A uniformly distributed point determined by `seed`.
pub fn random_point(seed: u64) -> TorusPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TorusPoint::from_fixed(rng.random(), rng.random())
}
