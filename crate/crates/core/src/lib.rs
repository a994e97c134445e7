//! CMV matrices with Verblunsky coefficients sampled along the orbits of a
//! hyperbolic toral automorphism: transfer matrices, Lyapunov exponents,
//! Prüfer variables, finite-volume Green's functions and localization
//! experiments.

pub mod banded;
pub mod cli;
pub mod cmv;
pub mod cocycle;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod greens;
pub mod prufer;
pub mod sampling;
pub mod torus;
pub mod verblunsky;

pub use cocycle::{PolynomialQuad, ScaledProduct, SpectralPoint};
pub use error::{Error, Result};
pub use sampling::{CorrelationSpectrum, TrigPolynomial};
pub use torus::{ToralAutomorphism, TorusPoint};
pub use verblunsky::{Sign, VerblunskyConfig};
