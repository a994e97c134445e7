//! Ordinary least-squares line fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub points: usize,
}

/// Fits y = intercept + slope·x. Needs at least `min_points` (≥ 2) points
/// and some spread in x.
pub fn linear_fit(xs: &[f64], ys: &[f64], min_points: usize) -> Result<FitResult> {
    assert_eq!(xs.len(), ys.len(), "x and y lengths differ");
    let n = xs.len();
    let needed = min_points.max(2);
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData { needed, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    let (slope_se, intercept_se) = if n > 2 {
        let s2 = sse / (nf - 2.0);
        (
            (s2 / sxx).sqrt(),
            (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r2,
        slope_se,
        intercept_se,
        points: n,
    })
}
