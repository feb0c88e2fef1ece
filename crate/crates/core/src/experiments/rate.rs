use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(ln k, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::invalid("rate fit needs at least two points"));
    }
    for &(k, e) in points {
        for v in [k, e] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositive(v));
            }
        }
    }
    let n = points.len() as f64;
    let logs = || points.iter().map(|&(k, e)| (libm::log(k), libm::log(e)));
    let mx = logs().map(|(x, _)| x).sum::<f64>() / n;
    let my = logs().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = logs().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs distinct step sizes"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = logs()
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        rms_residual: libm::sqrt(rss / n),
    })
}
