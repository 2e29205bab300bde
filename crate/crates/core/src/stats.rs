//! Small statistics helpers: exact binomial intervals, ordinary least squares
//! with a t-based slope interval, and blocked standard errors.

use statrs::distribution::{Beta, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-sided Clopper–Pearson interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: usize, trials: usize, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let tail = (1.0 - confidence) / 2.0;
    let x = successes as f64;
    let n = trials as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).expect("valid beta").inverse_cdf(tail)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).expect("valid beta").inverse_cdf(1.0 - tail)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_standard_error: f64,
    /// 95% t interval for the slope.
    pub slope_interval: (f64, f64),
    /// Root mean square residual.
    pub residual: f64,
}

/// Least-squares line through `(x, y)`; needs three or more points for the
/// slope interval (two points give an infinite interval).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientPoints { found: n, required: 2 });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all x values coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let residual = (sse / nf).sqrt();
    let (se, interval) = if n > 2 {
        let se = (sse / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0)
            .expect("valid t")
            .inverse_cdf(0.975);
        (se, (slope - t * se, slope + t * se))
    } else {
        (f64::INFINITY, (f64::NEG_INFINITY, f64::INFINITY))
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_standard_error: se,
        slope_interval: interval,
        residual,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Standard error of `stat` over `values` from `⌊√k⌋` contiguous blocks.
pub fn blocked_standard_error(values: &[f64], stat: impl Fn(&[f64]) -> f64) -> f64 {
    let k = values.len();
    let blocks = (k as f64).sqrt().floor() as usize;
    if blocks < 2 {
        return f64::INFINITY;
    }
    let size = k / blocks;
    let per_block: Vec<f64> = values.chunks_exact(size).take(blocks).map(&stat).collect();
    (sample_variance(&per_block) / blocks as f64).sqrt()
}
