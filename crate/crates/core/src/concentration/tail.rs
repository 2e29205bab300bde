//! Empirical tails of `N^{−d/2} |f − mean|` and stretched-exponential fits.
//!
//! The centering mean is the in-batch sample mean.

use serde::Serialize;

use crate::dynamics::SampleBatch;
use crate::error::{Error, Result};
use crate::polynomial::Statistic;
use crate::stats::{clopper_pearson, linear_fit, mean};

use super::evaluate_rows;

/// Exceedance counts below this are too few to report.
pub const MIN_EXCEEDANCES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub r: f64,
    pub exceedances: usize,
    pub trials: usize,
    pub p_hat: f64,
    /// 95% Clopper–Pearson interval.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    /// Slope of `log(−log p̂)` against `log r`.
    pub exponent: f64,
    pub intercept: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub points_used: usize,
}

/// `N^{−d/2} |f(σ) − f̄|` for every row, in row order.
pub fn normalized_deviations<S: Statistic + ?Sized>(batch: &SampleBatch, f: &S) -> Result<Vec<f64>> {
    let values = evaluate_rows(batch, f)?;
    if values.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let centre = mean(&values);
    let scale = (f.n_sites() as f64).powf(-(f.degree() as f64) / 2.0);
    Ok(values.iter().map(|v| scale * (v - centre).abs()).collect())
}

/// Empirical `P(N^{−d/2}|f − f̄| ≥ r)` on each grid point.
pub fn tail_curve<S: Statistic + ?Sized>(batch: &SampleBatch, f: &S, r_grid: &[f64]) -> Result<Vec<TailPoint>> {
    if r_grid.is_empty() {
        return Err(Error::InvalidParameter("empty r grid".into()));
    }
    if r_grid[0] < 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) || r_grid.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter(
            "r grid must be nonnegative and strictly increasing".into(),
        ));
    }
    let mut deviations = normalized_deviations(batch, f)?;
    deviations.sort_by(f64::total_cmp);
    let k = deviations.len();
    r_grid
        .iter()
        .map(|&r| {
            let exceedances = k - deviations.partition_point(|&x| x < r);
            if exceedances < MIN_EXCEEDANCES {
                return Err(Error::GridTooDeep {
                    r,
                    exceedances,
                    required: MIN_EXCEEDANCES,
                });
            }
            let (ci_lo, ci_hi) = clopper_pearson(exceedances, k, 0.95);
            Ok(TailPoint {
                r,
                exceedances,
                trials: k,
                p_hat: exceedances as f64 / k as f64,
                ci_lo,
                ci_hi,
            })
        })
        .collect()
}

/// `points` values of `r` evenly spaced on `(0, r_max]`, where `r_max` is the
/// largest deviation still exceeded by [`MIN_EXCEEDANCES`] rows.
pub fn auto_r_grid<S: Statistic + ?Sized>(batch: &SampleBatch, f: &S, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::InvalidParameter("grid needs at least one point".into()));
    }
    let mut deviations = normalized_deviations(batch, f)?;
    if deviations.len() < MIN_EXCEEDANCES {
        return Err(Error::GridTooDeep {
            r: 0.0,
            exceedances: deviations.len(),
            required: MIN_EXCEEDANCES,
        });
    }
    deviations.sort_by(f64::total_cmp);
    let r_max = deviations[deviations.len() - MIN_EXCEEDANCES];
    if r_max <= 0.0 {
        return Err(Error::InvalidParameter("statistic is constant on the batch".into()));
    }
    // i/points is exactly 1 at the end, so the last point is r_max itself
    Ok((1..=points).map(|i| r_max * (i as f64 / points as f64)).collect())
}

/// `[r at p̂ = 0.1, r at p̂ = 50/k]`: the first grid point with `p̂ ≤ 0.1` and
/// the last with `p̂ ≥ 50/k`.
pub fn default_fit_window(points: &[TailPoint]) -> Option<(f64, f64)> {
    let k = points.first()?.trials as f64;
    let lo = points.iter().find(|p| p.p_hat <= 0.1)?.r;
    let hi = points.iter().rev().find(|p| p.p_hat >= 50.0 / k)?.r;
    (lo <= hi).then_some((lo, hi))
}

/// Least-squares slope of `log(−log p̂)` on `log r` over points with `r` in
/// the window and `p̂ ∈ (10/k, 0.2)`.
pub fn fit_tail_exponent(points: &[TailPoint], window: (f64, f64)) -> Result<TailFit> {
    let used: Vec<&TailPoint> = points
        .iter()
        .filter(|p| {
            let floor = MIN_EXCEEDANCES as f64 / p.trials as f64;
            p.r > 0.0 && p.r >= window.0 && p.r <= window.1 && p.p_hat > floor && p.p_hat < 0.2
        })
        .collect();
    if used.len() < 4 {
        return Err(Error::InsufficientPoints {
            found: used.len(),
            required: 4,
        });
    }
    // tied p̂ (a discrete statistic between attainable values) carry no slope
    let mut levels: Vec<f64> = used.iter().map(|p| p.p_hat).collect();
    levels.dedup();
    if levels.len() < 3 {
        return Err(Error::InsufficientPoints {
            found: levels.len(),
            required: 3,
        });
    }
    let x: Vec<f64> = used.iter().map(|p| p.r.ln()).collect();
    let y: Vec<f64> = used.iter().map(|p| (-p.p_hat.ln()).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(TailFit {
        exponent: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        window,
        points_used: used.len(),
    })
}
