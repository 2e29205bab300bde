//! Variance, gradient-mean, FK-comparison and tail checks for polynomial
//! statistics of Ising samples.

mod report;
mod tail;

pub use report::{ConcentrationReport, ReportMetadata};
pub use tail::{
    auto_r_grid, default_fit_window, fit_tail_exponent, normalized_deviations, tail_curve, TailFit,
    TailPoint,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{sample, SampleBatch};
use crate::error::{Error, Result};
use crate::model::{exact_enumerate, gamma_for_margin, ExactSummary, IsingModel, SpinConfiguration};
use crate::polynomial::{MultilinearPolynomial, Statistic};
use crate::stats::{blocked_standard_error, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

/// `f` on every row, in row order.
pub fn evaluate_rows<S: Statistic + ?Sized>(batch: &SampleBatch, f: &S) -> Result<Vec<f64>> {
    if batch.n_sites() != f.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: f.n_sites(),
            got: batch.n_sites(),
        });
    }
    let rows: Vec<&[i8]> = batch.rows().collect();
    Ok(rows.par_iter().map(|r| f.value(r)).collect())
}

/// Unbiased sample variance of `f` over the rows; the standard error comes
/// from the spread of per-block variances over `⌊√k⌋` blocks.
pub fn estimate_variance<S: Statistic + ?Sized>(batch: &SampleBatch, f: &S) -> Result<VarianceEstimate> {
    let values = evaluate_rows(batch, f)?;
    if values.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(VarianceEstimate {
        estimate: sample_variance(&values),
        standard_error: blocked_standard_error(&values, sample_variance),
    })
}

/// `Var_π(f)` by direct summation over the enumerated law.
pub fn exact_variance<S: Statistic + ?Sized>(summary: &ExactSummary, f: &S) -> Result<f64> {
    if summary.n_sites != f.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: summary.n_sites,
            got: f.n_sites(),
        });
    }
    let values = exact_values(summary.n_sites, f);
    let mean: f64 = values.iter().zip(&summary.probabilities).map(|(v, p)| v * p).sum();
    Ok(values
        .iter()
        .zip(&summary.probabilities)
        .map(|(v, p)| p * (v - mean).powi(2))
        .sum())
}

/// Enumerate `model` and return `Var_π(f)`.
pub fn exact_variance_of<S: Statistic + ?Sized>(model: &IsingModel, f: &S) -> Result<f64> {
    exact_variance(&exact_enumerate(model)?, f)
}

fn exact_values<S: Statistic + ?Sized>(n: usize, f: &S) -> Vec<f64> {
    (0..1u64 << n)
        .into_par_iter()
        .map(|code| f.value(SpinConfiguration::from_index(code, n).spins()))
        .collect()
}

fn exact_mean<S: Statistic + ?Sized>(summary: &ExactSummary, f: &S) -> f64 {
    exact_values(summary.n_sites, f)
        .iter()
        .zip(&summary.probabilities)
        .map(|(v, p)| v * p)
        .sum()
}

/// Variance bound for `f = c + Σ_i b_i σ_i + Σ_{i<j} c_ij σ_i σ_j`:
///
/// ```text
/// (2γ/α) Σ_i b_i² + (4γ²/α²) Σ_{i≠j} c_ij² = (2γ/α) Σ b² + (8γ²/α²) Σ_{i<j} c²
/// ```
///
/// The quadratic part is the `4γ²/α² Σ_{i,j} |a_ij|²` bound with the ordered
/// coefficients `a_ij = a_ji = c_ij` of the canonical (merged) storage. At the
/// product measure the linear part is exact and the quadratic part is twice
/// the true variance.
pub fn quadratic_variance_bound(model: &IsingModel, f: &MultilinearPolynomial) -> Result<f64> {
    if f.n_sites() != model.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: model.n_sites(),
            got: f.n_sites(),
        });
    }
    if f.degree() > 2 {
        return Err(Error::DegreeTooHigh {
            degree: f.degree(),
            max: 2,
        });
    }
    let alpha = model.dobrushin_margin();
    if alpha <= 0.0 {
        return Err(Error::NotContracting(alpha));
    }
    let gamma = gamma_for_margin(alpha);
    let (mut linear, mut pairs) = (0.0, 0.0);
    for (key, c) in f.terms() {
        match key.len() {
            1 => linear += c * c,
            2 => pairs += c * c,
            _ => {}
        }
    }
    Ok(2.0 * gamma / alpha * linear + 8.0 * gamma * gamma / (alpha * alpha) * pairs)
}

/// How a gradient-mean check computed `E_π[h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MeanMethod {
    Exact,
    MonteCarlo { k: usize, seed: u64, standard_error: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientMeanCheck {
    pub abs_mean: f64,
    /// `|E h| / (‖B‖_∞ N^{p/2})`; 0 when `‖B‖_∞ = 0`.
    pub ratio: f64,
    pub method: MeanMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientMeanOptions {
    /// Enumerate when `N` is at most this.
    pub exact_limit: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for GradientMeanOptions {
    fn default() -> Self {
        Self {
            exact_limit: 16,
            k: 100_000,
            seed: 0,
        }
    }
}

pub fn gradient_mean_check<S: Statistic + ?Sized>(model: &IsingModel, h: &S) -> Result<GradientMeanCheck> {
    gradient_mean_check_with(model, h, &GradientMeanOptions::default())
}

pub fn gradient_mean_check_with<S: Statistic + ?Sized>(
    model: &IsingModel,
    h: &S,
    options: &GradientMeanOptions,
) -> Result<GradientMeanCheck> {
    let n = model.n_sites();
    if h.n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.n_sites(),
        });
    }
    let (mean, method) = if n <= options.exact_limit {
        (exact_mean(&exact_enumerate(model)?, h), MeanMethod::Exact)
    } else {
        // π(σ) = π(−σ) without an external field, so averaging h over each
        // row and its global flip is unbiased; odd h then averages to 0 exactly
        let batch = sample(model, options.k, None, options.seed)?;
        let values: Vec<f64> = batch
            .rows()
            .map(|r| {
                let flipped: Vec<i8> = r.iter().map(|s| -s).collect();
                0.5 * (h.value(r) + h.value(&flipped))
            })
            .collect();
        let se = (sample_variance(&values) / values.len() as f64).sqrt();
        (
            crate::stats::mean(&values),
            MeanMethod::MonteCarlo {
                k: options.k,
                seed: options.seed,
                standard_error: se,
            },
        )
    };
    let norm = h.infinity_norm() * (n as f64).powf(h.degree() as f64 / 2.0);
    Ok(GradientMeanCheck {
        abs_mean: mean.abs(),
        ratio: if norm > 0.0 { mean.abs() / norm } else { 0.0 },
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkComparison {
    /// `|E_π[σ_S]|`.
    pub lhs: f64,
    /// `E_π̃[σ_S]` for the ferromagnetic counterpart `π̃`.
    pub rhs: f64,
    pub ok: bool,
}

pub fn fk_comparison_check(model: &IsingModel, sites: &[usize]) -> Result<FkComparison> {
    let lhs = exact_enumerate(model)?.moment(sites)?.abs();
    let rhs = exact_enumerate(&model.ferromagnetic_counterpart())?.moment(sites)?;
    Ok(FkComparison {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-12,
    })
}
