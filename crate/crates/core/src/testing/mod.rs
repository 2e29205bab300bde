//! Independence testing for Ising models from i.i.d. samples.
//!
//! Convention: every sum over pairs runs over unordered pairs `i < j`, with
//! the merged weight `w_ij` of the model. In this convention
//! `d_SKL(π, ν) = Σ_{i<j} (w^π − w^ν)(λ^π − λ^ν)` and the tester thresholds
//! `ε/4` (ferromagnetic) and `ε²/(2N)` (general) need no extra factor: the
//! lower bounds `Σ_{i<j} λ² ≥ d_SKL/2` (ferromagnetic, FKG) and
//! `Σ_{i<j} λ² ≥ 2ε²/N` (Cauchy–Schwarz) hold as stated.

mod calibration;

pub use calibration::{
    calibrate_constant, reference_instance, run_power_trials, Calibration, CalibrationEntry, CalibrationResult,
    PowerExperiment, PowerResult,
    SHIPPED_CALIBRATION,
};

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::SampleBatch;
use crate::error::{Error, Result};
use crate::model::{exact_enumerate, ExactSummary, IsingModel};

/// Map from unordered pair `(i, j)`, `i < j`, to a value.
pub type PairMap = BTreeMap<(usize, usize), f64>;

/// A set of unordered site pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    n_sites: usize,
    pairs: Vec<(usize, usize)>,
}

impl EdgeSet {
    /// Pairs are stored as `(min, max)` in sorted order.
    pub fn new(n_sites: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(a, b) in pairs {
            for s in [a, b] {
                if s >= n_sites {
                    return Err(Error::IndexOutOfRange { index: s, n_sites });
                }
            }
            if a == b {
                return Err(Error::SelfCoupling(a));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidParameter(format!("duplicate pair ({a}, {b})")));
            }
        }
        Ok(Self {
            n_sites,
            pairs: seen.into_iter().collect(),
        })
    }

    pub fn all_pairs(n_sites: usize) -> Self {
        Self {
            n_sites,
            pairs: (0..n_sites)
                .flat_map(|i| ((i + 1)..n_sites).map(move |j| (i, j)))
                .collect(),
        }
    }

    /// Pairs with a nonzero coupling.
    pub fn of_model(model: &IsingModel) -> Self {
        Self {
            n_sites: model.n_sites(),
            pairs: model.couplings().map(|(p, _)| p).collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Exact `λ_ij = E_π[σ_i σ_j]` for every pair `i < j`. Without an external
/// field the single-site means vanish, so this is the covariance.
pub fn edge_correlations(model: &IsingModel) -> Result<PairMap> {
    Ok(correlations_from_summary(&exact_enumerate(model)?))
}

pub fn correlations_from_summary(summary: &ExactSummary) -> PairMap {
    let n = summary.n_sites;
    let pairs = EdgeSet::all_pairs(n);
    let values: Vec<f64> = pairs
        .pairs()
        .par_iter()
        .map(|&(i, j)| summary.moment_mask((1 << i) | (1 << j)))
        .collect();
    pairs.pairs().iter().copied().zip(values).collect()
}

/// Plug-in pair means `k⁻¹ Σ_ℓ σ_i^{(ℓ)} σ_j^{(ℓ)}` for every pair `i < j`.
pub fn empirical_correlations(batch: &SampleBatch) -> Result<PairMap> {
    let edges = EdgeSet::all_pairs(batch.n_sites());
    let k = batch.len();
    if k == 0 {
        return Err(Error::EmptyBatch);
    }
    let sums = pair_sums(batch, &edges);
    Ok(edges
        .pairs()
        .iter()
        .zip(sums)
        .map(|(&p, s)| (p, s as f64 / k as f64))
        .collect())
}

fn columns(batch: &SampleBatch) -> Vec<Vec<i8>> {
    let n = batch.n_sites();
    let mut cols = vec![Vec::with_capacity(batch.len()); n];
    for row in batch.rows() {
        for (c, &s) in cols.iter_mut().zip(row) {
            c.push(s);
        }
    }
    cols
}

/// Integer sums `Σ_ℓ σ_i^{(ℓ)} σ_j^{(ℓ)}` for the listed pairs.
fn pair_sums(batch: &SampleBatch, edges: &EdgeSet) -> Vec<i64> {
    let cols = columns(batch);
    edges
        .pairs()
        .par_iter()
        .map(|&(i, j)| {
            cols[i]
                .iter()
                .zip(&cols[j])
                .map(|(&a, &b)| i64::from(a * b))
                .sum()
        })
        .collect()
}

/// `Z_k = Σ_{pairs} (k⁻¹ Σ_ℓ σ_i^{(ℓ)} σ_j^{(ℓ)})²` over all pairs `i < j`, or
/// over `edges` when given.
pub fn z_statistic(batch: &SampleBatch, edges: Option<&EdgeSet>) -> Result<f64> {
    let k = batch.len();
    if k == 0 {
        return Err(Error::EmptyBatch);
    }
    let all;
    let edges = match edges {
        Some(e) => {
            if e.n_sites() != batch.n_sites() {
                return Err(Error::DimensionMismatch {
                    expected: batch.n_sites(),
                    got: e.n_sites(),
                });
            }
            e
        }
        None => {
            all = EdgeSet::all_pairs(batch.n_sites());
            &all
        }
    };
    let kf = k as f64;
    Ok(pair_sums(batch, edges)
        .iter()
        .map(|&s| (s as f64 / kf).powi(2))
        .sum())
}

/// `Σ_{i<j} (w^π_ij − w^ν_ij)(λ^π_ij − λ^ν_ij)` with exact correlations.
pub fn skl_divergence(model_pi: &IsingModel, model_nu: &IsingModel) -> Result<f64> {
    if model_pi.n_sites() != model_nu.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: model_pi.n_sites(),
            got: model_nu.n_sites(),
        });
    }
    let lambda_pi = edge_correlations(model_pi)?;
    let lambda_nu = edge_correlations(model_nu)?;
    Ok(skl_from_correlations(model_pi, model_nu, &lambda_pi, &lambda_nu))
}

/// The same sum with precomputed correlation maps (missing pairs read as 0).
pub fn skl_from_correlations(
    model_pi: &IsingModel,
    model_nu: &IsingModel,
    lambda_pi: &PairMap,
    lambda_nu: &PairMap,
) -> f64 {
    let support: BTreeSet<(usize, usize)> = model_pi
        .couplings()
        .chain(model_nu.couplings())
        .map(|(p, _)| p)
        .collect();
    support
        .iter()
        .map(|&(i, j)| {
            let dw = model_pi.coupling(i, j) - model_nu.coupling(i, j);
            let dl = lambda_pi.get(&(i, j)).copied().unwrap_or(0.0)
                - lambda_nu.get(&(i, j)).copied().unwrap_or(0.0);
            dw * dl
        })
        .sum()
}

/// `E[Z_k] = Σ [λ² + (1 − λ²)/k]` over all pairs `i < j`.
pub fn expected_z(model: &IsingModel, k: usize) -> Result<f64> {
    expected_z_from(edge_correlations(model)?.values().copied(), k)
}

/// `E[Z_k]` from the correlations of the pairs entering the statistic.
pub fn expected_z_from(lambdas: impl IntoIterator<Item = f64>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let kf = k as f64;
    Ok(lambdas.into_iter().map(|l| l * l + (1.0 - l * l) / kf).sum())
}

/// `Σ [λ² + (1 − λ)/k]`, the alternative form of the mean with a linear
/// `k⁻¹` term; kept so experiments can compare both against data.
pub fn expected_z_linear_form(lambdas: impl IntoIterator<Item = f64>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let kf = k as f64;
    Ok(lambdas.into_iter().map(|l| l * l + (1.0 - l) / kf).sum())
}

/// `32γ²/α² · m/k²`.
pub fn variance_zk_bound(alpha: f64, gamma: f64, m: usize, k: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1]")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} outside (0, 1]")));
    }
    if m == 0 || k == 0 {
        return Err(Error::InvalidParameter("m and k must be at least 1".into()));
    }
    Ok(32.0 * gamma * gamma / (alpha * alpha) * m as f64 / (k as f64).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TesterMode {
    Ferromagnetic,
    General,
}

impl TesterMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TesterMode::Ferromagnetic => "ferromagnetic",
            TesterMode::General => "general",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ferromagnetic" => Ok(TesterMode::Ferromagnetic),
            "general" => Ok(TesterMode::General),
            other => Err(Error::Parse(format!("unknown tester mode {other:?}"))),
        }
    }

    /// `ε/4` or `ε²/(2N)`.
    pub fn threshold(&self, epsilon: f64, n_sites: usize) -> f64 {
        match self {
            TesterMode::Ferromagnetic => epsilon / 4.0,
            TesterMode::General => epsilon * epsilon / (2.0 * n_sites as f64),
        }
    }
}

/// Sample count for a tester: `⌈C·N/ε⌉` or `⌈C·√m/ε⌉` (ferromagnetic),
/// `⌈C·N²/ε²⌉` or `⌈C·N·√m/ε²⌉` (general); `m` is the known edge count.
pub fn required_samples(mode: TesterMode, n_sites: usize, m: Option<usize>, epsilon: f64, c: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("constant {c} must be positive")));
    }
    if n_sites == 0 {
        return Err(Error::InvalidParameter("no sites".into()));
    }
    let n = n_sites as f64;
    let scale = match (mode, m) {
        (TesterMode::Ferromagnetic, None) => n / epsilon,
        (TesterMode::Ferromagnetic, Some(m)) => (m as f64).sqrt() / epsilon,
        (TesterMode::General, None) => n * n / (epsilon * epsilon),
        (TesterMode::General, Some(m)) => n * (m as f64).sqrt() / (epsilon * epsilon),
    };
    let k = (c * scale).ceil();
    if k > usize::MAX as f64 / 2.0 {
        return Err(Error::InvalidParameter("sample count overflows".into()));
    }
    Ok((k as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    ProductMeasure,
    Dependent,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::ProductMeasure => "product-measure",
            Decision::Dependent => "dependent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestVerdict {
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
    pub samples_used: usize,
    pub mode: TesterMode,
    pub edges_known: bool,
    pub epsilon: f64,
    /// Pair-sum convention of the statistic and threshold.
    pub convention: String,
}

fn run_test(mode: TesterMode, batch: &SampleBatch, epsilon: f64, edges: Option<&EdgeSet>) -> Result<TestVerdict> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    let statistic = z_statistic(batch, edges)?;
    let threshold = mode.threshold(epsilon, batch.n_sites());
    Ok(TestVerdict {
        decision: if statistic > threshold {
            Decision::Dependent
        } else {
            Decision::ProductMeasure
        },
        statistic,
        threshold,
        samples_used: batch.len(),
        mode,
        edges_known: edges.is_some(),
        epsilon,
        convention: "unordered pairs i<j, merged weights; threshold factor 1".into(),
    })
}

/// Product measure iff `Z_k ≤ ε/4`.
pub fn test_ferromagnetic(batch: &SampleBatch, epsilon: f64, edges: Option<&EdgeSet>) -> Result<TestVerdict> {
    run_test(TesterMode::Ferromagnetic, batch, epsilon, edges)
}

/// Product measure iff `Z_k ≤ ε²/(2N)`.
pub fn test_general(batch: &SampleBatch, epsilon: f64, edges: Option<&EdgeSet>) -> Result<TestVerdict> {
    run_test(TesterMode::General, batch, epsilon, edges)
}

pub fn run_tester(
    mode: TesterMode,
    batch: &SampleBatch,
    epsilon: f64,
    edges: Option<&EdgeSet>,
) -> Result<TestVerdict> {
    run_test(mode, batch, epsilon, edges)
}
