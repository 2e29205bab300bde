//! One-step contraction of the synchronous (identity) coupling.
//!
//! Two chains start at `σ` and `σ^j`, pick the same site and the same uniform
//! variate. An update at `j` coalesces them; an update at `i ≠ j` creates a
//! disagreement with probability `|p_i(σ) − p_i(σ^j)|`. Distances are
//! reported both in flips (Hamming) and in ℓ¹ over ±1 vectors (2 per flip).

use crate::error::{Error, Result};
use crate::model::{heat_bath_plus, IsingModel, SpinConfiguration};
use crate::rng::{substream, uniform_index};

use super::{default_burn_in, heat_bath_update};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionValue {
    /// `E‖X₁ − X₁'‖₁` with ±1 coordinates.
    pub l1: f64,
    /// Expected number of disagreeing sites.
    pub hamming: f64,
}

fn hamming_after_step(model: &IsingModel, spins: &[i8], j: usize) -> f64 {
    let n = model.n_sites() as f64;
    let (nbrs, ws) = model.neighbors(j);
    let spread: f64 = nbrs
        .iter()
        .zip(ws)
        .map(|(&i, &w)| {
            let h = model.local_field_of(spins, i);
            // flipping σ_j shifts h_i by −2 w_ij σ_j
            let h_flipped = h - 2.0 * w * f64::from(spins[j]);
            (heat_bath_plus(h) - heat_bath_plus(h_flipped)).abs()
        })
        .sum();
    (n - 1.0) / n + spread / n
}

/// Expected distance after one coupled step from `(σ, σ^j)`.
pub fn one_step_contraction(
    model: &IsingModel,
    sigma: &SpinConfiguration,
    j: usize,
) -> Result<ContractionValue> {
    if sigma.len() != model.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: model.n_sites(),
            got: sigma.len(),
        });
    }
    if j >= model.n_sites() {
        return Err(Error::IndexOutOfRange {
            index: j,
            n_sites: model.n_sites(),
        });
    }
    let hamming = hamming_after_step(model, sigma.spins(), j);
    Ok(ContractionValue {
        l1: 2.0 * hamming,
        hamming,
    })
}

/// Maximum of the Hamming contraction over every `(σ, j)`; exponential in N.
pub fn exhaustive_contraction(model: &IsingModel) -> Result<f64> {
    let n = model.n_sites();
    let cap = crate::model::DEFAULT_ENUMERATION_CAP;
    if n > cap {
        return Err(Error::TooLarge { n_sites: n, cap });
    }
    let mut worst = 0.0f64;
    for code in 0..(1u64 << n) {
        let sigma = SpinConfiguration::from_index(code, n);
        for j in 0..n {
            worst = worst.max(hamming_after_step(model, sigma.spins(), j));
        }
    }
    Ok(worst)
}

/// Sampled lower estimate of the worst-case contraction, in Hamming units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionEstimate {
    pub estimate: f64,
    pub trials: usize,
    pub burn_in: u64,
}

/// Max over `trials` pairs `(σ, j)`, `σ` read from one chain after burn-in
/// (advanced `N` steps between trials) and `j` uniform.
pub fn estimate_contraction(model: &IsingModel, trials: usize, seed: u64) -> Result<ContractionEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = model.n_sites();
    let burn_in = default_burn_in(n);
    let mut rng = substream(seed, "contraction", 0);
    let mut spins = vec![0i8; n];
    crate::rng::fill_uniform_spins(&mut rng, &mut spins);
    for _ in 0..burn_in {
        heat_bath_update(model, &mut spins, &mut rng);
    }
    let mut worst = 0.0f64;
    for _ in 0..trials {
        for _ in 0..n {
            heat_bath_update(model, &mut spins, &mut rng);
        }
        let j = uniform_index(&mut rng, n);
        worst = worst.max(hamming_after_step(model, &spins, j));
    }
    Ok(ContractionEstimate {
        estimate: worst,
        trials,
        burn_in,
    })
}
