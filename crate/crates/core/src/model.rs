//! Ising models with arbitrary pairwise couplings and the exact enumeration
//! oracle.
//!
//! Coupling convention: for each unordered pair `{i, j}` the model stores the
//! total double-sum weight `w_ij = J_ij + J_ji`, so that
//!
//! ```text
//! H(σ) = -Σ_{i,j} J_ij σ_i σ_j = -Σ_{i<j} w_ij σ_i σ_j
//! ```
//!
//! The Dobrushin row sum of site `i` is `Σ_j |w_ij|`, the local field is
//! `h_i = Σ_j w_ij σ_j`, and the heat-bath conditional is
//! `P(σ_i = +1 | rest) = (1 + tanh h_i) / 2`.
//!
//! Configurations are encoded as integers with site `i` on bit `i`; a set bit
//! means spin `+1`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest N accepted by [`exact_enumerate`] unless a cap is given explicitly.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// A vector of ±1 spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad as i64));
        }
        Ok(Self { spins })
    }

    pub fn all_up(n: usize) -> Self {
        Self { spins: vec![1; n] }
    }

    /// Decode from the bit encoding (bit `i` set ⇔ spin `i` is +1).
    pub fn from_index(code: u64, n: usize) -> Self {
        Self {
            spins: (0..n)
                .map(|i| if (code >> i) & 1 == 1 { 1 } else { -1 })
                .collect(),
        }
    }

    pub fn to_index(&self) -> u64 {
        spins_to_index(&self.spins)
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn get(&self, i: usize) -> i8 {
        self.spins[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip(i);
        out
    }

    pub(crate) fn from_raw(spins: Vec<i8>) -> Self {
        debug_assert!(spins.iter().all(|&s| s == 1 || s == -1));
        Self { spins }
    }

    pub fn into_spins(self) -> Vec<i8> {
        self.spins
    }
}

/// Bit encoding of a raw spin slice (at most 64 sites).
pub fn spins_to_index(spins: &[i8]) -> u64 {
    debug_assert!(spins.len() <= 64);
    spins
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0)
        .fold(0u64, |acc, (i, _)| acc | (1 << i))
}

/// Spin of site `i` in encoded configuration `code`.
#[inline]
pub fn spin_of(code: u64, i: usize) -> f64 {
    if (code >> i) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Heat-bath probability of spin +1 given local field `h`.
#[inline]
pub fn heat_bath_plus(h: f64) -> f64 {
    0.5 * (1.0 + h.tanh())
}

/// Bound γ on `N · max P(σ, σ')` for heat-bath dynamics at Dobrushin margin
/// `alpha`: `γ = [1 + tanh(2(1 − α))] / 2`.
pub fn gamma_for_margin(alpha: f64) -> f64 {
    0.5 * (1.0 + (2.0 * (1.0 - alpha)).tanh())
}

#[derive(Debug, Clone, PartialEq)]
struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl Adjacency {
    fn build(n: usize, pairs: &BTreeMap<(usize, usize), f64>) -> Self {
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &w) in pairs {
            lists[i].push((j, w));
            lists[j].push((i, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for list in lists {
            for (j, w) in list {
                neighbors.push(j);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        Self {
            offsets,
            neighbors,
            weights,
        }
    }
}

/// Ising model with sparse symmetric couplings and no external field.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n_sites: usize,
    label: String,
    pairs: BTreeMap<(usize, usize), f64>,
    adjacency: Adjacency,
}

/// Build a model from ordered-pair contributions `(i, j, J_ij)`.
///
/// Both orientations of a pair and repeated entries are summed into the
/// single canonical weight `w_ij`; merged weights that are exactly zero are
/// dropped.
pub fn build_model(n: usize, entries: &[(usize, usize, f64)]) -> Result<IsingModel> {
    if n == 0 {
        return Err(Error::InvalidParameter("model needs at least one site".into()));
    }
    let mut pairs = BTreeMap::new();
    for &(i, j, value) in entries {
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    n_sites: n,
                });
            }
        }
        if i == j {
            return Err(Error::SelfCoupling(i));
        }
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupling ({i}, {j}) is not finite"
            )));
        }
        *pairs.entry((i.min(j), i.max(j))).or_insert(0.0) += value;
    }
    pairs.retain(|_, w| *w != 0.0);
    Ok(IsingModel::from_pairs(n, pairs, String::new()))
}

impl IsingModel {
    fn from_pairs(n_sites: usize, pairs: BTreeMap<(usize, usize), f64>, label: String) -> Self {
        let adjacency = Adjacency::build(n_sites, &pairs);
        Self {
            n_sites,
            label,
            pairs,
            adjacency,
        }
    }

    /// Product measure on `n` sites.
    pub fn product(n: usize) -> Result<Self> {
        build_model(n, &[])
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Canonical entries `((i, j), w_ij)` with `i < j`, in sorted order.
    pub fn couplings(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.pairs.iter().map(|(&k, &w)| (k, w))
    }

    /// Canonical weight of the unordered pair, zero if absent.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.pairs.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// Number of nonzero couplings.
    pub fn edge_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_ferromagnetic(&self) -> bool {
        self.pairs.values().all(|&w| w >= 0.0)
    }

    /// Neighbor indices and weights of site `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> (&[usize], &[f64]) {
        let a = &self.adjacency;
        let (lo, hi) = (a.offsets[i], a.offsets[i + 1]);
        (&a.neighbors[lo..hi], &a.weights[lo..hi])
    }

    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.neighbors(i).1.iter().map(|w| w.abs()).sum()
    }

    /// `α = 1 − max_i Σ_j |w_ij|`. Negative values mean the Dobrushin
    /// condition fails.
    pub fn dobrushin_margin(&self) -> f64 {
        let worst = (0..self.n_sites)
            .map(|i| self.row_abs_sum(i))
            .fold(0.0, f64::max);
        1.0 - worst
    }

    fn check_dims(&self, sigma: &SpinConfiguration) -> Result<()> {
        if sigma.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                got: sigma.len(),
            });
        }
        Ok(())
    }

    /// `H(σ) = −Σ_{i<j} w_ij σ_i σ_j`.
    pub fn energy(&self, sigma: &SpinConfiguration) -> Result<f64> {
        self.check_dims(sigma)?;
        Ok(self.energy_of(sigma.spins()))
    }

    pub(crate) fn energy_of(&self, spins: &[i8]) -> f64 {
        -self
            .pairs
            .iter()
            .map(|(&(i, j), &w)| w * f64::from(spins[i] * spins[j]))
            .sum::<f64>()
    }

    /// Energy of an encoded configuration.
    pub fn energy_of_index(&self, code: u64) -> f64 {
        -self
            .pairs
            .iter()
            .map(|(&(i, j), &w)| {
                if ((code >> i) ^ (code >> j)) & 1 == 0 {
                    w
                } else {
                    -w
                }
            })
            .sum::<f64>()
    }

    /// Local field `h_i = Σ_j w_ij σ_j`, so that
    /// `H(σ with σ_i = −1) − H(σ with σ_i = +1) = 2 h_i`.
    pub fn local_field(&self, sigma: &SpinConfiguration, i: usize) -> Result<f64> {
        self.check_dims(sigma)?;
        if i >= self.n_sites {
            return Err(Error::IndexOutOfRange {
                index: i,
                n_sites: self.n_sites,
            });
        }
        Ok(self.local_field_of(sigma.spins(), i))
    }

    #[inline]
    pub fn local_field_of(&self, spins: &[i8], i: usize) -> f64 {
        let (nbrs, ws) = self.neighbors(i);
        nbrs.iter()
            .zip(ws)
            .map(|(&j, &w)| w * f64::from(spins[j]))
            .sum()
    }

    /// Heat-bath conditional `P(σ_i = +1 | σ_{−i})`.
    pub fn conditional_plus(&self, sigma: &SpinConfiguration, i: usize) -> Result<f64> {
        Ok(heat_bath_plus(self.local_field(sigma, i)?))
    }

    /// Same sparsity pattern with every weight replaced by its absolute value.
    pub fn ferromagnetic_counterpart(&self) -> Self {
        let pairs = self.pairs.iter().map(|(&k, &w)| (k, w.abs())).collect();
        Self::from_pairs(self.n_sites, pairs, self.label.clone())
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let pairs = self
            .pairs
            .iter()
            .map(|(&k, &w)| (k, w * factor))
            .filter(|(_, w)| *w != 0.0)
            .collect();
        Self::from_pairs(self.n_sites, pairs, self.label.clone())
    }

    /// SHA-256 over the site count and the canonical entries (exact bits).
    /// The label does not participate.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"ising-model/v1");
        h.update((self.n_sites as u64).to_le_bytes());
        for (&(i, j), &w) in &self.pairs {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
            h.update(w.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Brute-force oracle output for a small model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSummary {
    pub n_sites: usize,
    pub log_partition: f64,
    /// Indexed by configuration code.
    pub probabilities: Vec<f64>,
    pub model_digest: String,
}

/// Enumerate all `2^N` configurations (N ≤ [`DEFAULT_ENUMERATION_CAP`]).
pub fn exact_enumerate(model: &IsingModel) -> Result<ExactSummary> {
    exact_enumerate_with_cap(model, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_enumerate_with_cap(model: &IsingModel, cap: usize) -> Result<ExactSummary> {
    let n = model.n_sites();
    if n > cap || n > 40 {
        return Err(Error::TooLarge { n_sites: n, cap });
    }
    let size = 1usize << n;
    let log_weights: Vec<f64> = (0..size as u64)
        .into_par_iter()
        .map(|code| -model.energy_of_index(code))
        .collect();
    let shift = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probabilities: Vec<f64> = log_weights.iter().map(|&lw| (lw - shift).exp()).collect();
    let total: f64 = probabilities.iter().sum();
    probabilities.iter_mut().for_each(|p| *p /= total);
    Ok(ExactSummary {
        n_sites: n,
        log_partition: shift + total.ln(),
        probabilities,
        model_digest: model.digest(),
    })
}

impl ExactSummary {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// `Σ_σ P(σ) g(σ)` over encoded configurations.
    pub fn expect<F: Fn(u64) -> f64>(&self, g: F) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(code, &p)| p * g(code as u64))
            .sum()
    }

    /// `E[Π_{i∈sites} σ_i]`; the empty set gives 1.
    pub fn moment(&self, sites: &[usize]) -> Result<f64> {
        let mask = self.site_mask(sites)?;
        Ok(self.moment_mask(mask))
    }

    pub(crate) fn moment_mask(&self, mask: u64) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(code, &p)| {
                // spin −1 ⇔ bit clear
                if (!(code as u64) & mask).count_ones() % 2 == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum()
    }

    pub(crate) fn site_mask(&self, sites: &[usize]) -> Result<u64> {
        let mut mask = 0u64;
        for &s in sites {
            if s >= self.n_sites {
                return Err(Error::IndexOutOfRange {
                    index: s,
                    n_sites: self.n_sites,
                });
            }
            if mask & (1 << s) != 0 {
                return Err(Error::InvalidParameter(format!("repeated site {s}")));
            }
            mask |= 1 << s;
        }
        Ok(mask)
    }

    /// Exact conditional `P(σ_i = +1 | σ_{−i})` from the joint table.
    pub fn conditional_plus(&self, code: u64, i: usize) -> f64 {
        let up = self.probabilities[(code | (1 << i)) as usize];
        let down = self.probabilities[(code & !(1 << i)) as usize];
        up / (up + down)
    }
}

/// `E_π[Π_{i∈sites} σ_i]` from an exact summary.
pub fn exact_moment(summary: &ExactSummary, sites: &[usize]) -> Result<f64> {
    summary.moment(sites)
}
