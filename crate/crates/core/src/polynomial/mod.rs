//! Sparse multilinear polynomials on `{−1, +1}^N`, their discrete gradients
//! and site slices, and Lipschitz tools on subsets of the hypercube.

mod file;
mod lipschitz;
mod statistic;

pub use file::{parse_polynomial, read_polynomial, render_polynomial, write_polynomial};
pub use lipschitz::{
    connected_components, lipschitz_constant_on, mcshane_whitney_extend, SubsetTable,
};
pub use statistic::{ElementarySymmetric, Statistic};

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::SpinConfiguration;

/// `Σ_S a_S Π_{i∈S} σ_i` with every key `S` strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilinearPolynomial {
    n_sites: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

fn check_site(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n_sites: n });
    }
    Ok(())
}

/// Reduce raw terms with `σ_i² = 1`, sort keys, merge like terms and drop zeros.
pub fn canonicalize(raw_terms: &[(Vec<usize>, f64)], n: usize) -> Result<MultilinearPolynomial> {
    let mut terms: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (indices, coef) in raw_terms {
        if !coef.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite coefficient {coef}")));
        }
        let mut sorted = indices.clone();
        for &i in &sorted {
            check_site(i, n)?;
        }
        sorted.sort_unstable();
        let mut key = Vec::with_capacity(sorted.len());
        for i in sorted {
            if key.last() == Some(&i) {
                key.pop();
            } else {
                key.push(i);
            }
        }
        *terms.entry(key).or_insert(0.0) += coef;
    }
    terms.retain(|_, c| *c != 0.0);
    Ok(MultilinearPolynomial { n_sites: n, terms })
}

impl MultilinearPolynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n_sites: n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        if c != 0.0 {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    /// `Σ_i σ_i`.
    pub fn magnetization(n: usize) -> Self {
        Self {
            n_sites: n,
            terms: (0..n).map(|i| (vec![i], 1.0)).collect(),
        }
    }

    /// `Σ_{i<j} a_ij σ_i σ_j` from a dense upper triangle `a[i][j]`, `i < j`.
    pub fn quadratic(n: usize, a: impl Fn(usize, usize) -> f64) -> Self {
        let mut terms = BTreeMap::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let c = a(i, j);
                if c != 0.0 {
                    terms.insert(vec![i, j], c);
                }
            }
        }
        Self { n_sites: n, terms }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Length of the longest key; 0 for constants and the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.terms
    }

    pub fn coefficient(&self, key: &[usize]) -> f64 {
        self.terms.get(key).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max `|a_S|` over non-constant terms.
    pub fn infinity_norm(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| !k.is_empty())
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&[])
    }

    pub fn evaluate(&self, sigma: &SpinConfiguration) -> Result<f64> {
        if sigma.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                got: sigma.len(),
            });
        }
        Ok(self.evaluate_spins(sigma.spins()))
    }

    /// Unchecked evaluation on a raw ±1 slice.
    pub fn evaluate_spins(&self, spins: &[i8]) -> f64 {
        self.terms
            .iter()
            .map(|(key, &c)| {
                let sign: i32 = key.iter().map(|&i| i32::from(spins[i])).product();
                c * f64::from(sign)
            })
            .sum()
    }

    /// Evaluation on an encoded configuration (bit `i` set ⇔ `σ_i = +1`).
    pub fn evaluate_code(&self, code: u64) -> f64 {
        self.terms
            .iter()
            .map(|(key, &c)| {
                let minus = key.iter().filter(|&&i| (code >> i) & 1 == 0).count();
                if minus % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .sum()
    }

    /// `g(σ) = f(σ) − f(σ^ℓ)`: twice the terms that contain `ℓ`.
    pub fn discrete_gradient(&self, l: usize) -> Result<Self> {
        check_site(l, self.n_sites)?;
        Ok(Self {
            n_sites: self.n_sites,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.binary_search(&l).is_ok())
                .map(|(k, &c)| (k.clone(), 2.0 * c))
                .collect(),
        })
    }

    /// Terms containing `ℓ` with `ℓ` deleted. With sorted symmetric storage
    /// every position `j ∈ [1, d]` gives the same slice; `j` is validated only.
    pub fn slice_polynomial(&self, l: usize, j: usize) -> Result<Self> {
        check_site(l, self.n_sites)?;
        if j == 0 || j > self.degree().max(1) {
            return Err(Error::InvalidParameter(format!(
                "slice position {j} outside [1, {}]",
                self.degree().max(1)
            )));
        }
        Ok(self.slice(l))
    }

    pub(crate) fn slice(&self, l: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter_map(|(k, &c)| {
                let pos = k.binary_search(&l).ok()?;
                let mut rest = k.clone();
                rest.remove(pos);
                Some((rest, c))
            })
            .collect();
        Self {
            n_sites: self.n_sites,
            terms,
        }
    }

    /// Values of every slice at `spins`, computed in one pass over the terms.
    pub fn slice_values(&self, spins: &[i8]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_sites];
        for (key, &c) in &self.terms {
            let full: i32 = key.iter().map(|&i| i32::from(spins[i])).product();
            for &l in key {
                // dividing out σ_l is multiplying by it
                out[l] += c * f64::from(full * i32::from(spins[l]));
            }
        }
        out
    }

    /// SHA-256 over `N` and the canonical terms (exact bits).
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"multilinear-polynomial/v1");
        h.update((self.n_sites as u64).to_le_bytes());
        for (key, c) in &self.terms {
            h.update((key.len() as u64).to_le_bytes());
            for &i in key {
                h.update((i as u64).to_le_bytes());
            }
            h.update(c.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub(crate) fn from_terms_unchecked(n_sites: usize, terms: BTreeMap<Vec<usize>, f64>) -> Self {
        Self { n_sites, terms }
    }
}

/// Whether `max_ℓ |slice_ℓ(σ)| ≤ b · N^{(d−1)/2}`.
pub fn s_b_membership(f: &MultilinearPolynomial, sigma: &SpinConfiguration, b: f64) -> bool {
    let n = f.n_sites() as f64;
    let scale = b * n.powf((f.degree() as f64 - 1.0) / 2.0);
    f.slice_values(sigma.spins())
        .iter()
        .all(|v| v.abs() <= scale)
}
