use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::MultilinearPolynomial;

/// A function of a spin configuration with a known polynomial degree and
/// coefficient bound. Implemented by explicit sparse polynomials and by dense
/// families that have a fast evaluator.
pub trait Statistic: Sync {
    fn n_sites(&self) -> usize;
    fn degree(&self) -> usize;
    /// `‖A‖_∞` of the underlying coefficient tensor.
    fn infinity_norm(&self) -> f64;
    fn value(&self, spins: &[i8]) -> f64;
    fn digest(&self) -> String;
}

impl Statistic for MultilinearPolynomial {
    fn n_sites(&self) -> usize {
        MultilinearPolynomial::n_sites(self)
    }

    fn degree(&self) -> usize {
        MultilinearPolynomial::degree(self)
    }

    fn infinity_norm(&self) -> f64 {
        MultilinearPolynomial::infinity_norm(self)
    }

    fn value(&self, spins: &[i8]) -> f64 {
        self.evaluate_spins(spins)
    }

    fn digest(&self) -> String {
        MultilinearPolynomial::digest(self)
    }
}

/// `c · e_d(σ) = c · Σ_{i₁<…<i_d} σ_{i₁}⋯σ_{i_d}`, the dense symmetric statistic
/// with every coefficient equal to `c`. Evaluated in `O(N·d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementarySymmetric {
    n_sites: usize,
    degree: usize,
    coefficient: f64,
}

impl ElementarySymmetric {
    pub fn new(n_sites: usize, degree: usize, coefficient: f64) -> Result<Self> {
        if degree > n_sites {
            return Err(Error::InvalidParameter(format!(
                "degree {degree} exceeds {n_sites} sites"
            )));
        }
        if !coefficient.is_finite() {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        Ok(Self {
            n_sites,
            degree,
            coefficient,
        })
    }

    /// Explicit sparse form; `C(N, d)` terms.
    pub fn to_polynomial(&self) -> MultilinearPolynomial {
        let mut terms = std::collections::BTreeMap::new();
        let mut key: Vec<usize> = (0..self.degree).collect();
        if self.coefficient == 0.0 {
            return MultilinearPolynomial::zero(self.n_sites);
        }
        loop {
            terms.insert(key.clone(), self.coefficient);
            // next combination in lexicographic order
            let d = self.degree;
            let Some(pos) = (0..d).rev().find(|&p| key[p] < self.n_sites - d + p) else {
                break;
            };
            key[pos] += 1;
            for q in pos + 1..d {
                key[q] = key[q - 1] + 1;
            }
        }
        MultilinearPolynomial::from_terms_unchecked(self.n_sites, terms)
    }
}

impl Statistic for ElementarySymmetric {
    fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn degree(&self) -> usize {
        self.degree
    }

    fn infinity_norm(&self) -> f64 {
        if self.degree == 0 {
            0.0
        } else {
            self.coefficient.abs()
        }
    }

    fn value(&self, spins: &[i8]) -> f64 {
        let d = self.degree;
        let mut e = vec![0.0f64; d + 1];
        e[0] = 1.0;
        for &s in spins {
            let s = f64::from(s);
            for j in (1..=d).rev() {
                e[j] += s * e[j - 1];
            }
        }
        self.coefficient * e[d]
    }

    fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"elementary-symmetric/v1");
        h.update((self.n_sites as u64).to_le_bytes());
        h.update((self.degree as u64).to_le_bytes());
        h.update(self.coefficient.to_bits().to_le_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpinConfiguration;

    #[test]
    fn matches_explicit_polynomial() {
        for d in 0..=4 {
            let e = ElementarySymmetric::new(7, d, 0.5).unwrap();
            let p = e.to_polynomial();
            let binom = [1, 7, 21, 35, 35][d];
            assert_eq!(p.terms().len(), binom);
            for code in 0..128u64 {
                let sigma = SpinConfiguration::from_index(code, 7);
                assert!((e.value(sigma.spins()) - p.evaluate(&sigma).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_up_is_binomial() {
        let e = ElementarySymmetric::new(10, 3, 1.0).unwrap();
        assert_eq!(e.value(&[1; 10]), 120.0);
        assert_eq!(e.infinity_norm(), 1.0);
        assert!(ElementarySymmetric::new(3, 4, 1.0).is_err());
    }
}
