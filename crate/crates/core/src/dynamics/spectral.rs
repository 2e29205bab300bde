//! Exact heat-bath kernel over all `2^N` states, its spectral gap and
//! Dirichlet form.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{exact_enumerate_with_cap, heat_bath_plus, ExactSummary, IsingModel};
use crate::rng::{substream, uniform_unit};

/// Largest N for which the kernel is materialised.
pub const DEFAULT_MATRIX_CAP: usize = 14;

const LANCZOS_TOL: f64 = 1e-13;
const LANCZOS_MAX_ITER: usize = 600;

/// Sparse heat-bath kernel: from each state only the `N` single-flip moves
/// and the diagonal are nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n_sites: usize,
    /// `flip[code * N + i] = P(σ, σ^i)`.
    flip: Vec<f64>,
    stay: Vec<f64>,
}

pub fn transition_matrix(model: &IsingModel) -> Result<TransitionMatrix> {
    transition_matrix_with_cap(model, DEFAULT_MATRIX_CAP)
}

pub fn transition_matrix_with_cap(model: &IsingModel, cap: usize) -> Result<TransitionMatrix> {
    let n = model.n_sites();
    if n > cap || n > 30 {
        return Err(Error::TooLarge { n_sites: n, cap });
    }
    let states = 1usize << n;
    let inv_n = 1.0 / n as f64;
    let mut flip = vec![0.0; states * n];
    let mut stay = vec![0.0; states];
    let mut spins = vec![0i8; n];
    for code in 0..states {
        for (i, s) in spins.iter_mut().enumerate() {
            *s = if (code >> i) & 1 == 1 { 1 } else { -1 };
        }
        let mut moved = 0.0;
        for i in 0..n {
            let p_plus = heat_bath_plus(model.local_field_of(&spins, i));
            let p_flip = if spins[i] > 0 { 1.0 - p_plus } else { p_plus };
            flip[code * n + i] = inv_n * p_flip;
            moved += inv_n * p_flip;
        }
        stay[code] = 1.0 - moved;
    }
    Ok(TransitionMatrix {
        n_sites: n,
        flip,
        stay,
    })
}

impl TransitionMatrix {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_states(&self) -> usize {
        self.stay.len()
    }

    /// `P(σ, σ^i)`.
    pub fn flip_probability(&self, code: usize, i: usize) -> f64 {
        self.flip[code * self.n_sites + i]
    }

    pub fn stay_probability(&self, code: usize) -> f64 {
        self.stay[code]
    }

    /// `P(from, to)` for arbitrary states.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        let diff = from ^ to;
        match diff.count_ones() {
            0 => self.stay[from],
            1 => self.flip_probability(from, diff.trailing_zeros() as usize),
            _ => 0.0,
        }
    }

    pub fn row_sum(&self, code: usize) -> f64 {
        let n = self.n_sites;
        self.stay[code] + self.flip[code * n..(code + 1) * n].iter().sum::<f64>()
    }

    /// Largest off-diagonal entry.
    pub fn max_off_diagonal(&self) -> f64 {
        self.flip.iter().copied().fold(0.0, f64::max)
    }

    /// `μ P` for a row vector `μ`.
    pub fn apply_left(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.n_sites;
        (0..self.n_states())
            .map(|b| {
                self.stay[b] * mu[b]
                    + (0..n)
                        .map(|i| {
                            let a = b ^ (1 << i);
                            mu[a] * self.flip[a * n + i]
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    /// Dense copy, for small state spaces.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let s = self.n_states();
        DMatrix::from_fn(s, s, |a, b| self.entry(a, b))
    }
}

/// Kernel plus its enumerated stationary law.
#[derive(Debug, Clone)]
pub struct ExactChain {
    pub matrix: TransitionMatrix,
    pub summary: ExactSummary,
}

impl ExactChain {
    pub fn new(model: &IsingModel) -> Result<Self> {
        Self::with_cap(model, DEFAULT_MATRIX_CAP)
    }

    pub fn with_cap(model: &IsingModel, cap: usize) -> Result<Self> {
        let matrix = transition_matrix_with_cap(model, cap)?;
        let summary = exact_enumerate_with_cap(model, cap)?;
        Ok(Self { matrix, summary })
    }

    fn pi(&self) -> &[f64] {
        &self.summary.probabilities
    }

    /// `max_σ |(πP)(σ) − π(σ)|`.
    pub fn stationarity_error(&self) -> f64 {
        self.matrix
            .apply_left(self.pi())
            .iter()
            .zip(self.pi())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `max |π(σ)P(σ,σ') − π(σ')P(σ',σ)|` over neighbouring pairs.
    pub fn detailed_balance_error(&self) -> f64 {
        let n = self.matrix.n_sites;
        let pi = self.pi();
        let mut worst = 0.0f64;
        for a in 0..self.matrix.n_states() {
            for i in 0..n {
                let b = a ^ (1 << i);
                let lhs = pi[a] * self.matrix.flip_probability(a, i);
                let rhs = pi[b] * self.matrix.flip_probability(b, i);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst
    }

    pub fn variance(&self, f: &[f64]) -> Result<f64> {
        self.check_table(f)?;
        let pi = self.pi();
        let mean: f64 = pi.iter().zip(f).map(|(p, x)| p * x).sum();
        Ok(pi.iter().zip(f).map(|(p, x)| p * (x - mean).powi(2)).sum())
    }

    fn check_table(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.matrix.n_states() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.n_states(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// `ℰ(f,f) = ½ Σ_{σ,σ'} π(σ) P(σ,σ') (f(σ) − f(σ'))²`.
    pub fn dirichlet_form(&self, f: &[f64]) -> Result<f64> {
        self.check_table(f)?;
        let n = self.matrix.n_sites;
        let pi = self.pi();
        let mut total = 0.0;
        for a in 0..self.matrix.n_states() {
            for i in 0..n {
                let b = a ^ (1 << i);
                total += pi[a] * self.matrix.flip_probability(a, i) * (f[a] - f[b]).powi(2);
            }
        }
        Ok(0.5 * total)
    }

    /// `1 − λ₂` of the kernel.
    pub fn spectral_gap(&self) -> f64 {
        (1.0 - self.second_eigenvalue()).max(0.0)
    }

    /// Second-largest eigenvalue, by Lanczos with full reorthogonalisation on
    /// `D^{1/2} P D^{−1/2}` restricted to the complement of `√π`.
    pub fn second_eigenvalue(&self) -> f64 {
        let n = self.matrix.n_sites;
        let states = self.matrix.n_states();
        // Symmetrised off-diagonal: √(P(a,b) P(b,a)) = √(π(a)/π(b)) P(a,b).
        let sym: Vec<f64> = (0..states * n)
            .map(|idx| {
                let (a, i) = (idx / n, idx % n);
                let b = a ^ (1 << i);
                (self.matrix.flip[idx] * self.matrix.flip[b * n + i]).sqrt()
            })
            .collect();
        let top: Vec<f64> = self.pi().iter().map(|p| p.sqrt()).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for a in 0..states {
                let mut acc = self.matrix.stay[a] * x[a];
                for i in 0..n {
                    acc += sym[a * n + i] * x[a ^ (1 << i)];
                }
                y[a] = acc;
            }
        };
        lanczos_top(states, &top, apply)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Largest eigenvalue of a symmetric operator on the orthogonal complement of
/// the unit vector `deflate`.
fn lanczos_top<F: Fn(&[f64], &mut [f64])>(dim: usize, deflate: &[f64], apply: F) -> f64 {
    let krylov_dim = dim - 1;
    if krylov_dim == 0 {
        return f64::NEG_INFINITY;
    }
    let mut rng = substream(0, "lanczos-start", 0);
    let mut q: Vec<f64> = (0..dim).map(|_| 2.0 * uniform_unit(&mut rng) - 1.0).collect();
    let c = dot(&q, deflate);
    axpy(-c, deflate, &mut q);
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut theta = f64::NEG_INFINITY;
    let max_iter = krylov_dim.min(LANCZOS_MAX_ITER);
    for j in 0..max_iter {
        apply(&q, &mut w);
        let alpha = dot(&q, &w);
        axpy(-alpha, &q, &mut w);
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            axpy(-beta, prev, &mut w);
        }
        // two passes of full reorthogonalisation
        for _ in 0..2 {
            let c = dot(&w, deflate);
            axpy(-c, deflate, &mut w);
            for v in basis.iter().chain(std::iter::once(&q)) {
                let c = dot(&w, v);
                axpy(-c, v, &mut w);
            }
        }
        alphas.push(alpha);
        let beta = dot(&w, &w).sqrt();
        basis.push(std::mem::replace(&mut q, vec![0.0; dim]));

        let last = j + 1 == max_iter;
        if j % 4 == 3 || last || beta < 1e-14 {
            let m = alphas.len();
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (idx, &value) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty tridiagonal");
            theta = value;
            let residual = beta * eig.eigenvectors[(m - 1, idx)].abs();
            if residual < LANCZOS_TOL || beta < 1e-14 {
                break;
            }
        }
        if last {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|x| x / beta).collect();
    }
    theta
}

/// `1 − λ₂` of the heat-bath kernel (N ≤ [`DEFAULT_MATRIX_CAP`]).
pub fn spectral_gap(model: &IsingModel) -> Result<f64> {
    Ok(ExactChain::new(model)?.spectral_gap())
}

/// Dirichlet form of a function given as a table over all `2^N` states.
pub fn dirichlet_form(model: &IsingModel, f_values: &[f64]) -> Result<f64> {
    ExactChain::new(model)?.dirichlet_form(f_values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, gamma_for_margin};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(n: usize, alpha: f64, rng: &mut ChaCha8Rng) -> IsingModel {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.5 {
                    entries.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let raw = build_model(n, &entries).unwrap();
        crate::families::scale_to_margin(&raw, alpha).unwrap()
    }

    /// Independent route: dense symmetric eigensolver on D^{1/2} P D^{-1/2}.
    fn dense_gap(chain: &ExactChain) -> f64 {
        let p = chain.matrix.to_dense();
        let pi = &chain.summary.probabilities;
        let s = p.nrows();
        let sym = DMatrix::from_fn(s, s, |a, b| (pi[a] / pi[b]).sqrt() * p[(a, b)]);
        let sym = (&sym + sym.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        1.0 - ev[1]
    }

    #[test]
    fn product_kernel_entries() {
        let m = IsingModel::product(2).unwrap();
        let p = transition_matrix(&m).unwrap();
        for a in 0..4 {
            assert!((p.flip_probability(a, 0) - 0.25).abs() < 1e-15);
            assert!((p.flip_probability(a, 1) - 0.25).abs() < 1e-15);
            assert!((p.stay_probability(a) - 0.5).abs() < 1e-15);
        }
        assert_eq!(p.entry(0b00, 0b11), 0.0);
    }

    #[test]
    fn rows_sum_to_one_and_balance_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let m = random_model(8, 0.3, &mut rng);
            let chain = ExactChain::new(&m).unwrap();
            for a in 0..chain.matrix.n_states() {
                assert!((chain.matrix.row_sum(a) - 1.0).abs() < 1e-12);
            }
            assert!(chain.detailed_balance_error() < 1e-12);
            assert!(chain.stationarity_error() < 1e-12);
        }
    }

    #[test]
    fn product_gap_is_one_over_n() {
        for n in 1..=7 {
            let gap = spectral_gap(&IsingModel::product(n).unwrap()).unwrap();
            assert!((gap - 1.0 / n as f64).abs() < 1e-12, "n={n}: {gap}");
        }
    }

    #[test]
    fn lanczos_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 3, 5, 8] {
            for alpha in [0.1, 0.5] {
                let m = random_model(n, alpha, &mut rng);
                let chain = ExactChain::new(&m).unwrap();
                let a = chain.spectral_gap();
                let b = dense_gap(&chain);
                assert!((a - b).abs() < 1e-10, "n={n}: lanczos {a} dense {b}");
            }
        }
    }

    #[test]
    fn gap_at_least_margin_over_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [4, 6, 9] {
            for alpha in [0.1, 0.3, 0.5, 0.9] {
                let m = random_model(n, alpha, &mut rng);
                let gap = spectral_gap(&m).unwrap();
                assert!(gap >= alpha / n as f64 - 1e-12);
            }
        }
    }

    #[test]
    fn max_transition_below_gamma_over_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for alpha in [0.1, 0.5, 0.9] {
            let m = random_model(10, alpha, &mut rng);
            let p = transition_matrix(&m).unwrap();
            assert!(p.max_off_diagonal() <= gamma_for_margin(alpha) / 10.0 + 1e-15);
        }
    }

    #[test]
    fn dirichlet_examples() {
        let m = IsingModel::product(2).unwrap();
        let chain = ExactChain::new(&m).unwrap();
        assert_eq!(chain.dirichlet_form(&[3.0; 4]).unwrap(), 0.0);
        // f = σ_0: only flips of site 0 change f, by 2, with probability 1/4
        let f: Vec<f64> = (0..4).map(|c| if c & 1 == 1 { 1.0 } else { -1.0 }).collect();
        assert!((chain.dirichlet_form(&f).unwrap() - 0.5).abs() < 1e-15);
        assert!(chain.dirichlet_form(&[0.0; 3]).is_err());
    }

    #[test]
    fn poincare_inequality_on_random_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let m = random_model(8, 0.3, &mut rng);
            let chain = ExactChain::new(&m).unwrap();
            let gap = chain.spectral_gap();
            for _ in 0..10 {
                let f: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
                let var = chain.variance(&f).unwrap();
                let dir = chain.dirichlet_form(&f).unwrap();
                assert!(var <= dir / gap * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn matrix_cap_enforced() {
        let m = IsingModel::product(15).unwrap();
        assert!(matches!(transition_matrix(&m), Err(Error::TooLarge { .. })));
        assert!(spectral_gap(&m).is_err());
    }
}
