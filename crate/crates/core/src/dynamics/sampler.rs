use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ExactSummary, IsingModel};
use crate::rng::{fill_uniform_spins, substream, uniform_unit};

use super::heat_bath_update;

/// Chains per parallel work item. Work items are fixed by chain index, so the
/// output does not depend on the thread count.
const CHAINS_PER_BLOCK: usize = 64;

/// How the rows of a batch were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// One row per independent chain (default).
    IndependentChains,
    /// One chain, thinned; rows are only approximately independent.
    SingleChain,
    /// Direct draws from an enumerated distribution.
    Exact,
}

impl SamplingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingMode::IndependentChains => "independent",
            SamplingMode::SingleChain => "single-chain",
            SamplingMode::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(SamplingMode::IndependentChains),
            "single-chain" => Ok(SamplingMode::SingleChain),
            "exact" => Ok(SamplingMode::Exact),
            other => Err(Error::Parse(format!("unknown sampling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub model_digest: String,
    pub seed: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub mode: SamplingMode,
}

/// `k` configurations stored row-major as ±1 bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    n_sites: usize,
    samples: Vec<i8>,
    provenance: Provenance,
}

impl SampleBatch {
    pub fn new(n_sites: usize, samples: Vec<i8>, provenance: Provenance) -> Result<Self> {
        if n_sites == 0 || samples.len() % n_sites != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_sites,
                got: samples.len(),
            });
        }
        if let Some(&bad) = samples.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad as i64));
        }
        Ok(Self {
            n_sites,
            samples,
            provenance,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Number of rows `k`.
    pub fn len(&self) -> usize {
        self.samples.len() / self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.samples[r * self.n_sites..(r + 1) * self.n_sites]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[i8]> + '_ {
        self.samples.chunks_exact(self.n_sites)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn as_flat(&self) -> &[i8] {
        &self.samples
    }
}

/// `⌈10 · N · (ln N)²⌉` Glauber steps.
pub fn default_burn_in(n_sites: usize) -> u64 {
    let n = n_sites as f64;
    (10.0 * n * n.ln().powi(2)).ceil() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOptions {
    pub k: usize,
    /// `None` selects [`default_burn_in`].
    pub burn_in: Option<u64>,
    /// `Some(t)` switches to single-chain mode, recording every `t` steps.
    pub thinning: Option<u64>,
    pub seed: u64,
}

impl SampleOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            burn_in: None,
            thinning: None,
            seed,
        }
    }
}

/// `k` i.i.d. rows from independent chains, each started from a uniform
/// configuration and run for `burn_in` steps.
pub fn sample(model: &IsingModel, k: usize, burn_in: Option<u64>, seed: u64) -> Result<SampleBatch> {
    sample_with(
        model,
        &SampleOptions {
            k,
            burn_in,
            thinning: None,
            seed,
        },
    )
}

pub fn sample_with(model: &IsingModel, options: &SampleOptions) -> Result<SampleBatch> {
    if options.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let n = model.n_sites();
    let burn_in = options.burn_in.unwrap_or_else(|| default_burn_in(n));
    let (samples, thinning, mode) = match options.thinning {
        None => (
            independent_chains(model, options.k, burn_in, options.seed),
            0,
            SamplingMode::IndependentChains,
        ),
        Some(0) => return Err(Error::InvalidParameter("thinning must be at least 1".into())),
        Some(t) => (
            single_chain(model, options.k, burn_in, t, options.seed),
            t,
            SamplingMode::SingleChain,
        ),
    };
    SampleBatch::new(
        n,
        samples,
        Provenance {
            model_digest: model.digest(),
            seed: options.seed,
            burn_in,
            thinning,
            mode,
        },
    )
}

fn independent_chains(model: &IsingModel, k: usize, burn_in: u64, seed: u64) -> Vec<i8> {
    let n = model.n_sites();
    let blocks = k.div_ceil(CHAINS_PER_BLOCK);
    let parts: Vec<Vec<i8>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * CHAINS_PER_BLOCK;
            let hi = (lo + CHAINS_PER_BLOCK).min(k);
            let mut out = vec![0i8; (hi - lo) * n];
            for (chain, row) in (lo..hi).zip(out.chunks_exact_mut(n)) {
                let mut rng = substream(seed, "glauber-chain", chain as u64);
                fill_uniform_spins(&mut rng, row);
                for _ in 0..burn_in {
                    heat_bath_update(model, row, &mut rng);
                }
            }
            out
        })
        .collect();
    parts.concat()
}

fn single_chain(model: &IsingModel, k: usize, burn_in: u64, thinning: u64, seed: u64) -> Vec<i8> {
    let n = model.n_sites();
    let mut rng = substream(seed, "glauber-single", 0);
    let mut spins = vec![0i8; n];
    fill_uniform_spins(&mut rng, &mut spins);
    for _ in 0..burn_in {
        heat_bath_update(model, &mut spins, &mut rng);
    }
    let mut out = Vec::with_capacity(k * n);
    for _ in 0..k {
        for _ in 0..thinning {
            heat_bath_update(model, &mut spins, &mut rng);
        }
        out.extend_from_slice(&spins);
    }
    out
}

/// `k` independent draws from an enumerated distribution (inverse CDF).
pub fn sample_exact(summary: &ExactSummary, k: usize, seed: u64) -> Result<SampleBatch> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let n = summary.n_sites;
    let mut cdf = Vec::with_capacity(summary.probabilities.len());
    let mut acc = 0.0;
    for &p in &summary.probabilities {
        acc += p;
        cdf.push(acc);
    }
    let last = cdf.len() - 1;
    let mut rng = substream(seed, "exact-sampler", 0);
    let mut samples = Vec::with_capacity(k * n);
    for _ in 0..k {
        let u = uniform_unit(&mut rng) * acc;
        let code = cdf.partition_point(|&c| c <= u).min(last);
        samples.extend((0..n).map(|i| if (code >> i) & 1 == 1 { 1i8 } else { -1 }));
    }
    SampleBatch::new(
        n,
        samples,
        Provenance {
            model_digest: summary.model_digest.clone(),
            seed,
            burn_in: 0,
            thinning: 0,
            mode: SamplingMode::Exact,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, exact_enumerate, exact_moment};

    fn pair_mean(batch: &SampleBatch, i: usize, j: usize) -> f64 {
        batch.rows().map(|r| f64::from(r[i] * r[j])).sum::<f64>() / batch.len() as f64
    }

    #[test]
    fn burn_in_formula() {
        assert_eq!(default_burn_in(1), 0);
        assert_eq!(default_burn_in(16), (160.0 * 16f64.ln().powi(2)).ceil() as u64);
    }

    #[test]
    fn product_columns_are_centered() {
        let m = IsingModel::product(5).unwrap();
        let k = 100_000;
        let batch = sample(&m, k, None, 3).unwrap();
        assert_eq!(batch.len(), k);
        for i in 0..5 {
            let mean = batch.rows().map(|r| f64::from(r[i])).sum::<f64>() / k as f64;
            assert!(mean.abs() < 4.0 / (k as f64).sqrt(), "column {i}: {mean}");
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let m = build_model(4, &[(0, 1, 0.2), (2, 3, -0.3)]).unwrap();
        let a = sample(&m, 300, Some(50), 77).unwrap();
        let b = sample(&m, 300, Some(50), 77).unwrap();
        assert_eq!(a, b);
        let c = sample(&m, 300, Some(50), 78).unwrap();
        assert_ne!(a.as_flat(), c.as_flat());
    }

    #[test]
    fn batch_is_independent_of_thread_count() {
        let m = build_model(4, &[(0, 1, 0.2), (2, 3, -0.3)]).unwrap();
        let reference = sample(&m, 500, Some(40), 5).unwrap();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let other = pool.install(|| sample(&m, 500, Some(40), 5).unwrap());
            assert_eq!(reference, other);
        }
    }

    #[test]
    fn pair_moments_match_oracle() {
        let m = build_model(
            6,
            &[(0, 1, 0.3), (1, 2, 0.25), (2, 3, -0.2), (3, 4, 0.3), (4, 5, 0.2), (0, 5, -0.15)],
        )
        .unwrap();
        let exact = exact_enumerate(&m).unwrap();
        let k = 100_000;
        let batch = sample(&m, k, None, 12).unwrap();
        for i in 0..6 {
            for j in (i + 1)..6 {
                let lambda = exact_moment(&exact, &[i, j]).unwrap();
                let tol = 4.0 * ((1.0 - lambda * lambda) / k as f64).sqrt();
                let got = pair_mean(&batch, i, j);
                assert!((got - lambda).abs() < tol, "pair ({i},{j}): {got} vs {lambda}");
            }
        }
    }

    #[test]
    fn single_chain_mode_is_flagged() {
        let m = build_model(3, &[(0, 1, 0.2)]).unwrap();
        let batch = sample_with(
            &m,
            &SampleOptions {
                k: 10,
                burn_in: Some(5),
                thinning: Some(3),
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(batch.provenance().mode, SamplingMode::SingleChain);
        assert_eq!(batch.provenance().thinning, 3);
        assert!(sample(&m, 0, None, 1).is_err());
    }

    #[test]
    fn exact_sampler_matches_law() {
        let m = build_model(3, &[(0, 1, 0.5), (1, 2, -0.4)]).unwrap();
        let exact = exact_enumerate(&m).unwrap();
        let k = 200_000;
        let batch = sample_exact(&exact, k, 8).unwrap();
        let mut counts = [0usize; 8];
        for r in batch.rows() {
            counts[crate::model::spins_to_index(r) as usize] += 1;
        }
        for (c, &p) in counts.iter().zip(&exact.probabilities) {
            let f = *c as f64 / k as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / k as f64).sqrt());
        }
    }
}
