//! Heat-bath Glauber dynamics, the i.i.d. sampler, exact transition-matrix
//! computations and contraction estimates.

mod batch_io;
mod contraction;
mod sampler;
mod spectral;

pub use batch_io::{read_batch, write_batch, BatchEncoding};
pub use contraction::{
    estimate_contraction, exhaustive_contraction, one_step_contraction, ContractionEstimate,
    ContractionValue,
};
pub use sampler::{
    default_burn_in, sample, sample_exact, sample_with, Provenance, SampleBatch, SampleOptions,
    SamplingMode,
};
pub use spectral::{
    dirichlet_form, spectral_gap, transition_matrix, ExactChain, TransitionMatrix,
    DEFAULT_MATRIX_CAP,
};

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{heat_bath_plus, IsingModel, SpinConfiguration};
use crate::rng::{index_from_u64, unit_from_u64};

/// One heat-bath update on a raw spin slice. Consumes exactly two 64-bit
/// draws: the first picks the site, the second the new spin.
#[inline]
pub fn heat_bath_update<R: RngCore>(model: &IsingModel, spins: &mut [i8], rng: &mut R) -> usize {
    let site = index_from_u64(rng.next_u64(), spins.len());
    let u = unit_from_u64(rng.next_u64());
    let p_plus = heat_bath_plus(model.local_field_of(spins, site));
    spins[site] = if u < p_plus { 1 } else { -1 };
    site
}

/// Single-site heat-bath chain with its own deterministic generator.
#[derive(Debug, Clone)]
pub struct GlauberChain<'a> {
    model: &'a IsingModel,
    state: SpinConfiguration,
    rng: ChaCha8Rng,
    steps_taken: u64,
}

impl<'a> GlauberChain<'a> {
    pub fn new(model: &'a IsingModel, initial: SpinConfiguration, rng: ChaCha8Rng) -> Result<Self> {
        if initial.len() != model.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: model.n_sites(),
                got: initial.len(),
            });
        }
        Ok(Self {
            model,
            state: initial,
            rng,
            steps_taken: 0,
        })
    }

    /// Chain whose generator is stream 0 of the `"glauber"` substream of
    /// `seed`.
    pub fn from_seed(model: &'a IsingModel, initial: SpinConfiguration, seed: u64) -> Result<Self> {
        Self::new(model, initial, crate::rng::substream(seed, "glauber", 0))
    }

    /// Advance one step; returns the updated site.
    pub fn step(&mut self) -> usize {
        let mut spins = std::mem::take(&mut self.state).into_spins();
        let site = heat_bath_update(self.model, &mut spins, &mut self.rng);
        self.state = SpinConfiguration::from_raw(spins);
        self.steps_taken += 1;
        site
    }

    pub fn run(&mut self, steps: u64) {
        let mut spins = std::mem::take(&mut self.state).into_spins();
        for _ in 0..steps {
            heat_bath_update(self.model, &mut spins, &mut self.rng);
        }
        self.state = SpinConfiguration::from_raw(spins);
        self.steps_taken += steps;
    }

    pub fn state(&self) -> &SpinConfiguration {
        &self.state
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    pub fn model(&self) -> &IsingModel {
        self.model
    }
}

impl Default for SpinConfiguration {
    fn default() -> Self {
        SpinConfiguration::from_raw(Vec::new())
    }
}
