pub mod error;
pub mod cli;
pub mod concentration;
pub mod dynamics;
pub mod families;
pub mod model;
pub mod polynomial;
pub mod rng;
pub mod stats;
pub mod testing;

pub use error::{Error, Result};
pub use model::{build_model, exact_enumerate, exact_moment, ExactSummary, IsingModel, SpinConfiguration};
