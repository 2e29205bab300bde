//! Model files (TOML):
//!
//! ```toml
//! format = "ising-model"
//! version = 1
//! n_sites = 3
//! label = "chain"
//! entries = [[0, 1, 0.25], [1, 2, -0.1]]
//! ```
//!
//! Each `[i, j, value]` is an ordered-pair contribution `J_ij`; both
//! orientations and repeats are summed into the merged weight `w_ij`. Files
//! written here list each pair once, `i < j`, with its merged weight.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_model, IsingModel};

const FORMAT: &str = "ising-model";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    n_sites: usize,
    #[serde(default)]
    label: String,
    #[serde(default)]
    entries: Vec<(usize, usize, f64)>,
}

pub fn parse_model(text: &str) -> Result<IsingModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::Parse(format!(
            "expected format {FORMAT:?} version {VERSION}, found {:?} version {}",
            file.format, file.version
        )));
    }
    Ok(build_model(file.n_sites, &file.entries)?.with_label(file.label))
}

pub fn render_model(model: &IsingModel) -> String {
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        n_sites: model.n_sites(),
        label: model.label().to_string(),
        entries: model.couplings().map(|((i, j), w)| (i, j, w)).collect(),
    };
    toml::to_string(&file).expect("model file serializes")
}

pub fn read_model(path: &Path) -> Result<IsingModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}
