//! Polynomial files (TOML):
//!
//! ```toml
//! format = "ising-polynomial"
//! version = 1
//! n_sites = 3
//! degree = 2
//!
//! [[terms]]
//! indices = [0, 2]
//! coef = 1.5
//! ```
//!
//! Terms are canonicalized on load; the header degree is an upper bound.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{canonicalize, MultilinearPolynomial};

const FORMAT: &str = "ising-polynomial";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Term {
    indices: Vec<usize>,
    coef: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialFile {
    format: String,
    version: u32,
    n_sites: usize,
    degree: usize,
    #[serde(default)]
    terms: Vec<Term>,
}

pub fn parse_polynomial(text: &str) -> Result<MultilinearPolynomial> {
    let file: PolynomialFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::Parse(format!(
            "expected format {FORMAT:?} version {VERSION}, found {:?} version {}",
            file.format, file.version
        )));
    }
    let raw: Vec<_> = file.terms.into_iter().map(|t| (t.indices, t.coef)).collect();
    let poly = canonicalize(&raw, file.n_sites)?;
    if poly.degree() > file.degree {
        return Err(Error::Parse(format!(
            "terms of degree {} exceed declared degree {}",
            poly.degree(),
            file.degree
        )));
    }
    Ok(poly)
}

pub fn render_polynomial(poly: &MultilinearPolynomial) -> String {
    let file = PolynomialFile {
        format: FORMAT.into(),
        version: VERSION,
        n_sites: poly.n_sites(),
        degree: poly.degree(),
        terms: poly
            .terms()
            .iter()
            .map(|(k, &c)| Term {
                indices: k.clone(),
                coef: c,
            })
            .collect(),
    };
    toml::to_string(&file).expect("polynomial file serializes")
}

pub fn read_polynomial(path: &Path) -> Result<MultilinearPolynomial> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_polynomial(&text)
}

pub fn write_polynomial(poly: &MultilinearPolynomial, path: &Path) -> Result<()> {
    std::fs::write(path, render_polynomial(poly)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
