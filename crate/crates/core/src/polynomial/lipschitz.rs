//! Lipschitz constants on subsets of the hypercube and the McShane–Whitney
//! extension.
//!
//! Configurations are encoded as integers (bit `i` set ⇔ `σ_i = +1`). One
//! spin flip moves a configuration by 2 in ℓ¹, so a function that is
//! `b`-Lipschitz in ℓ¹ changes by at most `2b` per flip.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;

use crate::dynamics::DEFAULT_MATRIX_CAP;
use crate::error::{Error, Result};

/// Function values on a configuration set `S`, keyed by configuration code.
pub type SubsetTable = BTreeMap<u64, f64>;

/// Largest `|f(σ) − f(σ')|` over pairs in `S` differing in one spin; 0 when
/// no such pair exists.
pub fn lipschitz_constant_on(values: &SubsetTable, n_sites: usize) -> f64 {
    let mut worst = 0.0f64;
    for (&code, &v) in values {
        for i in 0..n_sites {
            let other = code ^ (1 << i);
            if other > code {
                if let Some(&w) = values.get(&other) {
                    worst = worst.max((v - w).abs());
                }
            }
        }
    }
    worst
}

/// Components of `S` under single-flip adjacency, each sorted, in order of
/// their smallest element.
pub fn connected_components<'a>(set: impl IntoIterator<Item = &'a u64>, n_sites: usize) -> Vec<Vec<u64>> {
    let members: std::collections::BTreeSet<u64> = set.into_iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for &start in &members {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for i in 0..n_sites {
                let nb = c ^ (1 << i);
                if members.contains(&nb) && seen.insert(nb) {
                    comp.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// `f̃(η) = min_{σ∈S} [f(σ) + b · ‖η − σ‖₁]` on the whole hypercube, with
/// `‖η − σ‖₁ = 2 · Hamming(η, σ)`.
///
/// If `f` is not `b`-Lipschitz on `S` the minimum undercuts `f` somewhere on
/// `S`; that is reported as [`Error::NotLipschitz`]. With `b = 0` the input
/// must be constant on every component of `S`.
pub fn mcshane_whitney_extend(values: &SubsetTable, n_sites: usize, b: f64) -> Result<Vec<f64>> {
    if n_sites > DEFAULT_MATRIX_CAP {
        return Err(Error::TooLarge {
            n_sites,
            cap: DEFAULT_MATRIX_CAP,
        });
    }
    if values.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("Lipschitz bound {b}")));
    }
    let size = 1u64 << n_sites;
    if let Some(&bad) = values.keys().find(|&&c| c >= size) {
        return Err(Error::InvalidParameter(format!(
            "configuration code {bad} outside {n_sites} sites"
        )));
    }
    if b == 0.0 {
        for comp in connected_components(values.keys(), n_sites) {
            let first = values[&comp[0]];
            if comp.iter().any(|c| values[c] != first) {
                return Err(Error::NotLipschitz(
                    "b = 0 needs f constant on each component of S".into(),
                ));
            }
        }
    }
    let sources: Vec<(u64, f64)> = values.iter().map(|(&c, &v)| (c, v)).collect();
    let step = 2.0 * b;
    let mut ext: Vec<f64> = (0..size)
        .into_par_iter()
        .map(|eta| {
            sources
                .iter()
                .map(|&(c, v)| v + step * f64::from((eta ^ c).count_ones()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    for (&c, &v) in values {
        let tol = 1e-12 * v.abs().max(1.0);
        if ext[c as usize] < v - tol {
            return Err(Error::NotLipschitz(format!(
                "extension undercuts f at configuration {c} by {}",
                v - ext[c as usize]
            )));
        }
        ext[c as usize] = v;
    }
    Ok(ext)
}
