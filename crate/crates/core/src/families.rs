//! Named model families, each scaled to a target Dobrushin margin.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{build_model, IsingModel};

/// Sign pattern for randomly generated couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signs {
    Ferromagnetic,
    Mixed,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target margin {alpha} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Rescale so that the largest absolute row sum equals `1 − alpha`.
pub fn scale_to_margin(model: &IsingModel, alpha: f64) -> Result<IsingModel> {
    check_alpha(alpha)?;
    let worst = 1.0 - model.dobrushin_margin();
    if worst == 0.0 {
        return Ok(model.clone());
    }
    Ok(model.scaled((1.0 - alpha) / worst))
}

/// Ferromagnetic nearest-neighbour periodic lattice with `rows × cols` sites;
/// each of the four neighbour slots carries `(1 − α)/4`. Slots that wrap onto
/// the same site are summed; slots that wrap onto the site itself are dropped
/// and the result is rescaled to margin `alpha`.
pub fn lattice_torus(rows: usize, cols: usize, alpha: f64) -> Result<IsingModel> {
    check_alpha(alpha)?;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("empty lattice".into()));
    }
    let w = (1.0 - alpha) / 4.0;
    let idx = |r: usize, c: usize| r * cols + c;
    let mut entries = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = idx(r, c);
            let right = idx(r, (c + 1) % cols);
            let down = idx((r + 1) % rows, c);
            if right != here {
                entries.push((here, right, w));
            }
            if down != here {
                entries.push((here, down, w));
            }
        }
    }
    // thin tori (a ring, or a single site) lose slots to the self-wrap rule
    let raw = build_model(rows * cols, &entries)?;
    Ok(scale_to_margin(&raw, alpha)?.with_label(format!("lattice {rows}x{cols} alpha={alpha}")))
}

/// Torus with the most square factorisation of `n`.
pub fn lattice(n: usize, alpha: f64) -> Result<IsingModel> {
    let rows = (1..=n).take_while(|r| r * r <= n).filter(|r| n % r == 0).last().unwrap_or(1);
    lattice_torus(rows, n / rows, alpha)
}

/// Complete graph with uniform weight `(1 − α)/(N − 1)`, so every row sum is
/// exactly `1 − α`.
pub fn curie_weiss(n: usize, alpha: f64) -> Result<IsingModel> {
    check_alpha(alpha)?;
    if n < 2 {
        return IsingModel::product(n.max(1));
    }
    let w = (1.0 - alpha) / (n - 1) as f64;
    let entries: Vec<_> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j, w)))
        .collect();
    Ok(build_model(n, &entries)?.with_label(format!("curie-weiss n={n} alpha={alpha}")))
}

/// Complete graph with independent Rademacher signs and magnitude
/// `(1 − α)/(N − 1)`.
pub fn spin_glass<R: Rng>(n: usize, alpha: f64, rng: &mut R) -> Result<IsingModel> {
    check_alpha(alpha)?;
    if n < 2 {
        return IsingModel::product(n.max(1));
    }
    let w = (1.0 - alpha) / (n - 1) as f64;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            entries.push((i, j, sign * w));
        }
    }
    Ok(build_model(n, &entries)?.with_label(format!("spin-glass n={n} alpha={alpha}")))
}

/// Erdős–Rényi graph `G(N, p)` with magnitudes uniform in `[0.5, 1]`, the
/// given sign pattern, scaled to margin `alpha`.
pub fn erdos_renyi<R: Rng>(
    n: usize,
    edge_probability: f64,
    alpha: f64,
    signs: Signs,
    rng: &mut R,
) -> Result<IsingModel> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(Error::InvalidParameter(format!(
            "edge probability {edge_probability} outside [0, 1]"
        )));
    }
    let mut entries = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < edge_probability {
                let magnitude = rng.random_range(0.5..=1.0);
                let sign = match signs {
                    Signs::Ferromagnetic => 1.0,
                    Signs::Mixed if rng.random::<bool>() => 1.0,
                    Signs::Mixed => -1.0,
                };
                entries.push((i, j, sign * magnitude));
            }
        }
    }
    let raw = build_model(n, &entries)?;
    Ok(scale_to_margin(&raw, alpha)?.with_label(format!(
        "erdos-renyi n={n} p={edge_probability} alpha={alpha}"
    )))
}
