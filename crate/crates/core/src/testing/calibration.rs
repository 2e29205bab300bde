//! Empirical constants for the tester sample counts.
//!
//! For each (mode, edges known?) pair a reference model is fixed, `ε` is set
//! to its exact `d_SKL` against the product measure, and the smallest `C` is
//! searched for such that both the null (product) and the alternative are
//! classified correctly at a target rate. Samples come from the exact sampler.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::sample_exact;
use crate::error::{Error, Result};
use crate::families::{curie_weiss, erdos_renyi, lattice_torus, spin_glass, Signs};
use crate::model::{exact_enumerate, ExactSummary, IsingModel};
use crate::rng::{derive_seed, substream};

use super::{correlations_from_summary, required_samples, run_tester, skl_from_correlations, Decision, EdgeSet, TesterMode};

/// The calibration file shipped with the crate.
pub const SHIPPED_CALIBRATION: &str = include_str!("../../calibration.toml");

const FORMAT: &str = "tester-calibration";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub c: f64,
    pub reference: String,
    pub epsilon: f64,
    pub k: usize,
    pub null_rate: f64,
    pub alt_rate: f64,
    pub trials: usize,
    pub target_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub format: String,
    pub version: u32,
    pub ferromagnetic_unknown: CalibrationEntry,
    pub ferromagnetic_known: CalibrationEntry,
    pub general_unknown: CalibrationEntry,
    pub general_known: CalibrationEntry,
}

impl Calibration {
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_CALIBRATION).expect("shipped calibration parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cal: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if cal.format != FORMAT || cal.version != VERSION {
            return Err(Error::Parse(format!(
                "expected format {FORMAT:?} version {VERSION}, found {:?} version {}",
                cal.format, cal.version
            )));
        }
        Ok(cal)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }

    pub fn new(entries: [CalibrationEntry; 4]) -> Self {
        let [ferromagnetic_unknown, ferromagnetic_known, general_unknown, general_known] = entries;
        Self {
            format: FORMAT.into(),
            version: VERSION,
            ferromagnetic_unknown,
            ferromagnetic_known,
            general_unknown,
            general_known,
        }
    }

    pub fn entry(&self, mode: TesterMode, edges_known: bool) -> &CalibrationEntry {
        match (mode, edges_known) {
            (TesterMode::Ferromagnetic, false) => &self.ferromagnetic_unknown,
            (TesterMode::Ferromagnetic, true) => &self.ferromagnetic_known,
            (TesterMode::General, false) => &self.general_unknown,
            (TesterMode::General, true) => &self.general_known,
        }
    }

    pub fn constant(&self, mode: TesterMode, edges_known: bool) -> f64 {
        self.entry(mode, edges_known).c
    }

    /// SHA-256 of the rendered file.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }
}

/// The fixed reference model for one calibration slot, with its edge set
/// when edges are known.
pub fn reference_instance(mode: TesterMode, edges_known: bool) -> Result<(IsingModel, Option<EdgeSet>)> {
    let mut rng = substream(0, "calibration-reference", 0);
    let model = match (mode, edges_known) {
        (TesterMode::Ferromagnetic, false) => curie_weiss(15, 0.2)?,
        (TesterMode::Ferromagnetic, true) => lattice_torus(3, 5, 0.2)?,
        (TesterMode::General, false) => spin_glass(12, 0.2, &mut rng)?,
        (TesterMode::General, true) => erdos_renyi(12, 0.3, 0.2, Signs::Mixed, &mut rng)?,
    };
    let edges = edges_known.then(|| EdgeSet::of_model(&model));
    Ok((model, edges))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerResult {
    /// Fraction of null batches classified as product measure.
    pub null_rate: f64,
    /// Fraction of alternative batches classified as dependent.
    pub alt_rate: f64,
}

pub struct PowerExperiment<'a> {
    pub null: &'a ExactSummary,
    pub alternative: &'a ExactSummary,
    pub mode: TesterMode,
    pub epsilon: f64,
    pub edges: Option<&'a EdgeSet>,
}

/// Run `trials` null and `trials` alternative batches of size `k`.
pub fn run_power_trials(exp: &PowerExperiment<'_>, k: usize, trials: usize, seed: u64) -> Result<PowerResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let correct = |summary: &ExactSummary, label: &str, want: Decision| -> Result<usize> {
        let hits: Vec<bool> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let batch = sample_exact(summary, k, derive_seed(seed, &format!("{label}/{t}")))?;
                Ok(run_tester(exp.mode, &batch, exp.epsilon, exp.edges)?.decision == want)
            })
            .collect::<Result<_>>()?;
        Ok(hits.iter().filter(|&&h| h).count())
    };
    let null_hits = correct(exp.null, "power-null", Decision::ProductMeasure)?;
    let alt_hits = correct(exp.alternative, "power-alt", Decision::Dependent)?;
    Ok(PowerResult {
        null_rate: null_hits as f64 / trials as f64,
        alt_rate: alt_hits as f64 / trials as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub entry: CalibrationEntry,
}

/// Smallest `C` (doubling, then 10 geometric bisection steps) at which both
/// rates reach `target_rate`.
pub fn calibrate_constant(
    mode: TesterMode,
    edges_known: bool,
    trials: usize,
    target_rate: f64,
    seed: u64,
) -> Result<CalibrationResult> {
    let (model, edges) = reference_instance(mode, edges_known)?;
    let n = model.n_sites();
    let alternative = exact_enumerate(&model)?;
    let null_model = IsingModel::product(n)?;
    let null = exact_enumerate(&null_model)?;
    let epsilon = skl_from_correlations(
        &model,
        &null_model,
        &correlations_from_summary(&alternative),
        &correlations_from_summary(&null),
    );
    let exp = PowerExperiment {
        null: &null,
        alternative: &alternative,
        mode,
        epsilon,
        edges: edges.as_ref(),
    };
    let m = edges.as_ref().map(EdgeSet::len);
    let evaluate = |c: f64| -> Result<(usize, PowerResult)> {
        let k = required_samples(mode, n, m, epsilon, c)?;
        let power = run_power_trials(&exp, k, trials, seed)?;
        Ok((k, power))
    };
    let passes = |p: &PowerResult| p.null_rate >= target_rate && p.alt_rate >= target_rate;

    let mut hi = 1.0 / 64.0;
    let mut best = evaluate(hi)?;
    let mut lo = 0.0;
    while !passes(&best.1) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::InvalidParameter("calibration did not converge".into()));
        }
        best = evaluate(hi)?;
    }
    if lo > 0.0 {
        for _ in 0..10 {
            let mid = (lo * hi).sqrt();
            let attempt = evaluate(mid)?;
            if passes(&attempt.1) {
                hi = mid;
                best = attempt;
            } else {
                lo = mid;
            }
        }
    }
    Ok(CalibrationResult {
        entry: CalibrationEntry {
            c: hi,
            reference: model.label().to_string(),
            epsilon,
            k: best.0,
            null_rate: best.1.null_rate,
            alt_rate: best.1.alt_rate,
            trials,
            target_rate,
            seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_parses_with_positive_constants() {
        let cal = Calibration::shipped();
        for mode in [TesterMode::Ferromagnetic, TesterMode::General] {
            for known in [false, true] {
                assert!(cal.constant(mode, known) > 0.0);
            }
        }
        assert_eq!(Calibration::parse(&cal.render()).unwrap(), cal);
        assert_eq!(cal.digest().len(), 64);
    }

    #[test]
    fn reference_instances_are_fixed_and_contracting() {
        for mode in [TesterMode::Ferromagnetic, TesterMode::General] {
            for known in [false, true] {
                let (a, ea) = reference_instance(mode, known).unwrap();
                let (b, _) = reference_instance(mode, known).unwrap();
                assert_eq!(a, b);
                assert!((a.dobrushin_margin() - 0.2).abs() < 1e-9);
                assert_eq!(ea.is_some(), known);
                if mode == TesterMode::Ferromagnetic {
                    assert!(a.is_ferromagnetic());
                }
            }
        }
    }

    #[test]
    fn small_calibration_finds_working_constant() {
        let result = calibrate_constant(TesterMode::Ferromagnetic, true, 40, 0.8, 3).unwrap();
        let e = result.entry;
        assert!(e.c > 0.0 && e.null_rate >= 0.8 && e.alt_rate >= 0.8, "{e:?}");
    }
}
