use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::Serialize;

use crate::concentration::{
    auto_r_grid, default_fit_window, estimate_variance, exact_variance, fit_tail_exponent,
    quadratic_variance_bound, tail_curve, ConcentrationReport, ReportMetadata,
};
use crate::dynamics::{
    read_batch, sample_with, spectral_gap, write_batch, BatchEncoding, SampleBatch, SampleOptions,
};
use crate::error::{Error, Result};
use crate::families::{curie_weiss, erdos_renyi, lattice, lattice_torus, spin_glass, Signs};
use crate::model::{exact_enumerate, gamma_for_margin, IsingModel};
use crate::polynomial::{read_polynomial, ElementarySymmetric, MultilinearPolynomial, Statistic};
use crate::rng::{derive_seed, substream};
use crate::testing::{
    calibrate_constant, required_samples, run_tester, Calibration, Decision, EdgeSet, TesterMode, TestVerdict,
};

use super::config::{LoadedConfig, ModelSpec, StatisticSpec};
use super::model_file::{read_model, render_model};
use super::{Cli, Command, EXIT_DEPENDENT, EXIT_OK};

/// What a successful command produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Verdict(Decision),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Verdict(Decision::Dependent) => EXIT_DEPENDENT,
            _ => EXIT_OK,
        }
    }
}

struct Context {
    loaded: LoadedConfig,
    seed: u64,
    config_digest: String,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let loaded = match &cli.config {
        Some(path) => LoadedConfig::load(path)?,
        None => LoadedConfig::empty(),
    };
    let seed = cli.seed.or(loaded.config.seed).unwrap_or(0);
    let ctx = Context {
        config_digest: loaded.digest_with_seed(seed),
        loaded,
        seed,
    };
    let out = cli.out.as_deref();
    let go = || match cli.command {
        Command::Validate => cmd_validate(&ctx, out),
        Command::Oracle => cmd_oracle(&ctx, out),
        Command::Sample => cmd_sample(&ctx, out),
        Command::Concentration => cmd_concentration(&ctx, out),
        Command::Test => cmd_test(&ctx, out),
        Command::Calibrate => cmd_calibrate(&ctx, out),
        Command::Generate => cmd_generate(&ctx, out),
    };
    match cli.threads {
        Some(0) => Err(Error::InvalidParameter("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(go),
        None => go(),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            f.write_all(bytes)?;
            f.flush()?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_toml<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Parse(e.to_string()))?;
    emit(out, text.as_bytes())
}

fn require<'a, T>(value: Option<&'a T>, table: &str) -> Result<&'a T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("config lacks a [{table}] table")))
}

fn need<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("model generator needs `{key}`")))
}

fn generate_model(spec: &ModelSpec, seed: u64) -> Result<IsingModel> {
    let family = spec
        .family
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("[model] needs `file` or `family`".into()))?;
    let mut rng = substream(seed, "generate", 0);
    match family {
        "product" => IsingModel::product(need(spec.n, "n")?).map(|m| m.with_label("product")),
        "lattice" => match (spec.rows, spec.cols) {
            (Some(r), Some(c)) => lattice_torus(r, c, need(spec.alpha, "alpha")?),
            _ => lattice(need(spec.n, "n")?, need(spec.alpha, "alpha")?),
        },
        "curie-weiss" => curie_weiss(need(spec.n, "n")?, need(spec.alpha, "alpha")?),
        "spin-glass" => spin_glass(need(spec.n, "n")?, need(spec.alpha, "alpha")?, &mut rng),
        "erdos-renyi" => {
            let signs = match spec.signs.as_deref().unwrap_or("mixed") {
                "mixed" => Signs::Mixed,
                "ferromagnetic" => Signs::Ferromagnetic,
                other => return Err(Error::InvalidParameter(format!("unknown signs {other:?}"))),
            };
            erdos_renyi(
                need(spec.n, "n")?,
                need(spec.edge_probability, "edge_probability")?,
                need(spec.alpha, "alpha")?,
                signs,
                &mut rng,
            )
        }
        other => Err(Error::InvalidParameter(format!("unknown model family {other:?}"))),
    }
}

fn load_model(ctx: &Context) -> Result<IsingModel> {
    let spec = require(ctx.loaded.config.model.as_ref(), "model")?;
    match (&spec.file, &spec.family) {
        (Some(_), Some(_)) => Err(Error::InvalidParameter("[model] takes `file` or `family`, not both".into())),
        (Some(path), None) => read_model(&ctx.loaded.resolve(path)),
        (None, _) => generate_model(spec, ctx.seed),
    }
}

enum LoadedStatistic {
    Polynomial(MultilinearPolynomial),
    Elementary(ElementarySymmetric),
}

impl LoadedStatistic {
    fn as_statistic(&self) -> &dyn Statistic {
        match self {
            LoadedStatistic::Polynomial(p) => p,
            LoadedStatistic::Elementary(e) => e,
        }
    }

    /// Explicit form when it has at most quadratic degree.
    fn quadratic(&self) -> Option<MultilinearPolynomial> {
        match self {
            LoadedStatistic::Polynomial(p) if p.degree() <= 2 => Some(p.clone()),
            LoadedStatistic::Elementary(e) if e.degree() <= 2 => Some(e.to_polynomial()),
            _ => None,
        }
    }
}

fn load_statistic(ctx: &Context, spec: &StatisticSpec, n: usize) -> Result<LoadedStatistic> {
    let stat = match (&spec.file, spec.family.as_deref()) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter("[statistic] takes `file` or `family`, not both".into()))
        }
        (Some(path), None) => LoadedStatistic::Polynomial(read_polynomial(&ctx.loaded.resolve(path))?),
        (None, Some("magnetization")) => LoadedStatistic::Polynomial(MultilinearPolynomial::magnetization(n)),
        (None, Some("elementary")) => {
            let d = spec
                .degree
                .ok_or_else(|| Error::InvalidParameter("elementary statistic needs `degree`".into()))?;
            LoadedStatistic::Elementary(ElementarySymmetric::new(n, d, 1.0)?)
        }
        (None, Some(other)) => return Err(Error::InvalidParameter(format!("unknown statistic family {other:?}"))),
        (None, None) => return Err(Error::InvalidParameter("[statistic] needs `file` or `family`".into())),
    };
    if stat.as_statistic().n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: stat.as_statistic().n_sites(),
        });
    }
    Ok(stat)
}

fn read_batch_file(path: &Path) -> Result<SampleBatch> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_batch(&mut BufReader::new(file))
}

#[derive(Serialize)]
struct ValidateReport {
    schema: &'static str,
    config_digest: String,
    label: String,
    model_digest: String,
    n_sites: usize,
    edge_count: usize,
    ferromagnetic: bool,
    dobrushin_margin: f64,
    contracting: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    /// `N/α`, an upper bound on the inverse spectral gap.
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_inverse_bound: Option<f64>,
}

fn cmd_validate(ctx: &Context, out: Option<&Path>) -> Result<Outcome> {
    let model = load_model(ctx)?;
    let alpha = model.dobrushin_margin();
    let contracting = alpha > 0.0;
    emit_toml(
        out,
        &ValidateReport {
            schema: "isingc-validate/v1",
            config_digest: ctx.config_digest.clone(),
            label: model.label().to_string(),
            model_digest: model.digest(),
            n_sites: model.n_sites(),
            edge_count: model.edge_count(),
            ferromagnetic: model.is_ferromagnetic(),
            dobrushin_margin: alpha,
            contracting,
            gamma: contracting.then(|| gamma_for_margin(alpha)),
            gap_inverse_bound: contracting.then(|| model.n_sites() as f64 / alpha),
        },
    )?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct MomentRecord {
    sites: Vec<usize>,
    value: f64,
}

#[derive(Serialize)]
struct OracleReport {
    schema: &'static str,
    config_digest: String,
    model_digest: String,
    n_sites: usize,
    log_partition: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectral_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    statistic_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_variance: Option<f64>,
    moments: Vec<MomentRecord>,
}

fn cmd_oracle(ctx: &Context, out: Option<&Path>) -> Result<Outcome> {
    let model = load_model(ctx)?;
    let summary = exact_enumerate(&model)?;
    let oracle = ctx.loaded.config.oracle.clone().unwrap_or_default();
    let moments = oracle
        .moments
        .iter()
        .map(|sites| {
            Ok(MomentRecord {
                sites: sites.clone(),
                value: summary.moment(sites)?,
            })
        })
        .collect::<Result<_>>()?;
    let (statistic_digest, exact_var) = match &ctx.loaded.config.statistic {
        Some(spec) => {
            let stat = load_statistic(ctx, spec, model.n_sites())?;
            let s = stat.as_statistic();
            (Some(s.digest()), Some(exact_variance(&summary, s)?))
        }
        None => (None, None),
    };
    let gap = if oracle.spectral_gap {
        Some(spectral_gap(&model)?)
    } else {
        None
    };
    emit_toml(
        out,
        &OracleReport {
            schema: "isingc-oracle/v1",
            config_digest: ctx.config_digest.clone(),
            model_digest: summary.model_digest.clone(),
            n_sites: summary.n_sites,
            log_partition: summary.log_partition,
            spectral_gap: gap,
            statistic_digest,
            exact_variance: exact_var,
            moments,
        },
    )?;
    Ok(Outcome::Done)
}

fn cmd_sample(ctx: &Context, out: Option<&Path>) -> Result<Outcome> {
    let model = load_model(ctx)?;
    let cfg = require(ctx.loaded.config.sample.as_ref(), "sample")?;
    let encoding = BatchEncoding::parse(cfg.encoding.as_deref().unwrap_or("text"))?;
    let batch = sample_with(
        &model,
        &SampleOptions {
            k: cfg.k,
            burn_in: cfg.burn_in,
            thinning: cfg.thinning,
            seed: derive_seed(ctx.seed, "sample"),
        },
    )?;
    let mut bytes = Vec::new();
    write_batch(&batch, encoding, &mut bytes)?;
    emit(out, &bytes)?;
    Ok(Outcome::Done)
}

fn cmd_concentration(ctx: &Context, out: Option<&Path>) -> Result<Outcome> {
    let model = load_model(ctx)?;
    let cfg = ctx.loaded.config.concentration.clone().unwrap_or_default();
    let spec = require(ctx.loaded.config.statistic.as_ref(), "statistic")?;
    let stat = load_statistic(ctx, spec, model.n_sites())?;
    let f = stat.as_statistic();
    let batch_seed = derive_seed(ctx.seed, "concentration");
    let batch = match &cfg.batch {
        Some(path) => {
            let batch = read_batch_file(&ctx.loaded.resolve(path))?;
            if batch.provenance().model_digest != model.digest() {
                return Err(Error::InvalidParameter("batch was not drawn from the configured model".into()));
            }
            batch
        }
        None => {
            let mut options = SampleOptions::new(cfg.k.unwrap_or(100_000), batch_seed);
            options.burn_in = cfg.burn_in;
            sample_with(&model, &options)?
        }
    };
    let variance = estimate_variance(&batch, f)?;
    let bound = match stat.quadratic() {
        Some(q) if model.dobrushin_margin() > 0.0 => Some(quadratic_variance_bound(&model, &q)?),
        _ => None,
    };
    let grid = match &cfg.r_grid {
        Some(g) => g.clone(),
        None => auto_r_grid(&batch, f, cfg.grid_points.unwrap_or(40))?,
    };
    let points = tail_curve(&batch, f, &grid)?;
    let fit = match default_fit_window(&points) {
        Some(window) => fit_tail_exponent(&points, window).map_err(|e| e.to_string()),
        None => Err("no grid points in the default fit window".to_string()),
    };
    let report = ConcentrationReport::new(
        variance,
        bound,
        points,
        fit,
        ReportMetadata {
            model_digest: model.digest(),
            statistic_digest: f.digest(),
            k: batch.len(),
            seed: batch.provenance().seed,
            config_digest: Some(ctx.config_digest.clone()),
        },
    );
    emit(out, report.to_toml().as_bytes())?;
    if let Some(path) = out {
        emit(Some(&path.with_extension("csv")), report.to_csv().as_bytes())?;
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct VerdictRecord {
    schema: &'static str,
    config_digest: String,
    calibration_digest: String,
    batch_model_digest: String,
    constant: f64,
    required_samples: usize,
    sufficient_samples: bool,
    #[serde(flatten)]
    verdict: TestVerdict,
}

fn cmd_test(ctx: &Context, out: Option<&Path>) -> Result<Outcome> {
    let cfg = require(ctx.loaded.config.test.as_ref(), "test")?;
    let batch = read_batch_file(&ctx.loaded.resolve(&cfg.batch))?;
    let mode = TesterMode::parse(&cfg.mode)?;
    let edges = cfg
        .edges
        .as_ref()
        .map(|pairs| EdgeSet::new(batch.n_sites(), pairs))
        .transpose()?;
    let calibration = match &cfg.calibration {
        Some(path) => {
            let full = ctx.loaded.resolve(path);
            let text = std::fs::read_to_string(&full).map_err(|e| Error::Io(format!("{}: {e}", full.display())))?;
            Calibration::parse(&text)?
        }
        None => Calibration::shipped(),
    };
    let verdict = run_tester(mode, &batch, cfg.epsilon, edges.as_ref())?;
    let constant = calibration.constant(mode, edges.is_some());
    let needed = required_samples(mode, batch.n_sites(), edges.as_ref().map(EdgeSet::len), cfg.epsilon, constant)?;
    let decision = verdict.decision;
    emit_toml(
        out,
        &VerdictRecord {
            schema: "isingc-verdict/v1",
            config_digest: ctx.config_digest.clone(),
            calibration_digest: calibration.digest(),
            batch_model_digest: batch.provenance().model_digest.clone(),
            constant,
            required_samples: needed,
            sufficient_samples: batch.len() >= needed,
            verdict,
        },
    )?;
    Ok(Outcome::Verdict(decision))
}

fn cmd_calibrate(ctx: &Context, out: Option<&Path>) -> Result<Outcome> {
    let cfg = ctx.loaded.config.calibrate.clone().unwrap_or_default();
    let trials = cfg.trials.unwrap_or(200);
    let target = cfg.target_rate.unwrap_or(0.85);
    if !(0.5..1.0).contains(&target) {
        return Err(Error::InvalidParameter(format!("target rate {target} outside [0.5, 1)")));
    }
    let slot = |mode: TesterMode, known: bool| {
        let label = format!("calibrate/{}/{}", mode.as_str(), if known { "known" } else { "unknown" });
        calibrate_constant(mode, known, trials, target, derive_seed(ctx.seed, &label)).map(|r| r.entry)
    };
    let calibration = Calibration::new([
        slot(TesterMode::Ferromagnetic, false)?,
        slot(TesterMode::Ferromagnetic, true)?,
        slot(TesterMode::General, false)?,
        slot(TesterMode::General, true)?,
    ]);
    emit(out, calibration.render().as_bytes())?;
    Ok(Outcome::Done)
}

fn cmd_generate(ctx: &Context, out: Option<&Path>) -> Result<Outcome> {
    let spec = require(ctx.loaded.config.model.as_ref(), "model")?;
    if spec.file.is_some() {
        return Err(Error::InvalidParameter("generate needs a model `family`, not a file".into()));
    }
    let model = generate_model(spec, ctx.seed)?;
    emit(out, render_model(&model).as_bytes())?;
    Ok(Outcome::Done)
}
