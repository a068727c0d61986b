//! Experiment orchestration and result files.
//!
//! Every output is a pure function of the configuration and seeds. Seeds run
//! in parallel on the current rayon pool; each seed writes its own directory
//! and the aggregate is written after all seeds finish.

pub mod config;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{parse_config, parse_config_str, EnvKind, ExperimentConfig};

use crate::diagnostics::{
    adversarial_h, almost_convexity, bound_report, eig_sym, fit_inverse_sqrt, gradient_check,
    hessian_norm_estimate, interpolation_check, median, ntk_gram, pl_check, random_params, BoundReport,
    DiagnosticsReport, SQUARE_LOSS_CONSTANTS,
};
use crate::env::{
    apply_ordering, classification_stream, load_csv, planted_teacher, random_label_points, separable_classes,
    sphere_contexts, synth_stream, teacher_stream, BanditStream, SynthKind,
};
use crate::error::{config_err, Error, Result};
use crate::net::{init_params, NetConfig};
use crate::perturb::{LossKind, PerturbedPredictor};
use crate::policy::run_policy;
use crate::regression::{fit_comparator_with, run_online_regression_recorded, OgdConfig};
use crate::rng::{stream_rng, tags};

use plot::{line_chart, Series};

/// Final numbers of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub cum_loss: f64,
    /// Comparator loss for regression runs, best-arm loss for bandit runs.
    pub comparator_loss: f64,
    pub regret: f64,
}

/// Mean and population standard deviation of the final regret over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub command: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    pub aggregate: Aggregate,
    pub config: ExperimentConfig,
    /// Not persisted: result files must be reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn seed_dir(out: &Path, seed: u64) -> Result<PathBuf> {
    let dir = out.join(format!("seed{seed}"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn check_distinct_seeds(seeds: &[u64]) -> Result<()> {
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return config_err("seeds must be distinct");
    }
    Ok(())
}

fn finish(command: &str, cfg: &ExperimentConfig, per_seed: Vec<SeedResult>, started: Instant) -> Result<RunResult> {
    let regrets: Vec<f64> = per_seed.iter().map(|s| s.regret).collect();
    let result = RunResult {
        command: command.into(),
        seeds: cfg.seeds.clone(),
        aggregate: Aggregate::of(&regrets),
        per_seed,
        config: cfg.resolved(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&cfg.output_dir.join("result.json"), &result)?;
    log::info!("{command} finished in {:.2}s", result.wall_clock_secs);
    Ok(result)
}

/// The bandit stream a config describes, for one seed.
pub fn bandit_stream(cfg: &ExperimentConfig, seed: u64) -> Result<BanditStream> {
    let env = &cfg.environment;
    let horizon = cfg.ogd.horizon;
    let synth = |kind| -> Result<BanditStream> {
        let s = synth_stream(kind, env.d, env.arms, horizon, env.noise_sd, seed)?;
        Ok(apply_ordering(&s, env.ordering, seed))
    };
    let mut stream = match env.kind {
        EnvKind::Classes => {
            let rows = separable_classes(env.d, env.arms, horizon, seed)?;
            classification_stream(&rows, env.arms, env.ordering, seed)?
        }
        EnvKind::Dataset => {
            let path = env.dataset.as_ref().expect("validated");
            let rows = load_csv(path, &env.label_column)?;
            let mut s = classification_stream(&rows, env.arms, env.ordering, seed)?;
            if s.len() > horizon {
                s.rounds.truncate(horizon);
            } else if s.len() < horizon {
                log::warn!("dataset has {} rows, fewer than T = {horizon}", s.len());
            }
            s.manifest.generator = format!("dataset:{}", path.display());
            s
        }
        EnvKind::Linear => synth(SynthKind::Linear)?,
        EnvKind::Quadratic => synth(SynthKind::Quadratic)?,
        EnvKind::Cosine => synth(SynthKind::Cosine)?,
        EnvKind::Teacher | EnvKind::RandomLabels => {
            return config_err("run-bandit needs a bandit environment (classes, dataset, linear, quadratic, cosine)");
        }
    };
    stream.manifest.horizon = stream.len();
    stream.validate()?;
    Ok(stream)
}

/// Runs the configured policy for every seed. Writes `seed<k>/rounds.csv`,
/// `seed<k>/summary.json`, `seed<k>/stream.json` and `result.json`.
pub fn run_bandit(cfg: &ExperimentConfig) -> Result<RunResult> {
    let started = Instant::now();
    check_distinct_seeds(&cfg.seeds)?;
    let policy = cfg.policy_config()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let stream = bandit_stream(cfg, seed)?;
            let net = cfg.net_config(stream.dim())?;
            let trace = run_policy(&stream, &net, &policy, seed)?;
            let dir = seed_dir(&cfg.output_dir, seed)?;
            trace.write_csv(fs::File::create(dir.join("rounds.csv"))?)?;
            let summary = trace.summary(policy.kind);
            write_json(&dir.join("summary.json"), &summary)?;
            stream.write_manifest(&dir.join("stream.json"))?;
            log::debug!("seed {seed}: cumulative loss {}", summary.cum_loss);
            Ok(SeedResult {
                seed,
                cum_loss: summary.cum_loss,
                comparator_loss: summary.best_loss,
                regret: summary.cum_regret,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish("run-bandit", cfg, per_seed, started)
}

/// `(x_t, y_t)` pairs of an online regression run.
pub type LabeledStream = Vec<(Vec<f64>, f64)>;

/// Regression stream for one seed, with the network that learns it.
pub fn regression_stream(
    cfg: &ExperimentConfig,
    seed: u64,
    loss_kind: LossKind,
) -> Result<(NetConfig, LabeledStream)> {
    let env = &cfg.environment;
    let net = cfg.net_config(cfg.network.d.unwrap_or(env.d))?;
    let stream = match env.kind {
        EnvKind::Teacher => {
            let snapshot = init_params(&net, seed)?;
            let teacher = planted_teacher(&snapshot, env.teacher_centers, env.teacher_strength, seed)?;
            teacher_stream(&teacher, cfg.ogd.horizon, loss_kind, cfg.predictor.z, seed)?
        }
        EnvKind::RandomLabels => random_label_points(net.input_dim, cfg.ogd.horizon, seed),
        _ => return config_err("run-regression needs environment.kind = \"teacher\" or \"random_labels\""),
    };
    Ok((net, stream))
}

/// Online regression plus the offline comparator for every seed. Writes
/// `seed<k>/trace.csv`, `seed<k>/summary.json` and `result.json`.
pub fn run_regression(cfg: &ExperimentConfig) -> Result<RunResult> {
    let started = Instant::now();
    check_distinct_seeds(&cfg.seeds)?;
    let loss_kind = cfg.predictor.loss_kind;
    let ogd = cfg.ogd_config(loss_kind)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (net, stream) = regression_stream(cfg, seed, loss_kind)?;
            let (mut trace, _) = run_online_regression_recorded(&stream, &net, &ogd, seed, 0)?;
            let predictor = PerturbedPredictor::new(init_params(&net, seed)?, ogd.predictor, seed)?;
            let fit = fit_comparator_with(&predictor, &stream, &ogd.ball, cfg.ogd.comparator_epochs)?;
            trace.comparator_loss = Some(fit.best_loss);
            let dir = seed_dir(&cfg.output_dir, seed)?;
            trace.write_csv(fs::File::create(dir.join("trace.csv"))?)?;
            let summary = trace.summary();
            write_json(&dir.join("summary.json"), &summary)?;
            Ok(SeedResult {
                seed,
                cum_loss: summary.cum_loss,
                comparator_loss: summary.comparator_loss,
                regret: summary.regret,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish("run-regression", cfg, per_seed, started)
}

/// Contents of `bounds.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsFile {
    pub seed: u64,
    pub n: usize,
    /// NTK spectrum at θ₀, descending.
    pub eigenvalues: Vec<f64>,
    /// Analysis for the constructed reward vector with `u_iᵀh = 1/√2`.
    pub constructed: BoundReport,
    /// Analysis for `bounds.h`, when given.
    pub supplied: Option<BoundReport>,
}

fn load_contexts(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Ingest(format!("cannot read contexts {}: {e}", path.display())))?;
    let contexts: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| Error::Ingest(format!("contexts {}: {e}", path.display())))?;
    for (i, x) in contexts.iter().enumerate() {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !n.is_finite() || n > 1.0 + 1e-9 {
            return Err(Error::Ingest(format!("context {} is not in the unit ball", i + 1)));
        }
    }
    Ok(contexts)
}

/// NTK spectrum at θ₀ and the kernel-bandit bound analysis. Writes `bounds.json`.
pub fn analyze_bounds(cfg: &ExperimentConfig) -> Result<BoundsFile> {
    let seed = cfg.seeds[0];
    let b = &cfg.bounds;
    let contexts = match &b.contexts {
        Some(path) => load_contexts(path)?,
        None => sphere_contexts(cfg.network.d.unwrap_or(cfg.environment.d), b.horizon * b.arms, seed),
    };
    let Some(first) = contexts.first() else {
        return Err(Error::Ingest("no contexts to analyse".into()));
    };
    if contexts.len() != b.horizon * b.arms {
        log::warn!("{} contexts but T·K = {}", contexts.len(), b.horizon * b.arms);
    }
    let net = cfg.net_config(first.len())?;
    let snapshot = init_params(&net, seed)?;
    let gram = ntk_gram(snapshot.theta0(), &contexts, "theta0")?;
    let decomp = eig_sym(&gram.matrix)?;
    let h = adversarial_h(&decomp);
    let constructed = bound_report(&decomp, &h, b.horizon, b.arms, b.lambda_reg)?;
    let supplied = match &b.h {
        Some(h) => Some(bound_report(&decomp, h, b.horizon, b.arms, b.lambda_reg)?),
        None => None,
    };
    let file = BoundsFile {
        seed,
        n: contexts.len(),
        eigenvalues: decomp.values.clone(),
        constructed,
        supplied,
    };
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("bounds.json"), &file)?;
    Ok(file)
}

/// Width used for the exhaustive finite-difference gradient check.
pub const GRADIENT_CHECK_WIDTH: usize = 32;

/// Gradient checks, Hessian scaling sweep, PL witness on a short realizable
/// run, almost-convexity sampling, interpolation residual and NTK λ_min.
/// Writes `diagnostics.json`.
pub fn diagnose(cfg: &ExperimentConfig) -> Result<DiagnosticsReport> {
    let seed = cfg.seeds[0];
    let dg = &cfg.diagnostics;
    let d = cfg.network.d.unwrap_or(cfg.environment.d);
    let arch = |m: usize| NetConfig {
        input_dim: d,
        width: m,
        depth: cfg.network.depth,
        sigma1: cfg.network.sigma1,
        activation: cfg.network.activation,
    };

    let check_cfg = arch(GRADIENT_CHECK_WIDTH);
    let grad_errs = (0..dg.gradient_checks as u64)
        .into_par_iter()
        .map(|i| {
            let s = crate::rng::derive_seed(seed, i);
            let p = random_params(&check_cfg, 0.5, s)?;
            gradient_check(&p, &sphere_contexts(d, 1, s)[0])
        })
        .collect::<Result<Vec<_>>>()?;
    let gradient_check_max_rel_err = grad_errs.into_iter().fold(0.0, f64::max);

    let mut hessian_norm_estimates = Vec::new();
    let mut grad_norm_bound: f64 = 0.0;
    for &m in &dg.widths {
        let net = arch(m);
        net.validate()?;
        let samples = (0..dg.hessian_samples as u64)
            .into_par_iter()
            .map(|i| {
                let s = crate::rng::derive_seed(seed, i);
                let p = init_params(&net, s)?.params();
                let x = &sphere_contexts(d, 1, s)[0];
                let g = p.gradient(x)?.norm();
                Ok((hessian_norm_estimate(&p, x, dg.probes, s)?, g))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let est: Vec<f64> = samples.iter().map(|s| s.0).collect();
        grad_norm_bound = samples.iter().map(|s| s.1).fold(grad_norm_bound, f64::max);
        hessian_norm_estimates.push(median(&est));
    }
    let c_h_hat = fit_inverse_sqrt(&dg.widths, &hessian_norm_estimates);

    let mut short = cfg.clone();
    short.ogd.horizon = dg.pl_rounds.max(1);
    short.environment.kind = EnvKind::Teacher;
    let ogd: OgdConfig = short.ogd_config(LossKind::Square)?;
    let (net, stream) = regression_stream(&short, seed, LossKind::Square)?;
    let every = cfg.ogd.record_every.max(1);
    let (_, trajectory) = run_online_regression_recorded(&stream, &net, &ogd, seed, every)?;
    let predictor = PerturbedPredictor::new(init_params(&net, seed)?, ogd.predictor, seed)?;
    let pl = pl_check(&trajectory, &predictor, dg.mu_floor)?;
    for pt in &trajectory {
        grad_norm_bound = grad_norm_bound.max(pt.params.gradient(&pt.x)?.norm());
    }

    let almost_convexity_eps_hat = almost_convexity(&predictor, &stream, dg.convexity_radius, dg.convexity_pairs, seed)?;

    let points = random_label_points(d, dg.interpolation_points, seed);
    let interpolation_residual = interpolation_check(&predictor, &points, &ogd.ball, dg.interpolation_epochs)?;

    let contexts = {
        let mut rng = stream_rng(seed, tags::DIAGNOSTICS);
        (0..dg.ntk_contexts)
            .map(|_| crate::net::random_unit_vector(d, &mut rng))
            .collect::<Vec<_>>()
    };
    let ntk_lambda0 = if contexts.is_empty() {
        0.0
    } else {
        let gram = ntk_gram(predictor.snapshot().theta0(), &contexts, "theta0")?;
        eig_sym(&gram.matrix)?.lambda_min().max(0.0)
    };

    let report = DiagnosticsReport {
        gradient_check_max_rel_err,
        widths: dg.widths.clone(),
        hessian_norm_estimates,
        grad_norm_bound,
        c_h_hat,
        pl_pass_fraction: pl.pass_fraction,
        pl_mu_hat: pl.mu_hat.max(0.0),
        mu_floor: dg.mu_floor,
        almost_convexity_eps_hat,
        interpolation_residual,
        ntk_lambda0,
        loss_constants: SQUARE_LOSS_CONSTANTS,
    };
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("diagnostics.json"), &report)?;
    Ok(report)
}

/// Seed directories of a result directory, by ascending seed.
fn seed_dirs(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(seed) = name.strip_prefix("seed").and_then(|s| s.parse::<u64>().ok()) {
            if path.is_dir() {
                out.push((seed, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    let idx = reader
        .headers()
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Ingest(format!("{} has no column \"{column}\"", path.display())))?;
    reader
        .records()
        .enumerate()
        .map(|(i, r)| {
            let r = r.map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
            r.get(idx)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Ingest(format!("{}: row {}: bad \"{column}\" value", path.display(), i + 1)))
        })
        .collect()
}

/// The per-seed curve of a run: cumulative regret for bandit runs,
/// cumulative loss for regression runs.
fn run_curve(seed_dir: &Path) -> Result<Option<(Vec<f64>, &'static str)>> {
    let rounds = seed_dir.join("rounds.csv");
    if rounds.exists() {
        return Ok(Some((read_column(&rounds, "cum_regret")?, "cumulative regret")));
    }
    let trace = seed_dir.join("trace.csv");
    if trace.exists() {
        return Ok(Some((read_column(&trace, "cum_loss")?, "cumulative loss")));
    }
    Ok(None)
}

fn run_label(dir: &Path) -> String {
    let policy = seed_dirs(dir).ok().and_then(|dirs| {
        let (_, first) = dirs.first()?;
        let text = fs::read_to_string(first.join("summary.json")).ok()?;
        let v: serde_json::Value = serde_json::from_str(&text).ok()?;
        v.get("policy")?.as_str().map(str::to_string)
    });
    policy.unwrap_or_else(|| dir.file_name().and_then(|n| n.to_str()).unwrap_or("run").to_string())
}

/// One SVG per seed of every result directory plus `overlay.svg` with the
/// seed-averaged curve of each directory. Returns the written files.
pub fn plot(dirs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if dirs.is_empty() {
        return config_err("plot needs at least one result directory");
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut overlay = Vec::new();
    let mut overlay_label = "cumulative regret";
    for dir in dirs {
        let label = run_label(dir);
        let stem = dir.file_name().and_then(|n| n.to_str()).unwrap_or("run").to_string();
        let mut curves = Vec::new();
        for (seed, sd) in seed_dirs(dir)? {
            let Some((curve, y_label)) = run_curve(&sd)? else {
                continue;
            };
            overlay_label = y_label;
            let svg = line_chart(
                &format!("{label}, seed {seed}"),
                y_label,
                &[Series { label: label.clone(), y: curve.clone() }],
            );
            let path = out.join(format!("{stem}-seed{seed}.svg"));
            fs::write(&path, svg)?;
            written.push(path);
            curves.push(curve);
        }
        if curves.is_empty() {
            return Err(Error::Ingest(format!("{} contains no run results", dir.display())));
        }
        let len = curves.iter().map(Vec::len).min().unwrap_or(0);
        let mean = (0..len)
            .map(|t| curves.iter().map(|c| c[t]).sum::<f64>() / curves.len() as f64)
            .collect();
        overlay.push(Series { label, y: mean });
    }
    let path = out.join("overlay.svg");
    fs::write(&path, line_chart("mean over seeds", overlay_label, &overlay))?;
    written.push(path);
    Ok(written)
}
