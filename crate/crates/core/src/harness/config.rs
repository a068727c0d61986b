//! Experiment configuration files.
//!
//! A config is a TOML file with the sections `network`, `predictor`, `ogd`,
//! `policy`, `environment`, `bounds` and `diagnostics`, plus top-level `seeds`
//! and `output_dir`. Every key is optional; omitted keys take the defaults
//! below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::OrderingMode;
use crate::error::{config_err, Error, Result};
use crate::net::{Activation, NetConfig};
use crate::perturb::{default_draws, LossKind, PredictorConfig};
use crate::policy::{GammaSchedule, PolicyConfig, PolicyKind};
use crate::regression::{default_rho, BallSpec, OgdConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSection {
    /// Input dimension. When omitted it is taken from the generated contexts.
    pub d: Option<usize>,
    pub m: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    pub sigma1: f64,
    pub activation: Activation,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            d: None,
            m: 256,
            depth: 1,
            sigma1: 1.0,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSection {
    pub loss_kind: LossKind,
    pub c_p: f64,
    /// Number of perturbation draws; `max{⌈8 ln m⌉, 16}` when omitted.
    #[serde(rename = "S")]
    pub draws: Option<usize>,
    pub z: f64,
}

impl Default for PredictorSection {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::Square,
            c_p: PredictorConfig::DEFAULT_C_P,
            draws: None,
            z: PredictorConfig::DEFAULT_Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OgdSection {
    pub mu: f64,
    /// Hidden radius is `rho_scale·√T/lambda0` unless `rho` is given.
    pub rho_scale: f64,
    pub lambda0: f64,
    pub rho: Option<f64>,
    pub rho1: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Iterations of the offline comparator fit.
    pub comparator_epochs: usize,
    /// Trajectory recording interval for diagnostics (0 disables).
    pub record_every: usize,
}

impl Default for OgdSection {
    fn default() -> Self {
        Self {
            mu: OgdConfig::DEFAULT_MU,
            rho_scale: 1.0,
            lambda0: 1.0,
            rho: None,
            rho1: 1.0,
            horizon: 1000,
            comparator_epochs: 200,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub gamma0: f64,
    pub gamma_schedule: GammaSchedule,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            kind: PolicyKind::NeuSquarecb,
            gamma0: 1.0,
            gamma_schedule: GammaSchedule::SqrtKt,
        }
    }
}

/// Where rounds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    /// Separable classes labelled by the nearest random center.
    Classes,
    /// A CSV file given by `dataset`.
    Dataset,
    Linear,
    Quadratic,
    Cosine,
    /// Regression labels from a planted teacher network.
    Teacher,
    /// Regression labels uniform in `[0, 1]`.
    RandomLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvironmentSection {
    pub kind: EnvKind,
    pub dataset: Option<PathBuf>,
    pub label_column: String,
    /// Raw feature dimension of generated data.
    pub d: usize,
    #[serde(rename = "K")]
    pub arms: usize,
    pub noise_sd: f64,
    pub ordering: OrderingMode,
    pub teacher_centers: usize,
    pub teacher_strength: f64,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        Self {
            kind: EnvKind::Classes,
            dataset: None,
            label_column: "label".into(),
            d: 8,
            arms: 4,
            noise_sd: 0.0,
            ordering: OrderingMode::SortedByLabel,
            teacher_centers: 5,
            teacher_strength: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsSection {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub arms: usize,
    pub lambda_reg: f64,
    /// JSON file holding a list of context vectors. Generated when omitted.
    pub contexts: Option<PathBuf>,
    /// User-supplied reward vector analysed alongside the constructed one.
    pub h: Option<Vec<f64>>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            horizon: 10,
            arms: 4,
            lambda_reg: 1.0,
            contexts: None,
            h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsSection {
    pub widths: Vec<usize>,
    pub hessian_samples: usize,
    pub probes: usize,
    pub gradient_checks: usize,
    pub mu_floor: f64,
    /// Rounds of the realizable run used for the PL check.
    pub pl_rounds: usize,
    pub convexity_pairs: usize,
    pub convexity_radius: f64,
    pub interpolation_points: usize,
    pub interpolation_epochs: usize,
    /// Contexts in the NTK Gram matrix whose λ_min is reported.
    pub ntk_contexts: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            widths: vec![64, 256],
            hessian_samples: 20,
            probes: 30,
            gradient_checks: 10,
            mu_floor: crate::diagnostics::DEFAULT_MU_FLOOR,
            pl_rounds: 200,
            convexity_pairs: 50,
            convexity_radius: 1.0,
            interpolation_points: 20,
            interpolation_epochs: 300,
            ntk_contexts: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    pub predictor: PredictorSection,
    pub ogd: OgdSection,
    pub policy: PolicySection,
    pub environment: EnvironmentSection,
    pub bounds: BoundsSection,
    pub diagnostics: DiagnosticsSection,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkSection::default(),
            predictor: PredictorSection::default(),
            ogd: OgdSection::default(),
            policy: PolicySection::default(),
            environment: EnvironmentSection::default(),
            bounds: BoundsSection::default(),
            diagnostics: DiagnosticsSection::default(),
            seeds: vec![0],
            output_dir: PathBuf::from("results"),
        }
    }
}

/// Reads and validates a config file. Relative `dataset` and `contexts`
/// paths are resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = parse_config_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.environment.dataset, &mut cfg.bounds.contexts].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::new(text);
    let mut unknown = Vec::new();
    let parsed: std::result::Result<ExperimentConfig, _> =
        serde_ignored::deserialize(de, |path| unknown.push(path.to_string()));
    if let Some(key) = unknown.first() {
        return config_err(format!("unknown key {key}"));
    }
    let cfg = parsed.map_err(|e| Error::Config(flatten_toml_error(&e.to_string())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn flatten_toml_error(msg: &str) -> String {
    // toml errors span several lines with a source excerpt; keep the first
    // line with the location and the final explanation.
    let lines: Vec<&str> = msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    match (lines.first(), lines.last()) {
        (Some(first), Some(last)) if first != last => format!("{first} {last}"),
        (Some(first), _) => first.to_string(),
        _ => msg.to_string(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return config_err("seeds must not be empty");
        }
        if self.network.d == Some(0) {
            return config_err("network.d must be at least 1");
        }
        if self.ogd.horizon == 0 {
            return config_err("ogd.T must be at least 1");
        }
        if !(self.ogd.lambda0 > 0.0 && self.ogd.rho_scale > 0.0) {
            return config_err("ogd.lambda0 and ogd.rho_scale must be positive");
        }
        if self.environment.arms == 0 || self.environment.d == 0 {
            return config_err("environment.K and environment.d must be at least 1");
        }
        if self.environment.kind == EnvKind::Dataset && self.environment.dataset.is_none() {
            return config_err("environment.kind = \"dataset\" needs environment.dataset");
        }
        if self.bounds.horizon == 0 || self.bounds.arms == 0 {
            return config_err("bounds.T and bounds.K must be at least 1");
        }
        self.ogd_config(LossKind::Square)?;
        Ok(())
    }

    /// Network architecture for contexts of dimension `input_dim`.
    pub fn net_config(&self, input_dim: usize) -> Result<NetConfig> {
        if let Some(d) = self.network.d {
            if d != input_dim {
                return config_err(format!("network.d = {d} but the contexts have dimension {input_dim}"));
            }
        }
        let cfg = NetConfig {
            input_dim,
            width: self.network.m,
            depth: self.network.depth,
            sigma1: self.network.sigma1,
            activation: self.network.activation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn predictor_config(&self, loss_kind: LossKind) -> PredictorConfig {
        PredictorConfig {
            loss_kind,
            c_p: self.predictor.c_p,
            draws: self.predictor.draws.unwrap_or_else(|| default_draws(self.network.m)),
            z: self.predictor.z,
        }
    }

    pub fn ball(&self) -> BallSpec {
        let rho = self
            .ogd
            .rho
            .unwrap_or_else(|| default_rho(self.ogd.rho_scale, self.ogd.horizon, self.ogd.lambda0));
        BallSpec::new(rho, self.ogd.rho1)
    }

    pub fn ogd_config(&self, loss_kind: LossKind) -> Result<OgdConfig> {
        let cfg = OgdConfig {
            mu: self.ogd.mu,
            horizon: self.ogd.horizon,
            ball: self.ball(),
            predictor: self.predictor_config(loss_kind),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn policy_config(&self) -> Result<PolicyConfig> {
        let cfg = PolicyConfig {
            kind: self.policy.kind,
            gamma0: self.policy.gamma0,
            gamma_schedule: self.policy.gamma_schedule,
            regression: self.ogd_config(self.policy.kind.loss_kind())?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Effective values with every default spelled out, for result manifests.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.predictor.draws = Some(self.predictor_config(self.predictor.loss_kind).draws);
        out.ogd.rho = Some(self.ball().rho);
        out
    }
}
