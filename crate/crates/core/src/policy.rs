//! Inverse-gap-weighting policies on top of the online regressor.
//!
//! Scores are predicted losses (lower is better). NeuSquareCB scores arms with
//! the square-loss regressor and plays the IGW distribution; NeuFastCB scores
//! with the KL regressor and plays the re-weighted IGW distribution.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::BanditStream;
use crate::error::{config_err, Error, Result};
use crate::net::NetConfig;
use crate::perturb::LossKind;
use crate::regression::{csv_err, OgdConfig, OnlineRegressor};
use crate::rng::{stream_rng, tags};

/// A probability vector over arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDistribution {
    probs: Vec<f64>,
}

impl ArmDistribution {
    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Inverse-CDF sampling with a single uniform `u ∈ [0, 1)`.
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (a, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        // rounding left `u` above the total; take the last arm with mass
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    /// Nonnegative, sums to 1 within `tol`, and `best` carries the maximum mass.
    pub fn check(&self, best: usize, tol: f64) -> bool {
        let sum: f64 = self.probs.iter().sum();
        let max = self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.probs.iter().all(|p| *p >= 0.0) && (sum - 1.0).abs() <= tol && self.probs[best] >= max
    }
}

fn check_inputs(scores: &[f64], gamma: f64) -> Result<()> {
    if gamma.is_nan() || gamma <= 0.0 {
        return config_err(format!("gamma must be positive, got {gamma}"));
    }
    if scores.is_empty() {
        return config_err("at least one arm is required");
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite arm score".into()));
    }
    Ok(())
}

/// Lowest-index argmin.
fn best_arm(scores: &[f64]) -> usize {
    crate::env::argmin(scores)
}

fn complete(scores: &[f64], mut probs: Vec<f64>, b: usize) -> ArmDistribution {
    if scores.iter().all(|s| *s == scores[b]) {
        // exact 1/K; the remainder below would carry rounding error
        return ArmDistribution::uniform(scores.len());
    }
    let rest: f64 = probs.iter().enumerate().filter(|(a, _)| *a != b).map(|(_, p)| p).sum();
    probs[b] = 1.0 - rest;
    ArmDistribution { probs }
}

/// `p_a = 1/(K + γ(s_a − s_b))` for `a ≠ b = argmin s`, remainder on `b`.
pub fn igw_distribution(scores: &[f64], gamma: f64) -> Result<ArmDistribution> {
    check_inputs(scores, gamma)?;
    let k = scores.len() as f64;
    let b = best_arm(scores);
    let probs = scores.iter().map(|s| 1.0 / (k + gamma * (s - scores[b]))).collect();
    Ok(complete(scores, probs, b))
}

/// `p_a = s_b/(K s_b + γ(s_a − s_b))` for `a ≠ b = argmin s`, remainder on `b`.
pub fn reweighted_igw_distribution(scores: &[f64], gamma: f64) -> Result<ArmDistribution> {
    check_inputs(scores, gamma)?;
    if let Some(s) = scores.iter().find(|s| **s <= 0.0) {
        return Err(Error::Domain(format!("re-weighted IGW needs positive scores, got {s}")));
    }
    let k = scores.len() as f64;
    let b = best_arm(scores);
    let sb = scores[b];
    let probs = scores.iter().map(|s| sb / (k * sb + gamma * (s - sb))).collect();
    Ok(complete(scores, probs, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    NeuSquarecb,
    NeuFastcb,
    Uniform,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::NeuSquarecb => "neu_squarecb",
            PolicyKind::NeuFastcb => "neu_fastcb",
            PolicyKind::Uniform => "uniform",
        }
    }

    /// Loss the regressor is trained with.
    pub fn loss_kind(self) -> LossKind {
        match self {
            PolicyKind::NeuFastcb => LossKind::Kl,
            _ => LossKind::Square,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSchedule {
    #[default]
    SqrtKt,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub gamma0: f64,
    pub gamma_schedule: GammaSchedule,
    /// The predictor loss kind is overridden by [`PolicyKind::loss_kind`].
    pub regression: OgdConfig,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0.is_finite() && self.gamma0 > 0.0) {
            return config_err(format!("gamma0 must be positive, got {}", self.gamma0));
        }
        self.regression_config().validate()
    }

    /// Regression settings with the loss implied by the policy kind.
    pub fn regression_config(&self) -> OgdConfig {
        let mut cfg = self.regression;
        cfg.predictor.loss_kind = self.kind.loss_kind();
        cfg
    }
}

/// `γ_t = γ₀√(Kt)` or `γ₀`.
pub fn gamma_at(t: usize, cfg: &PolicyConfig, k: usize) -> f64 {
    match cfg.gamma_schedule {
        GammaSchedule::SqrtKt => cfg.gamma0 * ((k * t) as f64).sqrt(),
        GammaSchedule::Fixed => cfg.gamma0,
    }
}

/// One completed interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub t: usize,
    pub arm_contexts: Vec<Vec<f64>>,
    pub chosen: usize,
    pub observed_loss: f64,
}

/// Policy state: the regressor (absent for `uniform`), the sampling stream and
/// the round counter.
#[derive(Debug, Clone)]
pub struct BanditLearner {
    cfg: PolicyConfig,
    regressor: Option<OnlineRegressor>,
    rng: ChaCha8Rng,
    t: usize,
}

impl BanditLearner {
    pub fn new(net: &NetConfig, cfg: &PolicyConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let regressor = match cfg.kind {
            PolicyKind::Uniform => None,
            _ => Some(OnlineRegressor::new(net, &cfg.regression_config(), seed)?),
        };
        Ok(Self {
            cfg: *cfg,
            regressor,
            rng: stream_rng(seed, tags::POLICY),
            t: 0,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn regressor(&self) -> Option<&OnlineRegressor> {
        self.regressor.as_ref()
    }

    /// Completed rounds.
    pub fn rounds(&self) -> usize {
        self.t
    }

    /// Predicted loss of every arm. NeuFastCB scores are clipped into `[z, 1 − z]`.
    pub fn scores(&self, contexts: &[Vec<f64>]) -> Result<Vec<f64>> {
        let Some(reg) = &self.regressor else {
            return Ok(vec![0.0; contexts.len()]);
        };
        let offsets = reg.offsets()?;
        let z = reg.predictor().config().z;
        contexts
            .iter()
            .map(|x| {
                let s = reg.predict_with_offsets(x, &offsets)?;
                Ok(match self.cfg.kind {
                    PolicyKind::NeuFastcb => s.clamp(z, 1.0 - z),
                    _ => s,
                })
            })
            .collect()
    }

    /// Distribution for the current round over `contexts`.
    pub fn distribution(&self, contexts: &[Vec<f64>]) -> Result<ArmDistribution> {
        let k = contexts.len();
        if k == 0 {
            return config_err("a round needs at least one arm");
        }
        if k == 1 {
            return Ok(ArmDistribution { probs: vec![1.0] });
        }
        let gamma = gamma_at(self.t + 1, &self.cfg, k);
        match self.cfg.kind {
            PolicyKind::Uniform => Ok(ArmDistribution::uniform(k)),
            PolicyKind::NeuSquarecb => igw_distribution(&self.scores(contexts)?, gamma),
            PolicyKind::NeuFastcb => reweighted_igw_distribution(&self.scores(contexts)?, gamma),
        }
    }

    /// Builds the distribution and samples an arm with one uniform draw.
    pub fn choose(&mut self, contexts: &[Vec<f64>]) -> Result<(usize, ArmDistribution)> {
        let dist = self.distribution(contexts)?;
        let u: f64 = self.rng.gen();
        Ok((dist.sample(u), dist))
    }

    /// Regression step on the chosen context and its observed loss.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!("observed loss {y} outside [0, 1]")));
        }
        if let Some(reg) = &mut self.regressor {
            reg.update(x, y)?;
        }
        self.t += 1;
        Ok(())
    }
}

/// Per-round log row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditRecord {
    pub t: usize,
    pub chosen: usize,
    pub loss: f64,
    pub cum_loss: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditSummary {
    pub policy: PolicyKind,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub cum_loss: f64,
    /// Cumulative loss of the per-round best arm.
    pub best_loss: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BanditTrace {
    pub records: Vec<BanditRecord>,
}

impl BanditTrace {
    pub fn cum_loss(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_loss)
    }

    pub fn cum_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn summary(&self, policy: PolicyKind) -> BanditSummary {
        BanditSummary {
            policy,
            horizon: self.records.len(),
            cum_loss: self.cum_loss(),
            best_loss: self.cum_loss() - self.cum_regret(),
            cum_regret: self.cum_regret(),
        }
    }

    /// CSV with header `t,chosen,loss,cum_loss,cum_regret`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "chosen", "loss", "cum_loss", "cum_regret"]).map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.chosen.to_string(),
                r.loss.to_string(),
                r.cum_loss.to_string(),
                r.cum_regret.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plays the policy over `stream`. Regret is measured against the per-round
/// best arm, which for classification streams has zero loss.
pub fn run_policy(stream: &BanditStream, net: &NetConfig, cfg: &PolicyConfig, seed: u64) -> Result<BanditTrace> {
    if cfg.kind != PolicyKind::Uniform && net.input_dim != stream.dim() {
        return Err(Error::Shape(format!(
            "network input dimension {} does not match context dimension {}",
            net.input_dim,
            stream.dim()
        )));
    }
    let mut learner = BanditLearner::new(net, cfg, seed)?;
    let mut trace = BanditTrace::default();
    let (mut cum_loss, mut cum_best) = (0.0, 0.0);
    for (i, round) in stream.rounds.iter().enumerate() {
        let (chosen, _) = learner.choose(&round.contexts)?;
        let loss = round.losses[chosen];
        learner.update(&round.contexts[chosen], loss)?;
        cum_loss += loss;
        cum_best += round.best_loss();
        trace.records.push(BanditRecord {
            t: i + 1,
            chosen,
            loss,
            cum_loss,
            cum_regret: cum_loss - cum_best,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::PredictorConfig;
    use crate::regression::BallSpec;
    use rand::SeedableRng;

    fn policy(kind: PolicyKind, m: usize) -> PolicyConfig {
        PolicyConfig {
            kind,
            gamma0: 1.0,
            gamma_schedule: GammaSchedule::SqrtKt,
            regression: OgdConfig {
                mu: 1.0,
                horizon: 100,
                ball: BallSpec::new(10.0, 1.0),
                predictor: PredictorConfig {
                    c_p: 0.1,
                    ..PredictorConfig::for_width(LossKind::Square, m)
                },
            },
        }
    }

    #[test]
    fn igw_examples() {
        let p = igw_distribution(&[0.2, 0.5], 10.0).unwrap();
        assert!((p.probs()[1] - 0.2).abs() < 1e-15 && (p.probs()[0] - 0.8).abs() < 1e-15);
        let p = igw_distribution(&[0.3; 5], 7.0).unwrap();
        assert!(p.probs().iter().all(|q| *q == 0.2));
        assert!(matches!(igw_distribution(&[0.1, 0.2], 0.0), Err(Error::Config(_))));
        assert!(matches!(igw_distribution(&[0.1, 0.2], -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn reweighted_examples() {
        let p = reweighted_igw_distribution(&[0.1, 0.4], 10.0).unwrap();
        assert!((p.probs()[1] - 0.03125).abs() < 1e-15);
        assert!((p.probs()[0] - 0.96875).abs() < 1e-15);
        let p = reweighted_igw_distribution(&[0.25; 4], 3.0).unwrap();
        assert!(p.probs().iter().all(|q| *q == 0.25));
        assert!(matches!(reweighted_igw_distribution(&[0.0, 0.4], 1.0), Err(Error::Domain(_))));
        let p = reweighted_igw_distribution(&[1e-9, 0.5, 0.7], 10.0).unwrap();
        assert!(p.probs()[0] > 1.0 - 1e-8);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let p = igw_distribution(&[0.5, 0.1, 0.1], 100.0).unwrap();
        assert!(p.probs()[1] > p.probs()[2]);
    }

    #[test]
    fn sampling_follows_cdf() {
        let p = ArmDistribution { probs: vec![0.25, 0.0, 0.75] };
        assert_eq!(p.sample(0.0), 0);
        assert_eq!(p.sample(0.2499), 0);
        assert_eq!(p.sample(0.25), 2);
        assert_eq!(p.sample(0.999_999_999), 2);
        assert_eq!(p.sample(1.0), 2);
    }

    #[test]
    fn gamma_schedules() {
        let mut cfg = policy(PolicyKind::NeuSquarecb, 8);
        assert_eq!(gamma_at(25, &cfg, 4), 10.0);
        assert!(gamma_at(26, &cfg, 4) >= gamma_at(25, &cfg, 4));
        cfg.gamma_schedule = GammaSchedule::Fixed;
        cfg.gamma0 = 5.0;
        assert_eq!(gamma_at(1, &cfg, 4), 5.0);
        assert_eq!(gamma_at(1000, &cfg, 4), 5.0);
    }

    #[test]
    fn single_arm_is_certain() {
        let net = NetConfig::new(3, 16, 1, 1.0);
        let mut l = BanditLearner::new(&net, &policy(PolicyKind::NeuSquarecb, 16), 0).unwrap();
        let (a, d) = l.choose(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!((a, d.probs()), (0, &[1.0][..]));
    }

    #[test]
    fn huge_gamma_plays_greedy() {
        let net = NetConfig::new(3, 32, 1, 1.0);
        let mut cfg = policy(PolicyKind::NeuSquarecb, 32);
        cfg.gamma_schedule = GammaSchedule::Fixed;
        cfg.gamma0 = 1e9;
        let l = BanditLearner::new(&net, &cfg, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ctx: Vec<Vec<f64>> = (0..4).map(|_| crate::net::random_unit_vector(3, &mut rng)).collect();
        let scores = l.scores(&ctx).unwrap();
        let d = l.distribution(&ctx).unwrap();
        assert!(d.probs()[best_arm(&scores)] >= 1.0 - 1e-6);
    }

    #[test]
    fn update_rejects_out_of_range_loss_and_counts_rounds() {
        let net = NetConfig::new(2, 8, 1, 1.0);
        let mut l = BanditLearner::new(&net, &policy(PolicyKind::NeuFastcb, 8), 0).unwrap();
        assert!(matches!(l.update(&[1.0, 0.0], 1.5), Err(Error::Domain(_))));
        assert_eq!(l.rounds(), 0);
        l.update(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(l.rounds(), 1);
    }

    #[test]
    fn update_at_current_prediction_is_a_no_op() {
        let net = NetConfig::new(2, 8, 1, 1.0);
        let mut l = BanditLearner::new(&net, &policy(PolicyKind::NeuSquarecb, 8), 0).unwrap();
        let x = [0.6, 0.8];
        // at θ₀ all offsets vanish, so the prediction equals f(θ₀; x)
        let y = l.regressor().unwrap().predict(&x).unwrap();
        let l0 = l.regressor().unwrap().params().clone();
        if (0.0..=1.0).contains(&y) {
            l.update(&x, y).unwrap();
            assert_eq!(l.regressor().unwrap().params(), &l0);
        }
    }

    #[test]
    fn fastcb_uses_kl_regressor() {
        let net = NetConfig::new(2, 8, 1, 1.0);
        let l = BanditLearner::new(&net, &policy(PolicyKind::NeuFastcb, 8), 0).unwrap();
        assert_eq!(l.regressor().unwrap().config().predictor.loss_kind, LossKind::Kl);
        let s = l.scores(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(s.iter().all(|v| (0.01..=0.99).contains(v)));
    }

    #[test]
    fn csv_header() {
        let trace = BanditTrace {
            records: vec![BanditRecord { t: 1, chosen: 2, loss: 1.0, cum_loss: 1.0, cum_regret: 1.0 }],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,chosen,loss,cum_loss,cum_regret\n1,2,1,1,1\n");
    }
}
