//! Projected online gradient descent over the layer-wise Frobenius ball.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::net::{init_params, FlatGradient, NetConfig, NetworkParams};
use crate::perturb::{PerturbedPredictor, PredictorConfig};

/// Radii of `{θ : ‖W⁽ˡ⁾ − W₀⁽ˡ⁾‖_F ≤ ρ ∀l, ‖v − v₀‖₂ ≤ ρ₁}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub rho: f64,
    pub rho1: f64,
}

impl BallSpec {
    pub fn new(rho: f64, rho1: f64) -> Self {
        Self { rho, rho1 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("rho", self.rho), ("rho1", self.rho1)] {
            if !(r.is_finite() && r > 0.0) {
                return config_err(format!("{name} must be positive and finite, got {r}"));
            }
        }
        Ok(())
    }

    /// Whether every block of `params` lies within its radius (plus `tol`).
    pub fn contains(&self, params: &NetworkParams, theta0: &NetworkParams, tol: f64) -> Result<bool> {
        let dists = params.layer_distances(theta0)?;
        let (out, hidden) = dists.split_last().expect("output block");
        Ok(hidden.iter().all(|d| *d <= self.rho + tol) && *out <= self.rho1 + tol)
    }
}

/// Hidden-layer radius `ρ = scale·√T/λ₀`.
pub fn default_rho(scale: f64, horizon: usize, lambda0: f64) -> f64 {
    scale * (horizon as f64).sqrt() / lambda0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OgdConfig {
    /// QG constant μ; the step size is `4/(μt)`.
    pub mu: f64,
    /// Horizon T.
    pub horizon: usize,
    pub ball: BallSpec,
    pub predictor: PredictorConfig,
}

impl OgdConfig {
    pub const DEFAULT_MU: f64 = 128.0;

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return config_err(format!("mu must be positive, got {}", self.mu));
        }
        if self.horizon == 0 {
            return config_err("horizon T must be at least 1");
        }
        self.ball.validate()?;
        self.predictor.validate()
    }
}

/// `η_t = 4/(μt)`.
pub fn step_size(t: usize, mu: f64) -> f64 {
    debug_assert!(t >= 1);
    4.0 / (mu * t as f64)
}

/// Projects onto the ball around θ₀, in place. Blocks already inside are untouched.
pub fn project_in_place(params: &mut NetworkParams, theta0: &NetworkParams, ball: &BallSpec) -> Result<()> {
    params.check_layout(theta0)?;
    let n_blocks = params.depth() + 1;
    for (i, (a, b)) in params.blocks_mut().zip(theta0.blocks()).enumerate() {
        let radius = if i + 1 == n_blocks { ball.rho1 } else { ball.rho };
        let dist = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        if dist > radius {
            let s = radius / dist;
            for (x, y) in a.iter_mut().zip(b) {
                *x = y + (*x - y) * s;
            }
        }
    }
    Ok(())
}

pub fn project_ball(params: &NetworkParams, theta0: &NetworkParams, ball: &BallSpec) -> Result<NetworkParams> {
    let mut out = params.clone();
    project_in_place(&mut out, theta0, ball)?;
    Ok(out)
}

/// `θ_{t+1} = Π_B(θ_t − η_t g)`.
pub fn ogd_step(
    params: &NetworkParams,
    grad: &FlatGradient,
    t: usize,
    cfg: &OgdConfig,
    theta0: &NetworkParams,
) -> Result<NetworkParams> {
    if t == 0 {
        return config_err("round index starts at 1");
    }
    grad.ensure_finite()
        .map_err(|_| Error::Numeric(format!("non-finite gradient at round {t}")))?;
    let mut next = params.clone();
    next.axpy(-step_size(t, cfg.mu), grad)?;
    project_in_place(&mut next, theta0, &cfg.ball)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub loss: f64,
    pub cum_loss: f64,
}

/// Per-round losses of an online run plus the offline comparator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTrace {
    pub records: Vec<RoundRecord>,
    pub comparator_loss: Option<f64>,
}

/// JSON summary of a [`RegretTrace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub cum_loss: f64,
    pub comparator_loss: f64,
    pub regret: f64,
}

impl RegretTrace {
    pub fn push(&mut self, loss: f64) {
        let t = self.records.len() + 1;
        let cum_loss = self.cum_loss() + loss;
        self.records.push(RoundRecord { t, loss, cum_loss });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cum_loss(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_loss)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Mean loss over the 1-based inclusive round range `[from, to]`.
    pub fn mean_loss(&self, from: usize, to: usize) -> f64 {
        let slice = &self.records[from - 1..to.min(self.records.len())];
        slice.iter().map(|r| r.loss).sum::<f64>() / slice.len() as f64
    }

    /// Cumulative loss minus the comparator (0 when no comparator was estimated).
    pub fn regret(&self) -> f64 {
        self.cum_loss() - self.comparator_loss.unwrap_or(0.0)
    }

    pub fn summary(&self) -> RegretSummary {
        RegretSummary {
            horizon: self.len(),
            cum_loss: self.cum_loss(),
            comparator_loss: self.comparator_loss.unwrap_or(0.0),
            regret: self.regret(),
        }
    }

    /// CSV with header `t,loss,cum_loss`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "loss", "cum_loss"]).map_err(csv_err)?;
        for r in &self.records {
            w.write_record([r.t.to_string(), r.loss.to_string(), r.cum_loss.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Online learner: the perturbed predictor plus the current iterate.
#[derive(Debug, Clone)]
pub struct OnlineRegressor {
    predictor: PerturbedPredictor,
    params: NetworkParams,
    cfg: OgdConfig,
    /// Number of updates applied so far.
    t: usize,
}

impl OnlineRegressor {
    pub fn new(net: &NetConfig, cfg: &OgdConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let snapshot = init_params(net, seed)?;
        let predictor = PerturbedPredictor::new(snapshot, cfg.predictor, seed)?;
        Ok(Self::from_predictor(predictor, cfg))
    }

    pub fn from_predictor(predictor: PerturbedPredictor, cfg: &OgdConfig) -> Self {
        let params = predictor.snapshot().params();
        Self {
            predictor,
            params,
            cfg: *cfg,
            t: 0,
        }
    }

    pub fn predictor(&self) -> &PerturbedPredictor {
        &self.predictor
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn config(&self) -> &OgdConfig {
        &self.cfg
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn offsets(&self) -> Result<Vec<f64>> {
        self.predictor.offsets(&self.params)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predictor.averaged_prediction(&self.params, x)
    }

    pub fn predict_with_offsets(&self, x: &[f64], offsets: &[f64]) -> Result<f64> {
        self.predictor.predict_with_offsets(&self.params, x, offsets)
    }

    /// One projected OGD step on the averaged loss at `(x, y)`.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        let offsets = self.offsets()?;
        self.update_with_offsets(x, y, &offsets)
    }

    fn update_with_offsets(&mut self, x: &[f64], y: f64, offsets: &[f64]) -> Result<()> {
        let (_, grad) = self
            .predictor
            .averaged_loss_grad_with_offsets(&self.params, x, y, offsets)?;
        self.t += 1;
        self.params = ogd_step(&self.params, &grad, self.t, &self.cfg, self.predictor.snapshot().theta0())?;
        Ok(())
    }

    /// Predicts, records `ℓ(y, prediction)`, then updates. Returns the recorded loss.
    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<f64> {
        let label = self.predictor.config().prepare_label(y)?;
        let offsets = self.offsets()?;
        let pred = self.predict_with_offsets(x, &offsets)?;
        let loss = self.predictor.prediction_loss(label, pred);
        self.update_with_offsets(x, y, &offsets)?;
        Ok(loss)
    }
}

/// A recorded iterate with the example it was evaluated on.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub params: NetworkParams,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Runs projected OGD over `stream`, recording `ℓ(y_t, prediction_t)` each round.
pub fn run_online_regression(
    stream: &[(Vec<f64>, f64)],
    net: &NetConfig,
    cfg: &OgdConfig,
    seed: u64,
) -> Result<RegretTrace> {
    Ok(run_online_regression_recorded(stream, net, cfg, seed, 0)?.0)
}

/// As [`run_online_regression`], also keeping every `record_every`-th iterate
/// (before its update) for later diagnostics. `record_every = 0` keeps none.
pub fn run_online_regression_recorded(
    stream: &[(Vec<f64>, f64)],
    net: &NetConfig,
    cfg: &OgdConfig,
    seed: u64,
    record_every: usize,
) -> Result<(RegretTrace, Vec<TrajectoryPoint>)> {
    let mut learner = OnlineRegressor::new(net, cfg, seed)?;
    let mut trace = RegretTrace::default();
    let mut trajectory = Vec::new();
    for (i, (x, y)) in stream.iter().enumerate() {
        let t = i + 1;
        if record_every > 0 && i % record_every == 0 {
            trajectory.push(TrajectoryPoint {
                t,
                params: learner.params().clone(),
                x: x.clone(),
                y: *y,
            });
        }
        trace.push(learner.observe(x, *y)?);
    }
    Ok((trace, trajectory))
}

/// Result of the offline comparator fit.
#[derive(Debug, Clone)]
pub struct ComparatorFit {
    /// Best total `Σ_t ℓ(y_t, prediction(θ; x_t))` seen.
    pub best_loss: f64,
    /// Best-so-far total after each epoch, starting with the value at θ₀.
    pub history: Vec<f64>,
    pub params: NetworkParams,
}

/// Approximates `inf_{θ∈B} Σ_t ℓ(y_t, prediction(θ; x_t))` by projected
/// gradient descent with backtracking, started at θ₀.
///
/// Uses the same θ₀ and perturbation draws as an online run with the same seed.
pub fn estimate_comparator(
    stream: &[(Vec<f64>, f64)],
    net: &NetConfig,
    cfg: &OgdConfig,
    epochs: usize,
    seed: u64,
) -> Result<f64> {
    Ok(fit_comparator(stream, net, cfg, epochs, seed)?.best_loss)
}

pub fn fit_comparator(
    stream: &[(Vec<f64>, f64)],
    net: &NetConfig,
    cfg: &OgdConfig,
    epochs: usize,
    seed: u64,
) -> Result<ComparatorFit> {
    cfg.validate()?;
    let snapshot = init_params(net, seed)?;
    let predictor = PerturbedPredictor::new(snapshot, cfg.predictor, seed)?;
    fit_comparator_with(&predictor, stream, &cfg.ball, epochs)
}

/// Comparator fit for an existing predictor.
///
/// Accelerated projected gradient (FISTA) with a backtracking step and
/// function-value restarts. One epoch is one accepted step.
pub fn fit_comparator_with(
    predictor: &PerturbedPredictor,
    stream: &[(Vec<f64>, f64)],
    ball: &BallSpec,
    epochs: usize,
) -> Result<ComparatorFit> {
    const MAX_HALVINGS: usize = 60;

    let theta0 = predictor.snapshot().theta0();
    let mut params = predictor.snapshot().params();
    if stream.is_empty() {
        return Ok(ComparatorFit {
            best_loss: 0.0,
            history: vec![0.0],
            params,
        });
    }
    let mut value = predictor.total_prediction_loss(&params, stream)?;
    let mut best = value;
    let mut history = vec![best];
    let mut best_params = params.clone();
    let mut extrapolated = params.clone();
    let mut momentum = 1.0_f64;
    let mut step = 1.0;
    for _ in 0..epochs {
        if best == 0.0 {
            break;
        }
        let (y_value, grad) = predictor.total_prediction_loss_grad(&extrapolated, stream)?;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand = extrapolated.clone();
            cand.axpy(-step, &grad)?;
            project_in_place(&mut cand, theta0, ball)?;
            let moved = cand.sub(&extrapolated)?;
            let model = y_value + grad.dot(&moved)? + moved.dot(&moved)? / (2.0 * step);
            let cand_value = predictor.total_prediction_loss(&cand, stream)?;
            if cand_value <= model && moved.norm() > 0.0 {
                accepted = Some((cand, cand_value));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_value)) = accepted else {
            break;
        };
        step *= 1.5;
        if cand_value > value {
            // restart from the last iterate without momentum
            extrapolated = params.clone();
            momentum = 1.0;
            history.push(best);
            continue;
        }
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let diff = cand.sub(&params)?;
        extrapolated = cand.clone();
        extrapolated.axpy(beta, &diff)?;
        project_in_place(&mut extrapolated, theta0, ball)?;
        momentum = next_momentum;
        params = cand;
        value = cand_value;
        if value < best {
            best = value;
            best_params = params.clone();
        }
        history.push(best);
    }
    Ok(ComparatorFit {
        best_loss: best,
        history,
        params: best_params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{random_unit_vector, sigmoid};
    use crate::perturb::LossKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ogd_cfg(kind: LossKind, m: usize) -> OgdConfig {
        OgdConfig {
            mu: 8.0,
            horizon: 100,
            ball: BallSpec::new(5.0, 1.0),
            predictor: PredictorConfig {
                draws: 4,
                ..PredictorConfig::for_width(kind, m)
            },
        }
    }

    #[test]
    fn step_sizes() {
        assert_eq!(step_size(1, 128.0), 0.03125);
        assert_eq!(step_size(2, 8.0), 0.25);
        for t in 1..100 {
            assert!(step_size(t + 1, 3.0) < step_size(t, 3.0));
        }
    }

    #[test]
    fn projection_inside_is_identity() {
        let cfg = NetConfig::new(3, 8, 2, 1.0);
        let snap = init_params(&cfg, 0).unwrap();
        let mut theta = snap.params();
        let dir = init_params(&cfg, 1).unwrap().params();
        theta.axpy(0.01, &dir).unwrap();
        let ball = BallSpec::new(10.0, 10.0);
        assert_eq!(project_ball(&theta, snap.theta0(), &ball).unwrap(), theta);
    }

    #[test]
    fn projection_scales_radially() {
        let cfg = NetConfig::new(3, 8, 2, 1.0);
        let snap = init_params(&cfg, 0).unwrap();
        let theta0 = snap.theta0();
        let mut theta = snap.params();
        // push the second hidden layer to distance 2ρ
        let rho = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dir = random_unit_vector(64, &mut rng);
        for (w, d) in theta.hidden_mut()[1].iter_mut().zip(&dir) {
            *w += 2.0 * rho * d;
        }
        let ball = BallSpec::new(rho, 1.0);
        let projected = project_ball(&theta, theta0, &ball).unwrap();
        let dists = projected.layer_distances(theta0).unwrap();
        assert!((dists[1] - rho).abs() < 1e-12);
        assert_eq!(dists[0], 0.0);
        let after: Vec<f64> = projected.hidden()[1].iter().zip(&theta0.hidden()[1]).map(|(a, b)| a - b).collect();
        let cos = after.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() / dists[1];
        assert!((cos - 1.0).abs() < 1e-12);
        let twice = project_ball(&projected, theta0, &ball).unwrap();
        assert!(twice.distance(&projected).unwrap() < 1e-15);
    }

    #[test]
    fn zero_gradient_step_is_noop() {
        let net = NetConfig::new(3, 8, 1, 1.0);
        let cfg = ogd_cfg(LossKind::Square, 8);
        let snap = init_params(&net, 0).unwrap();
        let theta = snap.params();
        let next = ogd_step(&theta, &theta.zeros_like(), 1, &cfg, snap.theta0()).unwrap();
        assert_eq!(next, theta);
    }

    #[test]
    fn nonfinite_gradient_aborts() {
        let net = NetConfig::new(3, 8, 1, 1.0);
        let cfg = ogd_cfg(LossKind::Square, 8);
        let snap = init_params(&net, 0).unwrap();
        let theta = snap.params();
        let mut g = theta.zeros_like();
        g.output_mut()[0] = f64::NAN;
        assert!(matches!(ogd_step(&theta, &g, 1, &cfg, snap.theta0()), Err(Error::Numeric(_))));
    }

    #[test]
    fn single_round_trace() {
        let net = NetConfig::new(3, 8, 1, 1.0);
        let cfg = ogd_cfg(LossKind::Square, 8);
        let x = random_unit_vector(3, &mut ChaCha8Rng::seed_from_u64(0));
        let trace = run_online_regression(&[(x, 0.7)], &net, &cfg, 1).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.records[0].loss, trace.records[0].cum_loss);
        assert!(run_online_regression(&[], &net, &cfg, 1).unwrap().is_empty());
    }

    #[test]
    fn kl_stream_at_optimum_has_zero_loss() {
        let net = NetConfig::new(3, 16, 1, 1.0);
        let cfg = ogd_cfg(LossKind::Kl, 16);
        let snap = init_params(&net, 4).unwrap();
        let x = random_unit_vector(3, &mut ChaCha8Rng::seed_from_u64(1));
        let y = sigmoid(snap.theta0().forward(&x).unwrap());
        let stream = vec![(x, y); 20];
        let trace = run_online_regression(&stream, &net, &cfg, 4).unwrap();
        assert!(trace.records.iter().all(|r| r.loss.abs() < 1e-15));
        assert!(estimate_comparator(&stream, &net, &cfg, 10, 4).unwrap().abs() < 1e-15);
    }

    #[test]
    fn runs_are_deterministic() {
        let net = NetConfig::new(3, 16, 2, 1.0);
        let cfg = ogd_cfg(LossKind::Square, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stream: Vec<_> = (0..30)
            .map(|_| (random_unit_vector(3, &mut rng), rng.gen_range(0.0..1.0)))
            .collect();
        let a = run_online_regression(&stream, &net, &cfg, 9).unwrap();
        let b = run_online_regression(&stream, &net, &cfg, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_point_is_fit() {
        let net = NetConfig::new(4, 512, 1, 1.0);
        let mut cfg = ogd_cfg(LossKind::Square, 512);
        cfg.ball = BallSpec::new(10.0, 2.0);
        let x = random_unit_vector(4, &mut ChaCha8Rng::seed_from_u64(3));
        let fit = fit_comparator(&[(x, 0.3)], &net, &cfg, 200, 5).unwrap();
        assert!(fit.best_loss <= 1e-4, "residual {}", fit.best_loss);
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn comparator_below_online_loss() {
        let net = NetConfig::new(3, 64, 1, 1.0);
        let cfg = ogd_cfg(LossKind::Square, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stream: Vec<_> = (0..40)
            .map(|_| (random_unit_vector(3, &mut rng), rng.gen_range(0.0..1.0)))
            .collect();
        let online = run_online_regression(&stream, &net, &cfg, 7).unwrap();
        let comp = estimate_comparator(&stream, &net, &cfg, 200, 7).unwrap();
        assert!(comp <= online.cum_loss() + 1e-9, "{comp} vs {}", online.cum_loss());
    }

    #[test]
    fn csv_and_summary() {
        let mut trace = RegretTrace::default();
        trace.push(0.5);
        trace.push(0.25);
        trace.comparator_loss = Some(0.1);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,loss,cum_loss\n1,0.5,0.5\n2,0.25,0.75\n");
        let json = serde_json::to_string(&trace.summary()).unwrap();
        assert_eq!(json, r#"{"T":2,"cum_loss":0.75,"comparator_loss":0.1,"regret":0.65}"#);
    }
}
