//! Rademacher-perturbed predictor and its averaged losses.
//!
//! A perturbed network adds a data-independent linear term to the output,
//!
//! ```text
//! f̃(θ; x, ε) = f(θ; x) + c_p ⟨θ − θ₀, ε⟩ / m^{1/4},
//! ```
//!
//! with ε a ±1 vector over all `p` parameters. `S` such draws are kept as
//! seeds and streamed on demand (see [`crate::rng::RademacherStream`]).

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::net::{sigmoid, softplus, FlatGradient, InitSnapshot, NetworkParams};
use crate::rng::{derive_seed, tags, RademacherStream};

/// Which online loss the predictor is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `½(y − ŷ)²` on the raw output.
    Square,
    /// Binary KL between `y` and `σ(ŷ)`.
    Kl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub loss_kind: LossKind,
    /// Perturbation constant c_p.
    pub c_p: f64,
    /// Number of draws S.
    pub draws: usize,
    /// KL labels are clipped into `[z, 1 − z]`.
    pub z: f64,
}

impl PredictorConfig {
    pub const DEFAULT_C_P: f64 = 1.0;
    pub const DEFAULT_Z: f64 = 0.01;

    /// Defaults for a network of width `m`.
    pub fn for_width(loss_kind: LossKind, m: usize) -> Self {
        Self {
            loss_kind,
            c_p: Self::DEFAULT_C_P,
            draws: default_draws(m),
            z: Self::DEFAULT_Z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return config_err("number of perturbation draws must be at least 1");
        }
        if !(self.c_p.is_finite() && self.c_p >= 0.0) {
            return config_err(format!("c_p must be finite and nonnegative, got {}", self.c_p));
        }
        if self.loss_kind == LossKind::Kl && !(self.z > 0.0 && self.z < 0.5) {
            return config_err(format!("KL label clip z must lie in (0, 0.5), got {}", self.z));
        }
        Ok(())
    }

    /// Checks a label and, in KL mode, clips it into `[z, 1 − z]`.
    pub fn prepare_label(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::Domain(format!("label {y} is not finite")));
        }
        match self.loss_kind {
            LossKind::Square => Ok(y),
            LossKind::Kl => {
                if !(0.0..=1.0).contains(&y) {
                    return Err(Error::Domain(format!("KL label {y} outside [0, 1]")));
                }
                let c = y.clamp(self.z, 1.0 - self.z);
                if c <= 0.0 || c >= 1.0 {
                    return Err(Error::Domain(format!("KL label {y} not in (0, 1) after clipping")));
                }
                Ok(c)
            }
        }
    }
}

/// `S = max{⌈8 ln m⌉, 16}`.
pub fn default_draws(m: usize) -> usize {
    ((8.0 * (m as f64).ln()).ceil() as usize).max(16)
}

/// One perturbation direction ±ε_s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    stream: RademacherStream,
    sign: f64,
}

impl Draw {
    pub fn new(stream: RademacherStream) -> Self {
        Self { stream, sign: 1.0 }
    }

    /// The antithetic draw −ε.
    pub fn negated(self) -> Self {
        Self {
            sign: -self.sign,
            ..self
        }
    }

    pub fn stream(&self) -> &RademacherStream {
        &self.stream
    }

    /// Dense copy of the first `len` coordinates.
    pub fn materialize(&self, len: usize) -> Vec<f64> {
        let mut v = self.stream.materialize(0, len);
        if self.sign < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }

    /// `⟨θ − θ₀, ε⟩`, streamed block by block.
    pub fn inner_with_drift(&self, params: &NetworkParams, theta0: &NetworkParams) -> f64 {
        let mut offset = 0;
        let mut acc = 0.0;
        for (a, b) in params.blocks().zip(theta0.blocks()) {
            acc += self.stream.dot_diff(a, b, offset);
            offset += a.len();
        }
        self.sign * acc
    }

    /// `out += alpha * ε`.
    pub fn add_to(&self, alpha: f64, out: &mut NetworkParams) {
        let mut offset = 0;
        for b in out.blocks_mut() {
            let len = b.len();
            self.stream.add_scaled(self.sign * alpha, b, offset);
            offset += len;
        }
    }
}

/// S reproducible Rademacher draws over a `p`-dimensional parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    seeds: Vec<u64>,
    dim: usize,
    c_p: f64,
}

pub fn make_perturbations(seed: u64, draws: usize, dim: usize, c_p: f64) -> Result<PerturbationSet> {
    if draws == 0 || dim == 0 {
        return config_err(format!("need S >= 1 and p >= 1 (got S={draws}, p={dim})"));
    }
    Ok(PerturbationSet {
        seeds: (0..draws as u64).map(|s| derive_seed(seed, s)).collect(),
        dim,
        c_p,
    })
}

impl PerturbationSet {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c_p(&self) -> f64 {
        self.c_p
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn draw(&self, s: usize) -> Draw {
        Draw::new(RademacherStream::new(self.seeds[s]))
    }

    pub fn draws(&self) -> impl Iterator<Item = Draw> + '_ {
        (0..self.len()).map(|s| self.draw(s))
    }
}

/// `c_p / m^{1/4}`.
pub fn perturbation_scale(c_p: f64, width: usize) -> f64 {
    c_p / (width as f64).powf(0.25)
}

/// f̃(θ; x, ε) for a single draw.
pub fn perturbed_output(
    params: &NetworkParams,
    snapshot: &InitSnapshot,
    x: &[f64],
    draw: Draw,
    c_p: f64,
) -> Result<f64> {
    params.check_layout(snapshot.theta0())?;
    let f = params.forward(x)?;
    let out = f + perturbation_scale(c_p, params.width()) * draw.inner_with_drift(params, snapshot.theta0());
    finite(out, "perturbed output")
}

pub fn square_loss(y: f64, yhat: f64) -> f64 {
    0.5 * (y - yhat) * (y - yhat)
}

/// `a ln b` with the convention `0 ln 0 = 0` and `b` floored at 1e-300.
fn xlny(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.max(1e-300).ln()
    }
}

/// Binary KL `y ln(y/q) + (1−y) ln((1−y)/(1−q))` for a probability `q`.
pub fn kl_loss_prob(y: f64, q: f64) -> f64 {
    xlny(y, y) - xlny(y, q) + xlny(1.0 - y, 1.0 - y) - xlny(1.0 - y, 1.0 - q)
}

/// Binary KL between `y` and `σ(u)` for a raw output `u`.
///
/// Uses `−ln σ(u) = softplus(−u)` and `−ln(1 − σ(u)) = softplus(u)`.
pub fn kl_loss_logit(y: f64, u: f64) -> f64 {
    xlny(y, y) + xlny(1.0 - y, 1.0 - y) + y * softplus(-u) + (1.0 - y) * softplus(u)
}

/// ℓ(y, ŷ) on the raw output together with dℓ/dŷ.
pub fn loss_and_derivative(kind: LossKind, y: f64, yhat: f64) -> (f64, f64) {
    match kind {
        LossKind::Square => (square_loss(y, yhat), yhat - y),
        LossKind::Kl => (kl_loss_logit(y, yhat), sigmoid(yhat) - y),
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} is not finite")))
    }
}

/// The perturbed predictor: θ₀, the perturbation draws and the loss settings.
#[derive(Debug, Clone)]
pub struct PerturbedPredictor {
    snapshot: InitSnapshot,
    perts: PerturbationSet,
    cfg: PredictorConfig,
}

impl PerturbedPredictor {
    /// Draws the perturbation set from `seed`'s perturbation sub-stream.
    pub fn new(snapshot: InitSnapshot, cfg: PredictorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let p = snapshot.theta0().param_count();
        let perts = make_perturbations(derive_seed(seed, tags::PERTURBATIONS), cfg.draws, p, cfg.c_p)?;
        Ok(Self { snapshot, perts, cfg })
    }

    pub fn with_perturbations(snapshot: InitSnapshot, perts: PerturbationSet, cfg: PredictorConfig) -> Result<Self> {
        cfg.validate()?;
        if perts.dim() != snapshot.theta0().param_count() {
            return Err(Error::Shape(format!(
                "perturbation dimension {} does not match parameter count {}",
                perts.dim(),
                snapshot.theta0().param_count()
            )));
        }
        Ok(Self { snapshot, perts, cfg })
    }

    pub fn snapshot(&self) -> &InitSnapshot {
        &self.snapshot
    }

    pub fn perturbations(&self) -> &PerturbationSet {
        &self.perts
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.cfg
    }

    fn scale(&self) -> f64 {
        perturbation_scale(self.perts.c_p(), self.snapshot.theta0().width())
    }

    /// Output shifts `c_p⟨θ − θ₀, ε_s⟩/m^{1/4}` for every draw.
    ///
    /// These do not depend on the context, so callers scoring several
    /// contexts at the same θ compute them once.
    pub fn offsets(&self, params: &NetworkParams) -> Result<Vec<f64>> {
        params.check_layout(self.snapshot.theta0())?;
        let scale = self.scale();
        if scale == 0.0 {
            return Ok(vec![0.0; self.perts.len()]);
        }
        let theta0 = self.snapshot.theta0();
        Ok(self
            .perts
            .draws()
            .map(|d| scale * d.inner_with_drift(params, theta0))
            .collect())
    }

    pub fn perturbed_output(&self, params: &NetworkParams, x: &[f64], s: usize) -> Result<f64> {
        perturbed_output(params, &self.snapshot, x, self.perts.draw(s), self.perts.c_p())
    }

    /// Averaged prediction given precomputed [`offsets`](Self::offsets).
    ///
    /// Square mode: `(1/S) Σ f̃_s`. KL mode: `(1/S) Σ σ(f̃_s)`.
    pub fn predict_with_offsets(&self, params: &NetworkParams, x: &[f64], offsets: &[f64]) -> Result<f64> {
        let f = params.forward(x)?;
        let s = offsets.len() as f64;
        let out = match self.cfg.loss_kind {
            LossKind::Square => offsets.iter().map(|o| f + o).sum::<f64>() / s,
            LossKind::Kl => offsets.iter().map(|o| sigmoid(f + o)).sum::<f64>() / s,
        };
        finite(out, "averaged prediction")
    }

    pub fn averaged_prediction(&self, params: &NetworkParams, x: &[f64]) -> Result<f64> {
        let offsets = self.offsets(params)?;
        self.predict_with_offsets(params, x, &offsets)
    }

    /// ℓ(y, averaged prediction): the loss the regret is measured in.
    pub fn prediction_loss(&self, y: f64, prediction: f64) -> f64 {
        match self.cfg.loss_kind {
            LossKind::Square => square_loss(y, prediction),
            LossKind::Kl => kl_loss_prob(y, prediction),
        }
    }

    /// Averaged loss `(1/S) Σ ℓ(y, f̃_s)` and its gradient
    /// `(1/S) Σ ℓ′_s (∇f + c_p ε_s / m^{1/4})`.
    pub fn averaged_loss_grad(&self, params: &NetworkParams, x: &[f64], y: f64) -> Result<(f64, FlatGradient)> {
        let offsets = self.offsets(params)?;
        self.averaged_loss_grad_with_offsets(params, x, y, &offsets)
    }

    /// As [`averaged_loss_grad`](Self::averaged_loss_grad), reusing offsets computed at `params`.
    pub fn averaged_loss_grad_with_offsets(
        &self,
        params: &NetworkParams,
        x: &[f64],
        y: f64,
        offsets: &[f64],
    ) -> Result<(f64, FlatGradient)> {
        let y = self.cfg.prepare_label(y)?;
        let (f, grad_f) = params.value_and_gradient(x)?;
        let s = offsets.len() as f64;
        let mut loss = 0.0;
        let mut derivs = Vec::with_capacity(offsets.len());
        for o in offsets {
            let (l, d) = loss_and_derivative(self.cfg.loss_kind, y, f + o);
            loss += l;
            derivs.push(d);
        }
        loss /= s;
        let mean_deriv = derivs.iter().sum::<f64>() / s;
        let mut grad = grad_f;
        grad.scale(mean_deriv);
        let scale = self.scale();
        if scale != 0.0 {
            for (draw, d) in self.perts.draws().zip(&derivs) {
                draw.add_to(scale * d / s, &mut grad);
            }
        }
        finite(loss, "averaged loss")?;
        Ok((loss, grad))
    }

    pub fn averaged_loss(&self, params: &NetworkParams, x: &[f64], y: f64) -> Result<f64> {
        let y = self.cfg.prepare_label(y)?;
        let offsets = self.offsets(params)?;
        let f = params.forward(x)?;
        let s = offsets.len() as f64;
        let loss = offsets
            .iter()
            .map(|o| loss_and_derivative(self.cfg.loss_kind, y, f + o).0)
            .sum::<f64>()
            / s;
        finite(loss, "averaged loss")
    }

    /// ℓ(y, averaged prediction) and its gradient in θ.
    ///
    /// This is the objective of the offline comparator; online updates use
    /// [`averaged_loss_grad`](Self::averaged_loss_grad) instead.
    pub fn prediction_loss_grad(&self, params: &NetworkParams, x: &[f64], y: f64) -> Result<(f64, FlatGradient)> {
        self.total_prediction_loss_grad(params, std::slice::from_ref(&(x.to_vec(), y)))
    }

    /// `Σ_i ℓ(y_i, averaged prediction(x_i))` and its gradient. The
    /// perturbation directions are applied once for the whole batch.
    pub fn total_prediction_loss_grad(
        &self,
        params: &NetworkParams,
        batch: &[(Vec<f64>, f64)],
    ) -> Result<(f64, FlatGradient)> {
        let offsets = self.offsets(params)?;
        let s = offsets.len() as f64;
        let mut grad = params.zeros_like();
        // ∇(prediction) = (Σ_s w_s) ∇f + scale Σ_s w_s ε_s
        let mut draw_coef = vec![0.0; offsets.len()];
        let mut total = 0.0;
        for (x, y) in batch {
            let y = self.cfg.prepare_label(*y)?;
            let (f, grad_f) = params.value_and_gradient(x)?;
            let (loss, outer, weights): (f64, f64, Vec<f64>) = match self.cfg.loss_kind {
                LossKind::Square => {
                    let pred = offsets.iter().map(|o| f + o).sum::<f64>() / s;
                    (square_loss(y, pred), pred - y, vec![1.0 / s; offsets.len()])
                }
                LossKind::Kl => {
                    let sig: Vec<f64> = offsets.iter().map(|o| sigmoid(f + o)).collect();
                    let q = sig.iter().sum::<f64>() / s;
                    let denom = (q * (1.0 - q)).max(1e-300);
                    let w = sig.iter().map(|p| p * (1.0 - p) / s).collect();
                    (kl_loss_prob(y, q), (q - y) / denom, w)
                }
            };
            total += loss;
            grad.axpy(outer * weights.iter().sum::<f64>(), &grad_f)?;
            for (c, w) in draw_coef.iter_mut().zip(&weights) {
                *c += outer * w;
            }
        }
        let scale = self.scale();
        if scale != 0.0 {
            for (draw, c) in self.perts.draws().zip(&draw_coef) {
                if *c != 0.0 {
                    draw.add_to(scale * c, &mut grad);
                }
            }
        }
        finite(total, "prediction loss")?;
        Ok((total, grad))
    }

    /// `Σ_i ℓ(y_i, averaged prediction(x_i))`.
    pub fn total_prediction_loss(&self, params: &NetworkParams, batch: &[(Vec<f64>, f64)]) -> Result<f64> {
        let offsets = self.offsets(params)?;
        let mut total = 0.0;
        for (x, y) in batch {
            let y = self.cfg.prepare_label(*y)?;
            let pred = self.predict_with_offsets(params, x, &offsets)?;
            total += self.prediction_loss(y, pred);
        }
        finite(total, "prediction loss")
    }
}
