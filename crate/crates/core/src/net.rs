//! Smooth-activation feedforward network with exact reverse-mode gradients.
//!
//! The model is
//!
//! ```text
//! α⁽⁰⁾ = x
//! α⁽¹⁾ = φ(W⁽¹⁾ x)
//! α⁽ˡ⁾ = φ(W⁽ˡ⁾ α⁽ˡ⁻¹⁾ / √m)        l = 2..L
//! f(θ; x) = vᵀ α⁽ᴸ⁾ / √m
//! ```
//!
//! Contexts are unit-norm, so the first layer carries no extra scaling: its
//! pre-activations are already O(1).
//!
//! Parameters are laid out row-major per matrix, hidden layers in order, the
//! output vector last. That flat order is what perturbation streams index into,
//! so it must not change.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::{stream_rng, tags};

/// Pointwise nonlinearity φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    /// `ln(1 + eˣ) − ln 2`, so that φ(0) = 0.
    SoftplusShifted,
}

impl Activation {
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::SoftplusShifted => softplus(z) - std::f64::consts::LN_2,
        }
    }

    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::SoftplusShifted => sigmoid(z),
        }
    }

    pub fn at_zero(self) -> f64 {
        self.eval(0.0)
    }
}

/// Logistic function, evaluated without overflow for either sign.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eᶻ)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Architecture and initialization scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Input dimension `d`.
    pub input_dim: usize,
    /// Hidden width `m`.
    pub width: usize,
    /// Number of hidden layers `L`.
    pub depth: usize,
    /// Initialization scale σ₁.
    pub sigma1: f64,
    #[serde(default)]
    pub activation: Activation,
}

impl NetConfig {
    pub fn new(input_dim: usize, width: usize, depth: usize, sigma1: f64) -> Self {
        Self {
            input_dim,
            width,
            depth,
            sigma1,
            activation: Activation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.depth == 0 {
            return config_err(format!(
                "network dimensions must be positive (d={}, m={}, L={})",
                self.input_dim, self.width, self.depth
            ));
        }
        if !(self.sigma1.is_finite() && self.sigma1 > 0.0) {
            return config_err(format!("sigma1 must be positive, got {}", self.sigma1));
        }
        Ok(())
    }

    /// `p = m·d + (L−1)·m² + m`.
    pub fn param_count(&self) -> usize {
        let m = self.width;
        m * self.input_dim + (self.depth - 1) * m * m + m
    }

    /// Hidden-weight standard deviation σ₀ = σ₁ / (2(1 + √(ln m)/√(2m))).
    pub fn sigma0(&self) -> f64 {
        let m = self.width as f64;
        self.sigma1 / (2.0 * (1.0 + m.ln().sqrt() / (2.0 * m).sqrt()))
    }
}

/// Network parameters θ = (W⁽¹⁾, …, W⁽ᴸ⁾, v).
///
/// The same layout also carries gradients, see [`FlatGradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    input_dim: usize,
    width: usize,
    activation: Activation,
    /// `hidden[0]` is m×d, the rest m×m, all row-major.
    hidden: Vec<Vec<f64>>,
    output: Vec<f64>,
}

/// ∇θ f, stored in the parameter layout.
pub type FlatGradient = NetworkParams;

impl NetworkParams {
    pub fn zeros(cfg: &NetConfig) -> Self {
        let (d, m) = (cfg.input_dim, cfg.width);
        let mut hidden = Vec::with_capacity(cfg.depth);
        hidden.push(vec![0.0; m * d]);
        for _ in 1..cfg.depth {
            hidden.push(vec![0.0; m * m]);
        }
        Self {
            input_dim: d,
            width: m,
            activation: cfg.activation,
            hidden,
            output: vec![0.0; m],
        }
    }

    /// Builds parameters from explicit blocks, checking every shape.
    pub fn from_parts(
        input_dim: usize,
        width: usize,
        activation: Activation,
        hidden: Vec<Vec<f64>>,
        output: Vec<f64>,
    ) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::Shape("at least one hidden layer required".into()));
        }
        for (l, w) in hidden.iter().enumerate() {
            let expect = if l == 0 { width * input_dim } else { width * width };
            if w.len() != expect {
                return Err(Error::Shape(format!(
                    "layer {} has {} entries, expected {}",
                    l + 1,
                    w.len(),
                    expect
                )));
            }
        }
        if output.len() != width {
            return Err(Error::Shape(format!(
                "output vector has {} entries, expected {}",
                output.len(),
                width
            )));
        }
        let p = Self {
            input_dim,
            width,
            activation,
            hidden,
            output,
        };
        p.ensure_finite()?;
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden(&self) -> &[Vec<f64>] {
        &self.hidden
    }

    pub fn hidden_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.hidden
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut [f64] {
        &mut self.output
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(Vec::len).sum::<usize>() + self.output.len()
    }

    /// Parameter blocks in layout order: hidden layers, then the output vector.
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.hidden
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.output.as_slice()))
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.hidden
            .iter_mut()
            .map(Vec::as_mut_slice)
            .chain(std::iter::once(self.output.as_mut_slice()))
    }

    /// Flat index of the first entry of each block.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.hidden.len() + 1);
        let mut acc = 0;
        for b in self.blocks() {
            offsets.push(acc);
            acc += b.len();
        }
        offsets
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for b in self.blocks() {
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat), taking shapes from `self`.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat vector has {} entries, expected {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut out = self.clone();
        let mut pos = 0;
        for b in out.blocks_mut() {
            b.copy_from_slice(&flat[pos..pos + b.len()]);
            pos += b.len();
        }
        Ok(out)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for b in z.blocks_mut() {
            b.fill(0.0);
        }
        z
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim
            && self.width == other.width
            && self.hidden.len() == other.hidden.len()
    }

    pub fn check_layout(&self, other: &Self) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "layout mismatch: (d={}, m={}, L={}) vs (d={}, m={}, L={})",
                self.input_dim,
                self.width,
                self.depth(),
                other.input_dim,
                other.width,
                other.depth()
            )))
        }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.blocks().all(|b| b.iter().all(|v| v.is_finite())) {
            Ok(())
        } else {
            Err(Error::Numeric("non-finite parameter entry".into()))
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.blocks_mut().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for b in self.blocks_mut() {
            for x in b {
                *x *= alpha;
            }
        }
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_layout(other)?;
        Ok(self
            .blocks()
            .zip(other.blocks())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.layer_norms().iter().map(|n| n * n).sum::<f64>().sqrt()
    }

    /// L2 norm of each block: hidden layers in order, then the output vector.
    pub fn layer_norms(&self) -> Vec<f64> {
        self.blocks()
            .map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    /// Per-block `‖self − other‖₂`, the quantity the Frobenius ball constrains.
    pub fn layer_distances(&self, other: &Self) -> Result<Vec<f64>> {
        self.check_layout(other)?;
        Ok(self
            .blocks()
            .zip(other.blocks())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect())
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self
            .layer_distances(other)?
            .iter()
            .map(|n| n * n)
            .sum::<f64>()
            .sqrt())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "context has dimension {}, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn layer_in_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.width
        }
    }

    fn layer_scale(&self, l: usize) -> f64 {
        if l == 0 {
            1.0
        } else {
            1.0 / (self.width as f64).sqrt()
        }
    }

    /// Runs the forward recurrence, keeping pre-activations and activations.
    fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let m = self.width;
        let mut pre = Vec::with_capacity(self.depth());
        let mut act = Vec::with_capacity(self.depth() + 1);
        act.push(x.to_vec());
        for (l, w) in self.hidden.iter().enumerate() {
            let n_in = self.layer_in_dim(l);
            let scale = self.layer_scale(l);
            let input = &act[l];
            let h: Vec<f64> = (0..m)
                .map(|i| {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    scale * row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            let a = h.iter().map(|&z| self.activation.eval(z)).collect();
            pre.push(h);
            act.push(a);
        }
        let last = act.last().expect("at least one layer");
        let value = self.output.iter().zip(last).map(|(v, a)| v * a).sum::<f64>() / (m as f64).sqrt();
        if !value.is_finite() {
            return Err(Error::Numeric("network output is not finite".into()));
        }
        Ok(Trace { pre, act, value })
    }

    /// f(θ; x).
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.trace(x)?.value)
    }

    /// Last hidden representation α⁽ᴸ⁾(x).
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut t = self.trace(x)?;
        Ok(t.act.pop().expect("at least one layer"))
    }

    /// f(θ; x) together with ∇θ f(θ; x), by backpropagation.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, FlatGradient)> {
        let trace = self.trace(x)?;
        let m = self.width;
        let inv_sqrt_m = 1.0 / (m as f64).sqrt();
        let mut grad = self.zeros_like();

        let last = &trace.act[self.depth()];
        for (g, a) in grad.output.iter_mut().zip(last) {
            *g = a * inv_sqrt_m;
        }

        // ∂f/∂α⁽ˡ⁾, starting from the output layer.
        let mut delta: Vec<f64> = self.output.iter().map(|v| v * inv_sqrt_m).collect();
        for l in (0..self.depth()).rev() {
            let n_in = self.layer_in_dim(l);
            let scale = self.layer_scale(l);
            let g: Vec<f64> = delta
                .iter()
                .zip(&trace.pre[l])
                .map(|(d, &z)| d * self.activation.deriv(z))
                .collect();
            let input = &trace.act[l];
            let gw = &mut grad.hidden[l];
            for i in 0..m {
                let gi = scale * g[i];
                let row = &mut gw[i * n_in..(i + 1) * n_in];
                for (r, a) in row.iter_mut().zip(input) {
                    *r = gi * a;
                }
            }
            if l > 0 {
                let w = &self.hidden[l];
                let mut next = vec![0.0; n_in];
                for i in 0..m {
                    let gi = scale * g[i];
                    let row = &w[i * n_in..(i + 1) * n_in];
                    for (nx, wij) in next.iter_mut().zip(row) {
                        *nx += wij * gi;
                    }
                }
                delta = next;
            }
        }
        Ok((trace.value, grad))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<FlatGradient> {
        Ok(self.value_and_gradient(x)?.1)
    }
}

struct Trace {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    value: f64,
}

/// Frozen initialization θ₀ together with the values that produced it.
#[derive(Debug, Clone)]
pub struct InitSnapshot {
    theta0: NetworkParams,
    config: NetConfig,
    seed: u64,
}

impl InitSnapshot {
    pub fn theta0(&self) -> &NetworkParams {
        &self.theta0
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn sigma1(&self) -> f64 {
        self.config.sigma1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A mutable working copy of θ₀.
    pub fn params(&self) -> NetworkParams {
        self.theta0.clone()
    }
}

/// Draws θ₀: hidden entries i.i.d. N(0, σ₀²), output vector uniform on the unit sphere.
pub fn init_params(cfg: &NetConfig, seed: u64) -> Result<InitSnapshot> {
    cfg.validate()?;
    let mut theta = NetworkParams::zeros(cfg);
    let normal = Normal::new(0.0, cfg.sigma0()).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = stream_rng(seed, tags::INIT_HIDDEN);
    for w in theta.hidden.iter_mut() {
        for x in w.iter_mut() {
            *x = normal.sample(&mut rng);
        }
    }
    theta.output = random_unit_vector(cfg.width, &mut stream_rng(seed, tags::INIT_OUTPUT));
    Ok(InitSnapshot {
        theta0: theta,
        config: *cfg,
        seed,
    })
}

/// Uniform draw from the unit sphere in ℝⁿ.
pub fn random_unit_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// High-probability bound on |f(θ; x)| over the ball with radii (ρ, ρ₁):
/// `(1/√m)(1+ρ₁)(γᴸ + |φ(0)| Σᵢ γⁱ⁻¹)√m` with `γ = σ₁ + ρ/√m`.
pub fn output_bound(cfg: &NetConfig, rho: f64, rho1: f64) -> f64 {
    let m = cfg.width as f64;
    let gamma = cfg.sigma1 + rho / m.sqrt();
    let phi0 = cfg.activation.at_zero().abs();
    let geometric: f64 = (1..=cfg.depth).map(|i| gamma.powi(i as i32 - 1)).sum();
    (1.0 / m.sqrt()) * (1.0 + rho1) * (gamma.powi(cfg.depth as i32) + phi0 * geometric) * m.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        random_unit_vector(d, rng)
    }

    /// Plain re-implementation of the recurrence on nested loops.
    fn reference_forward(p: &NetworkParams, x: &[f64]) -> f64 {
        let m = p.width();
        let mut a = x.to_vec();
        for (l, w) in p.hidden().iter().enumerate() {
            let n_in = a.len();
            let mut next = vec![0.0; m];
            for i in 0..m {
                let mut s = 0.0;
                for j in 0..n_in {
                    s += w[i * n_in + j] * a[j];
                }
                let scale = if l == 0 { 1.0 } else { 1.0 / (m as f64).sqrt() };
                next[i] = (s * scale).tanh();
            }
            a = next;
        }
        let mut out = 0.0;
        for i in 0..m {
            out += p.output()[i] * a[i];
        }
        out / (m as f64).sqrt()
    }

    #[test]
    fn sigma0_for_width_100() {
        let cfg = NetConfig::new(4, 100, 2, 1.0);
        let expected = 1.0 / (2.0 * (1.0 + (100f64.ln()).sqrt() / 200f64.sqrt()));
        assert!((cfg.sigma0() - expected).abs() < 1e-15);
        assert!((cfg.sigma0() - 0.434_124_7).abs() < 1e-7);
    }

    #[test]
    fn init_is_deterministic_and_unit_output() {
        let cfg = NetConfig::new(5, 17, 3, 1.3);
        let a = init_params(&cfg, 11).unwrap();
        let b = init_params(&cfg, 11).unwrap();
        assert_eq!(a.theta0(), b.theta0());
        for seed in 0..20 {
            let s = init_params(&cfg, seed).unwrap();
            let n: f64 = s.theta0().output().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(a.theta0().param_count(), cfg.param_count());
        assert_eq!(cfg.param_count(), 17 * 5 + 2 * 17 * 17 + 17);
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(matches!(init_params(&NetConfig::new(0, 4, 1, 1.0), 0), Err(Error::Config(_))));
        assert!(matches!(init_params(&NetConfig::new(2, 4, 0, 1.0), 0), Err(Error::Config(_))));
        assert!(matches!(init_params(&NetConfig::new(2, 4, 1, 0.0), 0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_output_layer_gives_zero() {
        let cfg = NetConfig::new(3, 8, 2, 1.0);
        let mut p = init_params(&cfg, 1).unwrap().params();
        p.output_mut().fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            assert_eq!(p.forward(&random_input(3, &mut rng)).unwrap(), 0.0);
        }
    }

    #[test]
    fn scalar_network_with_zero_weight() {
        let p = NetworkParams::from_parts(1, 1, Activation::Tanh, vec![vec![0.0]], vec![1.0]).unwrap();
        assert_eq!(p.forward(&[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn forward_matches_reference() {
        let cfg = NetConfig::new(6, 32, 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..10 {
            let p = init_params(&cfg, seed).unwrap().params();
            let x = random_input(6, &mut rng);
            let a = p.forward(&x).unwrap();
            let b = reference_forward(&p, &x);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_errors() {
        let cfg = NetConfig::new(3, 4, 1, 1.0);
        let p = init_params(&cfg, 0).unwrap().params();
        assert!(matches!(p.forward(&[1.0, 0.0]), Err(Error::Shape(_))));
        let other = init_params(&NetConfig::new(3, 5, 1, 1.0), 0).unwrap().params();
        assert!(matches!(p.dot(&other), Err(Error::Shape(_))));
        let mut q = p.clone();
        assert!(q.axpy(1.0, &other).is_err());
    }

    #[test]
    fn output_gradient_is_features_over_sqrt_m() {
        let cfg = NetConfig::new(4, 16, 2, 1.0);
        let p = init_params(&cfg, 3).unwrap().params();
        let x = random_input(4, &mut ChaCha8Rng::seed_from_u64(1));
        let g = p.gradient(&x).unwrap();
        let feats = p.features(&x).unwrap();
        for (gi, a) in g.output().iter().zip(&feats) {
            assert_eq!(*gi, a / 4.0);
        }
    }

    #[test]
    fn zero_input_kills_first_layer_gradient() {
        let cfg = NetConfig::new(4, 16, 2, 1.0);
        let p = init_params(&cfg, 3).unwrap().params();
        let g = p.gradient(&[0.0; 4]).unwrap();
        assert!(g.hidden()[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = NetConfig::new(5, 16, 2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = init_params(&cfg, 4).unwrap().params();
        let x = random_input(5, &mut rng);
        let g = p.gradient(&x).unwrap().to_flat();
        let flat = p.to_flat();
        let h = 1e-5;
        for j in 0..flat.len() {
            let mut plus = flat.clone();
            plus[j] += h;
            let mut minus = flat.clone();
            minus[j] -= h;
            let fd = (p.with_flat(&plus).unwrap().forward(&x).unwrap()
                - p.with_flat(&minus).unwrap().forward(&x).unwrap())
                / (2.0 * h);
            let rel = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-6);
            assert!(rel <= 1e-5, "coordinate {j}: {} vs {fd}", g[j]);
        }
    }

    #[test]
    fn linear_in_output_vector() {
        let cfg = NetConfig::new(3, 10, 2, 1.0);
        let base = init_params(&cfg, 8).unwrap().params();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v1 = random_unit_vector(10, &mut rng);
        let v2 = random_unit_vector(10, &mut rng);
        let x = random_input(3, &mut rng);
        let with = |v: &[f64]| {
            let mut p = base.clone();
            p.output_mut().copy_from_slice(v);
            p.forward(&x).unwrap()
        };
        let sum: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
        assert!((with(&sum) - with(&v1) - with(&v2)).abs() < 1e-14);
    }

    #[test]
    fn flat_ops() {
        let cfg = NetConfig::new(3, 6, 3, 1.0);
        let a = init_params(&cfg, 1).unwrap().params();
        let g = init_params(&cfg, 2).unwrap().params();
        assert_eq!(a.distance(&a).unwrap(), 0.0);

        let mut b = a.clone();
        b.axpy(1.0, &g).unwrap();
        b.axpy(-1.0, &g).unwrap();
        assert!(b.distance(&a).unwrap() < 1e-15);

        let per: f64 = a.layer_norms().iter().map(|n| n * n).sum();
        let global: f64 = a.to_flat().iter().map(|x| x * x).sum();
        assert!((per - global).abs() < 1e-12);
        assert_eq!(a.with_flat(&a.to_flat()).unwrap(), a);
        assert_eq!(a.block_offsets(), vec![0, 18, 54, 90]);
    }

    #[test]
    fn softplus_shifted_activation() {
        let act = Activation::SoftplusShifted;
        assert!(act.at_zero().abs() < 1e-15);
        for &z in &[-3.0, -0.2, 0.0, 0.4, 5.0] {
            let h = 1e-6;
            let fd = (act.eval(z + h) - act.eval(z - h)) / (2.0 * h);
            assert!((fd - act.deriv(z)).abs() < 1e-8);
        }
        assert!(softplus(800.0).is_finite());
        assert_eq!(sigmoid(-800.0), 0.0);
    }
}
