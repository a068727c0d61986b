//! Kernel-bandit bound analysis and numerical checks of the loss landscape.
//!
//! The first half computes the empirical NTK Gram matrix, its spectrum, the
//! effective dimension and the NeuralUCB / NeuralTS regret-bound expressions
//! together with their lower-bound constructions. The second half measures
//! the structural properties the online-regression analysis relies on.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::net::{init_params, random_unit_vector, NetConfig, NetworkParams};
use crate::perturb::PerturbedPredictor;
use crate::regression::{fit_comparator_with, BallSpec, TrajectoryPoint};
use crate::rng::stream_rng;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("matrix rows must all have length n".into()));
        }
        Ok(Self { n, data: rows.concat() })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks(self.n).map(|row| dot(row, x)).collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Empirical NTK Gram matrix `H_ij = ⟨∇f(θ; x_i), ∇f(θ; x_j)⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtkGram {
    pub matrix: Matrix,
    pub contexts: Vec<Vec<f64>>,
    /// Which parameters the kernel was evaluated at, e.g. `"theta0"`.
    pub params_tag: String,
}

pub fn ntk_gram(params: &NetworkParams, contexts: &[Vec<f64>], params_tag: &str) -> Result<NtkGram> {
    let grads: Vec<Vec<f64>> = contexts
        .par_iter()
        .map(|x| params.gradient(x).map(|g| g.to_flat()))
        .collect::<Result<_>>()?;
    let n = contexts.len();
    let mut matrix = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(&grads[i], &grads[j]);
            matrix.set(i, j, v);
            matrix.set(j, i, v);
        }
    }
    Ok(NtkGram {
        matrix,
        contexts: contexts.to_vec(),
        params_tag: params_tag.to_string(),
    })
}

/// Spectrum in descending order; `vectors[i]` is the unit eigenvector of `values[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomp {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `U diag(values) Uᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::zeros(n);
        for (lam, u) in self.values.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    m.data[i * n + j] += lam * u[i] * u[j];
                }
            }
        }
        m
    }
}

/// Largest matrix the Jacobi solver accepts.
pub const MAX_EIG_DIM: usize = 2000;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eig_sym(matrix: &Matrix) -> Result<EigenDecomp> {
    const MAX_SWEEPS: usize = 100;
    let n = matrix.n;
    if n > MAX_EIG_DIM {
        return config_err(format!("eigendecomposition limited to n <= {MAX_EIG_DIM}, got {n}"));
    }
    if matrix.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let scale = matrix.frobenius();
    if matrix.max_asymmetry() > 1e-10 * scale.max(1.0) {
        return Err(Error::Domain("matrix is not symmetric".into()));
    }
    let mut a = matrix.clone();
    let mut v = Matrix::identity(n);
    let off = |a: &Matrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
        }
        s.sqrt()
    };
    for _ in 0..MAX_SWEEPS {
        if off(&a) <= 1e-12 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    Ok(EigenDecomp {
        values: order.iter().map(|&i| a.get(i, i)).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|k| v.get(k, i)).collect()).collect(),
    })
}

/// `d̃ = Σ log(1 + λ_i/λ) / log(1 + denom_arg/λ)`. Negative eigenvalues
/// (rounding noise on singular kernels) count as zero.
pub fn effective_dimension(eigs: &[f64], lambda_reg: f64, denom_arg: f64) -> f64 {
    let num: f64 = eigs.iter().map(|l| (l.max(0.0) / lambda_reg).ln_1p()).sum();
    num / (denom_arg / lambda_reg).ln_1p()
}

fn check_nonsingular(decomp: &EigenDecomp) -> Result<()> {
    let floor = 1e-12 * decomp.lambda_max().abs();
    if let Some(l) = decomp.values.iter().find(|l| **l <= floor) {
        return Err(Error::Singular(format!(
            "NTK Gram matrix is singular (eigenvalue {l:e}); contexts must be distinct"
        )));
    }
    Ok(())
}

/// `(S_lb, ξ)` with `S_lb = √(Σ (u_iᵀh)²/λ_i) = √(hᵀH⁻¹h)` and `ξ = min_i u_iᵀh`.
pub fn s_lower(h: &[f64], decomp: &EigenDecomp) -> Result<(f64, f64)> {
    if h.len() != decomp.len() {
        return Err(Error::Shape(format!("h has length {}, expected {}", h.len(), decomp.len())));
    }
    check_nonsingular(decomp)?;
    let mut sum = 0.0;
    let mut xi = f64::INFINITY;
    for (lam, u) in decomp.values.iter().zip(&decomp.vectors) {
        let c = dot(u, h);
        sum += c * c / lam;
        xi = xi.min(c);
    }
    Ok((sum.sqrt(), xi))
}

/// `h = Σ_i u_i/√2`: every eigenvector sees `u_iᵀh = 1/√2`, and `‖h‖ = √(n/2)`.
pub fn adversarial_h(decomp: &EigenDecomp) -> Vec<f64> {
    let mut h = vec![0.0; decomp.len()];
    for u in &decomp.vectors {
        for (hi, ui) in h.iter_mut().zip(u) {
            *hi += ui * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    h
}

/// `B_NUCB = √T (d̃ log(1 + TK/λ) + S √(d̃ log(1 + TK/λ) λ))`.
pub fn nucb_bound(horizon: usize, arms: usize, lambda_reg: f64, d_tilde: f64, s_lb: f64) -> f64 {
    let (t, k) = (horizon as f64, arms as f64);
    let g = d_tilde * (t * k / lambda_reg).ln_1p();
    t.sqrt() * (g + s_lb * (g * lambda_reg).sqrt())
}

/// Regularization used by NeuralTS: `λ = 1 + 1/T`.
pub fn nts_lambda(horizon: usize) -> f64 {
    1.0 + 1.0 / horizon as f64
}

/// `B_NTS = √T (1 + √(log T + log K)) (S + √(d̃ log(1 + TK/λ))) √(λ d̃ log(1 + TK))`
/// with `λ = 1 + 1/T`. `d_tilde` must be computed at that λ.
pub fn nts_bound(horizon: usize, arms: usize, d_tilde: f64, s_lb: f64) -> f64 {
    let (t, k) = (horizon as f64, arms as f64);
    let lambda = nts_lambda(horizon);
    t.sqrt()
        * (1.0 + (t.ln() + k.ln()).sqrt())
        * (s_lb + (d_tilde * (t * k / lambda).ln_1p()).sqrt())
        * (lambda * d_tilde * (t * k).ln_1p()).sqrt()
}

/// `T√T K λ₀/(2 + λ₀)`, the worst-case floor of `B_NTS`.
pub fn nts_lower_bound(horizon: usize, arms: usize, lambda0: f64) -> f64 {
    let t = horizon as f64;
    t * t.sqrt() * arms as f64 * lambda0 / (2.0 + lambda0)
}

/// `T √K ξ`, the floor of `B_NUCB` for a reward vector with `min_i u_iᵀh = ξ`.
pub fn nucb_lower_bound(horizon: usize, arms: usize, xi: f64) -> f64 {
    horizon as f64 * (arms as f64).sqrt() * xi
}

/// `T √K ‖h‖ / √κ`.
pub fn nucb_kappa_lower_bound(horizon: usize, arms: usize, h_norm: f64, kappa: f64) -> f64 {
    horizon as f64 * (arms as f64).sqrt() * h_norm / kappa.sqrt()
}

/// `κ = λ_max/λ_min`.
pub fn condition_number(decomp: &EigenDecomp) -> Result<f64> {
    check_nonsingular(decomp)?;
    Ok(decomp.lambda_max() / decomp.lambda_min())
}

/// Bound analysis for one reward vector `h` on one Gram spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// d̃ with denominator `log(1 + TK/λ)`, used inside the bounds.
    pub d_tilde: f64,
    /// d̃ with denominator `log(1 + T/λ)`.
    pub d_tilde_t: f64,
    /// d̃ at the NeuralTS regularization `λ = 1 + 1/T`.
    pub d_tilde_nts: f64,
    #[serde(rename = "S_lb")]
    pub s_lb: f64,
    pub xi: f64,
    pub kappa: f64,
    pub lambda0: f64,
    pub h_norm: f64,
    #[serde(rename = "B_nucb")]
    pub b_nucb: f64,
    #[serde(rename = "B_nts")]
    pub b_nts: f64,
    pub lambda_reg: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub arms: usize,
    /// `B_nucb ≥ ξ√K·T`.
    pub cert_nucb: bool,
    /// `B_nts ≥ T√T·K·λ₀/(2 + λ₀)`.
    pub cert_nts: bool,
    /// `B_nucb ≥ T√K·‖h‖/√κ`.
    pub cert_kappa: bool,
}

/// Slack allowed in the certification comparisons.
pub const CERT_TOL: f64 = 1e-9;

pub fn bound_report(
    decomp: &EigenDecomp,
    h: &[f64],
    horizon: usize,
    arms: usize,
    lambda_reg: f64,
) -> Result<BoundReport> {
    if !(lambda_reg.is_finite() && lambda_reg > 0.0) {
        return config_err(format!("lambda_reg must be positive, got {lambda_reg}"));
    }
    if horizon == 0 || arms == 0 {
        return config_err("T and K must be at least 1");
    }
    let (t, k) = (horizon as f64, arms as f64);
    let (s_lb, xi) = s_lower(h, decomp)?;
    let kappa = condition_number(decomp)?;
    let lambda0 = decomp.lambda_min();
    let d_tilde = effective_dimension(&decomp.values, lambda_reg, t * k);
    let d_tilde_t = effective_dimension(&decomp.values, lambda_reg, t);
    let d_tilde_nts = effective_dimension(&decomp.values, nts_lambda(horizon), t * k);
    let b_nucb = nucb_bound(horizon, arms, lambda_reg, d_tilde, s_lb);
    let b_nts = nts_bound(horizon, arms, d_tilde_nts, s_lb);
    let h_norm = norm(h);
    Ok(BoundReport {
        d_tilde,
        d_tilde_t,
        d_tilde_nts,
        s_lb,
        xi,
        kappa,
        lambda0,
        h_norm,
        b_nucb,
        b_nts,
        lambda_reg,
        horizon,
        arms,
        cert_nucb: b_nucb >= nucb_lower_bound(horizon, arms, xi) - CERT_TOL,
        cert_nts: b_nts >= nts_lower_bound(horizon, arms, lambda0) - CERT_TOL,
        cert_kappa: b_nucb >= nucb_kappa_lower_bound(horizon, arms, h_norm, kappa) - CERT_TOL,
    })
}

/// Outcome of a PL-ratio sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlReport {
    /// Fraction of evaluated points with ratio ≥ μ_floor.
    pub pass_fraction: f64,
    /// Smallest observed `‖∇L‖²/(2L)`.
    pub mu_hat: f64,
    pub evaluated: usize,
    /// Points skipped because their loss was below the guard.
    pub skipped: usize,
}

pub const PL_LOSS_GUARD: f64 = 1e-6;
pub const DEFAULT_MU_FLOOR: f64 = 1e-3;

/// PL ratios from `(loss, ‖∇loss‖²)` pairs.
pub fn pl_summary(values: impl IntoIterator<Item = (f64, f64)>, mu_floor: f64) -> PlReport {
    let (mut evaluated, mut skipped, mut passed) = (0, 0, 0);
    let mut mu_hat = f64::INFINITY;
    for (loss, grad_sq) in values {
        if loss <= PL_LOSS_GUARD {
            skipped += 1;
            continue;
        }
        let ratio = grad_sq / (2.0 * loss);
        evaluated += 1;
        mu_hat = mu_hat.min(ratio);
        if ratio >= mu_floor {
            passed += 1;
        }
    }
    PlReport {
        pass_fraction: if evaluated == 0 { 1.0 } else { passed as f64 / evaluated as f64 },
        mu_hat: if evaluated == 0 { 0.0 } else { mu_hat },
        evaluated,
        skipped,
    }
}

/// PL witness along an online trajectory: `‖∇L^(S)‖²/(2L^(S))` of the averaged
/// loss at each recorded `(θ_t, x_t, y_t)`.
pub fn pl_check(trajectory: &[TrajectoryPoint], predictor: &PerturbedPredictor, mu_floor: f64) -> Result<PlReport> {
    let values: Vec<(f64, f64)> = trajectory
        .par_iter()
        .map(|pt| {
            let (loss, grad) = predictor.averaged_loss_grad(&pt.params, &pt.x, pt.y)?;
            let g = grad.norm();
            Ok((loss, g * g))
        })
        .collect::<Result<_>>()?;
    Ok(pl_summary(values, mu_floor))
}

/// Finite-difference step for Hessian-vector products at a point of norm `theta_norm`.
pub fn hvp_step(theta_norm: f64) -> f64 {
    1e-4 * (1.0 + theta_norm)
}

/// `H v ≈ (∇(θ + hv) − ∇(θ − hv))/(2h)` for a flat gradient oracle.
pub fn hvp_fd<G>(grad: &G, theta: &[f64], v: &[f64]) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let h = hvp_step(norm(theta));
    let plus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t + h * d).collect();
    let minus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t - h * d).collect();
    let (gp, gm) = (grad(&plus)?, grad(&minus)?);
    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// Dominant `|eigenvalue|` of the Hessian of a scalar function with gradient
/// oracle `grad`, by `iters` power iterations from a random start.
pub fn power_iteration<G>(grad: &G, theta: &[f64], iters: usize, seed: u64) -> Result<f64>
where
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut rng = stream_rng(seed, crate::rng::tags::DIAGNOSTICS);
    let mut v = random_unit_vector(theta.len(), &mut rng);
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let hv = hvp_fd(grad, theta, &v)?;
        estimate = norm(&hv);
        if estimate == 0.0 || !estimate.is_finite() {
            break;
        }
        v = hv.iter().map(|x| x / estimate).collect();
    }
    Ok(estimate)
}

/// Spectral norm of `∇²_θ f(θ; x)` by power iteration on finite-difference HVPs.
pub fn hessian_norm_estimate(params: &NetworkParams, x: &[f64], probes: usize, seed: u64) -> Result<f64> {
    let grad = |flat: &[f64]| -> Result<Vec<f64>> { Ok(params.with_flat(flat)?.gradient(x)?.to_flat()) };
    power_iteration(&grad, &params.to_flat(), probes, seed)
}

/// Largest coordinatewise relative error `|g − fd|/max(|g|, |fd|, 1e-6)` of
/// backpropagation against central differences with step `1e-5`.
pub fn gradient_check(params: &NetworkParams, x: &[f64]) -> Result<f64> {
    const H: f64 = 1e-5;
    let g = params.gradient(x)?.to_flat();
    let flat = params.to_flat();
    let mut worst: f64 = 0.0;
    let mut buf = flat.clone();
    for j in 0..flat.len() {
        buf[j] = flat[j] + H;
        let fp = params.with_flat(&buf)?.forward(x)?;
        buf[j] = flat[j] - H;
        let fm = params.with_flat(&buf)?.forward(x)?;
        buf[j] = flat[j];
        let fd = (fp - fm) / (2.0 * H);
        worst = worst.max((g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-6));
    }
    Ok(worst)
}

/// Random parameters for diagnostics: an initialization drawn from `seed`,
/// moved off θ₀ by `drift` (Frobenius) per block so the check is not pinned to
/// the initialization.
pub fn random_params(cfg: &NetConfig, drift: f64, seed: u64) -> Result<NetworkParams> {
    let mut p = init_params(cfg, seed)?.params();
    let mut rng = stream_rng(seed, crate::rng::tags::DIAGNOSTICS);
    for block in p.blocks_mut() {
        let dir = random_unit_vector(block.len(), &mut rng);
        for (b, d) in block.iter_mut().zip(dir) {
            *b += drift * d;
        }
    }
    Ok(p)
}

/// Least-squares fit of `ĉ` in `estimate ≈ ĉ/√m`.
pub fn fit_inverse_sqrt(widths: &[usize], estimates: &[f64]) -> f64 {
    let num: f64 = widths.iter().zip(estimates).map(|(m, e)| e / (*m as f64).sqrt()).sum();
    let den: f64 = widths.iter().map(|m| 1.0 / *m as f64).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Largest first-order convexity violation
/// `L(θ) + ⟨∇L(θ), θ′ − θ⟩ − L(θ′)` of the averaged loss over random pairs in
/// the ball. Each pair and example is drawn from `seed`; every block of θ and
/// θ′ sits at a uniform fraction of `radius` from θ₀.
pub fn almost_convexity(
    predictor: &PerturbedPredictor,
    examples: &[(Vec<f64>, f64)],
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    if examples.is_empty() || pairs == 0 {
        return Ok(0.0);
    }
    let theta0 = predictor.snapshot().theta0();
    let mut rng = stream_rng(seed, crate::rng::tags::DIAGNOSTICS);
    let sample = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut p = theta0.clone();
        for block in p.blocks_mut() {
            let r = radius * rng.gen::<f64>();
            let dir = random_unit_vector(block.len(), rng);
            for (b, d) in block.iter_mut().zip(dir) {
                *b += r * d;
            }
        }
        p
    };
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a = sample(&mut rng);
        let b = sample(&mut rng);
        let (x, y) = &examples[rng.gen_range(0..examples.len())];
        let (la, ga) = predictor.averaged_loss_grad(&a, x, *y)?;
        let lb = predictor.averaged_loss(&b, x, *y)?;
        let lin = la + ga.dot(&b.sub(&a)?)?;
        worst = worst.max(lin - lb);
    }
    Ok(worst)
}

/// Residual total loss of the offline comparator fit.
pub fn interpolation_check(
    predictor: &PerturbedPredictor,
    stream: &[(Vec<f64>, f64)],
    ball: &BallSpec,
    epochs: usize,
) -> Result<f64> {
    Ok(fit_comparator_with(predictor, stream, ball, epochs)?.best_loss)
}

/// Witness constants of the output-loss curvature `a ≤ ℓ″ ≤ b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    pub a: f64,
    pub b: f64,
}

/// Square loss: `ℓ″ = 1`.
pub const SQUARE_LOSS_CONSTANTS: LossConstants = LossConstants { a: 1.0, b: 1.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub gradient_check_max_rel_err: f64,
    pub widths: Vec<usize>,
    /// Median Hessian spectral-norm estimate per width.
    pub hessian_norm_estimates: Vec<f64>,
    /// Largest observed `‖∇f‖`.
    pub grad_norm_bound: f64,
    /// `ĉ` in `‖∇²f‖ ≈ ĉ/√m`.
    pub c_h_hat: f64,
    pub pl_pass_fraction: f64,
    pub pl_mu_hat: f64,
    pub mu_floor: f64,
    pub almost_convexity_eps_hat: f64,
    pub interpolation_residual: f64,
    pub ntk_lambda0: f64,
    pub loss_constants: LossConstants,
}

/// Median of a nonempty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A random symmetric matrix with standard normal entries.
pub fn random_symmetric(n: usize, seed: u64) -> Matrix {
    let mut rng = stream_rng(seed, crate::rng::tags::DIAGNOSTICS);
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = rng.sample(StandardNormal);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}
