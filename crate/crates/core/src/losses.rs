//! Objective terms: reconstruction, orthogonality, MMD, the WGAN-GP critic
//! and generator losses, and the baseline losses (CORAL, VAE KL, BCE).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{grad_norm_penalty, no_grad, Tensor};

/// Probability clamp used by [`bce_loss`].
pub const BCE_CLAMP: f32 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// Orthogonality (difference) loss coefficient.
    pub alpha: f32,
    /// MMD coefficient.
    pub beta: f32,
    /// Gradient-penalty coefficient of the critic loss.
    pub lambda_gp: f32,
    /// Generator loss coefficient.
    pub lambda_gen: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            lambda_gp: 10.0,
            lambda_gen: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Vec<String> {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda_gp", self.lambda_gp),
            ("lambda_gen", self.lambda_gen),
        ]
        .into_iter()
        .filter(|(_, v)| !(v.is_finite() && *v >= 0.0))
        .map(|(k, v)| format!("loss weight {k} must be finite and >= 0, got {v}"))
        .collect()
    }
}

/// Gaussian RBF kernel bank. Each bandwidth is a multiplier on the median
/// pairwise squared distance of the joined batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub multipliers: Vec<f32>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            multipliers: vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.multipliers.is_empty() {
            errs.push("kernel needs at least one bandwidth".to_string());
        }
        for m in &self.multipliers {
            if !(m.is_finite() && *m > 0.0) {
                errs.push(format!("kernel bandwidth multiplier must be positive, got {m}"));
            }
        }
        errs
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean over rows of the squared Euclidean reconstruction error.
pub fn squared_error(x: &Tensor, xhat: &Tensor) -> Result<Tensor> {
    same_shape("squared_error", x, xhat)?;
    let (n, _) = x.dims2()?;
    if n == 0 {
        return Err(Error::invalid("reconstruction loss on an empty batch"));
    }
    Ok(x.sub(xhat)?.frobenius_sq().scale(1.0 / n as f32))
}

/// Per-domain reconstruction errors, each averaged over its own rows, summed.
pub fn recon_loss(x_c: &Tensor, xhat_c: &Tensor, x_t: &Tensor, xhat_t: &Tensor) -> Result<Tensor> {
    squared_error(x_c, xhat_c)?.add(&squared_error(x_t, xhat_t)?)
}

/// `‖Z_sᵀ Z_p‖_F²` for one domain.
pub fn orthogonality(z_s: &Tensor, z_p: &Tensor) -> Result<Tensor> {
    let (ns, _) = z_s.dims2()?;
    let (np, _) = z_p.dims2()?;
    if ns != np {
        return Err(Error::Shape {
            op: "diff_loss",
            lhs: z_s.shape().to_vec(),
            rhs: z_p.shape().to_vec(),
        });
    }
    Ok(z_s.transpose()?.matmul(z_p)?.frobenius_sq())
}

/// Soft subspace orthogonality between shared and private embeddings,
/// summed over both domains.
pub fn diff_loss(z_cs: &Tensor, z_cp: &Tensor, z_ts: &Tensor, z_tp: &Tensor) -> Result<Tensor> {
    orthogonality(z_cs, z_cp)?.add(&orthogonality(z_ts, z_tp)?)
}

/// Pairwise squared distances `[n, m]` between the rows of `a` and `b`.
fn sq_distances(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, _) = a.dims2()?;
    let (m, _) = b.dims2()?;
    let a2 = a.square().sum_cols()?.broadcast_cols(m)?;
    let b2 = b.square().sum_cols()?.broadcast_rows(n)?;
    a2.add(&b2)?.sub(&a.matmul(&b.transpose()?)?.scale(2.0))
}

/// Median squared distance over distinct row pairs of `a` stacked on `b`,
/// computed in f64 from values only.
pub fn median_sq_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (n, d) = a.dims2()?;
    let (m, db) = b.dims2()?;
    if d != db {
        return Err(Error::Shape {
            op: "median_sq_distance",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let rows: Vec<&[f32]> = (0..n).map(|i| a.row(i)).chain((0..m).map(|i| b.row(i))).collect();
    let mut dists = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            dists.push(
                rows[i]
                    .iter()
                    .zip(rows[j])
                    .map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2))
                    .sum::<f64>(),
            );
        }
    }
    if dists.is_empty() {
        return Ok(0.0);
    }
    dists.sort_by(f64::total_cmp);
    let k = dists.len();
    Ok(if k % 2 == 1 {
        dists[k / 2]
    } else {
        0.5 * (dists[k / 2 - 1] + dists[k / 2])
    })
}

/// Biased (V-statistic) squared MMD with a sum of RBF kernels:
/// `mean K(c,c) + mean K(t,t) − 2 mean K(c,t)`.
pub fn mmd_loss(z_c: &Tensor, z_t: &Tensor, kernel: &KernelConfig) -> Result<Tensor> {
    let (n, d) = z_c.dims2()?;
    let (m, dt) = z_t.dims2()?;
    if d != dt {
        return Err(Error::Shape {
            op: "mmd_loss",
            lhs: z_c.shape().to_vec(),
            rhs: z_t.shape().to_vec(),
        });
    }
    if n < 2 || m < 2 {
        return Err(Error::invalid(format!(
            "MMD needs at least 2 rows per domain, got {n} and {m}"
        )));
    }
    let errs = kernel.validate();
    if !errs.is_empty() {
        return Err(Error::invalid(errs.join("; ")));
    }
    let median = median_sq_distance(z_c, z_t)?;
    // All rows coincide: any bandwidth gives the same (zero) discrepancy.
    let base = if median > 0.0 { median } else { 1.0 };
    let d_cc = sq_distances(z_c, z_c)?;
    let d_tt = sq_distances(z_t, z_t)?;
    let d_ct = sq_distances(z_c, z_t)?;
    let mut total: Option<Tensor> = None;
    for mult in &kernel.multipliers {
        let gamma = -1.0 / (base * f64::from(*mult)) as f32;
        let k = d_cc
            .scale(gamma)
            .exp()
            .mean()?
            .add(&d_tt.scale(gamma).exp().mean()?)?
            .sub(&d_ct.scale(gamma).exp().mean()?.scale(2.0))?;
        total = Some(match total {
            Some(t) => t.add(&k)?,
            None => k,
        });
    }
    Ok(total.expect("at least one bandwidth"))
}

fn mean_score<F>(critic: &F, z: &Tensor) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let scores = critic(z)?;
    if scores.numel() != z.dims2()?.0 {
        return Err(Error::invalid(format!(
            "critic must score each row once, got {:?} for batch {:?}",
            scores.shape(),
            z.shape()
        )));
    }
    scores.mean()
}

/// Rowwise interpolation `ε z_c + (1 − ε) z_t` with `ε ~ U(0, 1)` per row,
/// as a fresh participating leaf.
pub fn interpolate(z_c: &Tensor, z_t: &Tensor, rng: &mut impl Rng) -> Result<Tensor> {
    same_shape("interpolate", z_c, z_t)?;
    let (n, d) = z_c.dims2()?;
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let eps: f32 = rng.random();
        data.extend(
            z_c.row(i)
                .iter()
                .zip(z_t.row(i))
                .map(|(c, t)| eps * c + (1.0 - eps) * t),
        );
    }
    Tensor::variable(data, &[n, d])
}

/// WGAN-GP critic objective: `mean F(z_t) − mean F(z_c) + λ_gp · GP`, with
/// the penalty taken at a rowwise random interpolation of the two batches.
pub fn critic_loss<F>(critic: F, z_c: &Tensor, z_t: &Tensor, lambda_gp: f32, rng: &mut impl Rng) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let (n, d) = z_c.dims2()?;
    let (m, dt) = z_t.dims2()?;
    if d != dt || n != m {
        return Err(Error::Shape {
            op: "critic_loss",
            lhs: z_c.shape().to_vec(),
            rhs: z_t.shape().to_vec(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("critic loss on an empty batch"));
    }
    let z_interp = interpolate(z_c, z_t, rng)?;
    let gap = mean_score(&critic, z_t)?.sub(&mean_score(&critic, z_c)?)?;
    let penalty = grad_norm_penalty(|z| critic(z), &z_interp, 1.0)?;
    gap.add(&penalty.scale(lambda_gp))
}

/// Generator objective: negated mean critic score of the tissue embeddings.
pub fn gen_loss<F>(critic: F, z_t: &Tensor) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let (n, _) = z_t.dims2()?;
    if n == 0 {
        return Err(Error::invalid("generator loss on an empty batch"));
    }
    Ok(mean_score(&critic, z_t)?.scale(-1.0))
}

/// Sample covariance (denominator `n − 1`) of the rows of `z`.
fn covariance(z: &Tensor) -> Result<Tensor> {
    let (n, _) = z.dims2()?;
    let mean = z.sum_rows()?.scale(1.0 / n as f32);
    let centered = z.sub(&mean)?;
    Ok(centered.transpose()?.matmul(&centered)?.scale(1.0 / (n - 1) as f32))
}

/// Deep CORAL: `‖Cov(Z_c) − Cov(Z_t)‖_F² / (4d²)`.
pub fn coral_loss(z_c: &Tensor, z_t: &Tensor) -> Result<Tensor> {
    let (n, d) = z_c.dims2()?;
    let (m, dt) = z_t.dims2()?;
    if d != dt {
        return Err(Error::Shape {
            op: "coral_loss",
            lhs: z_c.shape().to_vec(),
            rhs: z_t.shape().to_vec(),
        });
    }
    if n < 2 || m < 2 {
        return Err(Error::invalid(format!(
            "CORAL needs at least 2 rows per domain, got {n} and {m}"
        )));
    }
    let diff = covariance(z_c)?.sub(&covariance(z_t)?)?;
    Ok(diff.frobenius_sq().scale(1.0 / (4.0 * (d * d) as f32)))
}

/// KL divergence of `N(mu, exp(logvar))` from the standard normal, summed
/// over latent dims and averaged over rows.
pub fn vae_kl(mu: &Tensor, logvar: &Tensor) -> Result<Tensor> {
    same_shape("vae_kl", mu, logvar)?;
    let (n, _) = mu.dims2()?;
    if n == 0 {
        return Err(Error::invalid("KL on an empty batch"));
    }
    let inner = logvar
        .add(&Tensor::scalar(1.0))?
        .sub(&mu.square())?
        .sub(&logvar.exp())?;
    Ok(inner.sum().scale(-0.5 / n as f32))
}

/// Input corruption for the denoising autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Corruption {
    /// Additive `N(0, sigma²)` noise.
    Gaussian { sigma: f32 },
    /// Each entry zeroed with probability `p`.
    Mask { p: f32 },
}

impl Default for Corruption {
    fn default() -> Self {
        Corruption::Gaussian { sigma: 0.1 }
    }
}

impl Corruption {
    pub fn validate(&self) -> Vec<String> {
        match *self {
            Corruption::Gaussian { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
                vec![format!("corruption sigma must be >= 0, got {sigma}")]
            }
            Corruption::Mask { p } if !(0.0..1.0).contains(&p) => {
                vec![format!("mask probability must be in [0, 1), got {p}")]
            }
            _ => Vec::new(),
        }
    }
}

/// Corrupted copy of `x` as a constant (the corruption is not differentiated).
pub fn dae_corrupt(x: &Tensor, corruption: Corruption, rng: &mut impl Rng) -> Result<Tensor> {
    let errs = corruption.validate();
    if !errs.is_empty() {
        return Err(Error::invalid(errs.join("; ")));
    }
    let data = match corruption {
        Corruption::Gaussian { sigma } if sigma == 0.0 => x.to_vec(),
        Corruption::Mask { p } if p == 0.0 => x.to_vec(),
        Corruption::Gaussian { sigma } => x
            .data()
            .iter()
            .map(|v| {
                let e: f32 = StandardNormal.sample(rng);
                v + sigma * e
            })
            .collect(),
        Corruption::Mask { p } => x
            .data()
            .iter()
            .map(|v| if rng.random::<f32>() < p { 0.0 } else { *v })
            .collect(),
    };
    Tensor::new(data, x.shape())
}

/// `p` clamped to `[lo, hi]`; the gradient is zero where clamping bites.
fn clamp(p: &Tensor, lo: f32, hi: f32) -> Result<Tensor> {
    let (mask, fill): (Vec<f32>, Vec<f32>) = p
        .data()
        .iter()
        .map(|v| {
            if *v < lo {
                (0.0, lo)
            } else if *v > hi {
                (0.0, hi)
            } else {
                (1.0, 0.0)
            }
        })
        .unzip();
    p.mul(&Tensor::new(mask, p.shape())?)?
        .add(&Tensor::new(fill, p.shape())?)
}

/// Mean binary cross-entropy of probabilities against `{0, 1}` labels, with
/// probabilities clamped to `[1e-7, 1 − 1e-7]`.
pub fn bce_loss(probs: &Tensor, labels: &[f32]) -> Result<Tensor> {
    if probs.numel() != labels.len() {
        return Err(Error::Shape {
            op: "bce_loss",
            lhs: probs.shape().to_vec(),
            rhs: vec![labels.len()],
        });
    }
    if labels.is_empty() {
        return Err(Error::invalid("BCE on an empty batch"));
    }
    if let Some((i, y)) = labels.iter().enumerate().find(|(_, y)| **y != 0.0 && **y != 1.0) {
        return Err(Error::invalid(format!("label {y} at index {i} is not 0 or 1")));
    }
    let p = clamp(probs, BCE_CLAMP, 1.0 - BCE_CLAMP)?;
    let y = Tensor::new(labels.to_vec(), probs.shape())?;
    let one_minus_y = Tensor::new(labels.iter().map(|v| 1.0 - v).collect(), probs.shape())?;
    let one_minus_p = Tensor::scalar(1.0).sub(&p)?;
    let ll = y.mul(&p.log()?)?.add(&one_minus_y.mul(&one_minus_p.log()?)?)?;
    Ok(ll.mean()?.scale(-1.0))
}

/// Value of a loss without recording a graph.
pub fn value_of(f: impl FnOnce() -> Result<Tensor>) -> Result<f32> {
    no_grad(f)?.item()
}
