//! Elastic-net logistic regression by monotone accelerated proximal
//! gradient, with lambda selection by stratified cross-validation.

use serde::{Deserialize, Serialize};

use super::metrics::auroc;
use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_f32(data: &[f32], rows: usize, cols: usize) -> Result<Self> {
        Self::new(data.iter().map(|v| f64::from(*v)).collect(), rows, cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-5,
            max_iter: 10_000,
        }
    }
}

/// Fitted model on the original feature scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Norm of the proximal gradient mapping at exit.
    pub grad_norm: f64,
    /// Objective after each accepted iteration, in the standardized problem.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl ElasticNetModel {
    /// Linear scores `Xw + b`.
    pub fn decision(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols != self.weights.len() {
            return Err(Error::invalid(format!(
                "model has {} weights, matrix has {} columns",
                self.weights.len(),
                x.cols
            )));
        }
        Ok((0..x.rows)
            .map(|i| self.intercept + dot(x.row(i), &self.weights))
            .collect())
    }

    /// Class-1 probabilities.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.decision(x)?.into_iter().map(sigmoid).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Standardized design plus the column statistics to undo it.
struct Problem<'a> {
    x: Vec<f64>,
    n: usize,
    d: usize,
    y: &'a [u8],
    lambda1: f64,
    lambda2: f64,
}

impl Problem<'_> {
    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        (0..self.n)
            .map(|i| b + dot(&self.x[i * self.d..(i + 1) * self.d], w))
            .collect()
    }

    /// Smooth part: mean logistic loss plus the ridge term.
    fn smooth(&self, w: &[f64], b: f64) -> f64 {
        let m = self.margins(w, b);
        let loss: f64 = m
            .iter()
            .zip(self.y)
            .map(|(z, y)| softplus(*z) - f64::from(*y) * z)
            .sum::<f64>()
            / self.n as f64;
        loss + 0.5 * self.lambda2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn objective(&self, w: &[f64], b: f64) -> f64 {
        self.smooth(w, b) + self.lambda1 * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let m = self.margins(w, b);
        let mut gw: Vec<f64> = w.iter().map(|v| self.lambda2 * v).collect();
        let mut gb = 0.0;
        let inv_n = 1.0 / self.n as f64;
        for (i, z) in m.iter().enumerate() {
            let r = (sigmoid(*z) - f64::from(self.y[i])) * inv_n;
            gb += r;
            for (g, xv) in gw.iter_mut().zip(&self.x[i * self.d..(i + 1) * self.d]) {
                *g += r * xv;
            }
        }
        (gw, gb)
    }

    /// Upper bound on the Lipschitz constant of the smooth gradient: a
    /// quarter of the top eigenvalue of `[X 1]ᵀ[X 1] / n`, plus the ridge.
    fn lipschitz(&self) -> f64 {
        let dim = self.d + 1;
        let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
        let mut eig = 1.0;
        for _ in 0..50 {
            let mut av = vec![0.0; dim];
            for i in 0..self.n {
                let row = &self.x[i * self.d..(i + 1) * self.d];
                let s = dot(row, &v[..self.d]) + v[self.d];
                for (a, xv) in av.iter_mut().zip(row) {
                    *a += s * xv;
                }
                av[self.d] += s;
            }
            let norm = av.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            eig = norm / self.n as f64;
            v = av.into_iter().map(|a| a / norm).collect();
        }
        // Power iteration approaches from below; pad it.
        (1.05 * eig / 4.0 + self.lambda2).max(1e-12)
    }
}

/// Minimizes `mean logloss + λ1‖w‖₁ + (λ2/2)‖w‖₂²` over standardized
/// features; the intercept is not penalized. Non-convergence is reported in
/// the model, not as an error.
pub fn elastic_net_fit(
    x: &Matrix,
    y: &[u8],
    lambda1: f64,
    lambda2: f64,
    opts: SolverOptions,
) -> Result<ElasticNetModel> {
    if x.rows != y.len() {
        return Err(Error::invalid(format!("{} rows for {} labels", x.rows, y.len())));
    }
    if x.rows == 0 {
        return Err(Error::invalid("elastic net on an empty design"));
    }
    if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| **v > 1) {
        return Err(Error::invalid(format!("label {v} at index {i} is not 0 or 1")));
    }
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
        return Err(Error::invalid(format!(
            "penalties must be >= 0, got {lambda1}, {lambda2}"
        )));
    }
    let (n, d) = (x.rows, x.cols);
    let mut mean = vec![0.0; d];
    let mut scale = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for i in 0..n {
        for ((s, v), m) in scale.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    // Constant columns stay at zero after centering; leave their scale at 1.
    for s in scale.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let mut xs = Vec::with_capacity(n * d);
    for i in 0..n {
        xs.extend(x.row(i).iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s));
    }
    let prob = Problem {
        x: xs,
        n,
        d,
        y,
        lambda1,
        lambda2,
    };
    let lip = prob.lipschitz();
    let step = 1.0 / lip;

    let prevalence = y.iter().filter(|v| **v == 1).count() as f64 / n as f64;
    let p = prevalence.clamp(1e-6, 1.0 - 1e-6);
    let mut w = vec![0.0; d];
    let mut b = (p / (1.0 - p)).ln();
    let mut yw = w.clone();
    let mut yb = b;
    let mut t = 1.0f64;
    let mut f_x = prob.objective(&w, b);
    let mut trace = vec![f_x];
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let (gw, gb) = prob.gradient(&yw, yb);
        let zw: Vec<f64> = yw
            .iter()
            .zip(&gw)
            .map(|(v, g)| soft_threshold(v - step * g, step * lambda1))
            .collect();
        let zb = yb - step * gb;
        grad_norm = lip * (zw.iter().zip(&yw).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + (zb - yb).powi(2)).sqrt();
        let f_z = prob.objective(&zw, zb);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let (prev_w, prev_b) = (w.clone(), b);
        if f_z <= f_x {
            w = zw.clone();
            b = zb;
            f_x = f_z;
        }
        trace.push(f_x);
        // Monotone momentum: extrapolate from the accepted point towards z.
        let c1 = t / t_next;
        let c2 = (t - 1.0) / t_next;
        yw = (0..d)
            .map(|j| w[j] + c1 * (zw[j] - w[j]) + c2 * (w[j] - prev_w[j]))
            .collect();
        yb = b + c1 * (zb - b) + c2 * (b - prev_b);
        t = t_next;
        if grad_norm <= opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("elastic net stopped after {iterations} iterations, gradient-mapping norm {grad_norm:.3e}");
    }
    let weights: Vec<f64> = w.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let intercept = b - weights.iter().zip(&mean).map(|(v, m)| v * m).sum::<f64>();
    Ok(ElasticNetModel {
        weights,
        intercept,
        lambda1,
        lambda2,
        converged,
        iterations,
        grad_norm,
        objective_trace: trace,
    })
}

/// Fold assignment for `k`-fold CV, stratified by label: each class is
/// shuffled and dealt round-robin.
pub fn label_folds(y: &[u8], k: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut fold = vec![0; y.len()];
    let mut offset = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|i| y[*i] == class).collect();
        idx.shuffle(rng);
        for (j, i) in idx.iter().enumerate() {
            fold[*i] = (offset + j) % k;
        }
        offset += idx.len();
    }
    fold
}

/// Mean held-out AUROC of `k`-fold CV. `None` if some split leaves a
/// training or held-out part with a single class.
pub fn cv_auroc(
    x: &Matrix,
    y: &[u8],
    lambda1: f64,
    lambda2: f64,
    folds: &[usize],
    k: usize,
    opts: SolverOptions,
) -> Result<Option<f64>> {
    let mut total = 0.0;
    for f in 0..k {
        let train: Vec<usize> = (0..y.len()).filter(|i| folds[*i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|i| folds[*i] == f).collect();
        let ytr: Vec<u8> = train.iter().map(|i| y[*i]).collect();
        let yte: Vec<u8> = test.iter().map(|i| y[*i]).collect();
        let two_class = |v: &[u8]| v.contains(&0) && v.contains(&1);
        if !two_class(&ytr) || !two_class(&yte) {
            return Ok(None);
        }
        let model = elastic_net_fit(&x.select_rows(&train), &ytr, lambda1, lambda2, opts)?;
        total += auroc(&model.decision(&x.select_rows(&test))?, &yte)?;
    }
    Ok(Some(total / k as f64))
}

/// Penalty grid searched by [`select_lambdas`].
pub const LAMBDA_GRID: [f64; 3] = [0.001, 0.01, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaChoice {
    pub lambda1: f64,
    pub lambda2: f64,
    pub cv_auroc: f64,
}

/// Best `(λ1, λ2)` over `grid × grid` by mean 3-fold CV AUROC; ties go to
/// the earlier grid entry.
pub fn select_lambdas(
    x: &Matrix,
    y: &[u8],
    grid: &[f64],
    rng: &mut impl rand::Rng,
    opts: SolverOptions,
) -> Result<LambdaChoice> {
    const K: usize = 3;
    let folds = label_folds(y, K, rng);
    let mut best: Option<LambdaChoice> = None;
    for &l1 in grid {
        for &l2 in grid {
            let Some(score) = cv_auroc(x, y, l1, l2, &folds, K, opts)? else {
                return Err(Error::invalid(
                    "cross-validation split left a single class; too few minority samples",
                ));
            };
            if best.is_none_or(|b| score > b.cv_auroc) {
                best = Some(LambdaChoice {
                    lambda1: l1,
                    lambda2: l2,
                    cv_auroc: score,
                });
            }
        }
    }
    best.ok_or_else(|| Error::invalid("empty lambda grid"))
}
