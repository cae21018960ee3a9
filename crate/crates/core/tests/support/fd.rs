//! Central finite differences against independent f64 reimplementations.
//!
//! Every case pairs an f32 graph built from the library's tensors with a
//! plain f64 function computing the same output. The scalar under test is
//! `sum(W * out)` for a fixed random `W`, so every output entry contributes.
//! The f64 side also reports the sign pattern of every ReLU
//! pre-activation; coordinates whose ±h probes change that pattern sit on
//! a kink and are skipped.

use dcae::nn::{Activation, Linear, Mlp};
use dcae::rng::Streams;
use dcae::tensor::{backward, grad_norm_penalty};
use dcae::{Result, Tensor};
use rand::Rng;

pub const H: f64 = 1e-3;
pub const ABS_TOL: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-3;
pub const GP_TOL: f64 = 1e-2;

/// Output entries plus the ReLU sign pattern.
pub type Eval64 = (Vec<f64>, Vec<bool>);

pub struct Input {
    pub shape: Vec<usize>,
    /// Draw strictly positive values (domains of sqrt, log, recip).
    pub positive: bool,
}

pub struct Case {
    pub name: String,
    pub inputs: Vec<Input>,
    pub graph: Box<dyn Fn(&[Tensor]) -> Result<Tensor>>,
    pub reference: Box<dyn Fn(&[Vec<f64>]) -> Eval64>,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome {
    pub checked: usize,
    pub skipped: usize,
    /// Largest error after the abs/rel rule: zero when every coordinate
    /// passed, otherwise the worst relative error.
    pub worst_rel: f64,
    pub passed: bool,
}

fn input(shape: &[usize], positive: bool) -> Input {
    Input {
        shape: shape.to_vec(),
        positive,
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn draw(inputs: &[Input], rng: &mut impl Rng) -> Vec<Vec<f32>> {
    inputs
        .iter()
        .map(|i| {
            (0..numel(&i.shape))
                .map(|_| {
                    if i.positive {
                        rng.random_range(0.5..2.0)
                    } else {
                        rng.random_range(-1.5..1.5)
                    }
                })
                .collect()
        })
        .collect()
}

/// Runs one case at a random point drawn from `seed`.
pub fn check(case: &Case, seed: u64) -> Outcome {
    let mut rng = Streams::new(seed).rng("fd");
    let values = draw(&case.inputs, &mut rng);
    let tensors: Vec<Tensor> = values
        .iter()
        .zip(&case.inputs)
        .map(|(v, i)| Tensor::param(v.clone(), &i.shape).unwrap())
        .collect();
    let out = (case.graph)(&tensors).unwrap();
    let w: Vec<f32> = (0..out.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = out.mul(&Tensor::new(w.clone(), out.shape()).unwrap()).unwrap().sum();
    let grads = backward(&loss, false).unwrap();

    let point: Vec<Vec<f64>> = values
        .iter()
        .map(|v| v.iter().map(|x| f64::from(*x)).collect())
        .collect();
    let scalar = |p: &[Vec<f64>]| -> (f64, Vec<bool>) {
        let (o, kinks) = (case.reference)(p);
        assert_eq!(o.len(), w.len(), "{}: reference output size", case.name);
        (o.iter().zip(&w).map(|(a, b)| a * f64::from(*b)).sum(), kinks)
    };
    let mut outcome = Outcome {
        checked: 0,
        skipped: 0,
        worst_rel: 0.0,
        passed: true,
    };
    for (k, t) in tensors.iter().enumerate() {
        let analytic = grads.get(t).map(Tensor::to_vec).unwrap_or_else(|| vec![0.0; t.numel()]);
        for j in 0..t.numel() {
            let mut plus = point.clone();
            plus[k][j] += H;
            let mut minus = point.clone();
            minus[k][j] -= H;
            let (fp, kp) = scalar(&plus);
            let (fm, km) = scalar(&minus);
            if kp != km {
                outcome.skipped += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * H);
            let a = f64::from(analytic[j]);
            let diff = (a - numeric).abs();
            let rel = diff / numeric.abs().max(1e-12);
            outcome.checked += 1;
            if diff > ABS_TOL && rel > case.tol {
                outcome.passed = false;
                outcome.worst_rel = outcome.worst_rel.max(rel);
            }
        }
    }
    outcome
}

// f64 reference helpers, row-major.

fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            for j in 0..n {
                out[i * n + j] += a[i * k + p] * b[p * n + j];
            }
        }
    }
    out
}

fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn instance_norm(h: &[f64], rows: usize, d: usize) -> Vec<f64> {
    let eps = f64::from(dcae::nn::EPS_NORM);
    let mut out = Vec::with_capacity(h.len());
    for r in h.chunks(d).take(rows) {
        let mean = r.iter().sum::<f64>() / d as f64;
        let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d as f64;
        out.extend(r.iter().map(|x| (x - mean) / (var + eps).sqrt()));
    }
    out
}

fn unary(name: &str, positive: bool, g: fn(&Tensor) -> Result<Tensor>, f: fn(f64) -> f64) -> Case {
    Case {
        name: name.to_string(),
        inputs: vec![input(&[3, 4], positive)],
        graph: Box::new(move |t| g(&t[0])),
        reference: Box::new(move |v| (v[0].iter().map(|x| f(*x)).collect(), vec![])),
        tol: REL_TOL,
    }
}

/// One case per differentiable operation, plus instance normalization.
pub fn op_cases() -> Vec<Case> {
    let mut cases = vec![
        Case {
            name: "matmul".into(),
            inputs: vec![input(&[3, 4], false), input(&[4, 2], false)],
            graph: Box::new(|t| t[0].matmul(&t[1])),
            reference: Box::new(|v| (matmul(&v[0], &v[1], 3, 4, 2), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "add".into(),
            inputs: vec![input(&[3, 4], false), input(&[3, 4], false)],
            graph: Box::new(|t| t[0].add(&t[1])),
            reference: Box::new(|v| (v[0].iter().zip(&v[1]).map(|(a, b)| a + b).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "add_row_broadcast".into(),
            inputs: vec![input(&[3, 4], false), input(&[4], false)],
            graph: Box::new(|t| t[0].add(&t[1])),
            reference: Box::new(|v| (v[0].iter().enumerate().map(|(i, a)| a + v[1][i % 4]).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "add_scalar".into(),
            inputs: vec![input(&[3, 4], false), input(&[], false)],
            graph: Box::new(|t| t[0].add(&t[1])),
            reference: Box::new(|v| (v[0].iter().map(|a| a + v[1][0]).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "sub_row_broadcast".into(),
            inputs: vec![input(&[3, 4], false), input(&[4], false)],
            graph: Box::new(|t| t[0].sub(&t[1])),
            reference: Box::new(|v| (v[0].iter().enumerate().map(|(i, a)| a - v[1][i % 4]).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "mul".into(),
            inputs: vec![input(&[3, 4], false), input(&[3, 4], false)],
            graph: Box::new(|t| t[0].mul(&t[1])),
            reference: Box::new(|v| (v[0].iter().zip(&v[1]).map(|(a, b)| a * b).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "mul_row_broadcast".into(),
            inputs: vec![input(&[3, 4], false), input(&[4], false)],
            graph: Box::new(|t| t[0].mul(&t[1])),
            reference: Box::new(|v| (v[0].iter().enumerate().map(|(i, a)| a * v[1][i % 4]).collect(), vec![])),
            tol: REL_TOL,
        },
        unary("scale", false, |t| Ok(t.scale(-2.5)), |x| -2.5 * x),
        unary("square", false, |t| Ok(t.square()), |x| x * x),
        unary("sqrt", true, Tensor::sqrt, f64::sqrt),
        unary("exp", false, |t| Ok(t.exp()), f64::exp),
        unary("log", true, Tensor::log, f64::ln),
        unary("sigmoid", false, |t| Ok(t.sigmoid()), sigmoid),
        unary("recip", true, |t| Ok(t.recip()), |x| 1.0 / x),
        Case {
            name: "relu".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| Ok(t[0].relu())),
            reference: Box::new(|v| {
                (
                    v[0].iter().map(|x| x.max(0.0)).collect(),
                    v[0].iter().map(|x| *x > 0.0).collect(),
                )
            }),
            tol: REL_TOL,
        },
        Case {
            name: "mean".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| t[0].mean()),
            reference: Box::new(|v| (vec![v[0].iter().sum::<f64>() / 12.0], vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "sum".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| Ok(t[0].sum())),
            reference: Box::new(|v| (vec![v[0].iter().sum()], vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "frobenius_sq".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| Ok(t[0].frobenius_sq())),
            reference: Box::new(|v| (vec![v[0].iter().map(|x| x * x).sum()], vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "concat_lastdim".into(),
            inputs: vec![input(&[3, 2], false), input(&[3, 3], false)],
            graph: Box::new(|t| t[0].concat_lastdim(&t[1])),
            reference: Box::new(|v| {
                let mut out = Vec::new();
                for i in 0..3 {
                    out.extend_from_slice(&v[0][i * 2..i * 2 + 2]);
                    out.extend_from_slice(&v[1][i * 3..i * 3 + 3]);
                }
                (out, vec![])
            }),
            tol: REL_TOL,
        },
        Case {
            name: "slice_lastdim".into(),
            inputs: vec![input(&[3, 5], false)],
            graph: Box::new(|t| t[0].slice_lastdim(1, 3)),
            reference: Box::new(|v| {
                (
                    (0..3).flat_map(|i| v[0][i * 5 + 1..i * 5 + 4].to_vec()).collect(),
                    vec![],
                )
            }),
            tol: REL_TOL,
        },
        Case {
            name: "transpose".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| t[0].transpose()),
            reference: Box::new(|v| (transpose(&v[0], 3, 4), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "l2_norm_rows".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| t[0].l2_norm_rows()),
            reference: Box::new(|v| {
                (
                    v[0].chunks(4)
                        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
                        .collect(),
                    vec![],
                )
            }),
            tol: REL_TOL,
        },
        Case {
            name: "gather_rows".into(),
            inputs: vec![input(&[4, 3], false)],
            graph: Box::new(|t| t[0].gather_rows(&[2, 0, 2, 3])),
            reference: Box::new(|v| {
                (
                    [2, 0, 2, 3]
                        .iter()
                        .flat_map(|i| v[0][i * 3..i * 3 + 3].to_vec())
                        .collect(),
                    vec![],
                )
            }),
            tol: REL_TOL,
        },
        Case {
            name: "sum_rows".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| t[0].sum_rows()),
            reference: Box::new(|v| ((0..4).map(|j| (0..3).map(|i| v[0][i * 4 + j]).sum()).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "sum_cols".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| t[0].sum_cols()),
            reference: Box::new(|v| (v[0].chunks(4).map(|r| r.iter().sum()).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "broadcast_rows".into(),
            inputs: vec![input(&[4], false)],
            graph: Box::new(|t| t[0].broadcast_rows(3)),
            reference: Box::new(|v| ((0..3).flat_map(|_| v[0].clone()).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "broadcast_cols".into(),
            inputs: vec![input(&[3], false)],
            graph: Box::new(|t| t[0].broadcast_cols(4)),
            reference: Box::new(|v| (v[0].iter().flat_map(|x| [*x; 4]).collect(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "reshape".into(),
            inputs: vec![input(&[3, 4], false)],
            graph: Box::new(|t| t[0].reshape(&[2, 6])),
            reference: Box::new(|v| (v[0].clone(), vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "instance_norm".into(),
            inputs: vec![input(&[3, 5], false)],
            graph: Box::new(|t| dcae::nn::instance_norm(&t[0])),
            reference: Box::new(|v| (instance_norm(&v[0], 3, 5), vec![])),
            tol: REL_TOL,
        },
    ];
    for c in &mut cases {
        c.name = format!("op {}", c.name);
    }
    cases
}

/// An MLP given as `[x, W1, b1, W2, b2, ...]` with ReLU hidden layers.
#[derive(Debug, Clone)]
pub struct Arch {
    pub rows: usize,
    pub dims: Vec<usize>,
    pub output: Activation,
    pub instance_norm: bool,
}

fn mlp_from(arch: &Arch, t: &[Tensor]) -> Result<Mlp> {
    let last = arch.dims.len() - 2;
    let layers = (0..=last)
        .map(|l| Linear {
            weight: t[1 + 2 * l].clone(),
            bias: t[2 + 2 * l].clone(),
            activation: if l == last { arch.output } else { Activation::Relu },
        })
        .collect();
    Mlp::from_layers(layers, arch.instance_norm)
}

fn layer_inputs(arch: &Arch) -> Vec<Input> {
    let mut inputs = vec![input(&[arch.rows, arch.dims[0]], false)];
    for w in arch.dims.windows(2) {
        inputs.push(input(&[w[1], w[0]], false));
        inputs.push(input(&[w[1]], false));
    }
    inputs
}

/// f64 forward; also returns every hidden pre-activation and the ReLU masks.
fn mlp64(arch: &Arch, v: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<bool>>) {
    let last = arch.dims.len() - 2;
    let mut h = v[0].clone();
    let mut masks = Vec::new();
    for l in 0..=last {
        let (din, dout) = (arch.dims[l], arch.dims[l + 1]);
        let mut a = matmul(&h, &transpose(&v[1 + 2 * l], dout, din), arch.rows, din, dout);
        for (i, x) in a.iter_mut().enumerate() {
            *x += v[2 + 2 * l][i % dout];
        }
        h = if l == last {
            match arch.output {
                Activation::Relu => {
                    masks.push(a.iter().map(|x| *x > 0.0).collect());
                    a.iter().map(|x| x.max(0.0)).collect()
                }
                Activation::Sigmoid => a.iter().map(|x| sigmoid(*x)).collect(),
                Activation::Linear => a,
            }
        } else {
            masks.push(a.iter().map(|x| *x > 0.0).collect());
            a.iter().map(|x| x.max(0.0)).collect()
        };
    }
    if arch.instance_norm {
        h = instance_norm(&h, arch.rows, *arch.dims.last().unwrap());
    }
    (h, masks)
}

pub fn architectures() -> Vec<Arch> {
    vec![
        Arch {
            rows: 4,
            dims: vec![5, 8, 3],
            output: Activation::Linear,
            instance_norm: false,
        },
        Arch {
            rows: 3,
            dims: vec![4, 6, 6, 2],
            output: Activation::Sigmoid,
            instance_norm: false,
        },
        Arch {
            rows: 5,
            dims: vec![6, 7, 4],
            output: Activation::Linear,
            instance_norm: true,
        },
    ]
}

pub fn mlp_case(arch: Arch) -> Case {
    let a2 = arch.clone();
    Case {
        name: format!(
            "mlp {:?} {:?}{}",
            arch.dims,
            arch.output,
            if arch.instance_norm { " +norm" } else { "" }
        ),
        inputs: layer_inputs(&arch),
        graph: Box::new(move |t| mlp_from(&arch, t)?.forward(&t[0])),
        reference: Box::new(move |v| {
            let (h, masks) = mlp64(&a2, v);
            (h, masks.concat())
        }),
        tol: REL_TOL,
    }
}

/// Gradient penalty of a scalar critic `[d, h1, h2, 1]`, differentiated
/// through the input gradient into the critic weights and the inputs.
pub fn gp_case() -> Case {
    let arch = Arch {
        rows: 4,
        dims: vec![3, 6, 5, 1],
        output: Activation::Linear,
        instance_norm: false,
    };
    let a2 = arch.clone();
    Case {
        name: "gradient penalty (double backprop)".into(),
        inputs: layer_inputs(&arch),
        graph: Box::new(move |t| {
            let critic = mlp_from(&arch, t)?;
            grad_norm_penalty(|z| critic.forward(z), &t[0], 1.0)
        }),
        reference: Box::new(move |v| {
            let (_, masks) = mlp64(&a2, v);
            let d = &a2.dims;
            let (w1, w2, w3) = (&v[1], &v[3], &v[5]);
            let mut total = 0.0;
            for r in 0..a2.rows {
                // dF/dh2 = W3, then back through each ReLU mask.
                let g2: Vec<f64> = (0..d[2])
                    .map(|j| if masks[1][r * d[2] + j] { w3[j] } else { 0.0 })
                    .collect();
                let g1: Vec<f64> = (0..d[1])
                    .map(|i| {
                        if masks[0][r * d[1] + i] {
                            (0..d[2]).map(|j| g2[j] * w2[j * d[1] + i]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let gz: Vec<f64> = (0..d[0])
                    .map(|c| (0..d[1]).map(|i| g1[i] * w1[i * d[0] + c]).sum())
                    .collect();
                let norm = gz.iter().map(|x| x * x).sum::<f64>().sqrt();
                total += (norm - 1.0).powi(2);
            }
            (vec![total / a2.rows as f64], masks.concat())
        }),
        tol: GP_TOL,
    }
}

fn sq_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// `‖AᵀB‖_F²` for `[n, d]` inputs.
fn ortho(a: &[f64], b: &[f64], n: usize, d: usize) -> f64 {
    matmul(&transpose(a, n, d), b, d, n, d).iter().map(|x| x * x).sum()
}

fn covariance(z: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| z[i * d + j]).sum::<f64>() / n as f64)
        .collect();
    let c: Vec<f64> = z.iter().enumerate().map(|(i, x)| x - mean[i % d]).collect();
    matmul(&transpose(&c, n, d), &c, d, n, d)
        .iter()
        .map(|x| x / (n - 1) as f64)
        .collect()
}

const BCE_LABELS: [f32; 6] = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];

/// Losses with closed-form references; MMD is built per seed by [`mmd_case`].
pub fn loss_cases() -> Vec<Case> {
    use dcae::losses::{bce_loss, coral_loss, diff_loss, gen_loss, recon_loss, vae_kl};
    let critic = Arch {
        rows: 3,
        dims: vec![4, 5, 1],
        output: Activation::Linear,
        instance_norm: false,
    };
    let critic2 = critic.clone();
    let mut gen_inputs = layer_inputs(&critic);
    gen_inputs[0] = input(&[3, 4], false);
    vec![
        Case {
            name: "loss recon".into(),
            inputs: vec![
                input(&[3, 4], false),
                input(&[3, 4], false),
                input(&[2, 4], false),
                input(&[2, 4], false),
            ],
            graph: Box::new(|t| recon_loss(&t[0], &t[1], &t[2], &t[3])),
            reference: Box::new(|v| (vec![sq_err(&v[0], &v[1]) / 3.0 + sq_err(&v[2], &v[3]) / 2.0], vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "loss diff".into(),
            inputs: vec![
                input(&[4, 3], false),
                input(&[4, 3], false),
                input(&[3, 3], false),
                input(&[3, 3], false),
            ],
            graph: Box::new(|t| diff_loss(&t[0], &t[1], &t[2], &t[3])),
            reference: Box::new(|v| (vec![ortho(&v[0], &v[1], 4, 3) + ortho(&v[2], &v[3], 3, 3)], vec![])),
            tol: REL_TOL,
        },
        Case {
            name: "loss coral".into(),
            inputs: vec![input(&[5, 3], false), input(&[4, 3], false)],
            graph: Box::new(|t| coral_loss(&t[0], &t[1])),
            reference: Box::new(|v| {
                (
                    vec![sq_err(&covariance(&v[0], 5, 3), &covariance(&v[1], 4, 3)) / 36.0],
                    vec![],
                )
            }),
            tol: REL_TOL,
        },
        Case {
            name: "loss vae_kl".into(),
            inputs: vec![input(&[3, 4], false), input(&[3, 4], false)],
            graph: Box::new(|t| vae_kl(&t[0], &t[1])),
            reference: Box::new(|v| {
                let s: f64 = v[0].iter().zip(&v[1]).map(|(m, l)| 1.0 + l - m * m - l.exp()).sum();
                (vec![-0.5 * s / 3.0], vec![])
            }),
            tol: REL_TOL,
        },
        Case {
            name: "loss bce(sigmoid)".into(),
            inputs: vec![input(&[6, 1], false)],
            graph: Box::new(|t| bce_loss(&t[0].sigmoid(), &BCE_LABELS)),
            reference: Box::new(|v| {
                let s: f64 = v[0]
                    .iter()
                    .zip(BCE_LABELS)
                    .map(|(x, y)| {
                        let p = sigmoid(*x);
                        -(f64::from(y) * p.ln() + (1.0 - f64::from(y)) * (1.0 - p).ln())
                    })
                    .sum();
                (vec![s / 6.0], vec![])
            }),
            tol: REL_TOL,
        },
        Case {
            name: "loss gen".into(),
            inputs: gen_inputs,
            graph: Box::new(move |t| {
                let f = mlp_from(&critic, t)?;
                gen_loss(|z| f.forward(z), &t[0])
            }),
            reference: Box::new(move |v| {
                let (scores, masks) = mlp64(&critic2, v);
                (vec![-scores.iter().sum::<f64>() / scores.len() as f64], masks.concat())
            }),
            tol: REL_TOL,
        },
    ]
}

/// MMD with the bandwidth frozen at the point `check(case, seed)` will
/// draw; the library treats the median heuristic as a constant too.
pub fn mmd_case(seed: u64) -> Case {
    let inputs = vec![input(&[4, 3], false), input(&[5, 3], false)];
    let base = draw(&inputs, &mut Streams::new(seed).rng("fd"));
    let a = Tensor::new(base[0].clone(), &[4, 3]).unwrap();
    let b = Tensor::new(base[1].clone(), &[5, 3]).unwrap();
    let median = dcae::losses::median_sq_distance(&a, &b).unwrap();
    let kernel = dcae::losses::KernelConfig::default();
    let mults: Vec<f64> = kernel.multipliers.iter().map(|m| f64::from(*m)).collect();
    Case {
        name: "loss mmd".into(),
        inputs,
        graph: Box::new(move |t| dcae::losses::mmd_loss(&t[0], &t[1], &kernel)),
        reference: Box::new(move |v| {
            let k = |x: &[f64], y: &[f64], bw: f64| -> f64 {
                let (n, m) = (x.len() / 3, y.len() / 3);
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..m {
                        s += (-sq_err(&x[i * 3..i * 3 + 3], &y[j * 3..j * 3 + 3]) / bw).exp();
                    }
                }
                s / (n * m) as f64
            };
            let total = mults
                .iter()
                .map(|mult| {
                    let bw = median * mult;
                    k(&v[0], &v[0], bw) + k(&v[1], &v[1], bw) - 2.0 * k(&v[0], &v[1], bw)
                })
                .sum();
            (vec![total], vec![])
        }),
        tol: REL_TOL,
    }
}
