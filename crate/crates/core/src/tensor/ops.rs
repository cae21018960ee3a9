use std::sync::Arc;

use super::Tensor;
use crate::error::{Error, Result};

/// The public op set.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// `[m, k] x [k, n] -> [m, n]`
    Matmul,
    /// Elementwise, with scalar or row-vector broadcasting.
    Add,
    Sub,
    MulElementwise,
    /// Multiply by a constant.
    Scale(f32),
    /// Mean of all elements, rank-0 result.
    Mean,
    /// Sum of all elements, rank-0 result.
    Sum,
    Square,
    Sqrt,
    Exp,
    Log,
    /// `[.., p] ++ [.., q] -> [.., p + q]`
    ConcatLastdim,
    Relu,
    Sigmoid,
    /// Rank-2 only.
    Transpose,
    /// Sum of squares, rank-0 result.
    FrobeniusSq,
    /// `[m, n] -> [m]`
    L2NormRows,
    /// Select rows of a matrix (repeats allowed).
    GatherRows(Vec<usize>),
}

/// Generic entry point over the public op set.
pub fn apply(kind: OpKind, inputs: &[&Tensor]) -> Result<Tensor> {
    let unary = |name: &'static str| -> Result<&Tensor> {
        match inputs {
            [a] => Ok(*a),
            _ => Err(Error::invalid(format!("{name} takes 1 input, got {}", inputs.len()))),
        }
    };
    let binary = |name: &'static str| -> Result<(&Tensor, &Tensor)> {
        match inputs {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::invalid(format!("{name} takes 2 inputs, got {}", inputs.len()))),
        }
    };
    match kind {
        OpKind::Matmul => binary("matmul").and_then(|(a, b)| a.matmul(b)),
        OpKind::Add => binary("add").and_then(|(a, b)| a.add(b)),
        OpKind::Sub => binary("sub").and_then(|(a, b)| a.sub(b)),
        OpKind::MulElementwise => binary("mul_elementwise").and_then(|(a, b)| a.mul(b)),
        OpKind::Scale(c) => unary("scale").map(|a| a.scale(c)),
        OpKind::Mean => unary("mean").and_then(Tensor::mean),
        OpKind::Sum => unary("sum").map(Tensor::sum),
        OpKind::Square => unary("square").map(Tensor::square),
        OpKind::Sqrt => unary("sqrt").and_then(Tensor::sqrt),
        OpKind::Exp => unary("exp").map(Tensor::exp),
        OpKind::Log => unary("log").and_then(Tensor::log),
        OpKind::ConcatLastdim => binary("concat_lastdim").and_then(|(a, b)| a.concat_lastdim(b)),
        OpKind::Relu => unary("relu").map(Tensor::relu),
        OpKind::Sigmoid => unary("sigmoid").map(Tensor::sigmoid),
        OpKind::Transpose => unary("transpose").and_then(Tensor::transpose),
        OpKind::FrobeniusSq => unary("frobenius_sq").map(Tensor::frobenius_sq),
        OpKind::L2NormRows => unary("l2_norm_rows").and_then(Tensor::l2_norm_rows),
        OpKind::GatherRows(idx) => unary("gather_rows").and_then(|a| a.gather_rows(&idx)),
    }
}

/// How the two operands of a binary elementwise op line up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Bcast {
    Same,
    ScalarLhs,
    ScalarRhs,
    RowLhs,
    RowRhs,
}

/// Recorded op, including the auxiliary ops backward rules are built from.
#[derive(Debug, Clone)]
pub(crate) enum Op {
    Matmul,
    Add(Bcast),
    Sub(Bcast),
    Mul(Bcast),
    Scale(f32),
    Mean,
    Sum,
    Square,
    Sqrt,
    Exp,
    Log,
    Concat { left: usize },
    Relu,
    Sigmoid,
    Transpose,
    FrobeniusSq,
    L2NormRows,
    GatherRows(Arc<[usize]>),
    SumRows,
    BroadcastRows,
    SumCols,
    BroadcastCols,
    Slice { start: usize },
    Pad { start: usize },
    ScatterRows { indices: Arc<[usize]> },
    Recip,
    Reshape,
}

fn is_row_of(t: &[usize], cols: usize) -> bool {
    matches!(t, [n] if *n == cols) || matches!(t, [1, n] if *n == cols)
}

fn bcast_rule(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(Bcast, Vec<usize>)> {
    if a.shape() == b.shape() {
        return Ok((Bcast::Same, a.shape().to_vec()));
    }
    if b.numel() == 1 {
        return Ok((Bcast::ScalarRhs, a.shape().to_vec()));
    }
    if a.numel() == 1 {
        return Ok((Bcast::ScalarLhs, b.shape().to_vec()));
    }
    if let [_, n] = a.shape() {
        if is_row_of(b.shape(), *n) {
            return Ok((Bcast::RowRhs, a.shape().to_vec()));
        }
    }
    if let [_, n] = b.shape() {
        if is_row_of(a.shape(), *n) {
            return Ok((Bcast::RowLhs, b.shape().to_vec()));
        }
    }
    Err(Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    })
}

fn binary_map(bc: Bcast, shape: &[usize], a: &[f32], b: &[f32], f: impl Fn(f32, f32) -> f32) -> Vec<f32> {
    match bc {
        Bcast::Same => a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect(),
        Bcast::ScalarRhs => a.iter().map(|x| f(*x, b[0])).collect(),
        Bcast::ScalarLhs => b.iter().map(|y| f(a[0], *y)).collect(),
        Bcast::RowRhs => {
            let mut out = Vec::with_capacity(a.len());
            for row in a.chunks_exact(shape[1]) {
                out.extend(row.iter().zip(b).map(|(x, y)| f(*x, *y)));
            }
            out
        }
        Bcast::RowLhs => {
            let mut out = Vec::with_capacity(b.len());
            for row in b.chunks_exact(shape[1]) {
                out.extend(a.iter().zip(row).map(|(x, y)| f(*x, *y)));
            }
            out
        }
    }
}

fn unary_map(t: &Tensor, op: Op, f: impl Fn(f32) -> f32) -> Tensor {
    let data = t.data().iter().map(|x| f(*x)).collect();
    Tensor::from_op(data, t.shape().to_vec(), op, &[t])
}

fn check_nonnegative(op: &'static str, t: &Tensor) -> Result<()> {
    if let Some((index, value)) = t.data().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeInput {
            op,
            value: *value,
            index,
        });
    }
    Ok(())
}

/// `c = a @ b` for row-major `a: [m, k]`, `b: [k, n]`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32]) -> Vec<f32> {
    let mut c = vec![0.0f32; m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: slices are exactly m*k, k*n and m*n long with row-major strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

impl Tensor {
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let shape_err = || Error::Shape {
            op: "matmul",
            lhs: self.shape().to_vec(),
            rhs: other.shape().to_vec(),
        };
        let (m, k) = self.dims2().map_err(|_| shape_err())?;
        let (k2, n) = other.dims2().map_err(|_| shape_err())?;
        if k != k2 {
            return Err(shape_err());
        }
        let data = gemm(m, k, n, self.data(), other.data());
        Ok(Tensor::from_op(data, vec![m, n], Op::Matmul, &[self, other]))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let (bc, shape) = bcast_rule("add", self, other)?;
        let data = binary_map(bc, &shape, self.data(), other.data(), |x, y| x + y);
        Ok(Tensor::from_op(data, shape, Op::Add(bc), &[self, other]))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        let (bc, shape) = bcast_rule("sub", self, other)?;
        let data = binary_map(bc, &shape, self.data(), other.data(), |x, y| x - y);
        Ok(Tensor::from_op(data, shape, Op::Sub(bc), &[self, other]))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        let (bc, shape) = bcast_rule("mul_elementwise", self, other)?;
        let data = binary_map(bc, &shape, self.data(), other.data(), |x, y| x * y);
        Ok(Tensor::from_op(data, shape, Op::Mul(bc), &[self, other]))
    }

    pub fn scale(&self, c: f32) -> Tensor {
        unary_map(self, Op::Scale(c), |x| x * c)
    }

    pub fn mean(&self) -> Result<Tensor> {
        if self.numel() == 0 {
            return Err(Error::invalid("mean of an empty tensor"));
        }
        let s: f32 = self.data().iter().sum();
        Ok(Tensor::from_op(
            vec![s / self.numel() as f32],
            Vec::new(),
            Op::Mean,
            &[self],
        ))
    }

    pub fn sum(&self) -> Tensor {
        let s: f32 = self.data().iter().sum();
        Tensor::from_op(vec![s], Vec::new(), Op::Sum, &[self])
    }

    pub fn square(&self) -> Tensor {
        unary_map(self, Op::Square, |x| x * x)
    }

    pub fn sqrt(&self) -> Result<Tensor> {
        check_nonnegative("sqrt", self)?;
        Ok(unary_map(self, Op::Sqrt, f32::sqrt))
    }

    pub fn exp(&self) -> Tensor {
        unary_map(self, Op::Exp, f32::exp)
    }

    pub fn log(&self) -> Result<Tensor> {
        check_nonnegative("log", self)?;
        Ok(unary_map(self, Op::Log, f32::ln))
    }

    pub fn relu(&self) -> Tensor {
        // max(x, 0) with the subgradient at 0 taken as 0.
        unary_map(self, Op::Relu, |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn sigmoid(&self) -> Tensor {
        unary_map(self, Op::Sigmoid, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        })
    }

    pub fn concat_lastdim(&self, other: &Tensor) -> Result<Tensor> {
        let shape_err = || Error::Shape {
            op: "concat_lastdim",
            lhs: self.shape().to_vec(),
            rhs: other.shape().to_vec(),
        };
        let (sa, sb) = (self.shape(), other.shape());
        if sa.is_empty() || sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(shape_err());
        }
        let (p, q) = (sa[sa.len() - 1], sb[sb.len() - 1]);
        let rows = if p > 0 {
            self.numel() / p
        } else {
            other.numel() / q.max(1)
        };
        let mut data = Vec::with_capacity(self.numel() + other.numel());
        for r in 0..rows {
            data.extend_from_slice(&self.data()[r * p..(r + 1) * p]);
            data.extend_from_slice(&other.data()[r * q..(r + 1) * q]);
        }
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = p + q;
        Ok(Tensor::from_op(data, shape, Op::Concat { left: p }, &[self, other]))
    }

    /// Columns `start..start + len` of the last dimension.
    pub fn slice_lastdim(&self, start: usize, len: usize) -> Result<Tensor> {
        let total = *self
            .shape()
            .last()
            .ok_or_else(|| Error::invalid("slice_lastdim on a rank-0 tensor"))?;
        if start + len > total {
            return Err(Error::invalid(format!(
                "slice {start}..{} out of range for last dim {total}",
                start + len
            )));
        }
        let rows = if total > 0 { self.numel() / total } else { 0 };
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&self.data()[r * total + start..r * total + start + len]);
        }
        let mut shape = self.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        Ok(Tensor::from_op(data, shape, Op::Slice { start }, &[self]))
    }

    /// Places the last dimension at `start` inside zeros of width `total`.
    pub(crate) fn pad_lastdim(&self, start: usize, total: usize) -> Result<Tensor> {
        let len = *self
            .shape()
            .last()
            .ok_or_else(|| Error::invalid("pad_lastdim on a rank-0 tensor"))?;
        if start + len > total {
            return Err(Error::invalid("pad_lastdim target too narrow"));
        }
        let rows = if len > 0 { self.numel() / len } else { 0 };
        let mut data = vec![0.0; rows * total];
        for r in 0..rows {
            data[r * total + start..r * total + start + len].copy_from_slice(&self.data()[r * len..(r + 1) * len]);
        }
        let mut shape = self.shape().to_vec();
        *shape.last_mut().unwrap() = total;
        Ok(Tensor::from_op(data, shape, Op::Pad { start }, &[self]))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = self.dims2()?;
        let src = self.data();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        Ok(Tensor::from_op(data, vec![n, m], Op::Transpose, &[self]))
    }

    pub fn frobenius_sq(&self) -> Tensor {
        let s: f32 = self.data().iter().map(|x| x * x).sum();
        Tensor::from_op(vec![s], Vec::new(), Op::FrobeniusSq, &[self])
    }

    /// Euclidean norm of each row.
    pub fn l2_norm_rows(&self) -> Result<Tensor> {
        let (m, n) = self.dims2()?;
        let data = (0..m)
            .map(|i| {
                self.data()[i * n..(i + 1) * n]
                    .iter()
                    .map(|x| x * x)
                    .sum::<f32>()
                    .sqrt()
            })
            .collect();
        Ok(Tensor::from_op(data, vec![m], Op::L2NormRows, &[self]))
    }

    pub fn gather_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let (m, n) = self.dims2()?;
        if let Some(bad) = indices.iter().find(|i| **i >= m) {
            return Err(Error::invalid(format!(
                "gather_rows index {bad} out of range for {m} rows"
            )));
        }
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(&self.data()[i * n..(i + 1) * n]);
        }
        Ok(Tensor::from_op(
            data,
            vec![indices.len(), n],
            Op::GatherRows(indices.into()),
            &[self],
        ))
    }

    /// Adds row `r` of `self` into row `indices[r]` of a `rows`-row zero matrix.
    pub(crate) fn scatter_rows(&self, indices: &Arc<[usize]>, rows: usize) -> Result<Tensor> {
        let (m, n) = self.dims2()?;
        if m != indices.len() {
            return Err(Error::invalid("scatter_rows index count mismatch"));
        }
        let mut data = vec![0.0; rows * n];
        for (r, &dst) in indices.iter().enumerate() {
            for j in 0..n {
                data[dst * n + j] += self.data()[r * n + j];
            }
        }
        Ok(Tensor::from_op(
            data,
            vec![rows, n],
            Op::ScatterRows {
                indices: indices.clone(),
            },
            &[self],
        ))
    }

    /// Column sums: `[m, n] -> [n]`.
    pub fn sum_rows(&self) -> Result<Tensor> {
        let (m, n) = self.dims2()?;
        let mut data = vec![0.0; n];
        for i in 0..m {
            for (acc, x) in data.iter_mut().zip(&self.data()[i * n..(i + 1) * n]) {
                *acc += *x;
            }
        }
        Ok(Tensor::from_op(data, vec![n], Op::SumRows, &[self]))
    }

    /// Repeats a `[n]` vector as `m` rows.
    pub fn broadcast_rows(&self, m: usize) -> Result<Tensor> {
        let [n] = *self.shape() else {
            return Err(Error::invalid(format!(
                "broadcast_rows needs a vector, got {:?}",
                self.shape()
            )));
        };
        let mut data = Vec::with_capacity(m * n);
        for _ in 0..m {
            data.extend_from_slice(self.data());
        }
        Ok(Tensor::from_op(data, vec![m, n], Op::BroadcastRows, &[self]))
    }

    /// Row sums: `[m, n] -> [m]`.
    pub fn sum_cols(&self) -> Result<Tensor> {
        let (m, n) = self.dims2()?;
        let data = (0..m).map(|i| self.data()[i * n..(i + 1) * n].iter().sum()).collect();
        Ok(Tensor::from_op(data, vec![m], Op::SumCols, &[self]))
    }

    /// Repeats each entry of a `[m]` vector across `n` columns.
    pub fn broadcast_cols(&self, n: usize) -> Result<Tensor> {
        let [m] = *self.shape() else {
            return Err(Error::invalid(format!(
                "broadcast_cols needs a vector, got {:?}",
                self.shape()
            )));
        };
        let mut data = Vec::with_capacity(m * n);
        for &v in self.data() {
            data.extend(std::iter::repeat_n(v, n));
        }
        Ok(Tensor::from_op(data, vec![m, n], Op::BroadcastCols, &[self]))
    }

    /// Elementwise `1 / x`.
    pub fn recip(&self) -> Tensor {
        unary_map(self, Op::Recip, |x| 1.0 / x)
    }

    /// Elementwise `1 / x`, with `0` mapped to `0`.
    pub(crate) fn recip_safe(&self) -> Tensor {
        unary_map(self, Op::Recip, |x| if x == 0.0 { 0.0 } else { 1.0 / x })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(Error::Shape {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor::from_op(self.to_vec(), shape.to_vec(), Op::Reshape, &[self]))
    }
}
