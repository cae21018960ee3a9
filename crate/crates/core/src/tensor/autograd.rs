use std::collections::{HashMap, HashSet};

use super::ops::{Bcast, Op};
use super::{enable_grad, no_grad, Tensor};
use crate::error::{Error, Result};

/// Gradients of a scalar with respect to the participating leaves it
/// depends on. Leaves the loss does not reach have no entry.
#[derive(Default)]
pub struct Gradients {
    grads: HashMap<u64, Tensor>,
}

impl Gradients {
    pub fn get(&self, leaf: &Tensor) -> Option<&Tensor> {
        self.grads.get(&leaf.id())
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Gradient of the scalar `loss` with respect to every participating leaf.
///
/// With `create_graph` the returned gradients are recorded and can be
/// differentiated again.
pub fn backward(loss: &Tensor, create_graph: bool) -> Result<Gradients> {
    let grads = propagate(loss, create_graph, |t| t.is_leaf())?;
    Ok(Gradients { grads })
}

/// Gradient of the scalar `output` with respect to each tensor in `wrt`,
/// which may be intermediate results. `None` where `output` does not depend
/// on the tensor.
pub fn grad(output: &Tensor, wrt: &[&Tensor], create_graph: bool) -> Result<Vec<Option<Tensor>>> {
    let wanted: HashSet<u64> = wrt.iter().map(|t| t.id()).collect();
    let mut grads = propagate(output, create_graph, |t| wanted.contains(&t.id()))?;
    Ok(wrt.iter().map(|t| grads.remove(&t.id())).collect())
}

fn propagate(root: &Tensor, create_graph: bool, keep: impl Fn(&Tensor) -> bool) -> Result<HashMap<u64, Tensor>> {
    if root.numel() != 1 {
        return Err(Error::invalid(format!(
            "backward needs a scalar loss, got shape {:?}",
            root.shape()
        )));
    }
    if !root.requires_grad() {
        return Ok(HashMap::new());
    }
    let order = topo_order(root);
    let run = || -> Result<HashMap<u64, Tensor>> {
        let mut pending: HashMap<u64, Tensor> = HashMap::new();
        pending.insert(root.id(), Tensor::ones(root.shape()));
        let mut kept = HashMap::new();
        for node in order.iter().rev() {
            let Some(g) = pending.remove(&node.id()) else {
                continue;
            };
            if keep(node) {
                kept.insert(node.id(), g.clone());
            }
            let Some(gf) = node.grad_fn() else {
                continue;
            };
            let input_grads = vjp(&gf.op, &gf.inputs, node, &g)?;
            for (input, ig) in gf.inputs.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                let acc = match pending.remove(&input.id()) {
                    Some(prev) => prev.add(&ig)?,
                    None => ig,
                };
                pending.insert(input.id(), acc);
            }
        }
        Ok(kept)
    };
    if create_graph {
        enable_grad(run)
    } else {
        no_grad(run)
    }
}

/// Participating nodes reachable from `root`, inputs before consumers.
fn topo_order(root: &Tensor) -> Vec<Tensor> {
    let mut order = Vec::new();
    let mut visited = HashSet::new();
    let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if !visited.insert(t.id()) {
            continue;
        }
        stack.push((t.clone(), true));
        if let Some(gf) = t.grad_fn() {
            for input in gf.inputs.iter().rev() {
                if input.requires_grad() && !visited.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
    }
    order
}

/// Gradient `g` of a broadcast result reduced back to `operand`'s shape.
fn unbroadcast(g: Tensor, operand: &Tensor, side_broadcast: Option<bool>) -> Result<Tensor> {
    match side_broadcast {
        None => Ok(g),
        Some(true) => g.sum().reshape(operand.shape()),
        Some(false) => g.sum_rows()?.reshape(operand.shape()),
    }
}

/// For each side of a binary op: `None` if unbroadcast, `Some(true)` if it was
/// a broadcast scalar, `Some(false)` if a broadcast row.
fn sides(bc: Bcast) -> (Option<bool>, Option<bool>) {
    match bc {
        Bcast::Same => (None, None),
        Bcast::ScalarLhs => (Some(true), None),
        Bcast::ScalarRhs => (None, Some(true)),
        Bcast::RowLhs => (Some(false), None),
        Bcast::RowRhs => (None, Some(false)),
    }
}

fn expand_scalar(g: &Tensor, shape: &[usize]) -> Result<Tensor> {
    Tensor::ones(shape).mul(g)
}

/// Vector-Jacobian products of one recorded op, built from ops so the
/// results are differentiable when recording is on.
fn vjp(op: &Op, inputs: &[Tensor], out: &Tensor, g: &Tensor) -> Result<Vec<Option<Tensor>>> {
    let needs = |i: usize| inputs[i].requires_grad();
    let first = &inputs[0];
    let one = |t: Result<Tensor>| -> Result<Vec<Option<Tensor>>> {
        if needs(0) {
            Ok(vec![Some(t?)])
        } else {
            Ok(vec![None])
        }
    };
    match op {
        Op::Matmul => {
            let (a, b) = (&inputs[0], &inputs[1]);
            let ga = if needs(0) {
                Some(g.matmul(&b.transpose()?)?)
            } else {
                None
            };
            let gb = if needs(1) {
                Some(a.transpose()?.matmul(g)?)
            } else {
                None
            };
            Ok(vec![ga, gb])
        }
        Op::Add(bc) | Op::Sub(bc) => {
            let (sa, sb) = sides(*bc);
            let ga = if needs(0) {
                Some(unbroadcast(g.clone(), &inputs[0], sa)?)
            } else {
                None
            };
            let gb = if needs(1) {
                let gb = if matches!(op, Op::Sub(_)) {
                    g.scale(-1.0)
                } else {
                    g.clone()
                };
                Some(unbroadcast(gb, &inputs[1], sb)?)
            } else {
                None
            };
            Ok(vec![ga, gb])
        }
        Op::Mul(bc) => {
            let (a, b) = (&inputs[0], &inputs[1]);
            let (sa, sb) = sides(*bc);
            let ga = if needs(0) {
                Some(unbroadcast(g.mul(b)?, a, sa)?)
            } else {
                None
            };
            let gb = if needs(1) {
                Some(unbroadcast(g.mul(a)?, b, sb)?)
            } else {
                None
            };
            Ok(vec![ga, gb])
        }
        Op::Scale(c) => one(Ok(g.scale(*c))),
        Op::Mean => one(expand_scalar(g, first.shape()).map(|t| t.scale(1.0 / first.numel() as f32))),
        Op::Sum => one(expand_scalar(g, first.shape())),
        Op::Square => one(g.mul(&first.scale(2.0))),
        Op::Sqrt => one(g.mul(&out.recip_safe().scale(0.5))),
        Op::Exp => one(g.mul(out)),
        Op::Log => one(g.mul(&first.recip())),
        Op::Concat { left } => {
            let total = *g.shape().last().unwrap();
            let ga = if needs(0) {
                Some(g.slice_lastdim(0, *left)?)
            } else {
                None
            };
            let gb = if needs(1) {
                Some(g.slice_lastdim(*left, total - left)?)
            } else {
                None
            };
            Ok(vec![ga, gb])
        }
        Op::Relu => {
            let mask: Vec<f32> = first.data().iter().map(|x| if *x > 0.0 { 1.0 } else { 0.0 }).collect();
            one(g.mul(&Tensor::new(mask, first.shape())?))
        }
        Op::Sigmoid => one(g.mul(&out.sub(&out.square())?)),
        Op::Transpose => one(g.transpose()),
        Op::FrobeniusSq => one(first.scale(2.0).mul(g)),
        Op::L2NormRows => {
            let n = first.dims2()?.1;
            one(g
                .mul(&out.recip_safe())
                .and_then(|s| s.broadcast_cols(n))
                .and_then(|s| first.mul(&s)))
        }
        Op::GatherRows(indices) => {
            let rows = first.dims2()?.0;
            one(g.scatter_rows(indices, rows))
        }
        Op::ScatterRows { indices, .. } => one(g.gather_rows(indices)),
        Op::SumRows => one(g.broadcast_rows(first.dims2()?.0)),
        Op::BroadcastRows => one(g.sum_rows()),
        Op::SumCols => one(g.broadcast_cols(first.dims2()?.1)),
        Op::BroadcastCols => one(g.sum_cols()),
        Op::Slice { start } => {
            let total = *first.shape().last().unwrap();
            one(g.pad_lastdim(*start, total))
        }
        Op::Pad { start, .. } => {
            let len = *first.shape().last().unwrap();
            one(g.slice_lastdim(*start, len))
        }
        Op::Recip => one(g.mul(&out.square().scale(-1.0))),
        Op::Reshape => one(g.reshape(first.shape())),
    }
}

/// Mean over rows of `(‖∂F/∂z‖₂ − target)²` at `z_interp`, where `critic`
/// maps a batch `[n, d]` to scores `[n, 1]` row by row.
///
/// The input gradient is built with `create_graph`, so the penalty can be
/// backpropagated into the critic's parameters. A critic whose output does
/// not depend on its input has zero gradient everywhere.
pub fn grad_norm_penalty<F>(critic: F, z_interp: &Tensor, target: f32) -> Result<Tensor>
where
    F: FnOnce(&Tensor) -> Result<Tensor>,
{
    let (rows, _) = z_interp.dims2()?;
    if rows == 0 {
        return Err(Error::invalid("gradient penalty on a zero-row batch"));
    }
    if !z_interp.requires_grad() {
        return Err(Error::invalid("gradient penalty input must participate in the graph"));
    }
    enable_grad(|| {
        let scores = critic(z_interp)?;
        // Rows are scored independently, so the gradient of the summed
        // scores holds each row's own input gradient.
        let input_grad = if scores.requires_grad() {
            grad(&scores.sum(), &[z_interp], true)?.pop().flatten()
        } else {
            None
        };
        let input_grad = input_grad.unwrap_or_else(|| Tensor::zeros(z_interp.shape()));
        input_grad.l2_norm_rows()?.sub(&Tensor::scalar(target))?.square().mean()
    })
}
