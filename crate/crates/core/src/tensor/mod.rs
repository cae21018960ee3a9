//! Dense `f32` tensors with a reverse-mode autodiff graph.
//!
//! A [`Tensor`] is immutable. Ops build new tensors and, while gradient
//! recording is enabled on the current thread, record a node linking the
//! result to its inputs whenever at least one input participates in the
//! graph. Leaves participate when created with [`Tensor::param`] or
//! [`Tensor::variable`].
//!
//! Every backward rule is written in terms of the same ops, so running
//! [`backward`] with `create_graph = true` yields gradients that are
//! themselves differentiable. That second order is what the gradient
//! penalty of the adversarial critic needs.
//!
//! Broadcasting is limited to scalar-with-tensor and row-vector-with-matrix
//! for `add`, `sub` and `mul_elementwise`.

mod autograd;
mod ops;

use std::cell::Cell;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

pub use autograd::{backward, grad, grad_norm_penalty, Gradients};
pub use ops::{apply, OpKind};

pub(crate) use ops::Op;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Whether ops on this thread currently record graph nodes.
pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(Cell::get)
}

struct GradModeGuard(bool);

impl Drop for GradModeGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|c| c.set(self.0));
    }
}

fn with_grad_mode<R>(enabled: bool, f: impl FnOnce() -> R) -> R {
    let prev = GRAD_ENABLED.with(|c| c.replace(enabled));
    let _guard = GradModeGuard(prev);
    f()
}

/// Runs `f` without recording any graph nodes.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    with_grad_mode(false, f)
}

/// Runs `f` with recording forced on.
pub fn enable_grad<R>(f: impl FnOnce() -> R) -> R {
    with_grad_mode(true, f)
}

pub(crate) struct GradFn {
    pub(crate) op: Op,
    pub(crate) inputs: Vec<Tensor>,
}

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f32>,
    requires_grad: bool,
    grad_fn: Option<GradFn>,
}

/// Immutable dense tensor, cheap to clone.
#[derive(Clone)]
pub struct Tensor(Arc<Node>);

impl Tensor {
    fn make(data: Vec<f32>, shape: Vec<usize>, requires_grad: bool, grad_fn: Option<GradFn>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            grad_fn,
        }))
    }

    fn check_len(data: &[f32], shape: &[usize]) -> Result<()> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} holds {n} elements but {} were given",
                data.len()
            )));
        }
        Ok(())
    }

    /// Constant tensor (never receives a gradient).
    pub fn new(data: Vec<f32>, shape: &[usize]) -> Result<Self> {
        Self::check_len(&data, shape)?;
        Ok(Self::make(data, shape.to_vec(), false, None))
    }

    /// Trainable leaf.
    pub fn param(data: Vec<f32>, shape: &[usize]) -> Result<Self> {
        Self::check_len(&data, shape)?;
        Ok(Self::make(data, shape.to_vec(), true, None))
    }

    /// Leaf that participates in the graph so gradients can be taken with
    /// respect to it. Same as [`Tensor::param`]; the name documents intent.
    pub fn variable(data: Vec<f32>, shape: &[usize]) -> Result<Self> {
        Self::param(data, shape)
    }

    pub fn scalar(value: f32) -> Self {
        Self::make(vec![value], Vec::new(), false, None)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let n = shape.iter().product();
        Self::make(vec![value; n], shape.to_vec(), false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    /// Result of an op: records a graph node iff recording is on and any
    /// input participates.
    pub(crate) fn from_op(data: Vec<f32>, shape: Vec<usize>, op: Op, inputs: &[&Tensor]) -> Self {
        let track = is_grad_enabled() && inputs.iter().any(|t| t.requires_grad());
        let grad_fn = track.then(|| GradFn {
            op,
            inputs: inputs.iter().map(|t| (*t).clone()).collect(),
        });
        Self::make(data, shape, track, grad_fn)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.0.data.clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f32> {
        match self.0.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::invalid(format!("item() on tensor of shape {:?}", self.shape()))),
        }
    }

    /// Rows and columns of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape() {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::invalid(format!("expected a matrix, got shape {s:?}"))),
        }
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    pub(crate) fn grad_fn(&self) -> Option<&GradFn> {
        self.0.grad_fn.as_ref()
    }

    /// Constant copy cut off from the graph.
    pub fn detach(&self) -> Tensor {
        Self::make(self.0.data.clone(), self.0.shape.clone(), false, None)
    }

    /// Fresh participating leaf holding the same values.
    pub fn detach_variable(&self) -> Tensor {
        Self::make(self.0.data.clone(), self.0.shape.clone(), true, None)
    }

    /// Row `i` of a matrix as a slice.
    pub fn row(&self, i: usize) -> &[f32] {
        let cols = *self.0.shape.last().unwrap_or(&1);
        &self.0.data[i * cols..(i + 1) * cols]
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<f32> = self.data().iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("id", &self.id())
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .field("data", &preview)
            .finish()
    }
}
