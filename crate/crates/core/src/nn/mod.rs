//! Neural building blocks.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, CheckpointEntry, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mlp::{Activation, Linear, Mlp};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Variance floor of [`instance_norm`].
pub const EPS_NORM: f32 = 1e-6;

/// Standardizes each row: `(x - mean) / sqrt(var + EPS_NORM)` with the
/// population variance. No affine parameters. Constant rows map to zeros.
pub fn instance_norm(rows: &Tensor) -> Result<Tensor> {
    let (_, d) = rows.dims2()?;
    if d < 2 {
        return Err(Error::invalid(format!("instance norm needs width >= 2, got {d}")));
    }
    let inv_d = 1.0 / d as f32;
    let mean = rows.sum_cols()?.scale(inv_d);
    let centered = rows.sub(&mean.broadcast_cols(d)?)?;
    let var = centered.square().sum_cols()?.scale(inv_d);
    let inv_std = var.add(&Tensor::scalar(EPS_NORM))?.sqrt()?.recip();
    centered.mul(&inv_std.broadcast_cols(d)?)
}
