use rand::Rng;
use serde::{Deserialize, Serialize};

use super::instance_norm;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, x: Tensor) -> Tensor {
        match self {
            Activation::Relu => x.relu(),
            Activation::Sigmoid => x.sigmoid(),
            Activation::Linear => x,
        }
    }
}

/// Fully connected layer `y = act(x Wᵀ + b)` with `W: [out, in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Linear {
    /// Kaiming-uniform weights for ReLU layers, Xavier-uniform otherwise;
    /// zero bias.
    pub fn new(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = match activation {
            Activation::Relu => (6.0 / fan_in as f64).sqrt(),
            _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        } as f32;
        let w: Vec<f32> = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            weight: Tensor::param(w, &[fan_out, fan_in]).expect("weight shape"),
            bias: Tensor::param(vec![0.0; fan_out], &[fan_out]).expect("bias shape"),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let pre = x.matmul(&self.weight.transpose()?)?.add(&self.bias)?;
        Ok(self.activation.apply(pre))
    }
}

/// Stack of [`Linear`] layers with an optional instance normalization on
/// the output.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Linear>,
    final_instance_norm: bool,
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`; hidden layers use `hidden`, the last
    /// layer uses `output`.
    pub fn new(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        final_instance_norm: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("invalid MLP dims {dims:?}")));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(w[0], w[1], if i == last { output } else { hidden }, rng))
            .collect();
        Self::from_layers(layers, final_instance_norm)
    }

    pub fn from_layers(layers: Vec<Linear>, final_instance_norm: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("MLP needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::invalid(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        if final_instance_norm && layers.last().unwrap().out_dim() < 2 {
            return Err(Error::invalid("instance norm needs an output width of at least 2"));
        }
        Ok(Self {
            layers,
            final_instance_norm,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn has_instance_norm(&self) -> bool {
        self.final_instance_norm
    }

    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let (_, width) = batch.dims2()?;
        if width != self.input_dim() {
            return Err(Error::Shape {
                op: "mlp_forward",
                lhs: batch.shape().to_vec(),
                rhs: vec![self.input_dim()],
            });
        }
        let mut h = batch.clone();
        for layer in &self.layers {
            h = layer.forward(&h)?;
        }
        if self.final_instance_norm {
            h = instance_norm(&h)?;
        }
        Ok(h)
    }

    /// Parameters named `"<layer>.weight"` / `"<layer>.bias"`.
    pub fn parameters(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| [(format!("{i}.weight"), &l.weight), (format!("{i}.bias"), &l.bias)])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("{i}.weight"), &mut l.weight),
                    (format!("{i}.bias"), &mut l.bias),
                ]
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.numel()).sum()
    }
}
