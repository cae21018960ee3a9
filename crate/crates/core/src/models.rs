//! The CODE-AE family and baseline autoencoders assembled from [`Mlp`]s.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Corruption;
use crate::nn::{Activation, Checkpoint, CheckpointMeta, Mlp};
use crate::tensor::{no_grad, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelVariant {
    CodeAeBase,
    CodeAeMmd,
    CodeAeAdv,
    Ae,
    Dae,
    Vae,
    DsnMmd,
    DsnAdv,
    Adae,
    Coral,
    MlpOnly,
}

/// Which embedding a variant aligns across domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignTarget {
    /// Shared ⊕ private.
    Concat,
    /// Shared embedding only.
    Shared,
    /// The single embedding of a model without private encoders.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    None,
    Mmd(AlignTarget),
    Adversarial(AlignTarget),
    Coral(AlignTarget),
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 11] = [
        ModelVariant::CodeAeBase,
        ModelVariant::CodeAeMmd,
        ModelVariant::CodeAeAdv,
        ModelVariant::Ae,
        ModelVariant::Dae,
        ModelVariant::Vae,
        ModelVariant::DsnMmd,
        ModelVariant::DsnAdv,
        ModelVariant::Adae,
        ModelVariant::Coral,
        ModelVariant::MlpOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::CodeAeBase => "CODE_AE_BASE",
            ModelVariant::CodeAeMmd => "CODE_AE_MMD",
            ModelVariant::CodeAeAdv => "CODE_AE_ADV",
            ModelVariant::Ae => "AE",
            ModelVariant::Dae => "DAE",
            ModelVariant::Vae => "VAE",
            ModelVariant::DsnMmd => "DSN_MMD",
            ModelVariant::DsnAdv => "DSN_ADV",
            ModelVariant::Adae => "ADAE",
            ModelVariant::Coral => "CORAL",
            ModelVariant::MlpOnly => "MLP_ONLY",
        }
    }

    pub fn alignment(self) -> Alignment {
        use AlignTarget::*;
        match self {
            ModelVariant::CodeAeMmd => Alignment::Mmd(Concat),
            ModelVariant::CodeAeAdv => Alignment::Adversarial(Concat),
            ModelVariant::DsnMmd => Alignment::Mmd(Shared),
            ModelVariant::DsnAdv => Alignment::Adversarial(Shared),
            ModelVariant::Adae => Alignment::Adversarial(Single),
            ModelVariant::Coral => Alignment::Coral(Single),
            ModelVariant::CodeAeBase
            | ModelVariant::Ae
            | ModelVariant::Dae
            | ModelVariant::Vae
            | ModelVariant::MlpOnly => Alignment::None,
        }
    }

    /// Shared/private factorization with the orthogonality loss.
    pub fn has_private(self) -> bool {
        matches!(
            self,
            ModelVariant::CodeAeBase
                | ModelVariant::CodeAeMmd
                | ModelVariant::CodeAeAdv
                | ModelVariant::DsnMmd
                | ModelVariant::DsnAdv
        )
    }

    pub fn has_critic(self) -> bool {
        matches!(self.alignment(), Alignment::Adversarial(_))
    }

    pub fn has_decoder(self) -> bool {
        self != ModelVariant::MlpOnly
    }

    pub fn is_adversarial(self) -> bool {
        self.has_critic()
    }

    pub fn needs_pretraining(self) -> bool {
        self != ModelVariant::MlpOnly
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown model variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    CellLine,
    Tissue,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::CellLine => "cell_line",
            Domain::Tissue => "tissue",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cell_line" | "cell-line" | "source" => Ok(Domain::CellLine),
            "tissue" | "target" => Ok(Domain::Tissue),
            _ => Err(Error::invalid(format!("unknown domain {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub corruption: Corruption,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::CodeAeAdv,
            input_dim: 0,
            latent_dim: 128,
            encoder_hidden: vec![512, 256],
            decoder_hidden: vec![256, 512],
            critic_hidden: vec![64, 32],
            head_hidden: vec![64, 32],
            corruption: Corruption::default(),
        }
    }
}

impl ModelConfig {
    pub fn new(variant: ModelVariant, input_dim: usize) -> Self {
        Self {
            variant,
            input_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.input_dim == 0 {
            errs.push("model input_dim must be > 0".to_string());
        }
        if self.latent_dim < 2 {
            errs.push(format!("model latent_dim must be >= 2, got {}", self.latent_dim));
        }
        for (name, dims) in [
            ("encoder_hidden", &self.encoder_hidden),
            ("decoder_hidden", &self.decoder_hidden),
            ("critic_hidden", &self.critic_hidden),
            ("head_hidden", &self.head_hidden),
        ] {
            if dims.contains(&0) {
                errs.push(format!("model {name} contains a zero width: {dims:?}"));
            }
        }
        errs.extend(self.corruption.validate());
        errs
    }

    /// Width of the embedding the critic or kernel sees.
    pub fn alignment_dim(&self) -> usize {
        match self.variant.alignment() {
            Alignment::Mmd(AlignTarget::Concat) | Alignment::Adversarial(AlignTarget::Concat) => 2 * self.latent_dim,
            _ => self.latent_dim,
        }
    }

    fn decoder_input(&self) -> usize {
        if self.variant.has_private() {
            2 * self.latent_dim
        } else {
            self.latent_dim
        }
    }
}

fn chain(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(output))
        .collect()
}

/// Shared and private embeddings of one batch.
#[derive(Debug, Clone)]
pub struct EmbeddingPair {
    pub shared: Tensor,
    pub private: Option<Tensor>,
    pub domain: Domain,
}

/// Parameter-group names as they appear in checkpoints.
pub const SHARED_ENCODER: &str = "shared_encoder";
pub const PRIVATE_CELL_LINE_ENCODER: &str = "private_cell_line_encoder";
pub const PRIVATE_TISSUE_ENCODER: &str = "private_tissue_encoder";
pub const DECODER: &str = "decoder";
pub const CRITIC: &str = "critic";
pub const HEAD: &str = "head";

/// Network bundle of one model variant. Both domains go through the single
/// shared encoder.
#[derive(Debug, Clone)]
pub struct CodeAeModel {
    config: ModelConfig,
    pub shared: Mlp,
    pub private_cell_line: Option<Mlp>,
    pub private_tissue: Option<Mlp>,
    pub decoder: Option<Mlp>,
    pub critic: Option<Mlp>,
    pub head: Option<Mlp>,
}

impl CodeAeModel {
    pub fn build(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        let errs = config.validate();
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let (d, k) = (config.input_dim, config.latent_dim);
        let variant = config.variant;
        let encoder = |rng: &mut _| -> Result<Mlp> {
            if variant == ModelVariant::Vae {
                // mu ⊕ logvar
                Mlp::new(
                    &chain(d, &config.encoder_hidden, 2 * k),
                    Activation::Relu,
                    Activation::Linear,
                    false,
                    rng,
                )
            } else {
                Mlp::new(
                    &chain(d, &config.encoder_hidden, k),
                    Activation::Relu,
                    Activation::Linear,
                    true,
                    rng,
                )
            }
        };
        let shared = encoder(rng)?;
        let (private_cell_line, private_tissue) = if variant.has_private() {
            (Some(encoder(rng)?), Some(encoder(rng)?))
        } else {
            (None, None)
        };
        let decoder = if variant.has_decoder() {
            Some(Mlp::new(
                &chain(config.decoder_input(), &config.decoder_hidden, d),
                Activation::Relu,
                Activation::Linear,
                false,
                rng,
            )?)
        } else {
            None
        };
        let critic = if variant.has_critic() {
            Some(Mlp::new(
                &chain(config.alignment_dim(), &config.critic_hidden, 1),
                Activation::Relu,
                Activation::Linear,
                false,
                rng,
            )?)
        } else {
            None
        };
        Ok(Self {
            config,
            shared,
            private_cell_line,
            private_tissue,
            decoder,
            critic,
            head: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> ModelVariant {
        self.config.variant
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    /// Fresh classification head on the shared embedding.
    pub fn attach_head(&mut self, rng: &mut impl Rng) -> Result<()> {
        self.head = Some(Mlp::new(
            &chain(self.config.latent_dim, &self.config.head_hidden, 1),
            Activation::Relu,
            Activation::Sigmoid,
            false,
            rng,
        )?);
        Ok(())
    }

    pub fn private_encoder(&self, domain: Domain) -> Option<&Mlp> {
        match domain {
            Domain::CellLine => self.private_cell_line.as_ref(),
            Domain::Tissue => self.private_tissue.as_ref(),
        }
    }

    /// VAE posterior parameters `(mu, logvar)`.
    pub fn encode_gaussian(&self, batch: &Tensor) -> Result<(Tensor, Tensor)> {
        if self.variant() != ModelVariant::Vae {
            return Err(Error::invalid(format!("{} has no Gaussian encoder", self.variant())));
        }
        let k = self.config.latent_dim;
        let out = self.shared.forward(batch)?;
        Ok((out.slice_lastdim(0, k)?, out.slice_lastdim(k, k)?))
    }

    /// Shared embedding (posterior mean for the VAE) and, if the variant has
    /// private encoders, the private embedding of `domain`.
    pub fn encode(&self, batch: &Tensor, domain: Domain) -> Result<EmbeddingPair> {
        let shared = if self.variant() == ModelVariant::Vae {
            self.encode_gaussian(batch)?.0
        } else {
            self.shared.forward(batch)?
        };
        let private = self.private_encoder(domain).map(|enc| enc.forward(batch)).transpose()?;
        Ok(EmbeddingPair {
            shared,
            private,
            domain,
        })
    }

    /// Decoder input: shared ⊕ private, or the shared embedding alone.
    pub fn decoder_input(&self, pair: &EmbeddingPair) -> Result<Tensor> {
        let k = self.config.latent_dim;
        let check = |t: &Tensor| -> Result<()> {
            if t.dims2()?.1 != k {
                return Err(Error::Shape {
                    op: "reconstruct",
                    lhs: t.shape().to_vec(),
                    rhs: vec![k],
                });
            }
            Ok(())
        };
        check(&pair.shared)?;
        match (&pair.private, self.variant().has_private()) {
            (Some(p), true) => {
                check(p)?;
                pair.shared.concat_lastdim(p)
            }
            (None, false) => Ok(pair.shared.clone()),
            (None, true) => Err(Error::invalid("reconstruction needs the private embedding")),
            (Some(_), false) => Err(Error::invalid(format!("{} has no private embedding", self.variant()))),
        }
    }

    pub fn reconstruct(&self, pair: &EmbeddingPair) -> Result<Tensor> {
        self.decode(&self.decoder_input(pair)?)
    }

    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        let decoder = self
            .decoder
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{} has no decoder", self.variant())))?;
        decoder.forward(z)
    }

    /// The embedding the variant aligns across domains.
    pub fn alignment_input(&self, pair: &EmbeddingPair) -> Result<Tensor> {
        match self.variant().alignment() {
            Alignment::Mmd(AlignTarget::Concat) | Alignment::Adversarial(AlignTarget::Concat) => {
                let private = pair
                    .private
                    .as_ref()
                    .ok_or_else(|| Error::invalid("concatenated alignment needs the private embedding"))?;
                pair.shared.concat_lastdim(private)
            }
            Alignment::None => Err(Error::invalid(format!("{} aligns nothing", self.variant()))),
            _ => Ok(pair.shared.clone()),
        }
    }

    /// Critic scores `[n, 1]`.
    pub fn critic_scores(&self, z: &Tensor) -> Result<Tensor> {
        self.critic
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{} has no critic", self.variant())))?
            .forward(z)
    }

    /// Head probabilities `[n]` from the shared embedding alone.
    pub fn classify(&self, batch: &Tensor) -> Result<Tensor> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::invalid("model has no classification head"))?;
        let z = self.encode_shared(batch)?;
        let p = head.forward(&z)?;
        let n = p.dims2()?.0;
        p.reshape(&[n])
    }

    /// Shared embedding only (posterior mean for the VAE).
    pub fn encode_shared(&self, batch: &Tensor) -> Result<Tensor> {
        if self.variant() == ModelVariant::Vae {
            Ok(self.encode_gaussian(batch)?.0)
        } else {
            self.shared.forward(batch)
        }
    }

    /// Shared embeddings of a whole matrix, without recording a graph.
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        no_grad(|| self.encode_shared(x))
    }

    /// Named networks present in the bundle, in a fixed order.
    pub fn groups(&self) -> Vec<(&'static str, &Mlp)> {
        [
            (SHARED_ENCODER, Some(&self.shared)),
            (PRIVATE_CELL_LINE_ENCODER, self.private_cell_line.as_ref()),
            (PRIVATE_TISSUE_ENCODER, self.private_tissue.as_ref()),
            (DECODER, self.decoder.as_ref()),
            (CRITIC, self.critic.as_ref()),
            (HEAD, self.head.as_ref()),
        ]
        .into_iter()
        .filter_map(|(n, m)| m.map(|m| (n, m)))
        .collect()
    }

    pub fn group_mut(&mut self, name: &str) -> Option<&mut Mlp> {
        match name {
            SHARED_ENCODER => Some(&mut self.shared),
            PRIVATE_CELL_LINE_ENCODER => self.private_cell_line.as_mut(),
            PRIVATE_TISSUE_ENCODER => self.private_tissue.as_mut(),
            DECODER => self.decoder.as_mut(),
            CRITIC => self.critic.as_mut(),
            HEAD => self.head.as_mut(),
            _ => None,
        }
    }

    /// Parameters of the autoencoder part (encoders and decoder), named
    /// `"<group>.<layer>.<weight|bias>"`.
    pub fn autoencoder_parameters_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        let groups: [(&str, Option<&mut Mlp>); 4] = [
            (SHARED_ENCODER, Some(&mut self.shared)),
            (PRIVATE_CELL_LINE_ENCODER, self.private_cell_line.as_mut()),
            (PRIVATE_TISSUE_ENCODER, self.private_tissue.as_mut()),
            (DECODER, self.decoder.as_mut()),
        ];
        for (g, m) in groups {
            if let Some(m) = m {
                out.extend(m.parameters_mut().into_iter().map(|(n, t)| (format!("{g}.{n}"), t)));
            }
        }
        out
    }

    pub fn to_checkpoint(&self, mut meta: CheckpointMeta) -> Result<Checkpoint> {
        meta.model = serde_json::json!({
            "config": self.config,
            "has_head": self.head.is_some(),
        });
        let mut ck = Checkpoint::new(meta);
        for (group, mlp) in self.groups() {
            for (name, t) in mlp.parameters() {
                ck.push(format!("{group}.{name}"), t.shape(), t.to_vec())?;
            }
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(ck.meta.model["config"].clone())
            .map_err(|e| Error::Checkpoint(format!("model config: {e}")))?;
        let has_head = ck.meta.model["has_head"].as_bool().unwrap_or(false);
        // Placeholder weights, all overwritten below.
        let mut rng = crate::rng::Streams::new(0).rng("placeholder");
        let mut model = Self::build(config, &mut rng)?;
        if has_head {
            model.attach_head(&mut rng)?;
        }
        let names: Vec<&str> = model.groups().iter().map(|(n, _)| *n).collect();
        let stored = ck.groups();
        if stored != names {
            return Err(Error::Checkpoint(format!(
                "checkpoint groups {stored:?} do not match the {} layout {names:?}",
                model.variant()
            )));
        }
        for group in names {
            let entries = ck.group(group);
            let mlp = model.group_mut(group).expect("group listed above");
            for (name, t) in mlp.parameters_mut() {
                let e = entries
                    .get(&name)
                    .ok_or_else(|| Error::Checkpoint(format!("missing {group}.{name}")))?;
                if e.shape != t.shape() {
                    return Err(Error::Checkpoint(format!(
                        "{group}.{name}: stored shape {:?}, model expects {:?}",
                        e.shape,
                        t.shape()
                    )));
                }
                *t = Tensor::param(e.data.clone(), &e.shape)?;
            }
        }
        Ok(model)
    }
}

/// `mu + exp(logvar / 2) ⊙ e` with `e ~ N(0, I)`.
pub fn reparameterize(mu: &Tensor, logvar: &Tensor, rng: &mut impl Rng) -> Result<Tensor> {
    let noise: Vec<f32> = (0..mu.numel()).map(|_| StandardNormal.sample(rng)).collect();
    let eps = Tensor::new(noise, mu.shape())?;
    mu.add(&logvar.scale(0.5).exp().mul(&eps)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    fn small(variant: ModelVariant) -> CodeAeModel {
        let cfg = ModelConfig {
            variant,
            input_dim: 12,
            latent_dim: 4,
            encoder_hidden: vec![8],
            decoder_hidden: vec![8],
            critic_hidden: vec![6],
            head_hidden: vec![5],
            corruption: Corruption::default(),
        };
        CodeAeModel::build(cfg, &mut Streams::new(11).rng("init")).unwrap()
    }

    fn batch(n: usize, d: usize, seed: u64) -> Tensor {
        let mut rng = Streams::new(seed).rng("data");
        let v = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(v, &[n, d]).unwrap()
    }

    #[test]
    fn default_scale_dims() {
        let cfg = ModelConfig::new(ModelVariant::CodeAeAdv, 1424);
        let m = CodeAeModel::build(cfg, &mut Streams::new(1).rng("init")).unwrap();
        let x = batch(4, 1424, 2);
        let pair = no_grad(|| m.encode(&x, Domain::CellLine)).unwrap();
        assert_eq!(pair.shared.shape(), &[4, 128]);
        assert_eq!(pair.private.as_ref().unwrap().shape(), &[4, 128]);
        assert_eq!(m.decoder_input(&pair).unwrap().shape(), &[4, 256]);
        assert_eq!(no_grad(|| m.reconstruct(&pair)).unwrap().shape(), &[4, 1424]);
        assert_eq!(m.groups().len(), 5);
    }

    #[test]
    fn variant_dispatch_table() {
        use AlignTarget::*;
        assert_eq!(ModelVariant::CodeAeAdv.alignment(), Alignment::Adversarial(Concat));
        assert_eq!(ModelVariant::CodeAeMmd.alignment(), Alignment::Mmd(Concat));
        assert_eq!(ModelVariant::DsnAdv.alignment(), Alignment::Adversarial(Shared));
        assert_eq!(ModelVariant::DsnMmd.alignment(), Alignment::Mmd(Shared));
        assert_eq!(ModelVariant::Adae.alignment(), Alignment::Adversarial(Single));
        for v in ModelVariant::ALL {
            let expect = matches!(v, ModelVariant::CodeAeAdv | ModelVariant::DsnAdv | ModelVariant::Adae);
            assert_eq!(v.has_critic(), expect, "{v}");
            assert_eq!(small(v).critic.is_some(), expect, "{v}");
        }
    }

    #[test]
    fn ae_has_single_encoder() {
        let m = small(ModelVariant::Ae);
        let names: Vec<_> = m.groups().iter().map(|(n, _)| *n).collect();
        assert_eq!(names, vec![SHARED_ENCODER, DECODER]);
        assert_eq!(m.decoder.as_ref().unwrap().input_dim(), 4);
    }

    #[test]
    fn dsn_and_code_ae_differ_only_in_alignment_width() {
        let dsn = small(ModelVariant::DsnAdv);
        let code = small(ModelVariant::CodeAeAdv);
        assert_eq!(dsn.critic.as_ref().unwrap().input_dim(), 4);
        assert_eq!(code.critic.as_ref().unwrap().input_dim(), 8);
        let layout = |m: &CodeAeModel| m.groups().iter().map(|(n, _)| *n).collect::<Vec<_>>();
        assert_eq!(layout(&dsn), layout(&code));
    }

    #[test]
    fn encode_is_deterministic_and_domain_specific() {
        let m = small(ModelVariant::CodeAeBase);
        let x = batch(3, 12, 5);
        let a = m.encode(&x, Domain::CellLine).unwrap();
        let b = m.encode(&x, Domain::CellLine).unwrap();
        let c = m.encode(&x, Domain::Tissue).unwrap();
        assert_eq!(a.shared.data(), b.shared.data());
        assert_eq!(a.private.as_ref().unwrap().data(), b.private.as_ref().unwrap().data());
        assert_eq!(a.shared.data(), c.shared.data());
        assert_ne!(a.private.unwrap().data(), c.private.unwrap().data());
    }

    #[test]
    fn concat_order_matters() {
        let m = small(ModelVariant::CodeAeBase);
        let pair = m.encode(&batch(3, 12, 6), Domain::Tissue).unwrap();
        let swapped = EmbeddingPair {
            shared: pair.private.clone().unwrap(),
            private: Some(pair.shared.clone()),
            domain: pair.domain,
        };
        assert_ne!(
            m.reconstruct(&pair).unwrap().data(),
            m.reconstruct(&swapped).unwrap().data()
        );
    }

    #[test]
    fn classify_uses_shared_embedding_only() {
        let mut m = small(ModelVariant::CodeAeAdv);
        assert!(m.classify(&batch(2, 12, 1)).is_err());
        m.attach_head(&mut Streams::new(3).rng("head")).unwrap();
        let x = batch(5, 12, 7);
        let p = m.classify(&x).unwrap();
        assert!(p.data().iter().all(|v| *v > 0.0 && *v < 1.0));
        let before = p.to_vec();
        for (_, t) in m.private_cell_line.as_mut().unwrap().parameters_mut() {
            *t = Tensor::param(t.data().iter().map(|v| v + 0.5).collect(), t.shape()).unwrap();
        }
        assert_eq!(m.classify(&x).unwrap().to_vec(), before);
    }

    #[test]
    fn zero_head_gives_one_half() {
        let mut m = small(ModelVariant::Ae);
        m.attach_head(&mut Streams::new(3).rng("head")).unwrap();
        for (_, t) in m.head.as_mut().unwrap().parameters_mut() {
            *t = Tensor::param(vec![0.0; t.numel()], t.shape()).unwrap();
        }
        let p = m.classify(&batch(4, 12, 8)).unwrap();
        assert!(p.data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn checkpoint_roundtrip_restores_every_group() {
        let mut m = small(ModelVariant::CodeAeAdv);
        m.attach_head(&mut Streams::new(4).rng("head")).unwrap();
        let ck = m.to_checkpoint(CheckpointMeta::default()).unwrap();
        let back = CodeAeModel::from_checkpoint(
            &CodeAeModel::from_checkpoint(&ck)
                .unwrap()
                .to_checkpoint(CheckpointMeta::default())
                .unwrap(),
        )
        .unwrap();
        for ((na, a), (nb, b)) in m.groups().iter().zip(back.groups()) {
            assert_eq!(*na, nb);
            for ((_, ta), (_, tb)) in a.parameters().iter().zip(b.parameters()) {
                assert!(ta.data().iter().zip(tb.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
        assert_eq!(back.config(), m.config());
    }

    #[test]
    fn rejects_bad_dims_and_names() {
        let mut cfg = ModelConfig::new(ModelVariant::Ae, 0);
        cfg.latent_dim = 0;
        match CodeAeModel::build(cfg, &mut Streams::new(1).rng("init")) {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("{other:?}"),
        }
        assert!("plasma".parse::<Domain>().is_err());
        assert_eq!("code-ae-adv".parse::<ModelVariant>().unwrap(), ModelVariant::CodeAeAdv);
        assert_eq!(serde_json::to_string(&ModelVariant::MlpOnly).unwrap(), "\"MLP_ONLY\"");
    }

    #[test]
    fn vae_encodes_mean_and_reconstructs() {
        let m = small(ModelVariant::Vae);
        let x = batch(3, 12, 9);
        let (mu, logvar) = m.encode_gaussian(&x).unwrap();
        assert_eq!(mu.shape(), &[3, 4]);
        assert_eq!(logvar.shape(), &[3, 4]);
        let pair = m.encode(&x, Domain::Tissue).unwrap();
        assert_eq!(pair.shared.data(), mu.data());
        assert_eq!(m.reconstruct(&pair).unwrap().shape(), &[3, 12]);
    }
}
