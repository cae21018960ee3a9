//! Pretraining (including the alternating adversarial schedule), supervised
//! fine-tuning with gradual unfreezing, and the cross-validated protocol.

mod finetune;
mod pretrain;
mod protocol;

pub use finetune::{finetune, oversample, EarlyStopper};
pub use pretrain::{epoch_batches, pretrain, procedure_counts};
pub use protocol::{
    check_data, finetune_fold, fold_assignment, pretrain_model, run_protocol, FoldRun, Method, ProtocolConfig,
    ProtocolData, ProtocolOutcome, SeedRun,
};

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::losses::{KernelConfig, LossWeights};
use crate::nn::AdamConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneSchedule {
    pub max_epochs: usize,
    pub patience: usize,
    /// Number of head-only epochs before the shared encoder is unfrozen.
    pub unfreeze_epoch: usize,
    pub lr: f32,
    /// Learning-rate factor applied when the encoder is unfrozen.
    pub lr_decay: f32,
    pub batch_size: usize,
    /// Resample the minority class to parity in every epoch.
    pub oversample: bool,
}

impl Default for FinetuneSchedule {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            patience: 10,
            unfreeze_epoch: 10,
            lr: 1e-3,
            lr_decay: 0.1,
            batch_size: 64,
            oversample: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSchedule {
    pub batch_size: usize,
    pub warmup_epochs: usize,
    pub train_epochs: usize,
    pub critic_steps: usize,
    pub weights: LossWeights,
    pub kernel: KernelConfig,
    pub optimizer: AdamConfig,
    /// Critic optimizer; defaults to the autoencoder's settings.
    pub critic_optimizer: Option<AdamConfig>,
    pub finetune: FinetuneSchedule,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            batch_size: 64,
            warmup_epochs: 100,
            train_epochs: 300,
            critic_steps: 5,
            weights: LossWeights::default(),
            kernel: KernelConfig::default(),
            optimizer: AdamConfig::default(),
            critic_optimizer: None,
            finetune: FinetuneSchedule::default(),
        }
    }
}

impl TrainingSchedule {
    /// Short schedule for tests and smoke runs: `(n_w, n_t, n_critic) = (5, 20, 2)`.
    pub fn desk() -> Self {
        Self {
            warmup_epochs: 5,
            train_epochs: 20,
            critic_steps: 2,
            finetune: FinetuneSchedule {
                max_epochs: 30,
                patience: 5,
                unfreeze_epoch: 5,
                ..FinetuneSchedule::default()
            },
            ..Self::default()
        }
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.batch_size < 2 {
            errs.push(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if self.critic_steps < 1 {
            errs.push("critic_steps must be >= 1".to_string());
        }
        errs.extend(self.weights.validate());
        errs.extend(self.kernel.validate());
        for (name, opt) in [
            ("optimizer", Some(&self.optimizer)),
            ("critic_optimizer", self.critic_optimizer.as_ref()),
        ] {
            if let Some(o) = opt {
                if !(o.lr.is_finite() && o.lr >= 0.0) {
                    errs.push(format!("{name}.lr must be finite and >= 0, got {}", o.lr));
                }
                if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
                    errs.push(format!("{name} betas must lie in [0, 1)"));
                }
                if !(o.eps > 0.0) {
                    errs.push(format!("{name}.eps must be > 0"));
                }
            }
        }
        let f = &self.finetune;
        if f.patience < 1 {
            errs.push("finetune.patience must be >= 1".to_string());
        }
        if f.max_epochs < 1 {
            errs.push("finetune.max_epochs must be >= 1".to_string());
        }
        if f.batch_size < 2 {
            errs.push(format!("finetune.batch_size must be >= 2, got {}", f.batch_size));
        }
        if !(f.lr.is_finite() && f.lr >= 0.0) {
            errs.push(format!("finetune.lr must be finite and >= 0, got {}", f.lr));
        }
        if !(f.lr_decay.is_finite() && f.lr_decay > 0.0) {
            errs.push(format!("finetune.lr_decay must be > 0, got {}", f.lr_decay));
        }
        errs
    }

    /// Hex digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("schedule serializes");
        format!("{:016x}", crate::rng::fnv1a(&json))
    }
}

/// One named loss value averaged over an epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub phase: String,
    pub loss: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounts {
    /// Autoencoder updates during adversarial warm-up.
    pub warmup: u64,
    pub critic: u64,
    /// Autoencoder updates with the generator term.
    pub generator: u64,
    /// Autoencoder updates of non-adversarial variants.
    pub autoencoder: u64,
    /// Fine-tuning updates with the encoder frozen and unfrozen.
    pub head_only: u64,
    pub head_and_encoder: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<LossRecord>,
    pub counts: UpdateCounts,
    /// Last epoch run when early stopping ended fine-tuning.
    pub early_stop_epoch: Option<usize>,
    /// Epoch whose weights were kept (fine-tuning only).
    pub best_epoch: Option<usize>,
    #[serde(skip)]
    pub wall_time: Duration,
    /// Sample ids that appeared in any training batch.
    #[serde(skip)]
    pub batch_ids: BTreeSet<String>,
}

impl RunTrace {
    pub fn push(&mut self, epoch: usize, phase: &str, loss: &str, value: f64) {
        self.records.push(LossRecord {
            epoch,
            phase: phase.to_string(),
            loss: loss.to_string(),
            value,
        });
    }

    /// Values of one loss in epoch order.
    pub fn series(&self, loss: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.loss == loss)
            .map(|r| r.value)
            .collect()
    }

    /// Line-delimited JSON, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"));
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> crate::Result<Vec<LossRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(crate::Error::from))
            .collect()
    }
}

/// Running means of named losses within one epoch, in first-seen order.
#[derive(Debug, Default)]
pub(crate) struct EpochMeans {
    sums: Vec<(&'static str, f64, usize)>,
}

impl EpochMeans {
    pub(crate) fn add(&mut self, name: &'static str, value: f32) {
        match self.sums.iter_mut().find(|(n, _, _)| *n == name) {
            Some(e) => {
                e.1 += f64::from(value);
                e.2 += 1;
            }
            None => self.sums.push((name, f64::from(value), 1)),
        }
    }

    pub(crate) fn flush(&mut self, trace: &mut RunTrace, epoch: usize, phase: &str) {
        for (name, sum, n) in self.sums.drain(..) {
            trace.push(epoch, phase, name, sum / n as f64);
        }
    }
}
