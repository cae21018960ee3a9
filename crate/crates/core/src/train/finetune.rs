use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{EpochMeans, RunTrace, TrainingSchedule};
use crate::data::ExpressionDataset;
use crate::error::{Error, Result};
use crate::eval::auroc;
use crate::losses::bce_loss;
use crate::models::{CodeAeModel, ModelVariant, HEAD, SHARED_ENCODER};
use crate::nn::{Adam, AdamConfig, Mlp};
use crate::rng::Streams;
use crate::tensor::{backward, no_grad};

/// Tracks the best validation score; ties keep the earliest epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records a score; returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if self.best.is_none_or(|(_, b)| score > b) {
            self.best = Some((epoch, score));
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

/// Epoch index list with the minority class resampled to parity: whole
/// copies of the minority first, the remainder drawn without replacement.
pub fn oversample(labels: &[u8], rng: &mut impl Rng) -> Vec<usize> {
    let pos: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == 0).collect();
    let (minor, major) = if pos.len() < neg.len() { (pos, neg) } else { (neg, pos) };
    let mut out = major.clone();
    if minor.is_empty() {
        return out;
    }
    let mut need = major.len();
    while need >= minor.len() {
        out.extend_from_slice(&minor);
        need -= minor.len();
    }
    let mut extra = minor.clone();
    extra.shuffle(rng);
    out.extend_from_slice(&extra[..need]);
    out
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|v| **v == 1).count();
    (labels.len() - pos, pos)
}

fn validation_auroc(model: &CodeAeModel, val: &ExpressionDataset, labels: &[u8]) -> Result<f64> {
    let probs = no_grad(|| model.classify(&val.to_tensor()?))?;
    let scores: Vec<f64> = probs.data().iter().map(|p| f64::from(*p)).collect();
    auroc(&scores, labels)
}

fn named<'a>(group: &str, mlp: &'a mut Mlp) -> Vec<(String, &'a mut crate::tensor::Tensor)> {
    mlp.parameters_mut()
        .into_iter()
        .map(|(n, t)| (format!("{group}.{n}"), t))
        .collect()
}

/// Supervised fine-tuning of a classification head on the shared encoder.
///
/// The first `unfreeze_epoch` epochs train the head alone; afterwards the
/// shared encoder joins at `lr × lr_decay` (the head continues at the same
/// decayed rate). Training stops once validation AUROC has not improved for
/// `patience` epochs, and the best-scoring weights are restored. Private
/// encoders, decoder and critic are never touched. `MLP_ONLY` has no
/// pretrained encoder, so it trains head and encoder together from the
/// first epoch at the full rate.
pub fn finetune(
    model: &mut CodeAeModel,
    train: &ExpressionDataset,
    val: &ExpressionDataset,
    schedule: &TrainingSchedule,
    streams: &Streams,
) -> Result<RunTrace> {
    let errs = schedule.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let fs = &schedule.finetune;
    let y_train = train.labels()?;
    let y_val = val.labels()?;
    let (neg, pos) = class_counts(y_train);
    if neg == 0 || pos == 0 {
        return Err(Error::invalid(format!(
            "training fold has a single class ({neg} resistant, {pos} responsive)"
        )));
    }
    let (vneg, vpos) = class_counts(y_val);
    if vneg == 0 || vpos == 0 {
        return Err(Error::invalid(format!(
            "validation fold has a single class ({vneg} resistant, {vpos} responsive)"
        )));
    }
    for ds in [train, val] {
        if ds.n_features() != model.input_dim() {
            return Err(Error::invalid(format!(
                "fine-tuning data has {} features, model expects {}",
                ds.n_features(),
                model.input_dim()
            )));
        }
    }
    let train_ids: std::collections::HashSet<&str> = train.sample_ids.iter().map(String::as_str).collect();
    if let Some(id) = val.sample_ids.iter().find(|id| train_ids.contains(id.as_str())) {
        return Err(Error::invalid(format!(
            "sample {id:?} is in both the training and validation folds"
        )));
    }

    let started = Instant::now();
    if model.head.is_none() {
        model.attach_head(&mut streams.rng("head_init"))?;
    }
    let scratch = model.variant() == ModelVariant::MlpOnly;
    let frozen_epochs = if scratch { 0 } else { fs.unfreeze_epoch };
    let mut opt = Adam::new(AdamConfig {
        lr: fs.lr,
        ..schedule.optimizer
    });
    let mut batching = streams.rng("finetune.batching");
    let mut stopper = EarlyStopper::new(fs.patience);
    let mut best: Option<(Mlp, Mlp)> = None;
    let mut trace = RunTrace::default();
    let labels_f: Vec<f32> = y_train.iter().map(|v| f32::from(*v)).collect();

    for epoch in 1..=fs.max_epochs {
        let frozen = epoch <= frozen_epochs;
        if !scratch && epoch == frozen_epochs + 1 {
            opt.set_lr(fs.lr * fs.lr_decay);
        }
        let mut order = if fs.oversample {
            oversample(y_train, &mut batching)
        } else {
            (0..y_train.len()).collect()
        };
        order.shuffle(&mut batching);
        let mut means = EpochMeans::default();
        for idx in order.chunks(fs.batch_size) {
            let x = train.batch(idx)?;
            let y: Vec<f32> = idx.iter().map(|i| labels_f[*i]).collect();
            trace.batch_ids.extend(idx.iter().map(|i| train.sample_ids[*i].clone()));
            let head = model.head.as_ref().expect("head attached");
            let loss = if frozen {
                let z = no_grad(|| model.encode_shared(&x))?;
                let n = z.dims2()?.0;
                bce_loss(&head.forward(&z)?.reshape(&[n])?, &y)?
            } else {
                bce_loss(&model.classify(&x)?, &y)?
            };
            means.add("bce", loss.item()?);
            let grads = backward(&loss, false)?;
            let head = model.head.as_mut().expect("head attached");
            if frozen {
                opt.step(named(HEAD, head), &grads)?;
                trace.counts.head_only += 1;
            } else {
                let mut params = named(HEAD, head);
                params.extend(named(SHARED_ENCODER, &mut model.shared));
                opt.step(params, &grads)?;
                trace.counts.head_and_encoder += 1;
            }
        }
        let score = validation_auroc(model, val, y_val)?;
        let phase = if frozen { "head" } else { "unfrozen" };
        means.flush(&mut trace, epoch, phase);
        trace.push(epoch, phase, "val_auroc", score);
        if stopper.observe(epoch, score) {
            best = Some((model.shared.clone(), model.head.clone().expect("head attached")));
        }
        log::debug!("finetune epoch {epoch}: val AUROC {score:.4}");
        if stopper.should_stop() {
            trace.early_stop_epoch = Some(epoch);
            break;
        }
    }
    if let Some((shared, head)) = best {
        model.shared = shared;
        model.head = Some(head);
    }
    trace.best_epoch = stopper.best().map(|(e, _)| e);
    trace.wall_time = started.elapsed();
    Ok(trace)
}
