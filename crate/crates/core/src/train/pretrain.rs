use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{EpochMeans, RunTrace, TrainingSchedule, UpdateCounts};
use crate::data::ExpressionDataset;
use crate::error::{Error, Result};
use crate::losses::{coral_loss, critic_loss, dae_corrupt, diff_loss, gen_loss, mmd_loss, recon_loss, vae_kl};
use crate::models::{reparameterize, Alignment, CodeAeModel, Domain, ModelVariant};
use crate::nn::Adam;
use crate::rng::{SeededRng, Streams};
use crate::tensor::{backward, no_grad, Tensor};

/// Batches per epoch: `⌊min(N_c, N_t) / N⌋`.
pub fn epoch_batches(n_c: usize, n_t: usize, batch: usize) -> usize {
    n_c.min(n_t) / batch
}

/// Closed-form `(warm-up, critic, generator)` update counts of the
/// adversarial schedule.
pub fn procedure_counts(n_w: usize, n_t: usize, batches: usize, n_critic: usize) -> (u64, u64, u64) {
    let (n_w, n_t, b) = (n_w as u64, n_t as u64, batches as u64);
    (n_w * b, n_t * b, n_t * (b / n_critic as u64))
}

/// Loss terms of one paired batch.
struct BaseTerms {
    total: Tensor,
    recon: Tensor,
    diff: Option<Tensor>,
    kl: Option<Tensor>,
    align_c: Option<Tensor>,
    align_t: Option<Tensor>,
}

struct Rngs {
    batching: SeededRng,
    noise: SeededRng,
    interp: SeededRng,
}

fn base_terms(
    model: &CodeAeModel,
    xc: &Tensor,
    xt: &Tensor,
    schedule: &TrainingSchedule,
    noise: &mut SeededRng,
) -> Result<BaseTerms> {
    let variant = model.variant();
    let w = schedule.weights;
    if variant == ModelVariant::Vae {
        let (mu_c, lv_c) = model.encode_gaussian(xc)?;
        let (mu_t, lv_t) = model.encode_gaussian(xt)?;
        let zc = reparameterize(&mu_c, &lv_c, noise)?;
        let zt = reparameterize(&mu_t, &lv_t, noise)?;
        let recon = recon_loss(xc, &model.decode(&zc)?, xt, &model.decode(&zt)?)?;
        let kl = vae_kl(&mu_c, &lv_c)?.add(&vae_kl(&mu_t, &lv_t)?)?;
        return Ok(BaseTerms {
            total: recon.add(&kl)?,
            recon,
            diff: None,
            kl: Some(kl),
            align_c: None,
            align_t: None,
        });
    }
    let (inc, int) = if variant == ModelVariant::Dae {
        let c = model.config().corruption;
        (dae_corrupt(xc, c, noise)?, dae_corrupt(xt, c, noise)?)
    } else {
        (xc.clone(), xt.clone())
    };
    let pc = model.encode(&inc, Domain::CellLine)?;
    let pt = model.encode(&int, Domain::Tissue)?;
    let recon = recon_loss(xc, &model.reconstruct(&pc)?, xt, &model.reconstruct(&pt)?)?;
    let mut total = recon.clone();
    let mut diff = None;
    if variant.has_private() && w.alpha != 0.0 {
        let (cp, tp) = (
            pc.private.as_ref().expect("private"),
            pt.private.as_ref().expect("private"),
        );
        let d = diff_loss(&pc.shared, cp, &pt.shared, tp)?;
        total = total.add(&d.scale(w.alpha))?;
        diff = Some(d);
    }
    let (align_c, align_t) = match variant.alignment() {
        Alignment::None => (None, None),
        _ => (Some(model.alignment_input(&pc)?), Some(model.alignment_input(&pt)?)),
    };
    Ok(BaseTerms {
        total,
        recon,
        diff,
        kl: None,
        align_c,
        align_t,
    })
}

fn check_inputs(model: &CodeAeModel, xc: &ExpressionDataset, xt: &ExpressionDataset, batch: usize) -> Result<usize> {
    for ds in [xc, xt] {
        if ds.n_samples() == 0 {
            return Err(Error::invalid(format!("{} dataset is empty", ds.domain)));
        }
        if ds.n_features() != model.input_dim() {
            return Err(Error::invalid(format!(
                "{} dataset has {} features, model expects {}",
                ds.domain,
                ds.n_features(),
                model.input_dim()
            )));
        }
    }
    if xc.feature_names != xt.feature_names {
        return Err(Error::invalid("cell-line and tissue feature sets differ"));
    }
    let b = epoch_batches(xc.n_samples(), xt.n_samples(), batch);
    if b == 0 {
        return Err(Error::invalid(format!(
            "batch size {batch} exceeds the smaller domain ({} samples)",
            xc.n_samples().min(xt.n_samples())
        )));
    }
    Ok(b)
}

/// `b` disjoint batches of `size` indices from a fresh permutation of `0..n`.
fn draw_batches(n: usize, b: usize, size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks_exact(size).take(b).map(<[usize]>::to_vec).collect()
}

fn ae_step(model: &mut CodeAeModel, opt: &mut Adam, loss: &Tensor) -> Result<()> {
    let grads = backward(loss, false)?;
    opt.step(model.autoencoder_parameters_mut(), &grads)
}

fn critic_step(
    model: &mut CodeAeModel,
    opt: &mut Adam,
    xc: &Tensor,
    xt: &Tensor,
    schedule: &TrainingSchedule,
    rng: &mut SeededRng,
) -> Result<f32> {
    let (zc, zt) = no_grad(|| -> Result<_> {
        let pc = model.encode(xc, Domain::CellLine)?;
        let pt = model.encode(xt, Domain::Tissue)?;
        Ok((model.alignment_input(&pc)?, model.alignment_input(&pt)?))
    })?;
    let loss = critic_loss(|z| model.critic_scores(z), &zc, &zt, schedule.weights.lambda_gp, rng)?;
    let value = loss.item()?;
    let grads = backward(&loss, false)?;
    let critic = model.critic.as_mut().expect("adversarial variant has a critic");
    opt.step(
        critic
            .parameters_mut()
            .into_iter()
            .map(|(n, t)| (format!("critic.{n}"), t)),
        &grads,
    )?;
    Ok(value)
}

fn record_base(means: &mut EpochMeans, terms: &BaseTerms) -> Result<()> {
    means.add("recon", terms.recon.item()?);
    if let Some(d) = &terms.diff {
        means.add("diff", d.item()?);
    }
    if let Some(k) = &terms.kl {
        means.add("kl", k.item()?);
    }
    Ok(())
}

/// Unsupervised pretraining on both domains, dispatched on the variant.
///
/// Adversarial variants run `warmup_epochs` on the base loss, then
/// `train_epochs` in which the critic is updated on every batch and the
/// autoencoder on every `critic_steps`-th batch (1-based) with the
/// generator term added. Other variants minimize their objective on every
/// batch for `warmup_epochs + train_epochs` epochs. Each epoch draws
/// `⌊min(N_c, N_t) / N⌋` batches without replacement from each domain.
pub fn pretrain(
    model: &mut CodeAeModel,
    xc: &ExpressionDataset,
    xt: &ExpressionDataset,
    schedule: &TrainingSchedule,
    streams: &Streams,
) -> Result<RunTrace> {
    let errs = schedule.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let started = Instant::now();
    let mut trace = RunTrace::default();
    let variant = model.variant();
    if !variant.needs_pretraining() {
        return Ok(trace);
    }
    let n = schedule.batch_size;
    let b = check_inputs(model, xc, xt, n)?;
    let mut rngs = Rngs {
        batching: streams.rng("batching"),
        noise: streams.rng("noise"),
        interp: streams.rng("interp"),
    };
    let mut ae_opt = Adam::new(schedule.optimizer);
    let mut critic_opt = Adam::new(schedule.critic_optimizer.unwrap_or(schedule.optimizer));
    let adversarial = variant.is_adversarial();
    let total_epochs = schedule.warmup_epochs + schedule.train_epochs;
    let mut counts = UpdateCounts::default();
    let w = schedule.weights;

    for epoch in 1..=total_epochs {
        let warm = adversarial && epoch <= schedule.warmup_epochs;
        let phase = match (adversarial, warm) {
            (false, _) => "pretrain",
            (true, true) => "warmup",
            (true, false) => "adversarial",
        };
        let bc = draw_batches(xc.n_samples(), b, n, &mut rngs.batching);
        let bt = draw_batches(xt.n_samples(), b, n, &mut rngs.batching);
        let mut means = EpochMeans::default();
        for (t, (ic, it)) in bc.iter().zip(&bt).enumerate() {
            let t = t + 1;
            let (x_c, x_t) = (xc.batch(ic)?, xt.batch(it)?);
            if adversarial && !warm {
                let c = critic_step(model, &mut critic_opt, &x_c, &x_t, schedule, &mut rngs.interp)?;
                counts.critic += 1;
                means.add("critic", c);
                if t % schedule.critic_steps != 0 {
                    continue;
                }
                let terms = base_terms(model, &x_c, &x_t, schedule, &mut rngs.noise)?;
                let align_t = terms.align_t.as_ref().expect("adversarial variant aligns");
                let g = gen_loss(|z| model.critic_scores(z), align_t)?;
                let total = terms.total.add(&g.scale(w.lambda_gen))?;
                record_base(&mut means, &terms)?;
                means.add("gen", g.item()?);
                means.add("total", total.item()?);
                ae_step(model, &mut ae_opt, &total)?;
                counts.generator += 1;
                continue;
            }
            let terms = base_terms(model, &x_c, &x_t, schedule, &mut rngs.noise)?;
            let mut total = terms.total.clone();
            if !warm {
                match variant.alignment() {
                    Alignment::Mmd(_) => {
                        let (zc, zt) = (
                            terms.align_c.as_ref().expect("aligned"),
                            terms.align_t.as_ref().expect("aligned"),
                        );
                        let m = mmd_loss(zc, zt, &schedule.kernel)?;
                        means.add("mmd", m.item()?);
                        total = total.add(&m.scale(w.beta))?;
                    }
                    Alignment::Coral(_) => {
                        let (zc, zt) = (
                            terms.align_c.as_ref().expect("aligned"),
                            terms.align_t.as_ref().expect("aligned"),
                        );
                        let c = coral_loss(zc, zt)?;
                        means.add("coral", c.item()?);
                        total = total.add(&c.scale(w.beta))?;
                    }
                    _ => {}
                }
            }
            record_base(&mut means, &terms)?;
            means.add("total", total.item()?);
            ae_step(model, &mut ae_opt, &total)?;
            if warm {
                counts.warmup += 1;
            } else {
                counts.autoencoder += 1;
            }
        }
        means.flush(&mut trace, epoch, phase);
        if log::log_enabled!(log::Level::Debug) {
            let last: Vec<String> = trace
                .records
                .iter()
                .filter(|r| r.epoch == epoch)
                .map(|r| format!("{}={:.4}", r.loss, r.value))
                .collect();
            log::debug!("{variant} epoch {epoch}/{total_epochs} [{phase}] {}", last.join(" "));
        }
    }
    trace.counts = counts;
    trace.wall_time = started.elapsed();
    log::info!(
        "{variant} pretrained: {total_epochs} epochs x {b} batches in {:.1?}",
        trace.wall_time
    );
    Ok(trace)
}
