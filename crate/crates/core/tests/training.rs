mod support;

use dcae::data::{stratified_kfold, ExpressionDataset, SynthSpec};
use dcae::models::{CodeAeModel, ModelConfig, ModelVariant};
use dcae::rng::Streams;
use dcae::train::{finetune, pretrain, TrainingSchedule};
use rand::seq::SliceRandom;
use support::fixtures::synth;

#[test]
fn base_reconstruction_drops_by_half() {
    let d = synth(&SynthSpec::default());
    let mut schedule = TrainingSchedule::desk();
    schedule.warmup_epochs = 0;
    schedule.train_epochs = 50;
    let streams = Streams::new(0);
    let config = ModelConfig::new(ModelVariant::CodeAeBase, d.cell_lines.n_features());
    let mut m = CodeAeModel::build(config, &mut streams.rng("init")).unwrap();
    let trace = pretrain(&mut m, &d.cell_lines, &d.tissues, &schedule, &streams).unwrap();
    for loss in ["recon", "total"] {
        let s = trace.series(loss);
        assert_eq!(s.len(), 50, "{loss}");
        assert!(s[49] < 0.5 * s[0], "{loss}: epoch 1 {:.4}, epoch 50 {:.4}", s[0], s[49]);
    }
}

fn best_val_auroc(pretrained: &CodeAeModel, train: &ExpressionDataset, val: &ExpressionDataset, seed: u64) -> f64 {
    let mut m = pretrained.clone();
    let trace = finetune(&mut m, train, val, &TrainingSchedule::desk(), &Streams::new(seed)).unwrap();
    trace.series("val_auroc").into_iter().fold(f64::MIN, f64::max)
}

fn relabeled(ds: &ExpressionDataset, labels: Vec<u8>) -> ExpressionDataset {
    ExpressionDataset {
        labels: Some(labels),
        ..ds.clone()
    }
}

/// Fine-tuning on real labels beats the early-stopped score reached on
/// permuted labels by more than three null standard deviations.
#[test]
fn finetuning_beats_the_permutation_null() {
    const PERMUTATIONS: u64 = 20;
    let d = synth(&SynthSpec {
        seed: 3,
        ..SynthSpec::default()
    });
    let streams = Streams::new(3);
    let config = ModelConfig::new(ModelVariant::CodeAeAdv, d.cell_lines.n_features());
    let mut base = CodeAeModel::build(config, &mut streams.rng("init")).unwrap();
    pretrain(
        &mut base,
        &d.cell_lines,
        &d.tissues,
        &TrainingSchedule::desk(),
        &streams,
    )
    .unwrap();

    let cl = &d.cell_lines;
    let strata = cl.strata.clone().unwrap();
    let fold = stratified_kfold(&strata, Some(cl.labels().unwrap()), 5, &mut streams.rng("folds")).unwrap();
    let (val_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..cl.n_samples()).partition(|i| fold[*i] == 0);
    let score =
        |ds: &ExpressionDataset, seed| best_val_auroc(&base, &ds.subset(&train_idx), &ds.subset(&val_idx), seed);

    let observed = score(cl, 0);
    let null: Vec<f64> = (0..PERMUTATIONS)
        .map(|p| {
            let mut y = cl.labels().unwrap().to_vec();
            y.shuffle(&mut Streams::new(p).rng("permute"));
            score(&relabeled(cl, y), p)
        })
        .collect();
    let mean = null.iter().sum::<f64>() / PERMUTATIONS as f64;
    let sd = (null.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (PERMUTATIONS - 1) as f64).sqrt();
    assert!(
        observed > mean + 3.0 * sd,
        "observed {observed:.4}, null {mean:.4} ± {sd:.4}"
    );
    assert!(observed > 0.5 + 3.0 * sd, "observed {observed:.4}, null sd {sd:.4}");
}
