//! Datasets and training profiles shared by the slower tests.

use dcae::data::{synth_generate, SynthData, SynthSpec};
use dcae::eval::{transfer_probe, Matrix};
use dcae::models::{CodeAeModel, ModelConfig, ModelVariant};
use dcae::rng::Streams;
use dcae::tensor::no_grad;
use dcae::train::{pretrain, ProtocolData, TrainingSchedule};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn small_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n: 300,
        dim: 40,
        rank: 4,
        seed,
        ..SynthSpec::default()
    }
}

pub fn small_model(variant: ModelVariant, input_dim: usize) -> ModelConfig {
    ModelConfig {
        latent_dim: 8,
        encoder_hidden: vec![32],
        decoder_hidden: vec![32],
        critic_hidden: vec![16],
        head_hidden: vec![8],
        ..ModelConfig::new(variant, input_dim)
    }
}

/// Cell lines for fine-tuning, every tissue both in the pretraining pool
/// and in the test set.
pub fn protocol_data(d: &SynthData) -> ProtocolData {
    ProtocolData {
        cell_lines: d.cell_lines.clone(),
        tissues: d.tissues.clone(),
        test: d.tissues.clone(),
    }
}

/// Raw-feature elastic net trained on the first half of the cell lines,
/// scored on the second half (within) and on all tissues (cross).
pub fn raw_within_and_cross(d: &SynthData, seed: u64) -> (f64, f64) {
    let n = d.cell_lines.n_samples();
    let half: Vec<usize> = (0..n / 2).collect();
    let rest: Vec<usize> = (n / 2..n).collect();
    let train = d.cell_lines.subset(&half);
    let held = d.cell_lines.subset(&rest);
    let x = train.to_matrix().unwrap();
    let y = train.labels().unwrap();
    let streams = Streams::new(seed);
    let within = transfer_probe(&x, y, &held.to_matrix().unwrap(), held.labels().unwrap(), 1, &streams).unwrap();
    let cross = transfer_probe(
        &x,
        y,
        &d.tissues.to_matrix().unwrap(),
        d.tissues.labels().unwrap(),
        1,
        &streams,
    )
    .unwrap();
    (within.auroc_mean, cross.auroc_mean)
}

/// Drug-response AUCs for 677 cell lines, 301 of them responsive.
///
/// Construction: responsive lines get AUC ~ U(0.30, 0.48), resistant ones
/// U(0.52, 0.95), so every grid threshold except 0.50 puts some lines on
/// the wrong side of the response group. Expression has 10 features; the
/// first is `4 * group + N(0, 0.3²)` and the rest are pure noise. The
/// reference classifier therefore predicts the 0.50 labels perfectly and
/// every other threshold's labels imperfectly, so the search should land
/// on 0.50 and the 301/376 split.
pub fn response_fixture(seed: u64) -> (Vec<f64>, Matrix) {
    const N: usize = 677;
    const RESPONSIVE: usize = 301;
    const D: usize = 10;
    let mut rng = Streams::new(seed).rng("fixture");
    let mut aucs = Vec::with_capacity(N);
    let mut x = Vec::with_capacity(N * D);
    for i in 0..N {
        let group = i < RESPONSIVE;
        aucs.push(if group {
            rng.random_range(0.30..0.48)
        } else {
            rng.random_range(0.52..0.95)
        });
        let noise: f64 = StandardNormal.sample(&mut rng);
        x.push(if group { 4.0 } else { 0.0 } + 0.3 * noise);
        for _ in 1..D {
            x.push(StandardNormal.sample(&mut rng));
        }
    }
    (aucs, Matrix::new(x, N, D).unwrap())
}

// Deconfounding benchmark profile.

pub const BENCH_SEEDS: u64 = 10;

pub fn bench_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n: 1000,
        dim: 200,
        rank: 8,
        gamma: 3.0,
        sigma: 0.5,
        seed,
        ..SynthSpec::default()
    }
}

/// `(n_w, n_t, n_critic) = (5, 60, 1)`, batches of 32. The orthogonality
/// weight is scaled down because its floor under instance normalization
/// grows as `N k²`.
pub fn bench_schedule() -> TrainingSchedule {
    let mut s = TrainingSchedule::desk();
    s.warmup_epochs = 5;
    s.train_epochs = 60;
    s.critic_steps = 1;
    s.batch_size = 32;
    s.weights.alpha = 0.001;
    s
}

pub fn bench_model(variant: ModelVariant, input_dim: usize) -> ModelConfig {
    ModelConfig {
        latent_dim: 32,
        encoder_hidden: vec![128, 64],
        decoder_hidden: vec![64, 128],
        ..ModelConfig::new(variant, input_dim)
    }
}

pub fn raw_transfer_auroc(d: &SynthData, seed: u64) -> f64 {
    transfer_probe(
        &d.cell_lines.to_matrix().unwrap(),
        d.cell_lines.labels().unwrap(),
        &d.tissues.to_matrix().unwrap(),
        d.tissues.labels().unwrap(),
        1,
        &Streams::new(seed),
    )
    .unwrap()
    .auroc_mean
}

/// Pretrains `variant` and probes its shared embeddings: an elastic net
/// fit on cell-line embeddings, scored on tissue embeddings.
pub fn embedding_transfer_auroc(
    variant: ModelVariant,
    d: &SynthData,
    schedule: &TrainingSchedule,
    config: ModelConfig,
    seed: u64,
) -> f64 {
    let streams = Streams::new(seed).child(variant.name());
    let mut m = CodeAeModel::build(config, &mut streams.rng("init")).unwrap();
    pretrain(&mut m, &d.cell_lines, &d.tissues, schedule, &streams.child("pretrain")).unwrap();
    let embed = |ds: &dcae::data::ExpressionDataset| {
        let z = no_grad(|| m.embed(&ds.to_tensor().unwrap())).unwrap();
        let (rows, cols) = z.dims2().unwrap();
        Matrix::from_f32(z.data(), rows, cols).unwrap()
    };
    transfer_probe(
        &embed(&d.cell_lines),
        d.cell_lines.labels().unwrap(),
        &embed(&d.tissues),
        d.tissues.labels().unwrap(),
        1,
        &Streams::new(seed),
    )
    .unwrap()
    .auroc_mean
}

pub fn synth(spec: &SynthSpec) -> SynthData {
    synth_generate(spec).unwrap()
}
