use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{finetune, pretrain, RunTrace, TrainingSchedule};
use crate::data::{merge_small_strata, stratified_kfold, ExpressionDataset};
use crate::error::{Error, Result};
use crate::eval::{
    auprc, auroc, elastic_net_fit, select_lambdas, EvalReport, MetricRecord, SolverOptions, AUPRC, AUROC, LAMBDA_GRID,
};
use crate::models::{CodeAeModel, ModelConfig, ModelVariant};
use crate::rng::Streams;
use crate::tensor::no_grad;

/// A model variant or the raw-feature elastic-net baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Model(ModelVariant),
    ElasticNet,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Model(v) => v.name(),
            Method::ElasticNet => "EN",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "EN" | "ELASTIC_NET" => Ok(Method::ElasticNet),
            _ => s.parse().map(Method::Model),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub folds: usize,
    /// Strata smaller than this are merged into one.
    pub min_stratum: usize,
    pub schedule: TrainingSchedule,
    /// Architecture template; variant and input width are filled per run.
    pub model: ModelConfig,
    /// Worker threads for independent (method, seed) runs.
    pub jobs: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Model(ModelVariant::CodeAeAdv)],
            seeds: vec![0],
            folds: 10,
            min_stratum: 10,
            schedule: TrainingSchedule::default(),
            model: ModelConfig::default(),
            jobs: 1,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.methods.is_empty() {
            errs.push("no methods listed".to_string());
        }
        let unique: HashSet<_> = self.methods.iter().collect();
        if unique.len() != self.methods.len() {
            errs.push("methods contain duplicates".to_string());
        }
        if self.seeds.is_empty() {
            errs.push("no seeds listed".to_string());
        }
        if self.folds < 2 {
            errs.push(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.jobs < 1 {
            errs.push("jobs must be >= 1".to_string());
        }
        errs.extend(self.schedule.validate());
        let mut m = self.model.clone();
        m.input_dim = m.input_dim.max(1);
        errs.extend(m.validate());
        errs
    }
}

/// Labeled cell lines, the unlabeled tissue pool used for pretraining, and
/// the labeled tissue test set.
#[derive(Debug, Clone)]
pub struct ProtocolData {
    pub cell_lines: ExpressionDataset,
    pub tissues: ExpressionDataset,
    pub test: ExpressionDataset,
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub auroc: f64,
    pub auprc: f64,
    pub trace: Option<RunTrace>,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub method: Method,
    pub seed: u64,
    pub pretrain: Option<RunTrace>,
    pub pretrained: Option<CodeAeModel>,
    pub folds: Vec<FoldRun>,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub report: EvalReport,
    pub runs: Vec<SeedRun>,
}

/// Feature sets agree and both labeled sets are usable.
pub fn check_data(data: &ProtocolData) -> Result<()> {
    let names = &data.cell_lines.feature_names;
    if &data.tissues.feature_names != names || &data.test.feature_names != names {
        return Err(Error::invalid("cell-line and tissue feature sets differ"));
    }
    data.cell_lines.labels()?;
    let y = data.test.labels()?;
    if !y.contains(&0) || !y.contains(&1) {
        return Err(Error::invalid("tissue test set has a single class"));
    }
    if data.cell_lines.strata.is_none() {
        return Err(Error::invalid("cell lines need strata for stratified folds"));
    }
    Ok(())
}

fn scores_of(model: &CodeAeModel, ds: &ExpressionDataset) -> Result<Vec<f64>> {
    let p = no_grad(|| model.classify(&ds.to_tensor()?))?;
    Ok(p.data().iter().map(|v| f64::from(*v)).collect())
}

fn model_streams(variant: ModelVariant, seed: u64) -> Streams {
    Streams::new(seed).child(variant.name())
}

/// Builds `variant` for `data` and pretrains it when the variant has an
/// autoencoder. Uses the same streams as [`run_protocol`].
pub fn pretrain_model(
    variant: ModelVariant,
    seed: u64,
    data: &ProtocolData,
    cfg: &ProtocolConfig,
) -> Result<(CodeAeModel, Option<RunTrace>)> {
    let streams = model_streams(variant, seed);
    let model_cfg = ModelConfig {
        variant,
        input_dim: data.cell_lines.n_features(),
        ..cfg.model.clone()
    };
    let mut model = CodeAeModel::build(model_cfg, &mut streams.rng("init"))?;
    let trace = if variant.needs_pretraining() {
        let pool = ExpressionDataset {
            labels: None,
            strata: None,
            ..data.cell_lines.clone()
        };
        Some(pretrain(
            &mut model,
            &pool,
            &data.tissues,
            &cfg.schedule,
            &streams.child("pretrain"),
        )?)
    } else {
        None
    };
    Ok((model, trace))
}

/// Stratified fold of every cell line for one seed.
pub fn fold_assignment(data: &ProtocolData, cfg: &ProtocolConfig, seed: u64) -> Result<Vec<usize>> {
    let (strata, _) = merge_small_strata(data.cell_lines.strata.as_deref().unwrap_or_default(), cfg.min_stratum);
    stratified_kfold(
        &strata,
        Some(data.cell_lines.labels()?),
        cfg.folds,
        &mut Streams::new(seed).rng("folds"),
    )
}

/// Fine-tunes a copy of `pretrained` with fold `f` held out for early
/// stopping and scores the test set.
pub fn finetune_fold(
    pretrained: &CodeAeModel,
    seed: u64,
    data: &ProtocolData,
    fold_of: &[usize],
    f: usize,
    cfg: &ProtocolConfig,
) -> Result<(CodeAeModel, FoldRun)> {
    let streams = model_streams(pretrained.variant(), seed);
    let train_idx: Vec<usize> = (0..fold_of.len()).filter(|i| fold_of[*i] != f).collect();
    let val_idx: Vec<usize> = (0..fold_of.len()).filter(|i| fold_of[*i] == f).collect();
    let mut m = pretrained.clone();
    let trace = finetune(
        &mut m,
        &data.cell_lines.subset(&train_idx),
        &data.cell_lines.subset(&val_idx),
        &cfg.schedule,
        &streams.child(&format!("fold{f}")),
    )?;
    let test_ids: HashSet<&str> = data.test.sample_ids.iter().map(String::as_str).collect();
    if let Some(id) = trace.batch_ids.iter().find(|id| test_ids.contains(id.as_str())) {
        return Err(Error::invalid(format!(
            "test sample {id:?} leaked into a fine-tuning batch"
        )));
    }
    let y_test = data.test.labels()?;
    let s = scores_of(&m, &data.test)?;
    let run = FoldRun {
        fold: f,
        auroc: auroc(&s, y_test)?,
        auprc: auprc(&s, y_test)?,
        trace: Some(trace),
    };
    Ok((m, run))
}

fn run_model(
    variant: ModelVariant,
    seed: u64,
    data: &ProtocolData,
    fold_of: &[usize],
    cfg: &ProtocolConfig,
) -> Result<SeedRun> {
    let (model, pretrain_trace) = pretrain_model(variant, seed, data, cfg)?;
    let folds = (0..cfg.folds)
        .map(|f| finetune_fold(&model, seed, data, fold_of, f, cfg).map(|(_, run)| run))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedRun {
        method: Method::Model(variant),
        seed,
        pretrain: pretrain_trace,
        pretrained: Some(model),
        folds,
    })
}

/// Raw-feature baseline: penalties chosen once per seed by CV on the cell
/// lines, then refit on each iteration's training folds.
fn run_elastic_net(seed: u64, data: &ProtocolData, fold_of: &[usize], cfg: &ProtocolConfig) -> Result<SeedRun> {
    let streams = Streams::new(seed).child("EN");
    let x = data.cell_lines.to_matrix()?;
    let y = data.cell_lines.labels()?;
    let opts = SolverOptions::default();
    let lambdas = select_lambdas(&x, y, &LAMBDA_GRID, &mut streams.rng("cv"), opts)?;
    let test = data.test.to_matrix()?;
    let y_test = data.test.labels()?;
    let mut folds = Vec::with_capacity(cfg.folds);
    for f in 0..cfg.folds {
        let idx: Vec<usize> = (0..fold_of.len()).filter(|i| fold_of[*i] != f).collect();
        let yt: Vec<u8> = idx.iter().map(|i| y[*i]).collect();
        let model = elastic_net_fit(&x.select_rows(&idx), &yt, lambdas.lambda1, lambdas.lambda2, opts)?;
        let s = model.decision(&test)?;
        folds.push(FoldRun {
            fold: f,
            auroc: auroc(&s, y_test)?,
            auprc: auprc(&s, y_test)?,
            trace: None,
        });
    }
    Ok(SeedRun {
        method: Method::ElasticNet,
        seed,
        pretrain: None,
        pretrained: None,
        folds,
    })
}

/// For every method and seed: pretrain once on the unlabeled pool, then for
/// each of `folds` stratified folds fine-tune on the rest with that fold
/// for early stopping, and score the tissue test set.
pub fn run_protocol(data: &ProtocolData, cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    check_data(data)?;
    let jobs: Vec<(Method, u64)> = cfg
        .methods
        .iter()
        .flat_map(|m| cfg.seeds.iter().map(move |s| (*m, *s)))
        .collect();
    let run = |&(method, seed): &(Method, u64)| -> Result<SeedRun> {
        let fold_of = fold_assignment(data, cfg, seed)?;
        log::info!("protocol: {method} seed {seed}");
        match method {
            Method::Model(v) => run_model(v, seed, data, &fold_of, cfg),
            Method::ElasticNet => run_elastic_net(seed, data, &fold_of, cfg),
        }
    };
    let results: Vec<Result<SeedRun>> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };
    let mut runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| (r.method, r.seed));
    let mut records = Vec::new();
    for r in &runs {
        for f in &r.folds {
            for (metric, value) in [(AUROC, f.auroc), (AUPRC, f.auprc)] {
                records.push(MetricRecord {
                    variant: r.method.name().to_string(),
                    seed: r.seed,
                    fold: f.fold,
                    metric: metric.to_string(),
                    value,
                });
            }
        }
    }
    Ok(ProtocolOutcome {
        report: EvalReport::from_records(records),
        runs,
    })
}
