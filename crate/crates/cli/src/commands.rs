use std::path::{Path, PathBuf};

use dcae::config::ExperimentConfig;
use dcae::data::{synth_generate, SynthSpec};
use dcae::eval::{EvalReport, RECORDS_CSV, REPORT_JSON};
use dcae::models::CodeAeModel;
use dcae::nn::{Checkpoint, CheckpointMeta};
use dcae::train::{check_data, finetune_fold, fold_assignment, pretrain_model, run_protocol, Method, ProtocolData};
use dcae::{Error, Result};
use serde_json::json;

use crate::{Cli, Command, SynthArgs};

pub const PRETRAINED_CKPT: &str = "pretrained.ckpt";
pub const PRETRAIN_TRACE: &str = "pretrain_trace.jsonl";
pub const FINETUNED_CKPT: &str = "finetuned.ckpt";
pub const FINETUNE_TRACE: &str = "finetune_trace.jsonl";
pub const METRICS_JSON: &str = "metrics.json";
pub const PLOT_CSV: &str = "plot.csv";

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => synth(cli, args),
        Command::Pretrain => pretrain(&load_config(cli)?, cli.force),
        Command::Finetune => finetune(&load_config(cli)?, cli.force),
        Command::Protocol => protocol(&load_config(cli)?, cli.force),
        Command::Report { path } => report(path, cli.out.as_deref(), cli.force),
    }
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n: a.n,
        dim: a.dim,
        rank: a.rank,
        gamma: a.gamma,
        sigma: a.sigma,
        seed: cli.seed.unwrap_or(0),
        strata: a.strata,
    };
    // Report problems under the flag names the user typed.
    let errs = spec.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs.into_iter().map(|e| format!("--{e}")).collect()));
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    for p in synth_generate(&spec)?.save(&out, cli.force)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config(vec!["--config is required for this command".into()]))?;
    if !path.is_file() {
        return Err(Error::Config(vec![format!("config file {} not found", path.display())]));
    }
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.check()?;
    Ok(cfg)
}

fn refuse_overwrite(paths: &[PathBuf], force: bool) -> Result<()> {
    let existing: Vec<String> = paths
        .iter()
        .filter(|p| p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if force || existing.is_empty() {
        return Ok(());
    }
    Err(Error::Invalid(format!(
        "refusing to overwrite {} (use --force)",
        existing.join(", ")
    )))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn save_model(model: &CodeAeModel, path: &Path, seed: u64, epoch: usize, cfg: &ExperimentConfig) -> Result<()> {
    let meta = CheckpointMeta {
        seed,
        epoch: epoch as u64,
        schedule_hash: cfg.schedule.digest(),
        ..CheckpointMeta::default()
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    model.to_checkpoint(meta)?.save(path)
}

fn prepare(cfg: &ExperimentConfig) -> Result<ProtocolData> {
    let data = cfg.prepare_data()?;
    check_data(&data)?;
    log::info!(
        "{} cell lines, {} tissues ({} labeled), {} features",
        data.cell_lines.n_samples(),
        data.tissues.n_samples(),
        data.test.n_samples(),
        data.cell_lines.n_features()
    );
    Ok(data)
}

fn pretrain(cfg: &ExperimentConfig, force: bool) -> Result<()> {
    let variants: Vec<_> = cfg
        .model_variants()
        .into_iter()
        .filter(|v| v.needs_pretraining())
        .collect();
    if variants.is_empty() {
        return Err(Error::Config(vec!["no configured method needs pretraining".into()]));
    }
    let jobs: Vec<_> = variants
        .iter()
        .flat_map(|v| cfg.seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let mut targets = Vec::new();
    for (v, s) in &jobs {
        let dir = cfg.run_dir(Method::Model(*v), *s);
        targets.extend([dir.join(PRETRAINED_CKPT), dir.join(PRETRAIN_TRACE)]);
    }
    refuse_overwrite(&targets, force)?;
    let data = prepare(cfg)?;
    let protocol = cfg.protocol();
    for (v, seed) in jobs {
        log::info!("pretrain: {v} seed {seed}");
        let (model, trace) = pretrain_model(v, seed, &data, &protocol)?;
        let trace = trace.unwrap_or_default();
        let dir = cfg.run_dir(Method::Model(v), seed);
        let epochs = cfg.schedule.warmup_epochs + cfg.schedule.train_epochs;
        save_model(&model, &dir.join(PRETRAINED_CKPT), seed, epochs, cfg)?;
        write(&dir.join(PRETRAIN_TRACE), trace.to_jsonl())?;
        println!("{}", dir.display());
    }
    Ok(())
}

fn finetune(cfg: &ExperimentConfig, force: bool) -> Result<()> {
    let variants = cfg.model_variants();
    if variants.is_empty() {
        return Err(Error::Config(vec![
            "no configured method has an encoder to fine-tune".into()
        ]));
    }
    let jobs: Vec<_> = variants
        .iter()
        .flat_map(|v| cfg.seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let mut missing = Vec::new();
    let mut targets = Vec::new();
    for (v, s) in &jobs {
        let dir = cfg.run_dir(Method::Model(*v), *s);
        if v.needs_pretraining() && !dir.join(PRETRAINED_CKPT).is_file() {
            missing.push(format!(
                "missing {} (run `dcae pretrain` first)",
                dir.join(PRETRAINED_CKPT).display()
            ));
        }
        targets.extend([
            dir.join(FINETUNED_CKPT),
            dir.join(FINETUNE_TRACE),
            dir.join(METRICS_JSON),
        ]);
    }
    if !missing.is_empty() {
        return Err(Error::Config(missing));
    }
    refuse_overwrite(&targets, force)?;
    let data = prepare(cfg)?;
    let protocol = cfg.protocol();
    for (v, seed) in jobs {
        let dir = cfg.run_dir(Method::Model(v), seed);
        let model = if v.needs_pretraining() {
            let m = CodeAeModel::from_checkpoint(&Checkpoint::load(&dir.join(PRETRAINED_CKPT))?)?;
            if m.variant() != v || m.input_dim() != data.cell_lines.n_features() {
                return Err(Error::Invalid(format!(
                    "{} holds a {} model over {} features; the data has {}",
                    dir.join(PRETRAINED_CKPT).display(),
                    m.variant(),
                    m.input_dim(),
                    data.cell_lines.n_features()
                )));
            }
            m
        } else {
            pretrain_model(v, seed, &data, &protocol)?.0
        };
        log::info!("finetune: {v} seed {seed}");
        let fold_of = fold_assignment(&data, &protocol, seed)?;
        let (tuned, run) = finetune_fold(&model, seed, &data, &fold_of, 0, &protocol)?;
        let trace = run.trace.unwrap_or_default();
        save_model(
            &tuned,
            &dir.join(FINETUNED_CKPT),
            seed,
            trace.best_epoch.unwrap_or(0),
            cfg,
        )?;
        write(&dir.join(FINETUNE_TRACE), trace.to_jsonl())?;
        let metrics = json!({
            "method": v.name(),
            "seed": seed,
            "validation_fold": 0,
            "best_epoch": trace.best_epoch,
            "early_stop_epoch": trace.early_stop_epoch,
            "auroc": run.auroc,
            "auprc": run.auprc,
        });
        write(&dir.join(METRICS_JSON), serde_json::to_string_pretty(&metrics)? + "\n")?;
        println!("{v} seed {seed}: test AUROC {:.4}, AUPRC {:.4}", run.auroc, run.auprc);
    }
    Ok(())
}

fn protocol(cfg: &ExperimentConfig, force: bool) -> Result<()> {
    let mut targets = vec![cfg.out.join(REPORT_JSON), cfg.out.join(RECORDS_CSV)];
    for m in &cfg.methods {
        for s in &cfg.seeds {
            targets.push(cfg.run_dir(*m, *s).join(METRICS_JSON));
        }
    }
    refuse_overwrite(&targets, force)?;
    let data = prepare(cfg)?;
    let outcome = run_protocol(&data, &cfg.protocol())?;
    for run in &outcome.runs {
        let dir = cfg.run_dir(run.method, run.seed);
        if let Some(m) = &run.pretrained {
            let epochs = cfg.schedule.warmup_epochs + cfg.schedule.train_epochs;
            save_model(m, &dir.join(PRETRAINED_CKPT), run.seed, epochs, cfg)?;
        }
        if let Some(t) = &run.pretrain {
            write(&dir.join(PRETRAIN_TRACE), t.to_jsonl())?;
        }
        for f in &run.folds {
            if let Some(t) = &f.trace {
                write(&dir.join(format!("fold{}_trace.jsonl", f.fold)), t.to_jsonl())?;
            }
        }
        let folds: Vec<_> = run
            .folds
            .iter()
            .map(|f| {
                let t = f.trace.as_ref();
                json!({
                    "fold": f.fold,
                    "auroc": f.auroc,
                    "auprc": f.auprc,
                    "best_epoch": t.and_then(|t| t.best_epoch),
                    "early_stop_epoch": t.and_then(|t| t.early_stop_epoch),
                })
            })
            .collect();
        let metrics = json!({ "method": run.method.name(), "seed": run.seed, "folds": folds });
        write(&dir.join(METRICS_JSON), serde_json::to_string_pretty(&metrics)? + "\n")?;
    }
    outcome.report.save(&cfg.out)?;
    write(&cfg.out.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    print!("{}", outcome.report.table());
    Ok(())
}

fn report(path: &Path, out: Option<&Path>, force: bool) -> Result<()> {
    let report = EvalReport::load(path)?;
    let dir = match out {
        Some(o) => o.to_path_buf(),
        None if path.is_dir() => path.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let plot = dir.join(PLOT_CSV);
    refuse_overwrite(std::slice::from_ref(&plot), force)?;
    write(&plot, report.plot_csv())?;
    print!("{}", report.table());
    println!("\nplot data: {}", plot.display());
    Ok(())
}
