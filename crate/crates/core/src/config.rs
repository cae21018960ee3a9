//! JSON experiment configuration and the data pipeline it describes.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    binarize_by_auc, default_threshold_grid, load_expression, load_labels, reindex_features, select_top_varied,
    synth_generate, union_features, Direction, ExpressionDataset, Orientation, SynthSpec,
};
use crate::error::{Error, Result};
use crate::models::{Domain, ModelConfig, ModelVariant};
use crate::rng::Streams;
use crate::train::{Method, ProtocolConfig, ProtocolData, TrainingSchedule};

/// Expression and label files for one drug.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub cell_lines: PathBuf,
    pub tissues: PathBuf,
    /// CSV with `sample_id, drug, auc[, stratum]`.
    pub labels: PathBuf,
    pub drug: String,
    #[serde(default)]
    pub orientation: Orientation,
    /// Apply `log2(x + 1)` on load.
    #[serde(default)]
    pub log2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Files(FileSource),
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub min_stratum: usize,
    pub schedule: TrainingSchedule,
    pub model: ModelConfig,
    /// Most varied features kept per domain before taking the union;
    /// `None` keeps every feature.
    pub top_features: Option<usize>,
    pub threshold_grid: Vec<f64>,
    pub direction: Direction,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            data: DataSource::Synth(SynthSpec::default()),
            methods: p.methods,
            seeds: p.seeds,
            folds: p.folds,
            min_stratum: p.min_stratum,
            schedule: p.schedule,
            model: p.model,
            top_features: None,
            threshold_grid: default_threshold_grid(),
            direction: Direction::default(),
            out: PathBuf::from("runs"),
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config file. Relative data paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        if let (DataSource::Files(f), Some(base)) = (&mut cfg.data, path.parent()) {
            for p in [&mut f.cell_lines, &mut f.tissues, &mut f.labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Every problem at once: schema constraints and missing input files.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = self.protocol().validate();
        match &self.data {
            DataSource::Synth(spec) => errs.extend(spec.validate().into_iter().map(|e| format!("data.synth.{e}"))),
            DataSource::Files(f) => {
                for (key, p) in [
                    ("cell_lines", &f.cell_lines),
                    ("tissues", &f.tissues),
                    ("labels", &f.labels),
                ] {
                    if !p.is_file() {
                        errs.push(format!("data.files.{key}: missing input file {}", p.display()));
                    }
                }
                if f.drug.trim().is_empty() {
                    errs.push("data.files.drug is empty".to_string());
                }
            }
        }
        if self.top_features == Some(0) {
            errs.push("top_features must be > 0".to_string());
        }
        if self.threshold_grid.is_empty() {
            errs.push("threshold_grid is empty".to_string());
        }
        if let Some(t) = self.threshold_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            errs.push(format!("threshold_grid values must lie in (0, 1), got {t}"));
        }
        errs
    }

    pub fn check(&self) -> Result<()> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            methods: self.methods.clone(),
            seeds: self.seeds.clone(),
            folds: self.folds,
            min_stratum: self.min_stratum,
            schedule: self.schedule.clone(),
            model: self.model.clone(),
            jobs: self.jobs,
        }
    }

    pub fn model_variants(&self) -> Vec<ModelVariant> {
        self.methods
            .iter()
            .filter_map(|m| match m {
                Method::Model(v) => Some(*v),
                Method::ElasticNet => None,
            })
            .collect()
    }

    /// `<out>/<method>/<seed>/`.
    pub fn run_dir(&self, method: Method, seed: u64) -> PathBuf {
        self.out.join(method.name()).join(seed.to_string())
    }

    /// Loads (or generates) both domains, selects features and labels the
    /// samples.
    pub fn prepare_data(&self) -> Result<ProtocolData> {
        self.check()?;
        match &self.data {
            DataSource::Synth(spec) => {
                let d = synth_generate(spec)?;
                let (cell_lines, tissues) = self.select_features(d.cell_lines, d.tissues)?;
                Ok(ProtocolData {
                    test: tissues.clone(),
                    cell_lines,
                    tissues,
                })
            }
            DataSource::Files(f) => self.prepare_files(f),
        }
    }

    fn select_features(
        &self,
        c: ExpressionDataset,
        t: ExpressionDataset,
    ) -> Result<(ExpressionDataset, ExpressionDataset)> {
        let t = if t.feature_names == c.feature_names {
            t
        } else {
            reindex_features(&t, &c.feature_names)?
        };
        let Some(k) = self.top_features else {
            return Ok((c, t));
        };
        let pick = |ds: &ExpressionDataset| -> Result<Vec<String>> {
            let k = k.min(ds.n_features());
            Ok(select_top_varied(ds, k)?
                .into_iter()
                .map(|j| ds.feature_names[j].clone())
                .collect())
        };
        let names = union_features(&pick(&c)?, &pick(&t)?)?;
        Ok((reindex_features(&c, &names)?, reindex_features(&t, &names)?))
    }

    fn prepare_files(&self, f: &FileSource) -> Result<ProtocolData> {
        let c = load_expression(&f.cell_lines, f.orientation, f.log2, Domain::CellLine)?;
        let t = load_expression(&f.tissues, f.orientation, f.log2, Domain::Tissue)?;
        let (c, t) = self.select_features(c, t)?;
        let records: Vec<_> = load_labels(&f.labels)?
            .into_iter()
            .filter(|r| r.drug == f.drug)
            .collect();
        if records.is_empty() {
            return Err(Error::invalid(format!(
                "{} has no rows for drug {:?}",
                f.labels.display(),
                f.drug
            )));
        }
        let mut seen = HashSet::new();
        if let Some(r) = records.iter().find(|r| !seen.insert(r.sample_id.as_str())) {
            return Err(Error::invalid(format!("duplicate label for sample {:?}", r.sample_id)));
        }
        let attach = |ds: &ExpressionDataset| -> Result<(ExpressionDataset, Vec<f64>)> {
            let by_id: std::collections::HashMap<&str, f64> =
                records.iter().map(|r| (r.sample_id.as_str(), r.auc)).collect();
            let triples: Vec<_> = records
                .iter()
                .map(|r| (r.sample_id.clone(), 0, r.stratum.clone()))
                .collect();
            let out = ds.attach(&triples)?;
            let aucs = out.sample_ids.iter().map(|id| by_id[id.as_str()]).collect();
            Ok((out, aucs))
        };
        let (mut cell_lines, c_auc) = attach(&c)?;
        let outcome = binarize_by_auc(
            &c_auc,
            &cell_lines.to_matrix()?,
            &self.threshold_grid,
            self.direction,
            &Streams::new(self.seeds.first().copied().unwrap_or(0)),
        )?;
        log::info!(
            "{}: threshold {} gives {} responsive of {} cell lines",
            f.drug,
            outcome.threshold,
            outcome.responsive(),
            outcome.labels.len()
        );
        cell_lines.labels = Some(outcome.labels);
        let (mut test, t_auc) = attach(&t)?;
        test.labels = Some(
            t_auc
                .iter()
                .map(|a| self.direction.label(*a, outcome.threshold))
                .collect(),
        );
        test.strata = None;
        Ok(ProtocolData {
            cell_lines,
            tissues: t,
            test,
        })
    }
}
