//! Expression matrices: ingestion, feature selection, labeling, folds and
//! a synthetic confounded generator.

mod folds;
mod io;
mod labels;
mod select;
mod synth;

pub use folds::{merge_small_strata, stratified_kfold, OTHER_STRATUM};
pub use io::{load_expression, load_labels, save_expression, write_labels, LabelRecord, Orientation};
pub use labels::{binarize_by_auc, default_threshold_grid, Direction, LabelOutcome};
pub use select::{reindex_features, select_top_varied, union_features};
pub use synth::{synth_generate, SynthData, SynthSpec, SynthTruth, SYNTH_DRUG, SYNTH_FILES};

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::eval::Matrix;
use crate::models::Domain;
use crate::tensor::Tensor;

/// Samples × features matrix with ids, names and optional annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionDataset {
    pub sample_ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// Row-major `samples × features`.
    pub matrix: Vec<f32>,
    pub domain: Domain,
    pub labels: Option<Vec<u8>>,
    pub strata: Option<Vec<String>>,
}

impl ExpressionDataset {
    pub fn new(sample_ids: Vec<String>, feature_names: Vec<String>, matrix: Vec<f32>, domain: Domain) -> Result<Self> {
        let ds = Self {
            sample_ids,
            feature_names,
            matrix,
            domain,
            labels: None,
            strata: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.sample_ids.len(), self.feature_names.len());
        if self.matrix.len() != n * d {
            return Err(Error::invalid(format!(
                "matrix holds {} values, expected {n} samples x {d} features",
                self.matrix.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.sample_ids.iter().find(|s| !seen.insert(s.as_str())) {
            return Err(Error::invalid(format!("duplicate sample id {dup:?}")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.feature_names.iter().find(|s| !seen.insert(s.as_str())) {
            return Err(Error::invalid(format!("duplicate feature name {dup:?}")));
        }
        if let Some(i) = self.matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at sample {:?}, feature {:?}",
                self.sample_ids[i / d],
                self.feature_names[i % d]
            )));
        }
        if let Some(l) = &self.labels {
            if l.len() != n || l.iter().any(|v| *v > 1) {
                return Err(Error::invalid("labels must be 0/1, one per sample"));
            }
        }
        if let Some(s) = &self.strata {
            if s.len() != n {
                return Err(Error::invalid("strata must have one entry per sample"));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.n_features();
        &self.matrix[i * d..(i + 1) * d]
    }

    /// Constant tensor of the rows `idx`.
    pub fn batch(&self, idx: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * self.n_features());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor::new(data, &[idx.len(), self.n_features()])
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(self.matrix.clone(), &[self.n_samples(), self.n_features()])
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        Matrix::from_f32(&self.matrix, self.n_samples(), self.n_features())
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut matrix = Vec::with_capacity(idx.len() * self.n_features());
        for &i in idx {
            matrix.extend_from_slice(self.row(i));
        }
        Self {
            sample_ids: idx.iter().map(|i| self.sample_ids[*i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            matrix,
            domain: self.domain,
            labels: self.labels.as_ref().map(|l| idx.iter().map(|i| l[*i]).collect()),
            strata: self
                .strata
                .as_ref()
                .map(|s| idx.iter().map(|i| s[*i].clone()).collect()),
        }
    }

    pub fn labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("{} dataset has no labels", self.domain)))
    }

    /// Attaches labels and strata from label records matched by sample id;
    /// samples without a record are dropped.
    pub fn attach(&self, records: &[(String, u8, Option<String>)]) -> Result<Self> {
        let by_id: std::collections::HashMap<&str, (u8, Option<&String>)> = records
            .iter()
            .map(|(id, y, s)| (id.as_str(), (*y, s.as_ref())))
            .collect();
        let keep: Vec<usize> = (0..self.n_samples())
            .filter(|i| by_id.contains_key(self.sample_ids[*i].as_str()))
            .collect();
        if keep.is_empty() {
            return Err(Error::invalid(format!("no {} sample has a label", self.domain)));
        }
        let mut out = self.subset(&keep);
        out.labels = Some(out.sample_ids.iter().map(|id| by_id[id.as_str()].0).collect());
        out.strata = Some(
            out.sample_ids
                .iter()
                .map(|id| by_id[id.as_str()].1.cloned().unwrap_or_else(|| "unknown".into()))
                .collect(),
        );
        Ok(out)
    }
}
