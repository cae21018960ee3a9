use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{cv_auroc, label_folds, Matrix, SolverOptions};
use crate::rng::Streams;

/// Which side of the AUC threshold counts as responsive (label 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Drug-response AUC below the threshold means responsive.
    #[default]
    BelowIsResponsive,
    AboveIsResponsive,
}

impl Direction {
    pub fn label(self, auc: f64, threshold: f64) -> u8 {
        let below = auc < threshold;
        u8::from(match self {
            Direction::BelowIsResponsive => below,
            Direction::AboveIsResponsive => !below,
        })
    }
}

/// 0.05, 0.10, ..., 0.95.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=19).map(|i| f64::from(i) / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelOutcome {
    pub labels: Vec<u8>,
    pub threshold: f64,
    /// Mean CV AUROC per grid threshold; `None` where the threshold was
    /// skipped.
    pub scores: Vec<(f64, Option<f64>)>,
}

impl LabelOutcome {
    pub fn responsive(&self) -> usize {
        self.labels.iter().filter(|v| **v == 1).count()
    }
}

/// Penalties of the reference classifier used while searching thresholds.
pub const REFERENCE_LAMBDA: f64 = 0.01;

/// Picks the threshold whose labels an elastic net on `x` predicts best
/// under 3-fold CV. Thresholds leaving fewer than 3 samples in a class
/// cannot be cross-validated and are skipped; ties go to the smaller
/// threshold.
pub fn binarize_by_auc(
    aucs: &[f64],
    x: &Matrix,
    grid: &[f64],
    direction: Direction,
    streams: &Streams,
) -> Result<LabelOutcome> {
    const K: usize = 3;
    if aucs.len() != x.rows {
        return Err(Error::invalid(format!(
            "{} AUC values for {} samples",
            aucs.len(),
            x.rows
        )));
    }
    if grid.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if let Some(a) = aucs.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::invalid(format!("AUC {a} outside [0, 1]")));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64, Vec<u8>)> = None;
    let mut scores = Vec::with_capacity(sorted.len());
    for &t in &sorted {
        let labels: Vec<u8> = aucs.iter().map(|a| direction.label(*a, t)).collect();
        let pos = labels.iter().filter(|v| **v == 1).count();
        if pos < K || labels.len() - pos < K {
            scores.push((t, None));
            continue;
        }
        let folds = label_folds(&labels, K, &mut streams.rng("binarize.cv"));
        let score = cv_auroc(
            x,
            &labels,
            REFERENCE_LAMBDA,
            REFERENCE_LAMBDA,
            &folds,
            K,
            SolverOptions::default(),
        )?;
        scores.push((t, score));
        if let Some(s) = score {
            if best.as_ref().is_none_or(|b| s > b.1) {
                best = Some((t, s, labels));
            }
        }
    }
    let (threshold, _, labels) =
        best.ok_or_else(|| Error::invalid("every threshold in the grid yields a single class"))?;
    Ok(LabelOutcome {
        labels,
        threshold,
        scores,
    })
}
