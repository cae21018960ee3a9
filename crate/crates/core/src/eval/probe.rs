use serde::{Deserialize, Serialize};

use super::elastic_net::{
    elastic_net_fit, label_folds, select_lambdas, LambdaChoice, Matrix, SolverOptions, LAMBDA_GRID,
};
use super::metrics::{auprc, auroc};
use super::welch::mean_var;
use crate::error::{Error, Result};
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub auprc_mean: f64,
    pub auprc_std: f64,
    pub aurocs: Vec<f64>,
    pub auprcs: Vec<f64>,
    pub lambdas: LambdaChoice,
}

impl ProbeResult {
    /// `mean±std` with four decimals, AUROC then AUPRC.
    pub fn summary(&self) -> String {
        format!(
            "AUROC {:.4}±{:.4}  AUPRC {:.4}±{:.4}",
            self.auroc_mean, self.auroc_std, self.auprc_mean, self.auprc_std
        )
    }
}

fn require_two_classes(what: &str, y: &[u8]) -> Result<()> {
    let pos = y.iter().filter(|v| **v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::invalid(format!(
            "{what} has a single class ({pos} positive of {})",
            y.len()
        )));
    }
    Ok(())
}

/// Fits an elastic net on the source group and scores the target group.
///
/// Penalties are chosen once by 3-fold CV on the source. Each of the `reps`
/// repetitions refits on the source with one of `reps` stratified folds
/// held back, so the spread reflects sensitivity to the training sample.
pub fn transfer_probe(
    source: &Matrix,
    y_source: &[u8],
    target: &Matrix,
    y_target: &[u8],
    reps: usize,
    streams: &Streams,
) -> Result<ProbeResult> {
    require_two_classes("source group", y_source)?;
    require_two_classes("target group", y_target)?;
    if source.cols != target.cols {
        return Err(Error::invalid(format!(
            "source has {} features, target {}",
            source.cols, target.cols
        )));
    }
    if reps == 0 {
        return Err(Error::invalid("transfer probe needs at least one repetition"));
    }
    let opts = SolverOptions::default();
    let lambdas = select_lambdas(source, y_source, &LAMBDA_GRID, &mut streams.rng("probe.cv"), opts)?;
    let folds = label_folds(y_source, reps, &mut streams.rng("probe.folds"));
    let mut aurocs = Vec::with_capacity(reps);
    let mut auprcs = Vec::with_capacity(reps);
    for r in 0..reps {
        let keep: Vec<usize> = (0..y_source.len()).filter(|i| reps == 1 || folds[*i] != r).collect();
        let y: Vec<u8> = keep.iter().map(|i| y_source[*i]).collect();
        let model = elastic_net_fit(&source.select_rows(&keep), &y, lambdas.lambda1, lambdas.lambda2, opts)?;
        let scores = model.decision(target)?;
        aurocs.push(auroc(&scores, y_target)?);
        auprcs.push(auprc(&scores, y_target)?);
    }
    let (auroc_mean, va) = mean_var(&aurocs);
    let (auprc_mean, vp) = mean_var(&auprcs);
    Ok(ProbeResult {
        auroc_mean,
        auroc_std: va.sqrt(),
        auprc_mean,
        auprc_std: vp.sqrt(),
        aurocs,
        auprcs,
        lambdas,
    })
}
