//! Metrics, Welch's t-test, the elastic-net classifier and transfer probes.

mod elastic_net;
mod metrics;
mod probe;
mod report;
mod welch;

pub use elastic_net::{
    cv_auroc, elastic_net_fit, label_folds, select_lambdas, ElasticNetModel, LambdaChoice, Matrix, SolverOptions,
    LAMBDA_GRID,
};
pub use metrics::{auprc, auroc, midranks};
pub use probe::{transfer_probe, ProbeResult};
pub use report::{Aggregate, EvalReport, MetricRecord, PairTest, AUPRC, AUROC, RECORDS_CSV, REPORT_JSON};
pub use welch::{mean_var, welch_t_test, TTest};
