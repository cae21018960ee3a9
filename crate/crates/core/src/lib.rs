//! Shared/private factorized autoencoders for transferring expression-based
//! predictors across confounded data domains (cell lines to tissues).
//!
//! Modules, bottom up:
//! - [`tensor`]: dense tensors with second-order reverse-mode autodiff
//! - [`nn`]: MLPs, instance normalization, Adam, checkpoints
//! - [`losses`]: reconstruction, orthogonality, MMD, WGAN-GP and baseline losses
//! - [`models`]: the CODE-AE variants and baseline autoencoders
//! - [`train`]: pretraining schedules, fine-tuning, the evaluation protocol
//! - [`data`]: ingestion, feature selection, labeling, folds, synthetic data
//! - [`eval`]: AUROC/AUPRC, Welch's t-test, elastic net, transfer probes
//! - [`config`]: experiment configuration

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod models;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
