//! Discrete–continuous Bayesian emulator networks.
//!
//! Every architecture maps an `[b, h, w, c]` input to a head with, at each
//! pixel, a reflectance estimate per band, a log-variance (per band or
//! shared) and a clear-sky logit. Concrete dropout gates make the network
//! stochastic; [`mc_predict`] turns repeated passes into predictive
//! moments and [`static_predict`] runs the deterministic expectation.

mod checkpoint;
mod config;
mod inference;
mod loss;
mod model;
mod prediction;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{Architecture, ModelConfig, VarianceMode};
pub use inference::{mc_predict, static_predict, McOptions, DEFAULT_SAMPLES};
pub use loss::{dc_loss, dc_loss_on_graph, Batch, LossComponents, Sample};
pub use model::Model;
pub use prediction::{
    classify_cloud, predictive_moments, DcPrediction, HeadLayout, PredictiveDistribution,
    LOG_VARIANCE_RANGE,
};
pub use train::{train, EpochLog, TrainConfig, TrainingLog};

use crate::autodiff;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] autodiff::Error),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("unknown architecture `{0}` (expected dcfc, dccnn or dcvdsr)")]
    UnknownArchitecture(String),
    #[error("batch has no pixels")]
    EmptyBatch,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("clear-sky labels must be 0 or 1, found {0}")]
    Label(f64),
    #[error("at least one Monte-Carlo sample is required")]
    NoSamples,
    #[error("non-finite {term} loss ({value}) at epoch {epoch}, batch {batch}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        term: &'static str,
        value: f64,
    },
    #[error("optimizer failed at epoch {epoch}, batch {batch}: {source}")]
    Diverged {
        epoch: usize,
        batch: usize,
        source: autodiff::Error,
    },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("{0}")]
    Callback(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
