//! LSTM encoder-decoder trajectory forecaster with Gaussian-NLL training and
//! Monte-Carlo dropout inference, written against plain `Vec<f64>` buffers
//! with hand-derived backpropagation through time.

mod checkpoint;
mod loss;
mod lstm;
mod mc;
mod model;
mod train;
mod types;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use loss::{nll_grad, nll_loss, VARIANCE_FLOOR};
pub use lstm::{LstmCache, LstmLayer};
pub use mc::{mc_dropout_infer, mc_samples, McSample};
pub use model::{
    DecoderFeed, DropoutMasks, EncodedWindow, ModelConfig, ModelParams, OutputHead, RawForecast, Standardization,
    HEAD_OUTPUTS,
};
pub use train::{evaluate_nll, fit, train, TrainConfig, TrainOutcome, TrainingWindow};
pub use types::{write_forecast_csv, ForecastDistribution, StateSample, StepGaussian, Trajectory, FORECAST_CSV_HEADER};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("Monte-Carlo inference needs at least 2 passes, got {0}")]
    DegenerateN(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
