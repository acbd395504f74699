use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use super::ForecastError;

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint: shapes, dropout and standardization travel inside
/// `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub params: ModelParams,
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

pub fn save_checkpoint<W: Write>(writer: W, params: &ModelParams, loss_trace: &[f64]) -> Result<(), ForecastError> {
    let ck = Checkpoint { version: CHECKPOINT_VERSION, params: params.clone(), loss_trace: loss_trace.to_vec() };
    serde_json::to_writer(writer, &ck)?;
    Ok(())
}

/// Reads and validates a checkpoint.
pub fn load_checkpoint<R: Read>(reader: R) -> Result<Checkpoint, ForecastError> {
    let ck: Checkpoint = serde_json::from_reader(reader)?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(ForecastError::CheckpointVersion(ck.version));
    }
    ck.params.validate()?;
    Ok(ck)
}
