//! End-to-end experiments: pose recovery followed by trajectory transfer,
//! the pose-noise sensitivity sweep, cooperative forecasting and the two
//! occlusion studies.

mod cooperative;
mod dataset;
mod output;
mod pose;
mod sensitivity;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::forecaster::ForecastError;
use crate::geometry::GeometryError;
use crate::metrics::{MetricsError, TraceRow};
use crate::scene::SceneError;

pub use cooperative::{run_cooperative, run_occlusion, CooperativeConfig, ScenarioSeries};
pub use dataset::{synthetic_training_windows, SyntheticDatasetConfig};
pub use output::{
    write_report_json, write_sensitivity_csv, write_series_csv, SENSITIVITY_CSV_HEADER, SERIES_CSV_HEADER,
};
pub use pose::{estimate_rig_pose, PoseConfig, PoseError, PoseEstimate};
pub use sensitivity::{
    calibrated_walk, monotone_within_pooled_std, run_sensitivity, SensitivityConfig, SensitivityRow, DEFAULT_SIGMA_GRID,
};

/// Pipeline stage an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Matching,
    Ransac,
    Essential,
    Decompose,
    Scale,
    Transform,
    Observe,
    Forecast,
    Metrics,
    Training,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Matching => "matching",
            Stage::Ransac => "ransac",
            Stage::Essential => "essential",
            Stage::Decompose => "decompose",
            Stage::Scale => "scale",
            Stage::Transform => "transform",
            Stage::Observe => "observe",
            Stage::Forecast => "forecast",
            Stage::Metrics => "metrics",
            Stage::Training => "training",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{stage}: {source}")]
    Geometry { stage: Stage, source: GeometryError },
    #[error("{stage}: {source}")]
    Scene { stage: Stage, source: SceneError },
    #[error("{stage}: {source}")]
    Forecast { stage: Stage, source: ForecastError },
    #[error("{stage}: {source}")]
    Metrics { stage: Stage, source: MetricsError },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ScenarioError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            ScenarioError::Geometry { stage, .. }
            | ScenarioError::Scene { stage, .. }
            | ScenarioError::Forecast { stage, .. }
            | ScenarioError::Metrics { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

/// Attaches a stage to a lower-level error.
pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, ScenarioError>;
}

macro_rules! at_stage {
    ($err:ty, $variant:ident) => {
        impl<T> AtStage<T> for Result<T, $err> {
            fn at(self, stage: Stage) -> Result<T, ScenarioError> {
                self.map_err(|source| ScenarioError::$variant { stage, source })
            }
        }
    };
}
at_stage!(GeometryError, Geometry);
at_stage!(SceneError, Scene);
at_stage!(ForecastError, Forecast);
at_stage!(MetricsError, Metrics);

/// Mean and sample standard deviation of a set of displacement errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdeStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl AdeStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, n };
        }
        // Shifted by the first value, so identical inputs give a std of
        // exactly zero.
        let origin = values[0];
        let shift = values.iter().map(|v| v - origin).sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - origin - shift).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean: origin + shift, std, n }
    }
}

/// Per-step Euclidean errors between paired planar positions.
pub fn displacement_errors(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Vec<f64> {
    pred.iter().zip(truth).map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()).collect()
}

/// How many masked-period ground-truth positions fall inside a Mahalanobis
/// bound of the forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    /// χ² cutoff used (2.30 for 1Σ, 6.18 for 2Σ).
    pub chi2: f64,
    pub inside: usize,
    pub total: usize,
}

impl Containment {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.inside as f64 / self.total as f64
        }
    }

    /// Pools counts from several runs.
    pub fn pooled<'a>(items: impl IntoIterator<Item = &'a Containment>) -> Option<Containment> {
        let mut it = items.into_iter();
        let first = *it.next()?;
        Some(it.fold(first, |acc, c| Containment {
            chi2: acc.chi2,
            inside: acc.inside + c.inside,
            total: acc.total + c.total,
        }))
    }
}

/// Result of one cooperative or occlusion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    /// Camera-1 walk moved into camera 2 with the estimated pose, against
    /// camera 2's ground truth, over every sample.
    pub transform_ade: AdeStats,
    /// Forecast from the cooperative (transformed or fused) input against
    /// the ground-truth future.
    pub forecast_ade: AdeStats,
    /// Forecast from camera 2's own unoccluded view against the same future.
    pub native_forecast_ade: AdeStats,
    pub pose_error: PoseError,
    /// `KL(native ‖ cooperative)` and `H(native)` per future step.
    pub trace: Vec<TraceRow>,
    pub containment: Option<Containment>,
    pub runtime_ms: u64,
    #[serde(skip)]
    pub series: Option<ScenarioSeries>,
}

impl ScenarioReport {
    /// The report with its wall-clock time cleared, for comparing runs.
    pub fn without_runtime(&self) -> Self {
        Self { runtime_ms: 0, ..self.clone() }
    }
}
