use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::geometry::Frame;

use super::ForecastError;

/// One planar pedestrian state: position (m) and velocity (m/s) on the
/// ground plane of `frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSample {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

impl StateSample {
    pub fn new(x: f64, y: f64, u: f64, v: f64) -> Self {
        Self { x, y, u, v }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.u.is_finite() && self.v.is_finite()
    }
}

/// A uniformly sampled track split into an observed past and a future.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub frame: Frame,
    pub dt: f64,
    pub samples: Vec<StateSample>,
    /// Number of leading samples that form the observed past.
    pub past_len: usize,
}

impl Trajectory {
    pub fn new(frame: Frame, dt: f64, samples: Vec<StateSample>, past_len: usize) -> Result<Self, ForecastError> {
        if past_len == 0 || past_len > samples.len() {
            return Err(ForecastError::ShapeMismatch(format!(
                "past length {past_len} invalid for {} samples",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(ForecastError::NonFinite("trajectory sample".into()));
        }
        Ok(Self { frame, dt, samples, past_len })
    }

    pub fn past(&self) -> &[StateSample] {
        &self.samples[..self.past_len]
    }

    pub fn future(&self) -> &[StateSample] {
        &self.samples[self.past_len..]
    }
}

/// Bivariate Gaussian over a future position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGaussian {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

/// Per-step Gaussian forecast produced by Monte-Carlo dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDistribution {
    pub frame: Frame,
    pub steps: Vec<StepGaussian>,
    /// Stochastic passes behind the statistics.
    pub passes: usize,
    /// The spread of the passes alone, before the predicted aleatoric
    /// variance is added.
    pub epistemic: Vec<Matrix2<f64>>,
}

impl ForecastDistribution {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn means(&self) -> Vec<[f64; 2]> {
        self.steps.iter().map(|s| [s.mean.x, s.mean.y]).collect()
    }
}

pub const FORECAST_CSV_HEADER: [&str; 6] = ["step", "mu_x", "mu_y", "s_xx", "s_xy", "s_yy"];

/// Writes `step, mu_x, mu_y, s_xx, s_xy, s_yy` with 1-based steps.
pub fn write_forecast_csv<W: std::io::Write>(writer: W, f: &ForecastDistribution) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FORECAST_CSV_HEADER)?;
    for (k, s) in f.steps.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            s.mean.x.to_string(),
            s.mean.y.to_string(),
            s.cov[(0, 0)].to_string(),
            s.cov[(0, 1)].to_string(),
            s.cov[(1, 1)].to_string(),
        ])?;
    }
    w.flush()
}
