//! Maps library errors onto the exit-code contract.

use std::fmt;

use coforecast::data::DataError;
use coforecast::forecaster::ForecastError;
use coforecast::geometry::GeometryError;
use coforecast::metrics::MetricsError;
use coforecast::scenarios::ScenarioError;
use coforecast::scene::SceneError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, missing or malformed files.
    Input(String),
    /// A stage ran but one of its checked properties did not hold.
    Invariant { stage: String, msg: String },
    /// Non-finite values, singular matrices, failed estimation.
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Invariant { .. } => EXIT_INVARIANT,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn invariant(stage: &str, msg: impl Into<String>) -> Self {
        Failure::Invariant { stage: stage.to_string(), msg: msg.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Invariant { stage, msg } => write!(f, "invariant violated in {stage}: {msg}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn geometry_is_numeric(e: &GeometryError) -> bool {
    matches!(
        e,
        GeometryError::DegenerateConfiguration
            | GeometryError::NoConsensus { .. }
            | GeometryError::CheiralityAmbiguous { .. }
            | GeometryError::NotARotation
    )
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        if geometry_is_numeric(&e) {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<SceneError> for Failure {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Geometry(g) => g.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<ForecastError> for Failure {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::NonFinite(_) | ForecastError::NonFiniteLoss { .. } => Failure::Numeric(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::SingularCovariance { .. } | MetricsError::Asymmetric => Failure::Numeric(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let text = e.to_string();
        let numeric = match &e {
            ScenarioError::Geometry { source, .. } => geometry_is_numeric(source),
            ScenarioError::Scene { source: SceneError::Geometry(g), .. } => geometry_is_numeric(g),
            ScenarioError::Forecast { source, .. } => {
                matches!(source, ForecastError::NonFinite(_) | ForecastError::NonFiniteLoss { .. })
            }
            ScenarioError::Metrics { .. } => true,
            _ => false,
        };
        if numeric {
            Failure::Numeric(text)
        } else {
            Failure::Input(text)
        }
    }
}
