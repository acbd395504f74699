use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{AtStage, ScenarioError, Stage};
use crate::forecaster::{StateSample, TrainingWindow};
use crate::rng::{indexed_seed, rng_from_seed, sub_seed};
use crate::scene::{synth_walk, WalkKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetConfig {
    pub windows: usize,
    pub kinds: Vec<WalkKind>,
    pub speed_range: (f64, f64),
    pub dt: f64,
    pub past: usize,
    pub future: usize,
}

impl Default for SyntheticDatasetConfig {
    fn default() -> Self {
        Self {
            windows: 500,
            kinds: vec![WalkKind::Straight, WalkKind::Turn, WalkKind::SCurve],
            speed_range: (0.8, 1.6),
            dt: 0.4,
            past: 8,
            future: 12,
        }
    }
}

/// One window per synthetic walk, on the walk's ground plane. Walk `i` uses
/// kind and speed drawn from the `"dataset"` sub-stream and shape parameters
/// from `indexed_seed(seed, i)`.
pub fn synthetic_training_windows(
    cfg: &SyntheticDatasetConfig,
    seed: u64,
) -> Result<Vec<TrainingWindow>, ScenarioError> {
    if cfg.kinds.is_empty() || cfg.past == 0 || cfg.future == 0 || !(cfg.speed_range.0 <= cfg.speed_range.1) {
        return Err(ScenarioError::InvalidArgument(
            "dataset needs kinds, positive lengths and a valid speed range".into(),
        ));
    }
    let mut rng = rng_from_seed(sub_seed(seed, "dataset"));
    let len = cfg.past + cfg.future;
    let duration = len as f64 * cfg.dt;
    (0..cfg.windows)
        .map(|i| {
            let kind = *cfg.kinds.choose(&mut rng).expect("non-empty");
            let speed = rng.random_range(cfg.speed_range.0..=cfg.speed_range.1);
            let walk = synth_walk(kind, duration, cfg.dt, speed, indexed_seed(seed, i as u64)).at(Stage::Training)?;
            let s: Vec<StateSample> = walk
                .samples
                .iter()
                .map(|w| StateSample::new(w.position.x, w.position.z, w.velocity.x, w.velocity.z))
                .collect();
            Ok(TrainingWindow { past: s[..cfg.past].to_vec(), future: s[cfg.past..len].to_vec() })
        })
        .collect()
}
