use std::time::Instant;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::pose::{estimate_rig_pose, PoseConfig, PoseError};
use super::{displacement_errors, AdeStats, AtStage, Containment, ScenarioError, ScenarioReport, Stage};
use crate::forecaster::{mc_dropout_infer, ForecastDistribution, ModelParams, StateSample};
use crate::geometry::Frame;
use crate::metrics::{divergence_trace, mahalanobis_sq, Gaussian2, CHI2_1SIGMA, CHI2_2SIGMA};
use crate::rng::sub_seed;
use crate::scene::{observe, occlusion_mask, CameraId, CameraRig, GroundTruthWalk, OcclusionKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CooperativeConfig {
    pub pose: PoseConfig,
    /// Monte-Carlo dropout passes per forecast.
    pub passes: usize,
    /// Skip estimation and transform with the rig's true pose.
    pub use_true_pose: bool,
}

impl Default for CooperativeConfig {
    fn default() -> Self {
        Self { pose: PoseConfig::default(), passes: 50, use_true_pose: false }
    }
}

/// Everything needed to plot a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSeries {
    pub times: Vec<f64>,
    /// Camera 2's ground truth on its ground plane.
    pub truth: Vec<[f64; 2]>,
    /// Camera 1's observation moved into camera 2 with the estimated pose.
    pub transformed: Vec<[f64; 2]>,
    /// Samples camera 2 could not see.
    pub masked: Vec<bool>,
    /// The past fed to the cooperative forecast.
    pub input: Vec<[f64; 2]>,
    pub past: usize,
    pub native: ForecastDistribution,
    pub cooperative: ForecastDistribution,
}

enum Input<'a> {
    /// Camera 2 sees nothing of the past; use camera 1 throughout.
    Transferred,
    /// Camera 2's own samples except where masked.
    Fused(&'a [bool]),
}

fn positions(states: &[StateSample]) -> Vec<[f64; 2]> {
    states.iter().map(|s| s.position()).collect()
}

fn run(
    name: &str,
    rig: &CameraRig,
    walk: &GroundTruthWalk,
    model: &ModelParams,
    cfg: &CooperativeConfig,
    seed: u64,
    input: Input<'_>,
    chi2: Option<f64>,
) -> Result<ScenarioReport, ScenarioError> {
    let started = Instant::now();
    let (past, future) = (model.config.past, model.config.future);
    if walk.len() < past + future {
        return Err(ScenarioError::InvalidArgument(format!(
            "walk has {} samples, the model needs {}",
            walk.len(),
            past + future
        )));
    }
    let (pose, pose_error) = if cfg.use_true_pose {
        (rig.pose, PoseError::between(&rig.pose, &rig.pose))
    } else {
        let est = estimate_rig_pose(rig, &cfg.pose, sub_seed(seed, "pose"))?;
        (est.pose, est.error)
    };

    let cam1 = observe(walk, rig, CameraId::One).at(Stage::Observe)?;
    let cam2 = observe(walk, rig, CameraId::Two).at(Stage::Observe)?;
    let moved = cam1.transform_to_ego(&pose).at(Stage::Transform)?;
    let truth_states = cam2.planar_states();
    let moved_states = moved.planar_states();
    let truth = positions(&truth_states);
    let transformed = positions(&moved_states);
    let transform_ade = AdeStats::from_values(&displacement_errors(&transformed, &truth));

    let window = past + future;
    let masked: Vec<bool> = match input {
        Input::Transferred => vec![true; walk.len()],
        Input::Fused(mask) => mask.to_vec(),
    };
    let coop_past: Vec<StateSample> =
        (0..past).map(|i| if masked[i] { moved_states[i] } else { truth_states[i] }).collect();
    let native_past = &truth_states[..past];
    let future_truth = &truth[past..window];

    let mc_seed = sub_seed(seed, "dropout");
    let native = mc_dropout_infer(model, native_past, Frame::Camera2, cfg.passes, mc_seed).at(Stage::Forecast)?;
    let cooperative = mc_dropout_infer(model, &coop_past, Frame::Camera2, cfg.passes, mc_seed).at(Stage::Forecast)?;
    let forecast_ade = AdeStats::from_values(&displacement_errors(&cooperative.means(), future_truth));
    let native_forecast_ade = AdeStats::from_values(&displacement_errors(&native.means(), future_truth));
    let trace = divergence_trace(&native, &cooperative).at(Stage::Metrics)?;

    let containment = match chi2 {
        Some(chi2) => {
            let mut c = Containment { chi2, inside: 0, total: 0 };
            for k in 0..future {
                if masked[past + k] {
                    let step = &cooperative.steps[k];
                    let d2 =
                        mahalanobis_sq(&Gaussian2::from(step), &Vector2::from(future_truth[k])).at(Stage::Metrics)?;
                    c.total += 1;
                    if d2 <= chi2 {
                        c.inside += 1;
                    }
                }
            }
            Some(c)
        }
        None => None,
    };

    let series = ScenarioSeries {
        times: cam2.times.clone(),
        input: positions(&coop_past),
        truth,
        transformed,
        masked,
        past,
        native,
        cooperative,
    };
    Ok(ScenarioReport {
        scenario: name.to_string(),
        transform_ade,
        forecast_ade,
        native_forecast_ade,
        pose_error,
        trace,
        containment,
        runtime_ms: started.elapsed().as_millis() as u64,
        series: Some(series),
    })
}

/// Camera 2 cannot see the pedestrian, so its forecast runs on camera 1's
/// observation moved through the estimated pose. The result is compared with
/// the forecast camera 2 would make from its own view and with the ground
/// truth.
///
/// The pose is estimated from the `"pose"` sub-stream of `seed`; both
/// forecasts share the `"dropout"` sub-stream, so their difference reflects
/// the inputs rather than the dropout draws.
pub fn run_cooperative(
    rig: &CameraRig,
    walk: &GroundTruthWalk,
    model: &ModelParams,
    cfg: &CooperativeConfig,
    seed: u64,
) -> Result<ScenarioReport, ScenarioError> {
    run("cooperative", rig, walk, model, cfg, seed, Input::Transferred, None)
}

/// Camera 2 loses the pedestrian during the `kind` window. Its input keeps
/// its own samples where visible and fills the gaps with transformed camera-1
/// samples. Containment counts the masked future steps whose true position
/// lies inside the 2Σ (intermittent) or 1Σ (partial) ellipse.
///
/// `OcclusionKind::None` is the plain cooperative run.
pub fn run_occlusion(
    kind: OcclusionKind,
    rig: &CameraRig,
    walk: &GroundTruthWalk,
    model: &ModelParams,
    cfg: &CooperativeConfig,
    seed: u64,
) -> Result<ScenarioReport, ScenarioError> {
    let (name, chi2) = match kind {
        OcclusionKind::None => return run_cooperative(rig, walk, model, cfg, seed),
        OcclusionKind::Intermittent => ("intermittent", CHI2_2SIGMA),
        OcclusionKind::Partial => ("partial", CHI2_1SIGMA),
    };
    let mask = occlusion_mask(walk, kind, model.config.past);
    if walk.occluded_cam2.iter().any(|&m| m) && walk.occluded_cam2 != mask {
        log::warn!("walk carries a different camera-2 mask; using the {name} mask");
    }
    run(name, rig, walk, model, cfg, seed, Input::Fused(&mask), Some(chi2))
}
