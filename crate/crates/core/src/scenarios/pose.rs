use serde::{Deserialize, Serialize};

use super::{AtStage, ScenarioError, Stage};
use crate::geometry::{
    decompose_essential, essential_from_fundamental, ransac_fundamental, rotation_angle_between, set_scale,
    EulerAngles, RansacConfig, RelativePose,
};
use crate::rng::sub_seed;
use crate::scene::{covisible_point_cloud, project_points, CameraRig};

/// Synthetic matching and robust estimation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseConfig {
    pub points: usize,
    pub sigma_px: f64,
    pub outlier_fraction: f64,
    pub ransac: RansacConfig,
}

impl Default for PoseConfig {
    /// 200 points, 0.5 px noise, 20 % outliers and a 2 px inlier threshold
    /// (four noise standard deviations).
    fn default() -> Self {
        Self {
            points: 200,
            sigma_px: 0.5,
            outlier_fraction: 0.2,
            ransac: RansacConfig { threshold_px: 2.0, ..RansacConfig::default() },
        }
    }
}

/// Difference between an estimated and a true pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    /// Largest per-angle difference, degrees.
    pub euler_deg: f64,
    /// Angle of the residual rotation, degrees.
    pub rotation_deg: f64,
    /// `‖t̂_est − t̂_true‖`.
    pub t_hat: f64,
    /// Metric translation error after scaling, metres.
    pub translation_m: f64,
}

impl PoseError {
    pub fn between(estimate: &RelativePose, truth: &RelativePose) -> Self {
        let translation_m = match (estimate.translation(), truth.translation()) {
            (Some(a), Some(b)) => (a - b).norm(),
            _ => f64::NAN,
        };
        Self {
            euler_deg: estimate.euler().max_abs_diff(&truth.euler()),
            rotation_deg: rotation_angle_between(estimate.rotation(), truth.rotation()),
            t_hat: (estimate.t_hat() - truth.t_hat()).norm(),
            translation_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    /// Metric pose, scaled to the rig's known baseline.
    pub pose: RelativePose,
    pub truth: EulerAngles,
    pub error: PoseError,
    pub matches: usize,
    pub true_inliers: usize,
    pub ransac_inliers: usize,
    /// True inliers that RANSAC kept, as a fraction of all true inliers.
    pub inlier_recall: f64,
    pub iterations_run: usize,
}

/// Recovers `rig`'s relative pose from synthetic matches: RANSAC on the
/// fundamental matrix, essential matrix from the intrinsics, cheirality
/// decomposition, then scaling to the known baseline.
///
/// Points come from the `"points"` sub-stream of `seed`, pixel noise and
/// outliers from `"matching"` and RANSAC sampling from `"ransac"`.
pub fn estimate_rig_pose(rig: &CameraRig, cfg: &PoseConfig, seed: u64) -> Result<PoseEstimate, ScenarioError> {
    let points = covisible_point_cloud(rig, cfg.points, sub_seed(seed, "points"));
    let set = project_points(rig, &points, cfg.sigma_px, cfg.outlier_fraction, sub_seed(seed, "matching"))
        .at(Stage::Matching)?;
    let ransac_cfg = RansacConfig { seed: sub_seed(seed, "ransac"), ..cfg.ransac };
    let outcome = ransac_fundamental(&set.matches, &ransac_cfg).at(Stage::Ransac)?;
    let e = essential_from_fundamental(&outcome.fundamental, &rig.k1, &rig.k2).at(Stage::Essential)?;
    let inlier_matches: Vec<_> =
        set.matches.iter().zip(&outcome.inliers).filter(|(_, &k)| k).map(|(m, _)| *m).collect();
    let pose = decompose_essential(&e, &inlier_matches, &rig.k1, &rig.k2).at(Stage::Decompose)?;
    let pose = set_scale(&pose, rig.baseline()).at(Stage::Scale)?;

    let true_inliers = set.inlier.iter().filter(|&&b| b).count();
    let kept = set.inlier.iter().zip(&outcome.inliers).filter(|(&t, &k)| t && k).count();
    Ok(PoseEstimate {
        error: PoseError::between(&pose, &rig.pose),
        pose,
        truth: rig.pose.euler(),
        matches: set.matches.len(),
        true_inliers,
        ransac_inliers: outcome.inlier_count(),
        inlier_recall: if true_inliers == 0 { f64::NAN } else { kept as f64 / true_inliers as f64 },
        iterations_run: outcome.iterations_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::reference_rig;

    #[test]
    fn exact_matches_give_exact_pose() {
        let cfg = PoseConfig { sigma_px: 0.0, outlier_fraction: 0.0, points: 40, ..Default::default() };
        let est = estimate_rig_pose(&reference_rig(), &cfg, 3).unwrap();
        assert!(est.error.euler_deg < 1e-7, "{:?}", est.error);
        assert!(est.error.translation_m < 1e-8);
        assert_eq!(est.inlier_recall, 1.0);
    }

    #[test]
    fn noisy_reference_rig_is_close() {
        let est = estimate_rig_pose(&reference_rig(), &PoseConfig::default(), 1).unwrap();
        assert!(est.error.euler_deg < 1.0, "{:?}", est.error);
        assert!(est.inlier_recall > 0.95);
    }
}
