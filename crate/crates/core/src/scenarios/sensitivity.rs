use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{displacement_errors, AdeStats, AtStage, ScenarioError, Stage};
use crate::geometry::{EulerAngles, RelativePose};
use crate::rng::{indexed_seed, rng_from_seed, sub_seed};
use crate::scene::{observe, CameraId, CameraRig, GroundTruthWalk, WalkKind, WalkModel};

/// Noise levels as fractions of the nominal angles: 1 % to 50 %.
pub const DEFAULT_SIGMA_GRID: [f64; 8] = [0.01, 0.02, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    /// Ascending, each a fraction of the nominal value it perturbs.
    pub sigmas: Vec<f64>,
    pub samples: usize,
    /// Translation noise is `translation_scale · σ · |t_i|` per component;
    /// 0 perturbs the angles only.
    pub translation_scale: f64,
    /// The computed pose being perturbed. `None` uses the rig's true pose.
    pub nominal: Option<RelativePose>,
    pub seed: u64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self { sigmas: DEFAULT_SIGMA_GRID.to_vec(), samples: 20, translation_scale: 1.0, nominal: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub sigma: f64,
    pub ade: AdeStats,
}

fn transform_ade(rig: &CameraRig, walk: &GroundTruthWalk, pose: &RelativePose) -> Result<f64, ScenarioError> {
    let cam1 = observe(walk, rig, CameraId::One).at(Stage::Observe)?;
    let cam2 = observe(walk, rig, CameraId::Two).at(Stage::Observe)?;
    let moved = cam1.transform_to_ego(pose).at(Stage::Transform)?;
    let a: Vec<[f64; 2]> = moved.planar_states().iter().map(|s| s.position()).collect();
    let b: Vec<[f64; 2]> = cam2.planar_states().iter().map(|s| s.position()).collect();
    let e = displacement_errors(&a, &b);
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// For every σ, perturbs the nominal Euler angles (and translation) with
/// zero-mean Gaussian noise of standard deviation `σ·|nominal|`, moves the
/// camera-1 walk into camera 2 with the perturbed pose and records the ADE
/// against camera 2's ground truth. Sample `s` of grid entry `j` draws from
/// `indexed_seed(sub_seed(seed, "noise"), j·samples + s)`.
pub fn run_sensitivity(
    cfg: &SensitivityConfig,
    rig: &CameraRig,
    walk: &GroundTruthWalk,
) -> Result<Vec<SensitivityRow>, ScenarioError> {
    if cfg.samples < 2 {
        return Err(ScenarioError::InvalidArgument(format!("need at least 2 samples per σ, got {}", cfg.samples)));
    }
    if cfg.sigmas.iter().any(|s| !(*s >= 0.0)) || cfg.sigmas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScenarioError::InvalidArgument("σ grid must be non-negative and strictly ascending".into()));
    }
    let nominal = cfg.nominal.unwrap_or(rig.pose);
    let e0 = nominal.euler().to_array();
    let t0 = match nominal.translation() {
        Some(t) => t,
        None => nominal.t_hat() * rig.baseline(),
    };
    let base = sub_seed(cfg.seed, "noise");
    let mut rows = Vec::with_capacity(cfg.sigmas.len());
    for (j, &sigma) in cfg.sigmas.iter().enumerate() {
        let mut ades = Vec::with_capacity(cfg.samples);
        for s in 0..cfg.samples {
            let mut rng = rng_from_seed(indexed_seed(base, (j * cfg.samples + s) as u64));
            let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
            let e = EulerAngles::from_array([
                e0[0] + sigma * e0[0].abs() * z(),
                e0[1] + sigma * e0[1].abs() * z(),
                e0[2] + sigma * e0[2].abs() * z(),
            ]);
            let k = sigma * cfg.translation_scale;
            let mut t = t0;
            for i in 0..3 {
                t[i] += k * t0[i].abs() * z();
            }
            let pose = RelativePose::from_euler(&e, t).at(Stage::Transform)?;
            ades.push(transform_ade(rig, walk, &pose)?);
        }
        rows.push(SensitivityRow { sigma, ade: AdeStats::from_values(&ades) });
    }
    Ok(rows)
}

/// True when no later σ has a mean ADE below an earlier one by more than
/// their pooled standard deviation.
pub fn monotone_within_pooled_std(rows: &[SensitivityRow]) -> bool {
    rows.iter().enumerate().all(|(i, a)| {
        rows[i + 1..].iter().all(|b| {
            let pooled = ((a.ade.std.powi(2) + b.ade.std.powi(2)) / 2.0).sqrt();
            a.ade.mean <= b.ade.mean + pooled
        })
    })
}

/// A straight walk across camera 1's view at the depth where transforming it
/// with `nominal` instead of the true pose gives `target_ade` metres of ADE.
///
/// The walk starts at X = −3 m heading along +X at 0.75 m/s; its depth is
/// found by bisection on [0.5, 50] m.
pub fn calibrated_walk(
    rig: &CameraRig,
    nominal: &RelativePose,
    target_ade: f64,
    duration_s: f64,
    dt: f64,
) -> Result<GroundTruthWalk, ScenarioError> {
    let walk_at = |z: f64| {
        let mut m = WalkModel::straight([-3.0, z], 0.0, 0.75);
        m.kind = WalkKind::Straight;
        GroundTruthWalk::sample(m, duration_s, dt).at(Stage::Observe)
    };
    let ade_at = |z: f64| -> Result<f64, ScenarioError> { transform_ade(rig, &walk_at(z)?, nominal) };
    let (mut lo, mut hi) = (0.5, 50.0);
    let (f_lo, f_hi) = (ade_at(lo)? - target_ade, ade_at(hi)? - target_ade);
    if f_lo.signum() == f_hi.signum() {
        return Err(ScenarioError::InvalidArgument(format!(
            "target ADE {target_ade} m is not reachable for depths in [{lo}, {hi}] m"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (ade_at(mid)? - target_ade).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    walk_at(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{reference_rig, REFERENCE_ESTIMATE_EULER};

    fn nominal() -> RelativePose {
        let rig = reference_rig();
        RelativePose::from_euler(&REFERENCE_ESTIMATE_EULER, rig.pose.translation().unwrap()).unwrap()
    }

    #[test]
    fn calibration_hits_target() {
        let rig = reference_rig();
        let walk = calibrated_walk(&rig, &nominal(), 0.2, 8.0, 0.4).unwrap();
        assert!((transform_ade(&rig, &walk, &nominal()).unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn zero_sigma_reproduces_nominal() {
        let rig = reference_rig();
        let walk = calibrated_walk(&rig, &nominal(), 0.2, 8.0, 0.4).unwrap();
        let cfg = SensitivityConfig { sigmas: vec![0.0], samples: 3, nominal: Some(nominal()), ..Default::default() };
        let rows = run_sensitivity(&cfg, &rig, &walk).unwrap();
        assert!((rows[0].ade.mean - 0.2).abs() < 1e-9);
        assert_eq!(rows[0].ade.std, 0.0);
    }

    #[test]
    fn bad_grid_rejected() {
        let rig = reference_rig();
        let walk = calibrated_walk(&rig, &nominal(), 0.2, 8.0, 0.4).unwrap();
        let cfg = SensitivityConfig { sigmas: vec![0.2, 0.1], ..Default::default() };
        assert!(run_sensitivity(&cfg, &rig, &walk).is_err());
    }
}
