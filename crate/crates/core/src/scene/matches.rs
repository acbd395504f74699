use nalgebra::{Vector2, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::geometry::Correspondence;
use crate::rng::{rng_from_seed, sub_seed};

use super::{CameraRig, SceneError};

/// Labelled synthetic matches standing in for a feature matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMatchSet {
    pub matches: Vec<Correspondence>,
    /// `true` where the match is a genuine projection of the same point.
    pub inlier: Vec<bool>,
    /// Camera-1 coordinates of the point each match came from.
    pub points: Vec<Vector3<f64>>,
    pub sigma_px: f64,
    pub outlier_fraction: f64,
    /// Points dropped for not being in front of both cameras.
    pub skipped_behind: usize,
}

impl SyntheticMatchSet {
    pub fn outlier_count(&self) -> usize {
        self.inlier.iter().filter(|&&b| !b).count()
    }
}

/// `n` points uniform in a box in front of the rig: 6 m wide (centred
/// between the two optical centres), 3 m tall, 2–8 m deep along camera 1's
/// optical axis.
pub fn default_point_cloud(rig: &CameraRig, n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = rng_from_seed(seed);
    let t = rig.pose.translation().expect("rig pose is metric");
    let cx = t.x / 2.0;
    (0..n)
        .map(|_| {
            Vector3::new(cx + rng.random_range(-3.0..=3.0), rng.random_range(-1.5..=1.5), rng.random_range(2.0..=8.0))
        })
        .collect()
}

/// Points spread over camera 1's view, kept only where camera 2 also sees
/// them at a depth above 0.5 m. Used for rigs with large rotations, where the
/// default box may fall behind camera 2. Gives up after `50·n` draws.
pub fn covisible_point_cloud(rig: &CameraRig, n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..50 * n {
        if out.len() == n {
            break;
        }
        let z = rng.random_range(2.0..=10.0);
        let p = Vector3::new(rng.random_range(-1.0..=1.0) * z, rng.random_range(-0.75..=0.75) * z, z);
        if rig.to_camera2(&p).z > 0.5 {
            out.push(p);
        }
    }
    out
}

/// Projects camera-1 points into both views.
///
/// Gaussian noise of `sigma_px` is added to both pixels of every match. Each
/// match independently becomes an outlier with probability
/// `outlier_fraction`, in which case its camera-2 pixel is replaced by a
/// uniform draw over the image. Points behind either camera are skipped and
/// counted.
pub fn project_points(
    rig: &CameraRig,
    points: &[Vector3<f64>],
    sigma_px: f64,
    outlier_fraction: f64,
    seed: u64,
) -> Result<SyntheticMatchSet, SceneError> {
    if !(sigma_px >= 0.0 && sigma_px.is_finite()) {
        return Err(SceneError::InvalidArgument(format!("pixel noise must be non-negative, got {sigma_px}")));
    }
    if !(0.0..1.0).contains(&outlier_fraction) {
        return Err(SceneError::InvalidArgument(format!("outlier fraction {outlier_fraction} outside [0, 1)")));
    }
    let mut noise_rng = rng_from_seed(sub_seed(seed, "pixel-noise"));
    let mut outlier_rng = rng_from_seed(sub_seed(seed, "outliers"));
    let noise = Normal::new(0.0, sigma_px).expect("finite sigma");
    let mut jitter = |p: Vector2<f64>| {
        if sigma_px == 0.0 {
            p
        } else {
            p + Vector2::new(noise.sample(&mut noise_rng), noise.sample(&mut noise_rng))
        }
    };

    let mut set = SyntheticMatchSet {
        matches: Vec::with_capacity(points.len()),
        inlier: Vec::with_capacity(points.len()),
        points: Vec::with_capacity(points.len()),
        sigma_px,
        outlier_fraction,
        skipped_behind: 0,
    };
    for x1 in points {
        let x2 = rig.to_camera2(x1);
        let (Some(a), Some(b)) = (rig.k1.project(x1), rig.k2.project(&x2)) else {
            set.skipped_behind += 1;
            continue;
        };
        let a = jitter(a);
        let b = jitter(b);
        let is_outlier = outlier_rng.random::<f64>() < outlier_fraction;
        let b = if is_outlier {
            Vector2::new(
                outlier_rng.random_range(0.0..f64::from(rig.width)),
                outlier_rng.random_range(0.0..f64::from(rig.height)),
            )
        } else {
            b
        };
        set.matches.push(Correspondence::from_pixels(a, b));
        set.inlier.push(!is_outlier);
        set.points.push(*x1);
    }
    if set.matches.len() < 8 {
        return Err(SceneError::EmptyScene { valid: set.matches.len() });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::reference_rig;

    #[test]
    fn point_behind_camera_is_skipped() {
        let rig = reference_rig();
        let mut pts = default_point_cloud(&rig, 20, 1);
        pts.push(Vector3::new(0.0, 0.0, -3.0));
        let set = project_points(&rig, &pts, 0.0, 0.0, 1).unwrap();
        assert_eq!(set.skipped_behind, 1);
        assert_eq!(set.matches.len(), 20);
    }

    #[test]
    fn too_few_points_is_empty_scene() {
        let rig = reference_rig();
        let pts = default_point_cloud(&rig, 7, 1);
        assert!(matches!(project_points(&rig, &pts, 0.0, 0.0, 1), Err(SceneError::EmptyScene { valid: 7 })));
    }

    #[test]
    fn outlier_count_matches_seeded_binomial() {
        let rig = reference_rig();
        let pts = default_point_cloud(&rig, 130, 11);
        let set = project_points(&rig, &pts, 0.0, 0.23, 5).unwrap();
        assert_eq!(set.skipped_behind, 0);
        // Replay the Bernoulli stream on its own.
        let mut rng = rng_from_seed(sub_seed(5, "outliers"));
        let mut expected = 0;
        for _ in 0..130 {
            if rng.random::<f64>() < 0.23 {
                expected += 1;
                let _: f64 = rng.random_range(0.0..640.0);
                let _: f64 = rng.random_range(0.0..480.0);
            }
        }
        assert_eq!(set.outlier_count(), expected);
        // Binomial(130, 0.23): mean 29.9, sd 4.8.
        assert!((15..=45).contains(&expected), "{expected}");
    }

    #[test]
    fn generation_is_seed_pure() {
        let rig = reference_rig();
        let pts = default_point_cloud(&rig, 50, 2);
        assert_eq!(pts, default_point_cloud(&rig, 50, 2));
        let a = project_points(&rig, &pts, 0.5, 0.2, 9).unwrap();
        let b = project_points(&rig, &pts, 0.5, 0.2, 9).unwrap();
        assert_eq!(a, b);
    }
}
