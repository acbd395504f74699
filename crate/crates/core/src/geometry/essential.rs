use nalgebra::{Matrix3, Vector3};

use super::camera::{CameraIntrinsics, Correspondence};
use super::fundamental::FundamentalMatrix;
use super::pose::RelativePose;
use super::rotation::{is_rotation, ROTATION_TOLERANCE};
use super::{normalize_sign, svd3, GeometryError};

/// Calibrated two-view matrix with singular values `(σ, σ, 0)`, in the same
/// `bᵀ E a = 0` orientation as [`FundamentalMatrix`] but on bearings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix(Matrix3<f64>);

impl EssentialMatrix {
    /// Projects onto the essential manifold: singular values `(σ₁, σ₂, σ₃)`
    /// become `(σ, σ, 0)` with `σ = (σ₁ + σ₂)/2`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let (u, s, v_t) = svd3(m);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let sigma = (s[idx[0]] + s[idx[1]]) / 2.0;
        let mut d = Vector3::zeros();
        d[idx[0]] = sigma;
        d[idx[1]] = sigma;
        Self(u * Matrix3::from_diagonal(&d) * v_t)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Frobenius-normalized copy with the sign convention of
    /// [`normalize_sign`], for comparisons.
    pub fn normalized(&self) -> Matrix3<f64> {
        normalize_sign(&self.0)
    }
}

/// `E = K₂ᵀ F K₁`, projected onto the essential manifold.
pub fn essential_from_fundamental(
    f: &FundamentalMatrix,
    k1: &CameraIntrinsics,
    k2: &CameraIntrinsics,
) -> Result<EssentialMatrix, GeometryError> {
    k1.validate()?;
    k2.validate()?;
    Ok(EssentialMatrix::from_matrix(&(k2.matrix().transpose() * f.matrix() * k1.matrix())))
}

/// Midpoint triangulation of one bearing pair under the motion
/// `X₂ = R X₁ + t`. Returns the point in camera-1 coordinates, or `None`
/// for parallel rays.
pub fn triangulate_midpoint(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    bearing1: &Vector3<f64>,
    bearing2: &Vector3<f64>,
) -> Option<Vector3<f64>> {
    // Ray 1: λ₁ d₁ from the origin. Ray 2: c₂ + λ₂ d₂ with c₂ = −Rᵀt.
    let d1 = *bearing1;
    let d2 = r.transpose() * bearing2;
    let c2 = -(r.transpose() * t);
    let a11 = d1.dot(&d1);
    let a12 = -d1.dot(&d2);
    let a22 = d2.dot(&d2);
    let b1 = d1.dot(&c2);
    let b2 = -d2.dot(&c2);
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-14 * a11 * a22 {
        return None;
    }
    let l1 = (b1 * a22 - a12 * b2) / det;
    let l2 = (a11 * b2 - a12 * b1) / det;
    Some((d1 * l1 + c2 + d2 * l2) / 2.0)
}

/// The four `(R, t̂)` motions consistent with `E`, in the `X₂ = R X₁ + t`
/// form.
pub fn essential_candidates(e: &EssentialMatrix) -> [(Matrix3<f64>, Vector3<f64>); 4] {
    let (mut u, s, mut v_t) = svd3(&e.0);
    // Put the null direction last.
    let (null_idx, _) = s.argmin();
    if null_idx != 2 {
        u.swap_columns(null_idx, 2);
        v_t.swap_rows(null_idx, 2);
    }
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if v_t.determinant() < 0.0 {
        v_t.row_mut(2).neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v_t;
    let r2 = u * w.transpose() * v_t;
    let t = u.column(2).into_owned();
    [(r1, t), (r1, -t), (r2, t), (r2, -t)]
}

/// Recovers the relative pose (rotation and unit translation, scale unset)
/// from `E` and the matches it was estimated from.
///
/// Each of the four candidates triangulates every match by the midpoint
/// method; the candidate with the most points in front of both cameras wins
/// and must have more than half of them there.
pub fn decompose_essential(
    e: &EssentialMatrix,
    matches: &[Correspondence],
    k1: &CameraIntrinsics,
    k2: &CameraIntrinsics,
) -> Result<RelativePose, GeometryError> {
    if matches.is_empty() {
        return Err(GeometryError::InsufficientMatches { needed: 1, got: 0 });
    }
    let bearings: Vec<_> = matches.iter().map(|m| (k1.normalize(m.a()), k2.normalize(m.b()))).collect();

    let mut best: Option<(usize, usize)> = None;
    let candidates = essential_candidates(e);
    for (ci, (r, t)) in candidates.iter().enumerate() {
        let in_front = bearings
            .iter()
            .filter(|(b1, b2)| triangulate_midpoint(r, t, b1, b2).is_some_and(|x| x.z > 0.0 && (r * x + t).z > 0.0))
            .count();
        if best.is_none_or(|(_, c)| in_front > c) {
            best = Some((ci, in_front));
        }
    }
    let (ci, count) = best.expect("four candidates");
    if 2 * count <= bearings.len() {
        return Err(GeometryError::CheiralityAmbiguous { best_fraction: count as f64 / bearings.len() as f64 });
    }
    let (r, t) = candidates[ci];
    debug_assert!(is_rotation(&r, ROTATION_TOLERANCE));
    if !is_rotation(&r, ROTATION_TOLERANCE) {
        return Err(GeometryError::NotARotation);
    }
    RelativePose::from_camera1_to_camera2(r, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation::EulerAngles;

    #[test]
    fn identity_intrinsics_project_f() {
        let m = Matrix3::new(0.1, -0.4, 0.3, 0.2, 0.05, -0.6, -0.3, 0.5, 0.1);
        let f = FundamentalMatrix::from_matrix(&m);
        let e = essential_from_fundamental(&f, &CameraIntrinsics::identity(), &CameraIntrinsics::identity()).unwrap();
        assert_eq!(e, EssentialMatrix::from_matrix(f.matrix()));
    }

    #[test]
    fn projection_gives_equal_singular_values() {
        let m = Matrix3::new(0.3, -0.4, 0.3, 0.2, 0.9, -0.6, -0.3, 0.5, 0.1);
        let e = EssentialMatrix::from_matrix(&m);
        let mut s = e.matrix().singular_values().as_slice().to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!((s[0] - s[1]).abs() < 1e-12 * s[0], "{s:?}");
        assert!(s[2].abs() < 1e-12 * s[0], "{s:?}");
    }

    #[test]
    fn canonical_pose_recovers_identity() {
        // Camera 2 one unit to the right of camera 1, same orientation.
        let pose = RelativePose::new(Matrix3::identity(), Vector3::x()).unwrap();
        let e = EssentialMatrix::from_matrix(&pose.essential());
        let k = CameraIntrinsics::identity();
        let matches: Vec<_> = (0..12)
            .map(|i| {
                let x = Vector3::new(-1.0 + 0.2 * i as f64, 0.3 - 0.05 * i as f64, 3.0 + 0.25 * i as f64);
                let x2 = x - Vector3::x();
                Correspondence::new(x.x / x.z, x.y / x.z, x2.x / x2.z, x2.y / x2.z)
            })
            .collect();
        let got = decompose_essential(&e, &matches, &k, &k).unwrap();
        assert!((got.rotation() - Matrix3::identity()).abs().max() < 1e-12);
        assert!((got.t_hat() - Vector3::x()).norm() < 1e-12);
        assert_eq!(got.scale(), None);
    }

    #[test]
    fn points_behind_both_cameras_are_ambiguous() {
        let pose = RelativePose::from_euler(&EulerAngles::new(0.0, 0.0, 5.0), Vector3::x()).unwrap();
        let e = EssentialMatrix::from_matrix(&pose.essential());
        let k = CameraIntrinsics::identity();
        // Matches generated from points on alternating sides produce no
        // majority for any candidate.
        let matches: Vec<_> = (0..10)
            .map(|i| {
                let z = if i % 2 == 0 { 4.0 } else { -4.0 };
                let x1 = Vector3::new(0.1 * i as f64, 0.2, z + 0.1 * i as f64);
                let x2 = pose.rotation().transpose() * (x1 - pose.translation().unwrap());
                Correspondence::new(x1.x / x1.z, x1.y / x1.z, x2.x / x2.z, x2.y / x2.z)
            })
            .collect();
        let err = decompose_essential(&e, &matches, &k, &k).unwrap_err();
        assert!(matches!(err, GeometryError::CheiralityAmbiguous { .. }), "{err:?}");
    }

    #[test]
    fn midpoint_of_intersecting_rays() {
        let r = Matrix3::identity();
        let t = Vector3::new(-1.0, 0.0, 0.0);
        let x = Vector3::new(0.5, 0.2, 4.0);
        let x2 = r * x + t;
        let p = triangulate_midpoint(&r, &t, &(x / x.z), &(x2 / x2.z)).unwrap();
        assert!((p - x).norm() < 1e-12);
    }
}
