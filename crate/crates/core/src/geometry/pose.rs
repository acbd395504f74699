use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::rotation::{euler_to_rotation, is_rotation, rotation_to_euler, skew, EulerAngles, ROTATION_TOLERANCE};
use super::GeometryError;

/// Registered coordinate frames. Camera 1 is the cooperating agent that can
/// see the pedestrian; camera 2 is the ego agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Camera1,
    Camera2,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::Camera1 => f.write_str("camera1"),
            Frame::Camera2 => f.write_str("camera2"),
        }
    }
}

/// A metric 3D point tagged with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub coords: Vector3<f64>,
    pub frame: Frame,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64, frame: Frame) -> Self {
        Self { coords: Vector3::new(x, y, z), frame }
    }
}

/// Pose of camera 2 relative to camera 1.
///
/// `rotation` holds camera 2's axes expressed in camera 1 and `t` its optical
/// centre, so a camera-1 point maps into the ego frame as
///
/// ```text
/// X_ego = Rᵀ (X_other − t)
/// ```
///
/// Pixel correspondences follow the opposite direction: `F` maps a camera-1
/// pixel `a` to its epipolar line in camera 2, `bᵀ F a = 0`, and the matching
/// essential matrix is `E = ([t]ₓ R)ᵀ` (see [`RelativePose::essential`]).
///
/// Epipolar geometry fixes the translation only up to scale, so a freshly
/// decomposed pose carries `t_hat` alone; [`set_scale`] attaches the metric
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    rotation: Matrix3<f64>,
    t_hat: Vector3<f64>,
    scale: Option<f64>,
}

impl RelativePose {
    /// Builds an unscaled pose. `t_dir` is normalized; it must be nonzero.
    pub fn new(rotation: Matrix3<f64>, t_dir: Vector3<f64>) -> Result<Self, GeometryError> {
        if !is_rotation(&rotation, ROTATION_TOLERANCE) {
            return Err(GeometryError::NotARotation);
        }
        let n = t_dir.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(GeometryError::InvalidArgument("translation direction must be nonzero".into()));
        }
        Ok(Self { rotation, t_hat: t_dir / n, scale: None })
    }

    /// Builds a metric pose from a full translation vector; `scale = ‖t‖`.
    pub fn from_translation(rotation: Matrix3<f64>, t: Vector3<f64>) -> Result<Self, GeometryError> {
        let pose = Self::new(rotation, t)?;
        set_scale(&pose, t.norm())
    }

    pub fn from_euler(euler: &EulerAngles, t: Vector3<f64>) -> Result<Self, GeometryError> {
        Self::from_translation(euler_to_rotation(euler), t)
    }

    /// Identity rotation, zero translation. Only constructible this way since
    /// it has no translation direction.
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), t_hat: Vector3::x(), scale: Some(0.0) }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn t_hat(&self) -> &Vector3<f64> {
        &self.t_hat
    }

    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    /// `s · t̂`, once the scale is known.
    pub fn translation(&self) -> Option<Vector3<f64>> {
        self.scale.map(|s| self.t_hat * s)
    }

    pub fn euler(&self) -> EulerAngles {
        rotation_to_euler(&self.rotation).expect("pose rotation is valid").angles
    }

    pub fn other_frame(&self) -> Frame {
        Frame::Camera1
    }

    pub fn ego_frame(&self) -> Frame {
        Frame::Camera2
    }

    /// Essential matrix in the `bᵀ E a = 0` orientation (a in camera 1),
    /// Frobenius-normalized with the largest-magnitude entry positive.
    pub fn essential(&self) -> Matrix3<f64> {
        super::normalize_sign(&(skew(&self.t_hat) * self.rotation).transpose())
    }

    /// The rigid map camera 1 → camera 2 in the `X₂ = R₂₁ X₁ + t₂₁` form.
    pub fn camera1_to_camera2(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let rt = self.rotation.transpose();
        (rt, -(rt * self.translation().unwrap_or(self.t_hat)))
    }

    /// Inverse of [`camera1_to_camera2`](Self::camera1_to_camera2)-style
    /// parameters: builds the pose from `X₂ = R₂₁ X₁ + t₂₁`.
    pub fn from_camera1_to_camera2(r21: Matrix3<f64>, t21: Vector3<f64>) -> Result<Self, GeometryError> {
        let rotation = r21.transpose();
        Self::new(rotation, -(rotation * t21))
    }
}

/// Fixes the metric scale from the measured distance between the cameras.
///
/// With `‖t̂‖ = 1` the scale `d_true / ‖t̂‖` is simply `d_true`.
pub fn set_scale(pose: &RelativePose, d_true: f64) -> Result<RelativePose, GeometryError> {
    if !(d_true > 0.0 && d_true.is_finite()) {
        return Err(GeometryError::NonPositiveDistance(d_true));
    }
    let scale = d_true / pose.t_hat.norm();
    Ok(RelativePose { scale: Some(scale), ..*pose })
}

/// Maps a camera-1 point into the ego (camera 2) frame: `X′ = Rᵀ(X − t)`.
pub fn transform_to_ego(p: &Point3, pose: &RelativePose) -> Result<Point3, GeometryError> {
    if p.frame != pose.other_frame() {
        return Err(GeometryError::FrameMismatch { expected: pose.other_frame(), got: p.frame });
    }
    let t = pose.translation().ok_or(GeometryError::ScaleUnset)?;
    Ok(Point3 { coords: pose.rotation.transpose() * (p.coords - t), frame: pose.ego_frame() })
}

/// Inverse of [`transform_to_ego`]: `X = R X′ + t`.
pub fn transform_from_ego(p: &Point3, pose: &RelativePose) -> Result<Point3, GeometryError> {
    if p.frame != pose.ego_frame() {
        return Err(GeometryError::FrameMismatch { expected: pose.ego_frame(), got: p.frame });
    }
    let t = pose.translation().ok_or(GeometryError::ScaleUnset)?;
    Ok(Point3 { coords: pose.rotation * p.coords + t, frame: pose.other_frame() })
}

/// Rotates a camera-1 velocity into the ego frame. Directions ignore the
/// translation: `v′ = Rᵀ v`.
pub fn transform_velocity(v: &Vector3<f64>, pose: &RelativePose) -> Vector3<f64> {
    pose.rotation.transpose() * v
}

/// JSON form: `{"R": [9, row-major], "t_hat": [3], "scale": s, "euler_deg": [roll, pitch, yaw]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t_hat: [f64; 3],
    pub scale: Option<f64>,
    pub euler_deg: [f64; 3],
}

impl From<&RelativePose> for PoseJson {
    fn from(p: &RelativePose) -> Self {
        let m = p.rotation;
        Self {
            r: [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            t_hat: [p.t_hat.x, p.t_hat.y, p.t_hat.z],
            scale: p.scale,
            euler_deg: p.euler().to_array(),
        }
    }
}

impl TryFrom<&PoseJson> for RelativePose {
    type Error = GeometryError;

    /// The rotation is taken from `R`; `euler_deg` is informational.
    fn try_from(j: &PoseJson) -> Result<Self, Self::Error> {
        let r = Matrix3::from_row_slice(&j.r);
        let raw = Vector3::from_row_slice(&j.t_hat);
        let mut pose = RelativePose::new(r, raw)?;
        // Keep already-unit vectors bit-exact so files round-trip.
        if (raw.norm() - 1.0).abs() < 1e-12 {
            pose.t_hat = raw;
        }
        if let Some(s) = j.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(GeometryError::NonPositiveDistance(s));
            }
            pose.scale = Some(s);
        }
        Ok(pose)
    }
}

impl Serialize for RelativePose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RelativePose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = PoseJson::deserialize(d)?;
        RelativePose::try_from(&j).map_err(serde::de::Error::custom)
    }
}
