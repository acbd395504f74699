use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Tolerance on `RᵀR = I` and `det R = 1` for every rotation this crate emits.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Relative orientation in degrees, named after the camera's optical axes.
///
/// Camera frames are x right, y down, z forward, so:
///
/// * `roll` turns about the optical axis z,
/// * `pitch` tilts about x,
/// * `yaw` pans about y.
///
/// The rotation is composed intrinsically as `R = Rz(roll) · Ry(yaw) · Rx(pitch)`
/// (z, then the new y, then the new x). With this reading the rotation reported
/// for the two-camera experiment,
///
/// ```text
/// 0.927  -0.0447  0.370
/// 0.0233  0.997   0.062
/// -0.372 -0.048   0.926
/// ```
///
/// decomposes to roll ≈ 1.44°, pitch ≈ -3.0°, yaw ≈ 21.9°, the triple quoted
/// alongside it. The singular configuration is `|yaw| = 90°`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// `[roll, pitch, yaw]`.
    pub fn to_array(self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Largest absolute per-angle difference, with each difference wrapped
    /// into (-180, 180].
    pub fn max_abs_diff(&self, other: &EulerAngles) -> f64 {
        self.to_array().iter().zip(other.to_array()).map(|(a, b)| wrap_degrees(a - b).abs()).fold(0.0, f64::max)
    }
}

/// Wraps an angle in degrees into (-180, 180].
pub fn wrap_degrees(a: f64) -> f64 {
    let mut w = a % 360.0;
    if w > 180.0 {
        w -= 360.0;
    } else if w <= -180.0 {
        w += 360.0;
    }
    w
}

/// Result of reading Euler angles off a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerSolution {
    pub angles: EulerAngles,
    /// Set when `|yaw|` is within 1e-6° of 90°; roll is then fixed to zero and
    /// the remaining freedom is folded into pitch.
    pub gimbal_lock: bool,
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn euler_to_rotation(e: &EulerAngles) -> Matrix3<f64> {
    rot_z(e.roll.to_radians()) * rot_y(e.yaw.to_radians()) * rot_x(e.pitch.to_radians())
}

pub fn rotation_to_euler(r: &Matrix3<f64>) -> Result<EulerSolution, GeometryError> {
    if !is_rotation(r, 1e-6) {
        return Err(GeometryError::NotARotation);
    }
    let sin_yaw = (-r[(2, 0)]).clamp(-1.0, 1.0);
    let yaw = sin_yaw.asin();
    let gimbal_lock = (yaw.to_degrees().abs() - 90.0).abs() < 1e-6;
    let (roll, pitch) = if gimbal_lock {
        // Only roll ± pitch is observable; report it all as pitch.
        (0.0, (sin_yaw.signum() * r[(0, 1)]).atan2(r[(1, 1)]))
    } else {
        (r[(1, 0)].atan2(r[(0, 0)]), r[(2, 1)].atan2(r[(2, 2)]))
    };
    Ok(EulerSolution { angles: EulerAngles::new(roll.to_degrees(), pitch.to_degrees(), yaw.to_degrees()), gimbal_lock })
}

/// Checks `RᵀR = I` and `det R = +1` within `tol`.
pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    ortho <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Nearest rotation in the Frobenius sense (polar factor via SVD).
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let (u, _, v_t) = super::svd3(m);
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// Angle of the rotation `a·bᵀ`, in degrees.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a * b.transpose();
    let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos loses precision near zero; use the skew part there.
    let skew = Vector3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]);
    let s = skew.norm() / 2.0;
    s.atan2(c).to_degrees()
}

/// Cross-product matrix `[v]ₓ`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_angles_give_identity() {
        assert_eq!(euler_to_rotation(&EulerAngles::zero()), Matrix3::identity());
    }

    #[test]
    fn round_trip_10_20_30() {
        let e = EulerAngles::new(10.0, 20.0, 30.0);
        let back = rotation_to_euler(&euler_to_rotation(&e)).unwrap();
        assert!(!back.gimbal_lock);
        assert!(back.angles.max_abs_diff(&e) < 1e-9, "{:?}", back.angles);
    }

    #[test]
    fn published_rotation_reads_as_published_angles() {
        let r = Matrix3::new(0.927, -0.0447, 0.370, 0.0233, 0.997, 0.062, -0.372, -0.048, 0.926);
        // The printed matrix is rounded to three digits and is not exactly
        // orthonormal; read angles off its nearest rotation.
        let e = rotation_to_euler(&project_to_rotation(&r)).unwrap().angles;
        let published = EulerAngles::new(1.44, -3.018, 21.878);
        assert!(e.max_abs_diff(&published) < 0.05, "{e:?}");
    }

    #[test]
    fn gimbal_lock_is_flagged() {
        let e = EulerAngles::new(5.0, 10.0, 90.0);
        let sol = rotation_to_euler(&euler_to_rotation(&e)).unwrap();
        assert!(sol.gimbal_lock);
        assert_relative_eq!(sol.angles.yaw, 90.0, epsilon = 1e-6);
        // Only the combination is observable, but it must reproduce R.
        let r = euler_to_rotation(&sol.angles);
        assert!((r - euler_to_rotation(&e)).abs().max() < 1e-9);
    }

    #[test]
    fn non_rotation_rejected() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(rotation_to_euler(&m), Err(GeometryError::NotARotation)));
    }

    #[test]
    fn angle_between_small_rotations_is_accurate() {
        let a = euler_to_rotation(&EulerAngles::new(0.0, 0.0, 1e-8));
        assert_relative_eq!(rotation_angle_between(&a, &Matrix3::identity()), 1e-8, epsilon = 1e-15);
    }
}
