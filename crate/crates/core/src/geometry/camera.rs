use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Pinhole calibration `K`, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn identity() -> Self {
        Self { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0 }
    }

    /// A 640×480 camera with a 600 px focal length.
    pub fn vga() -> Self {
        Self { fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0 }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics);
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(1.0 / self.fx, 0.0, -self.cx / self.fx, 0.0, 1.0 / self.fy, -self.cy / self.fy, 0.0, 0.0, 1.0)
    }

    /// Projects a camera-frame point. `None` when it is not in front of the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Back-projects a pixel at a known depth.
    pub fn unproject(&self, px: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new((px.x - self.cx) / self.fx * depth, (px.y - self.cy) / self.fy * depth, depth)
    }

    /// Bearing `K⁻¹ x` of a homogeneous pixel (z component 1).
    pub fn normalize(&self, px: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy, 1.0)
    }
}

/// A matched pixel pair: `a` in camera 1, `b` in camera 2, homogeneous with
/// a unit third component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    a: Vector3<f64>,
    b: Vector3<f64>,
}

impl Correspondence {
    pub fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Self { a: Vector3::new(ax, ay, 1.0), b: Vector3::new(bx, by, 1.0) }
    }

    pub fn from_pixels(a: Vector2<f64>, b: Vector2<f64>) -> Self {
        Self::new(a.x, a.y, b.x, b.y)
    }

    pub fn a(&self) -> &Vector3<f64> {
        &self.a
    }

    pub fn b(&self) -> &Vector3<f64> {
        &self.b
    }

    /// Algebraic epipolar residual `bᵀ F a`.
    pub fn epipolar_residual(&self, f: &Matrix3<f64>) -> f64 {
        self.b.dot(&(f * self.a))
    }
}
