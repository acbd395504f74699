use std::io::Write;

use nalgebra::Vector3;

use crate::forecaster::{ForecastError, StateSample, Trajectory};
use crate::geometry::{transform_to_ego, transform_velocity, Frame, GeometryError, Point3, RelativePose};

use super::walk::write_rows;
use super::{CameraRig, GroundTruthWalk, SceneError};

/// Which rig camera observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraId {
    One,
    Two,
}

impl CameraId {
    pub fn frame(self) -> Frame {
        match self {
            CameraId::One => Frame::Camera1,
            CameraId::Two => Frame::Camera2,
        }
    }
}

/// A walk as seen by one camera: 3D positions and velocities in that camera's
/// frame, with samples the camera cannot see flagged `missing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: Frame,
    pub dt: f64,
    pub times: Vec<f64>,
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub missing: Vec<bool>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Ground-plane states `(X, Z, Ẋ, Ż)`, ignoring the missing flags.
    pub fn planar_states(&self) -> Vec<StateSample> {
        self.positions.iter().zip(&self.velocities).map(|(p, v)| StateSample::new(p.x, p.z, v.x, v.z)).collect()
    }

    pub fn to_trajectory(&self, past_len: usize) -> Result<Trajectory, ForecastError> {
        Trajectory::new(self.frame, self.dt, self.planar_states(), past_len)
    }

    /// Maps a camera-1 observation into the ego frame with `pose`: positions
    /// by `Rᵀ(X − t)`, velocities by `Rᵀv`. The missing flags carry over.
    pub fn transform_to_ego(&self, pose: &RelativePose) -> Result<Observation, GeometryError> {
        let positions = self
            .positions
            .iter()
            .map(|p| transform_to_ego(&Point3 { coords: *p, frame: self.frame }, pose).map(|q| q.coords))
            .collect::<Result<Vec<_>, _>>()?;
        let velocities = self.velocities.iter().map(|v| transform_velocity(v, pose)).collect();
        Ok(Observation { frame: pose.ego_frame(), positions, velocities, ..self.clone() })
    }

    /// Writes the walk CSV layout; the observing camera's column carries the
    /// missing flags and the other column is zero.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SceneError> {
        let cam1 = self.frame == Frame::Camera1;
        let rows = (0..self.len()).map(|i| {
            let m = self.missing[i];
            (self.times[i], self.positions[i], self.velocities[i], cam1 && m, !cam1 && m)
        });
        write_rows(writer, rows)
    }
}

/// Observes `walk` from one rig camera.
///
/// Camera 1's frame is the world frame, so its observation is the walk
/// itself; camera 2 sees `Rᵀ(X − t)` and `Rᵀv` under the rig's true pose.
pub fn observe(walk: &GroundTruthWalk, rig: &CameraRig, camera: CameraId) -> Result<Observation, SceneError> {
    if walk.is_empty() {
        return Err(SceneError::InvalidArgument("cannot observe an empty walk".into()));
    }
    let world = Observation {
        frame: Frame::Camera1,
        dt: walk.dt,
        times: walk.samples.iter().map(|s| s.t).collect(),
        positions: walk.samples.iter().map(|s| s.position).collect(),
        velocities: walk.samples.iter().map(|s| s.velocity).collect(),
        missing: walk.occluded_cam1.clone(),
    };
    match camera {
        CameraId::One => Ok(world),
        CameraId::Two => {
            let mut o = world.transform_to_ego(&rig.pose)?;
            o.missing = walk.occluded_cam2.clone();
            Ok(o)
        }
    }
}
