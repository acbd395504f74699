//! Two-view epipolar geometry: fundamental and essential matrices, relative
//! pose recovery and rigid transforms between the two camera frames.

mod camera;
mod essential;
mod fundamental;
pub mod io;
mod pose;
mod rotation;

use nalgebra::{DMatrix, Matrix3, Vector3};
use thiserror::Error;

pub use camera::{CameraIntrinsics, Correspondence};
pub use essential::{
    decompose_essential, essential_candidates, essential_from_fundamental, triangulate_midpoint, EssentialMatrix,
};
pub use fundamental::{
    adaptive_iteration_bound, estimate_fundamental_dlt, ransac_fundamental, sampson_distance, FundamentalMatrix,
    RansacConfig, RansacOutcome, MIN_MATCHES,
};
pub use pose::{
    set_scale, transform_from_ego, transform_to_ego, transform_velocity, Frame, Point3, PoseJson, RelativePose,
};
pub use rotation::{
    euler_to_rotation, is_rotation, project_to_rotation, rotation_angle_between, rotation_to_euler, skew, wrap_degrees,
    EulerAngles, EulerSolution, ROTATION_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientMatches { needed: usize, got: usize },
    #[error("degenerate configuration: the epipolar constraints do not determine a unique matrix")]
    DegenerateConfiguration,
    #[error("no consensus: best hypothesis has only {best} inliers")]
    NoConsensus { best: usize },
    #[error("cheirality ambiguous: best candidate puts only {:.1}% of points in front of both cameras", best_fraction * 100.0)]
    CheiralityAmbiguous { best_fraction: f64 },
    #[error("distance between cameras must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("point is in frame {got}, expected {expected}")]
    FrameMismatch { expected: Frame, got: Frame },
    #[error("pose has no metric scale; call set_scale first")]
    ScaleUnset,
    #[error("camera intrinsics must have positive finite focal lengths")]
    InvalidIntrinsics,
    #[error("matrix is not a rotation")]
    NotARotation,
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
}

/// Singular value decomposition through faer.
///
/// nalgebra 0.35's SVD is not usable here: its fixed-size 3×3 path loses
/// about five digits on pixel-space fundamental matrices (entries spanning
/// six orders of magnitude), and its dynamic path returned a wrong
/// decomposition for some exactly rank-2 inputs.
fn svd_faer(
    rows: usize,
    cols: usize,
    at: impl Fn(usize, usize) -> f64,
) -> Option<(faer::Mat<f64>, Vec<f64>, faer::Mat<f64>)> {
    let m = faer::Mat::<f64>::from_fn(rows, cols, at);
    let svd = m.svd().ok()?;
    let s = svd.S().column_vector().iter().copied().collect();
    Some((svd.U().to_owned(), s, svd.V().to_owned()))
}

/// `m = U·diag(s)·Vᵀ` with `s` in descending order.
pub(crate) fn svd3(m: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let (u, s, v) = svd_faer(3, 3, |i, j| m[(i, j)]).expect("3×3 SVD converges");
    (Matrix3::from_fn(|i, j| u[(i, j)]), Vector3::new(s[0], s[1], s[2]), Matrix3::from_fn(|i, j| v[(j, i)]))
}

/// Right singular vectors of `a` sorted by descending singular value, with
/// the singular values. Rows of the returned matrix are the vectors.
pub(crate) fn right_singular_vectors(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let (_, s, v) = svd_faer(a.nrows(), a.ncols(), |i, j| a[(i, j)])?;
    let n = a.ncols();
    let mut s = s;
    s.resize(n, 0.0);
    Some((DMatrix::from_fn(n, n, |i, j| v[(j, i)]), s))
}

/// Scales to unit Frobenius norm and flips the sign so the largest-magnitude
/// entry is positive. Makes F and E comparable across estimators.
pub fn normalize_sign(m: &Matrix3<f64>) -> Matrix3<f64> {
    let n = m.norm();
    if n == 0.0 {
        return *m;
    }
    let (mut best, mut best_abs) = (0.0, -1.0);
    for v in m.iter() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = *v;
        }
    }
    if best < 0.0 {
        -m / n
    } else {
        m / n
    }
}
