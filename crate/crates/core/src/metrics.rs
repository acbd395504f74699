//! Forecast evaluation: displacement error, Gaussian KL divergence and
//! entropy, all in metres and nats.

use std::f64::consts::{E, LOG2_E, PI};
use std::io::Write;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecaster::{ForecastDistribution, StepGaussian};

/// Multiply nats by this to get bits.
pub const BITS_PER_NAT: f64 = LOG2_E;

/// Added to a near-singular covariance before inversion.
pub const REGULARIZATION: f64 = 1e-9;

/// Smallest eigenvalue accepted without regularization.
pub const MIN_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sequence")]
    Empty,
    #[error("covariance is singular (min eigenvalue {min_eigenvalue:e})")]
    SingularCovariance { min_eigenvalue: f64 },
    #[error("covariance is not symmetric")]
    Asymmetric,
}

/// A bivariate Gaussian over ground-plane positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl Gaussian2 {
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self, MetricsError> {
        if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 {
            return Err(MetricsError::Asymmetric);
        }
        Ok(Self { mean, cov })
    }

    pub fn isotropic(mean: [f64; 2], var: f64) -> Self {
        Self { mean: Vector2::from(mean), cov: Matrix2::identity() * var }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.cov).eigenvalues.min()
    }
}

impl From<&StepGaussian> for Gaussian2 {
    fn from(s: &StepGaussian) -> Self {
        Self { mean: s.mean, cov: s.cov }
    }
}

/// Mean Euclidean distance between paired points.
pub fn ade<const D: usize>(pred: &[[f64; D]], truth: &[[f64; D]]) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: f64 =
        pred.iter().zip(truth).map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()).sum();
    Ok(total / pred.len() as f64)
}

/// Returns the covariance to use and whether it was regularized.
fn conditioned(cov: &Matrix2<f64>) -> Result<(Matrix2<f64>, bool), MetricsError> {
    let min = SymmetricEigen::new(*cov).eigenvalues.min();
    if min > MIN_EIGENVALUE {
        return Ok((*cov, false));
    }
    let reg = cov + Matrix2::identity() * REGULARIZATION;
    let min_reg = SymmetricEigen::new(reg).eigenvalues.min();
    if min_reg > MIN_EIGENVALUE {
        Ok((reg, true))
    } else {
        Err(MetricsError::SingularCovariance { min_eigenvalue: min })
    }
}

/// KL divergence in nats together with a flag telling whether either
/// covariance needed the `1e-9·I` regularization.
///
/// The trace term is evaluated as `tr(Σq⁻¹(Σp − Σq))`, so `KL(p‖p)` is
/// exactly zero.
pub fn kl_divergence_flagged(p: &Gaussian2, q: &Gaussian2) -> Result<(f64, bool), MetricsError> {
    let (sp, rp) = conditioned(&p.cov)?;
    let (sq, rq) = conditioned(&q.cov)?;
    let sq_inv = sq.try_inverse().ok_or(MetricsError::SingularCovariance { min_eigenvalue: 0.0 })?;
    let dmu = q.mean - p.mean;
    let log_det = (sq.determinant() / sp.determinant()).ln();
    let trace = (sq_inv * (sp - sq)).trace();
    let maha = (dmu.transpose() * sq_inv * dmu)[(0, 0)];
    Ok((0.5 * (log_det + trace + maha), rp || rq))
}

/// `KL(p‖q)` in nats for bivariate Gaussians.
pub fn kl_divergence(p: &Gaussian2, q: &Gaussian2) -> Result<f64, MetricsError> {
    kl_divergence_flagged(p, q).map(|(kl, _)| kl)
}

/// Differential entropy `½·log((2πe)² det Σ)` in nats.
pub fn entropy(p: &Gaussian2) -> Result<f64, MetricsError> {
    let det = p.cov.determinant();
    if !(det > 0.0) {
        return Err(MetricsError::SingularCovariance { min_eigenvalue: p.min_eigenvalue() });
    }
    Ok(0.5 * ((2.0 * PI * E).powi(2) * det).ln())
}

/// One forecast step of a divergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based.
    pub step: usize,
    pub kl_nats: f64,
    pub entropy_nats: f64,
    pub ratio: f64,
    pub regularized: bool,
}

/// Per-step `KL(p‖q)`, `H(p)` and their ratio. `p` is the reference
/// forecast (the ego camera's own view).
pub fn divergence_trace(fp: &ForecastDistribution, fq: &ForecastDistribution) -> Result<Vec<TraceRow>, MetricsError> {
    if fp.horizon() != fq.horizon() {
        return Err(MetricsError::LengthMismatch(fp.horizon(), fq.horizon()));
    }
    fp.steps
        .iter()
        .zip(&fq.steps)
        .enumerate()
        .map(|(k, (a, b))| {
            let (p, q) = (Gaussian2::from(a), Gaussian2::from(b));
            let (kl, regularized) = kl_divergence_flagged(&p, &q)?;
            let h = entropy(&p)?;
            Ok(TraceRow { step: k + 1, kl_nats: kl, entropy_nats: h, ratio: kl / h, regularized })
        })
        .collect()
}

pub const TRACE_CSV_HEADER: [&str; 4] = ["step", "kl_nats", "entropy_nats", "ratio"];

pub fn write_trace_csv<W: Write>(writer: W, rows: &[TraceRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_CSV_HEADER)?;
    for r in rows {
        w.write_record([r.step.to_string(), r.kl_nats.to_string(), r.entropy_nats.to_string(), r.ratio.to_string()])?;
    }
    w.flush()
}

/// Squared Mahalanobis distance of `x` under `g`.
pub fn mahalanobis_sq(g: &Gaussian2, x: &Vector2<f64>) -> Result<f64, MetricsError> {
    let (cov, _) = conditioned(&g.cov)?;
    let inv = cov.try_inverse().ok_or(MetricsError::SingularCovariance { min_eigenvalue: 0.0 })?;
    let d = x - g.mean;
    Ok((d.transpose() * inv * d)[(0, 0)])
}

/// χ²₂ quantiles bounding the 1Σ and 2Σ ellipses (68.3 % and 95.4 %).
pub const CHI2_1SIGMA: f64 = 2.30;
pub const CHI2_2SIGMA: f64 = 6.18;
