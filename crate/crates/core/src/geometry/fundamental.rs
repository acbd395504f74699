use nalgebra::{DMatrix, Matrix3, Vector2};
use rand::seq::index::sample;

use super::camera::Correspondence;
use super::{normalize_sign, right_singular_vectors, svd3, GeometryError};
use crate::rng::rng_from_seed;

/// Minimum number of correspondences for the linear solver.
pub const MIN_MATCHES: usize = 8;

/// Rank-2 fundamental matrix with `‖F‖_F = 1` and its largest-magnitude
/// entry positive. Satisfies `bᵀ F a = 0` for a camera-1 pixel `a` and its
/// camera-2 match `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix(Matrix3<f64>);

impl FundamentalMatrix {
    /// Projects an arbitrary matrix to rank 2 and normalizes it.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let (u, mut s, v_t) = svd3(m);
        let (min_idx, _) = s.argmin();
        s[min_idx] = 0.0;
        Self(normalize_sign(&(u * Matrix3::from_diagonal(&s) * v_t)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// First-order geometric error of a match, in pixels.
    pub fn sampson_distance(&self, m: &Correspondence) -> f64 {
        sampson_distance(&self.0, m)
    }

    pub fn max_residual(&self, matches: &[Correspondence]) -> f64 {
        matches.iter().map(|m| m.epipolar_residual(&self.0).abs()).fold(0.0, f64::max)
    }
}

/// Square root of the Sampson error `(bᵀFa)² / (‖(Fa)₁,₂‖² + ‖(Fᵀb)₁,₂‖²)`.
pub fn sampson_distance(f: &Matrix3<f64>, m: &Correspondence) -> f64 {
    let fa = f * m.a();
    let ftb = f.transpose() * m.b();
    let r = m.b().dot(&fa);
    let denom = fa.x * fa.x + fa.y * fa.y + ftb.x * ftb.x + ftb.y * ftb.y;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    r.abs() / denom.sqrt()
}

/// Similarity moving the centroid to the origin with RMS distance √2.
fn conditioning<'a>(pts: impl Iterator<Item = Vector2<f64>> + Clone + 'a) -> Option<Matrix3<f64>> {
    let n = pts.clone().count() as f64;
    let c = pts.clone().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let ms = pts.map(|p| (p - c).norm_squared()).sum::<f64>() / n;
    if !(ms > 0.0) {
        return None;
    }
    let s = (2.0 / ms).sqrt();
    Some(Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0))
}

/// Normalized eight-point estimate of `F` from `n ≥ 8` matches.
///
/// Both point sets are conditioned (centroid at the origin, RMS distance √2),
/// the stacked constraints `bᵀFa = 0` are solved in the least-squares sense
/// by SVD, the solution is forced to rank 2 and then mapped back to pixel
/// coordinates.
pub fn estimate_fundamental_dlt(matches: &[Correspondence]) -> Result<FundamentalMatrix, GeometryError> {
    let n = matches.len();
    if n < MIN_MATCHES {
        return Err(GeometryError::InsufficientMatches { needed: MIN_MATCHES, got: n });
    }
    let t1 = conditioning(matches.iter().map(|m| m.a().xy())).ok_or(GeometryError::DegenerateConfiguration)?;
    let t2 = conditioning(matches.iter().map(|m| m.b().xy())).ok_or(GeometryError::DegenerateConfiguration)?;

    // Pad to a square system so the SVD always yields a full 9×9 V.
    let rows = n.max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, m) in matches.iter().enumerate() {
        let p = t1 * m.a();
        let q = t2 * m.b();
        let (x, y) = (p.x / p.z, p.y / p.z);
        let (xp, yp) = (q.x / q.z, q.y / q.z);
        let row = [xp * x, xp * y, xp, yp * x, yp * y, yp, x, y, 1.0];
        for (j, v) in row.into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }

    // Singular values come back in descending order.
    let (v_t, sigma) = right_singular_vectors(&a).ok_or(GeometryError::DegenerateConfiguration)?;
    // A unique null vector needs rank 8.
    if !(sigma[7] > 1e-10 * sigma[0]) {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let f = v_t.row(8);
    let f_hat = Matrix3::new(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]);
    let f_hat = FundamentalMatrix::from_matrix(&f_hat);
    Ok(FundamentalMatrix::from_matrix(&(t2.transpose() * f_hat.0 * t1)))
}

/// RANSAC settings. Defaults: 1000 iterations at 99 % confidence with a
/// 1 px Sampson threshold.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RansacConfig {
    pub iterations: usize,
    pub confidence: f64,
    pub threshold_px: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self { iterations: 1000, confidence: 0.99, threshold_px: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacOutcome {
    pub fundamental: FundamentalMatrix,
    pub inliers: Vec<bool>,
    /// Hypotheses actually drawn before the adaptive bound stopped the loop.
    pub iterations_run: usize,
}

impl RansacOutcome {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Hypotheses needed to draw an all-inlier 8-sample with the given
/// confidence when a fraction `w` of the data are inliers.
pub fn adaptive_iteration_bound(confidence: f64, w: f64) -> f64 {
    let p_good = w.powi(MIN_MATCHES as i32);
    if p_good >= 1.0 {
        return 0.0;
    }
    if p_good <= 0.0 {
        return f64::INFINITY;
    }
    // ln_1p keeps the denominator nonzero when w⁸ is below machine epsilon.
    (1.0 - confidence).ln() / (-p_good).ln_1p()
}

fn inlier_mask(f: &Matrix3<f64>, matches: &[Correspondence], threshold: f64) -> Vec<bool> {
    matches.iter().map(|m| sampson_distance(f, m) < threshold).collect()
}

/// Robust `F`: eight-point hypotheses scored by Sampson distance, the
/// winner refit on all of its inliers.
///
/// Ties keep the earliest hypothesis, so a fixed seed gives bit-identical
/// output.
pub fn ransac_fundamental(matches: &[Correspondence], cfg: &RansacConfig) -> Result<RansacOutcome, GeometryError> {
    let n = matches.len();
    if n < MIN_MATCHES {
        return Err(GeometryError::InsufficientMatches { needed: MIN_MATCHES, got: n });
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(GeometryError::InvalidArgument(format!("confidence {} outside (0, 1)", cfg.confidence)));
    }
    if !(cfg.threshold_px > 0.0) {
        return Err(GeometryError::InvalidArgument(format!("threshold {} must be positive", cfg.threshold_px)));
    }

    let mut rng = rng_from_seed(cfg.seed);
    let mut best: Option<(usize, Vec<bool>)> = None;
    let mut bound = cfg.iterations as f64;
    let mut iterations_run = 0;
    let mut sample_buf = Vec::with_capacity(MIN_MATCHES);

    while (iterations_run as f64) < bound.min(cfg.iterations as f64) {
        iterations_run += 1;
        sample_buf.clear();
        sample_buf.extend(sample(&mut rng, n, MIN_MATCHES).into_iter().map(|i| matches[i]));
        let Ok(model) = estimate_fundamental_dlt(&sample_buf) else {
            continue;
        };
        let mask = inlier_mask(&model.0, matches, cfg.threshold_px);
        let count = mask.iter().filter(|&&b| b).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            bound = adaptive_iteration_bound(cfg.confidence, count as f64 / n as f64);
            best = Some((count, mask));
        }
    }

    let (best_count, best_mask) = best.unwrap_or((0, vec![false; n]));
    if best_count < MIN_MATCHES {
        return Err(GeometryError::NoConsensus { best: best_count });
    }
    let inlier_matches: Vec<_> = matches.iter().zip(&best_mask).filter(|(_, &keep)| keep).map(|(m, _)| *m).collect();
    let refit = estimate_fundamental_dlt(&inlier_matches)?;
    let refit_mask = inlier_mask(&refit.0, matches, cfg.threshold_px);
    let inliers = if refit_mask.iter().filter(|&&b| b).count() >= MIN_MATCHES { refit_mask } else { best_mask };
    log::debug!("ransac: {iterations_run} hypotheses, {best_count} inliers");
    Ok(RansacOutcome { fundamental: refit, inliers, iterations_run })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_matches_are_insufficient() {
        let m: Vec<_> = (0..7).map(|i| Correspondence::new(i as f64, 1.0, 2.0, i as f64)).collect();
        assert!(matches!(estimate_fundamental_dlt(&m), Err(GeometryError::InsufficientMatches { needed: 8, got: 7 })));
    }

    #[test]
    fn identical_views_are_degenerate() {
        let m: Vec<_> = (0..20)
            .map(|i| {
                let x = 37.0 * i as f64 % 640.0;
                let y = (11.0 * (i * i) as f64) % 480.0;
                Correspondence::new(x, y, x, y)
            })
            .collect();
        assert!(matches!(estimate_fundamental_dlt(&m), Err(GeometryError::DegenerateConfiguration)));
    }

    #[test]
    fn adaptive_bound_values() {
        assert_eq!(adaptive_iteration_bound(0.99, 1.0), 0.0);
        assert!(adaptive_iteration_bound(0.99, 0.0).is_infinite());
        // 0.7⁸ ≈ 0.0576 → ln(0.01)/ln(0.9424) ≈ 77.6
        let b = adaptive_iteration_bound(0.99, 0.7);
        assert!((b - 77.6).abs() < 0.1, "{b}");
        // w⁸ underflows 1 − w⁸ to exactly 1 without ln_1p.
        let tiny = adaptive_iteration_bound(0.99, 1.0 / 200.0);
        assert!(tiny > 1e18 && tiny.is_finite(), "{tiny}");
    }

    #[test]
    fn ransac_rejects_bad_config() {
        let m: Vec<_> = (0..10).map(|i| Correspondence::new(i as f64, 0.0, 0.0, i as f64)).collect();
        let cfg = RansacConfig { confidence: 1.0, ..Default::default() };
        assert!(matches!(ransac_fundamental(&m, &cfg), Err(GeometryError::InvalidArgument(_))));
        let cfg = RansacConfig { threshold_px: 0.0, ..Default::default() };
        assert!(matches!(ransac_fundamental(&m, &cfg), Err(GeometryError::InvalidArgument(_))));
    }
}
