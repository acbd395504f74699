use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use super::loss::VARIANCE_FLOOR;
use super::model::{DropoutMasks, ModelParams};
use super::types::{ForecastDistribution, StateSample, StepGaussian};
use super::ForecastError;
use crate::geometry::Frame;
use crate::rng::indexed_seed;

/// One stochastic pass in metric units: positions and aleatoric variances.
#[derive(Debug, Clone, PartialEq)]
pub struct McSample {
    pub means: Vec<Vector2<f64>>,
    pub variances: Vec<Vector2<f64>>,
}

/// Runs `n` dropout passes over `past`. Pass `i` draws its masks from
/// `indexed_seed(seed, i)`, so the result does not depend on scheduling.
pub fn mc_samples(
    params: &ModelParams,
    past: &[StateSample],
    n: usize,
    seed: u64,
) -> Result<Vec<McSample>, ForecastError> {
    params.validate()?;
    let inputs = params.encode_inputs(past)?;
    let anchor = past[past.len() - 1];
    let sc = params.standardization.target_scale;
    let (h, p) = (params.config.hidden, params.config.dropout);
    let samples = (0..n)
        .into_par_iter()
        .map(|i| {
            let masks = (p > 0.0).then(|| DropoutMasks::from_seed(h, p, indexed_seed(seed, i as u64)));
            let raw = params.forward_encoded(&inputs, masks.as_ref());
            let means =
                raw.means.iter().map(|m| Vector2::new(anchor.x + m[0] * sc[0], anchor.y + m[1] * sc[1])).collect();
            let variances = raw
                .log_vars
                .iter()
                .map(|lv| {
                    Vector2::new(
                        lv[0].exp().max(VARIANCE_FLOOR) * sc[0] * sc[0],
                        lv[1].exp().max(VARIANCE_FLOOR) * sc[1] * sc[1],
                    )
                })
                .collect();
            McSample { means, variances }
        })
        .collect();
    Ok(samples)
}

/// Monte-Carlo dropout forecast.
///
/// Per step, the mean is the average of the `n` pass means and the covariance
/// is their population covariance (divided by `n`) plus the average predicted
/// aleatoric variance on the diagonal. Deviations are taken from the first
/// pass before averaging, so identical passes give an epistemic term of
/// exactly zero.
pub fn mc_dropout_infer(
    params: &ModelParams,
    past: &[StateSample],
    frame: Frame,
    n: usize,
    seed: u64,
) -> Result<ForecastDistribution, ForecastError> {
    if n < 2 {
        return Err(ForecastError::DegenerateN(n));
    }
    let samples = mc_samples(params, past, n, seed)?;
    let nf = n as f64;
    let horizon = params.config.future;
    let mut steps = Vec::with_capacity(horizon);
    let mut epistemic = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let origin = samples[0].means[k];
        let mut mean_dev = Vector2::zeros();
        let mut alea = Vector2::zeros();
        for s in &samples {
            mean_dev += s.means[k] - origin;
            alea += s.variances[k];
        }
        mean_dev /= nf;
        alea /= nf;
        let mut cov = Matrix2::zeros();
        for s in &samples {
            let d = s.means[k] - origin - mean_dev;
            cov += d * d.transpose();
        }
        cov /= nf;
        // Exact symmetry regardless of summation order.
        cov[(1, 0)] = cov[(0, 1)];
        let total = cov + Matrix2::from_diagonal(&alea);
        if !total.iter().all(|v| v.is_finite()) || !mean_dev.iter().all(|v| v.is_finite()) {
            return Err(ForecastError::NonFinite(format!("forecast step {}", k + 1)));
        }
        steps.push(StepGaussian { mean: origin + mean_dev, cov: total });
        epistemic.push(cov);
    }
    Ok(ForecastDistribution { frame, steps, passes: n, epistemic })
}
