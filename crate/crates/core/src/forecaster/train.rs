use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{DecoderFeed, DropoutMasks, EncodedWindow, ModelConfig, ModelParams, Standardization};
use super::types::StateSample;
use super::ForecastError;
use crate::rng::{rng_from_seed, sub_seed};

/// One training example: an observed past and the future to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingWindow {
    pub past: Vec<StateSample>,
    pub future: Vec<StateSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub feed: DecoderFeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            feed: DecoderFeed::TeacherForcing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean mini-batch loss of each epoch, with dropout active.
    pub loss_trace: Vec<f64>,
    /// Dataset NLL without dropout after each epoch.
    pub eval_trace: Vec<f64>,
}

impl TrainOutcome {
    pub fn initial_loss(&self) -> Option<f64> {
        self.loss_trace.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_trace.last().copied()
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }

    fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grad.tensors()).zip(&mut self.m).zip(&mut self.v) {
            for j in 0..p.len() {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
            }
        }
    }
}

fn validate(windows: &[TrainingWindow], model: &ModelConfig, cfg: &TrainConfig) -> Result<(), ForecastError> {
    if windows.is_empty() {
        return Err(ForecastError::EmptyDataset);
    }
    if cfg.batch == 0 || !(cfg.lr >= 0.0) || !(0.0..1.0).contains(&cfg.beta1) || !(0.0..1.0).contains(&cfg.beta2) {
        return Err(ForecastError::InvalidConfig("batch must be positive, lr ≥ 0, betas in [0, 1)".into()));
    }
    for (i, w) in windows.iter().enumerate() {
        if w.past.len() != model.past || w.future.len() != model.future {
            return Err(ForecastError::ShapeMismatch(format!(
                "window {i} has {}+{} samples, expected {}+{}",
                w.past.len(),
                w.future.len(),
                model.past,
                model.future
            )));
        }
        if w.past.iter().chain(&w.future).any(|s| !s.is_finite()) {
            return Err(ForecastError::NonFinite(format!("window {i}")));
        }
    }
    Ok(())
}

/// Fits standardization on `windows`, initializes from the `"init"`
/// sub-stream of `seed`, and trains.
pub fn train(
    windows: &[TrainingWindow],
    model: ModelConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, ForecastError> {
    model.validate()?;
    validate(windows, &model, cfg)?;
    let st = Standardization::fit(windows.iter().map(|w| (w.past.as_slice(), w.future.as_slice())));
    let params = ModelParams::init(model, st, sub_seed(seed, "init"))?;
    fit(params, windows, cfg, seed)
}

/// Continues training `params` with Adam on the NLL.
///
/// Each epoch shuffles the windows from the `"shuffle"` sub-stream and draws
/// one set of dropout masks per window from the `"dropout"` sub-stream. The
/// batch gradient is the mean of per-window gradients accumulated in window
/// order, so the result depends only on the inputs and the seed.
pub fn fit(
    mut params: ModelParams,
    windows: &[TrainingWindow],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, ForecastError> {
    params.validate()?;
    validate(windows, &params.config, cfg)?;
    let encoded =
        windows.iter().map(|w| params.encode_window(&w.past, &w.future)).collect::<Result<Vec<EncodedWindow>, _>>()?;
    let mut shuffle_rng = rng_from_seed(sub_seed(seed, "shuffle"));
    let mut dropout_rng = rng_from_seed(sub_seed(seed, "dropout"));
    let hidden = params.config.hidden;
    let p = params.config.dropout;
    let mut adam = Adam::new(&params);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut eval_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let mut grad = params.zeros_like();
            let mut batch_loss = 0.0;
            for &i in chunk {
                let masks = (p > 0.0).then(|| DropoutMasks::sample(hidden, p, &mut dropout_rng));
                let (l, g) = params.loss_and_gradient(&encoded[i], masks.as_ref(), cfg.feed);
                batch_loss += l;
                for (acc, gi) in grad.tensors_mut().into_iter().zip(g.tensors()) {
                    acc.iter_mut().zip(gi).for_each(|(a, x)| *a += x);
                }
            }
            let n = chunk.len() as f64;
            batch_loss /= n;
            if !batch_loss.is_finite() {
                return Err(ForecastError::NonFiniteLoss { epoch, batch: b });
            }
            for t in grad.tensors_mut() {
                t.iter_mut().for_each(|v| *v /= n);
            }
            adam.step(&mut params, &grad, cfg);
            if !params.all_finite() {
                return Err(ForecastError::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += batch_loss;
            batches += 1;
        }
        let epoch_loss = epoch_loss / batches as f64;
        let eval = encoded.iter().map(|w| params.window_loss(w, None, cfg.feed)).sum::<f64>() / encoded.len() as f64;
        log::debug!("epoch {epoch}: train NLL {epoch_loss:.5}, eval NLL {eval:.5}");
        loss_trace.push(epoch_loss);
        eval_trace.push(eval);
    }
    Ok(TrainOutcome { params, loss_trace, eval_trace })
}

/// Dataset NLL of `params` without dropout.
pub fn evaluate_nll(params: &ModelParams, windows: &[TrainingWindow], feed: DecoderFeed) -> Result<f64, ForecastError> {
    if windows.is_empty() {
        return Err(ForecastError::EmptyDataset);
    }
    let mut total = 0.0;
    for w in windows {
        total += params.window_loss(&params.encode_window(&w.past, &w.future)?, None, feed);
    }
    Ok(total / windows.len() as f64)
}
