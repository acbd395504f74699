//! A single LSTM layer with explicit forward caches and backward pass.
//!
//! Gate layout in every `4H` block is `[input, forget, cell, output]`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input: usize,
    pub hidden: usize,
    /// `4H × input`, row-major.
    pub w: Vec<f64>,
    /// `4H × H`, row-major.
    pub u: Vec<f64>,
    /// `4H`.
    pub b: Vec<f64>,
}

/// Everything a backward step needs from the forward step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    /// Recurrent input after its dropout mask.
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w: vec![0.0; 4 * hidden * input],
            u: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform in `±1/√H`, forget-gate bias shifted by +1.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut layer = Self::zeros(input, hidden);
        for v in layer.w.iter_mut().chain(layer.u.iter_mut()).chain(layer.b.iter_mut()) {
            *v = rng.random_range(-bound..=bound);
        }
        for v in &mut layer.b[hidden..2 * hidden] {
            *v += 1.0;
        }
        layer
    }

    pub fn tensors(&self) -> [&Vec<f64>; 3] {
        [&self.w, &self.u, &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.w, &mut self.u, &mut self.b]
    }

    /// One step. `h_prev` must already carry its dropout mask.
    pub fn forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmCache {
        let (n_in, n_h) = (self.input, self.hidden);
        debug_assert_eq!(x.len(), n_in);
        debug_assert_eq!(h_prev.len(), n_h);
        let mut z = self.b.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let wr = &self.w[r * n_in..(r + 1) * n_in];
            let ur = &self.u[r * n_h..(r + 1) * n_h];
            let mut acc = 0.0;
            for (a, b) in wr.iter().zip(x) {
                acc += a * b;
            }
            for (a, b) in ur.iter().zip(h_prev) {
                acc += a * b;
            }
            *zr += acc;
        }
        let i: Vec<f64> = z[..n_h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[n_h..2 * n_h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * n_h..3 * n_h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * n_h..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..n_h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..n_h).map(|k| o[k] * tanh_c[k]).collect();
        LstmCache { x: x.to_vec(), h_prev: h_prev.to_vec(), c_prev: c_prev.to_vec(), i, f, g, o, tanh_c, c, h }
    }

    /// Backward through one step.
    ///
    /// Accumulates parameter gradients into `grad` and returns
    /// `(dL/dx, dL/dh_prev (masked input), dL/dc_prev)`.
    pub fn backward(
        &self,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmLayer,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n_in, n_h) = (self.input, self.hidden);
        let mut dz = vec![0.0; 4 * n_h];
        let mut dc_prev = vec![0.0; n_h];
        for k in 0..n_h {
            let (i, f, g, o, tc) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k], cache.tanh_c[k]);
            let d_o = dh[k] * tc;
            let d_c = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = d_c * g * i * (1.0 - i);
            dz[n_h + k] = d_c * cache.c_prev[k] * f * (1.0 - f);
            dz[2 * n_h + k] = d_c * i * (1.0 - g * g);
            dz[3 * n_h + k] = d_o * o * (1.0 - o);
            dc_prev[k] = d_c * f;
        }
        let mut dx = vec![0.0; n_in];
        let mut dh_prev = vec![0.0; n_h];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.b[r] += d;
            let wr = &self.w[r * n_in..(r + 1) * n_in];
            let gw = &mut grad.w[r * n_in..(r + 1) * n_in];
            for j in 0..n_in {
                gw[j] += d * cache.x[j];
                dx[j] += d * wr[j];
            }
            let ur = &self.u[r * n_h..(r + 1) * n_h];
            let gu = &mut grad.u[r * n_h..(r + 1) * n_h];
            for j in 0..n_h {
                gu[j] += d * cache.h_prev[j];
                dh_prev[j] += d * ur[j];
            }
        }
        (dx, dh_prev, dc_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn zero_layer_outputs_zero() {
        let l = LstmLayer::zeros(3, 5);
        let c = l.forward(&[1.0, -2.0, 0.5], &[0.0; 5], &[0.0; 5]);
        assert!(c.h.iter().all(|&v| v == 0.0));
        assert!(c.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_gradient_matches_differences() {
        let mut rng = rng_from_seed(3);
        let layer = LstmLayer::init(3, 4, &mut rng);
        let x = [0.3, -0.7, 1.1];
        let h0 = [0.1, -0.2, 0.05, 0.4];
        let c0 = [0.2, 0.1, -0.3, 0.0];
        // L = Σ h + 0.5 Σ c
        let loss = |l: &LstmLayer| {
            let c = l.forward(&x, &h0, &c0);
            c.h.iter().sum::<f64>() + 0.5 * c.c.iter().sum::<f64>()
        };
        let cache = layer.forward(&x, &h0, &c0);
        let mut grad = LstmLayer::zeros(3, 4);
        layer.backward(&cache, &[1.0; 4], &[0.5; 4], &mut grad);
        let eps = 1e-6;
        for t in 0..3 {
            for j in 0..layer.tensors()[t].len() {
                let mut p = layer.clone();
                p.tensors_mut()[t][j] += eps;
                let mut m = layer.clone();
                m.tensors_mut()[t][j] -= eps;
                let fd = (loss(&p) - loss(&m)) / (2.0 * eps);
                let an = grad.tensors()[t][j];
                assert!((fd - an).abs() < 1e-8, "tensor {t} entry {j}: {fd} vs {an}");
            }
        }
    }
}
