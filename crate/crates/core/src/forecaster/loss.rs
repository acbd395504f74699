//! Gaussian negative log-likelihood with a diagonal predicted variance.

/// Floor on the predicted variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

fn variance(log_var: f64) -> (f64, bool) {
    let s = log_var.exp();
    if s >= VARIANCE_FLOOR {
        (s, false)
    } else {
        (VARIANCE_FLOOR, true)
    }
}

/// Mean over steps and coordinates of `(y − μ)²/σ² + ½·log σ²`, with
/// `σ² = max(exp(log_var), 1e-6)`.
pub fn nll_loss(means: &[[f64; 2]], log_vars: &[[f64; 2]], targets: &[[f64; 2]]) -> f64 {
    assert_eq!(means.len(), targets.len());
    assert_eq!(log_vars.len(), targets.len());
    if targets.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for ((m, lv), y) in means.iter().zip(log_vars).zip(targets) {
        for j in 0..2 {
            let (s, _) = variance(lv[j]);
            let e = y[j] - m[j];
            total += e * e / s + 0.5 * s.ln();
        }
    }
    total / (2 * targets.len()) as f64
}

/// Gradients of [`nll_loss`] with respect to the means and log-variances.
/// Clamped variances pass no gradient to their log-variance.
pub fn nll_grad(means: &[[f64; 2]], log_vars: &[[f64; 2]], targets: &[[f64; 2]]) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let norm = 1.0 / (2 * targets.len().max(1)) as f64;
    let mut dm = vec![[0.0; 2]; targets.len()];
    let mut dlv = vec![[0.0; 2]; targets.len()];
    for k in 0..targets.len() {
        for j in 0..2 {
            let (s, clamped) = variance(log_vars[k][j]);
            let e = targets[k][j] - means[k][j];
            dm[k][j] = -2.0 * e / s * norm;
            dlv[k][j] = if clamped { 0.0 } else { (0.5 - e * e / s) * norm };
        }
    }
    (dm, dlv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_unit_variance_prediction_is_zero() {
        let y = [[1.0, 2.0]; 12];
        assert_eq!(nll_loss(&y, &[[0.0; 2]; 12], &y), 0.0);
    }

    #[test]
    fn hand_value() {
        // e = 1, σ² = e¹: 1/e + 0.5
        let l = nll_loss(&[[0.0, 0.0]], &[[1.0, 1.0]], &[[1.0, -1.0]]);
        assert!((l - ((-1.0f64).exp() + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn variance_floor_applies() {
        let l = nll_loss(&[[0.0, 0.0]], &[[-100.0, -100.0]], &[[0.0, 0.0]]);
        assert!((l - 0.5 * VARIANCE_FLOOR.ln()).abs() < 1e-12);
        let (_, dlv) = nll_grad(&[[0.0, 0.0]], &[[-100.0, -100.0]], &[[0.0, 0.0]]);
        assert_eq!(dlv[0], [0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_differences() {
        let m = vec![[0.2, -0.4], [1.0, 0.5]];
        let lv = vec![[0.3, -0.8], [0.0, 1.2]];
        let y = vec![[0.0, 0.1], [1.5, 0.4]];
        let (dm, dlv) = nll_grad(&m, &lv, &y);
        let eps = 1e-6;
        for k in 0..2 {
            for j in 0..2 {
                let (mut mp, mut mm) = (m.clone(), m.clone());
                mp[k][j] += eps;
                mm[k][j] -= eps;
                let fd = (nll_loss(&mp, &lv, &y) - nll_loss(&mm, &lv, &y)) / (2.0 * eps);
                assert!((fd - dm[k][j]).abs() < 1e-8);
                let (mut lp, mut lm) = (lv.clone(), lv.clone());
                lp[k][j] += eps;
                lm[k][j] -= eps;
                let fd = (nll_loss(&m, &lp, &y) - nll_loss(&m, &lm, &y)) / (2.0 * eps);
                assert!((fd - dlv[k][j]).abs() < 1e-8);
            }
        }
    }
}
