use std::f64::consts::{E, LN_2, PI};

use coforecast::forecaster::{ForecastDistribution, StepGaussian};
use coforecast::geometry::Frame;
use coforecast::metrics::{
    ade, divergence_trace, entropy, kl_divergence, kl_divergence_flagged, Gaussian2, MetricsError,
};
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;

/// KL between bivariate Gaussians written out entry by entry: 2×2 inverse by
/// the adjugate, determinant by cross product.
fn kl_oracle(p: &Gaussian2, q: &Gaussian2) -> f64 {
    let [a, b, _, d] = [q.cov[(0, 0)], q.cov[(0, 1)], q.cov[(1, 0)], q.cov[(1, 1)]];
    let det_q = a * d - b * b;
    let det_p = p.cov[(0, 0)] * p.cov[(1, 1)] - p.cov[(0, 1)] * p.cov[(0, 1)];
    let (i00, i01, i11) = (d / det_q, -b / det_q, a / det_q);
    let trace = i00 * p.cov[(0, 0)] + 2.0 * i01 * p.cov[(0, 1)] + i11 * p.cov[(1, 1)];
    let (dx, dy) = (q.mean.x - p.mean.x, q.mean.y - p.mean.y);
    let maha = i00 * dx * dx + 2.0 * i01 * dx * dy + i11 * dy * dy;
    0.5 * ((det_q / det_p).ln() - 2.0 + trace + maha)
}

fn gaussian() -> impl Strategy<Value = Gaussian2> {
    (-5.0f64..5.0, -5.0f64..5.0, 0.05f64..4.0, 0.05f64..4.0, -0.95f64..0.95).prop_map(|(mx, my, sx, sy, rho)| {
        let c = rho * sx * sy;
        Gaussian2::new(Vector2::new(mx, my), Matrix2::new(sx * sx, c, c, sy * sy)).unwrap()
    })
}

fn path() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(-50.0f64..50.0), 1..30)
}

fn forecast(steps: &[Gaussian2]) -> ForecastDistribution {
    ForecastDistribution {
        frame: Frame::Camera2,
        steps: steps.iter().map(|g| StepGaussian { mean: g.mean, cov: g.cov }).collect(),
        passes: 2,
        epistemic: vec![Matrix2::zeros(); steps.len()],
    }
}

#[test]
fn hand_evaluated_values() {
    let p = Gaussian2::isotropic([0.0, 0.0], 1.0);
    let q = Gaussian2::isotropic([0.0, 0.0], 2.0);
    assert!((kl_divergence(&p, &q).unwrap() - (LN_2 - 0.5)).abs() < 1e-15);
    assert!((entropy(&p).unwrap() - (2.0 * PI * E).ln()).abs() < 1e-15);
    assert!((entropy(&p).unwrap() - 2.8379).abs() < 1e-4);
    assert_eq!(ade(&[[0.0, 0.0], [1.0, 1.0]], &[[3.0, 4.0], [4.0, 5.0]]).unwrap(), 5.0);
    assert!(matches!(ade(&[[0.0, 0.0]], &[]), Err(MetricsError::LengthMismatch(1, 0))));
}

#[test]
fn trace_of_identical_forecasts_is_zero() {
    let steps: Vec<_> = (1..=12).map(|k| Gaussian2::isotropic([k as f64, 0.0], 0.1 * k as f64)).collect();
    let f = forecast(&steps);
    let rows = divergence_trace(&f, &f).unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.kl_nats == 0.0 && !r.regularized));
    assert!(rows.windows(2).all(|w| w[1].entropy_nats > w[0].entropy_nats));
    assert!(matches!(divergence_trace(&f, &forecast(&steps[..11])), Err(MetricsError::LengthMismatch(12, 11))));
}

#[test]
fn point_mass_comparison_is_regularized_and_flagged() {
    let p = Gaussian2::isotropic([0.0, 0.0], 1.0);
    let q = Gaussian2::isotropic([0.0, 0.0], 0.0);
    let (kl, flagged) = kl_divergence_flagged(&p, &q).unwrap();
    assert!(flagged && kl.is_finite() && kl > 0.0);
    assert!(!kl_divergence_flagged(&p, &p).unwrap().1);
    // A point-mass reference has no entropy, regularized or not.
    assert!(matches!(divergence_trace(&forecast(&[q]), &forecast(&[p])), Err(MetricsError::SingularCovariance { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kl_matches_the_entrywise_oracle(p in gaussian(), q in gaussian()) {
        let kl = kl_divergence(&p, &q).unwrap();
        let oracle = kl_oracle(&p, &q);
        prop_assert!((kl - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{kl} vs {oracle}");
    }

    #[test]
    fn kl_is_non_negative_and_zero_on_the_diagonal(p in gaussian(), q in gaussian()) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn entropy_shifts_by_log_of_scale(p in gaussian(), c in 0.01f64..100.0) {
        let scaled = Gaussian2::new(p.mean, p.cov * c).unwrap();
        let diff = entropy(&scaled).unwrap() - entropy(&p).unwrap();
        prop_assert!((diff - c.ln()).abs() < 1e-9);
        if c < 1.0 {
            prop_assert!(diff < 0.0);
        }
    }

    #[test]
    fn ade_is_symmetric_and_translation_invariant(
        (a, b) in path().prop_flat_map(|a| { let n = a.len(); (Just(a), prop::collection::vec(prop::array::uniform2(-50.0f64..50.0), n)) }),
        shift in prop::array::uniform2(-100.0f64..100.0),
    ) {
        let ab = ade(&a, &b).unwrap();
        prop_assert_eq!(ab, ade(&b, &a).unwrap());
        let moved = |p: &[[f64; 2]]| p.iter().map(|x| [x[0] + shift[0], x[1] + shift[1]]).collect::<Vec<_>>();
        prop_assert!((ade(&moved(&a), &moved(&b)).unwrap() - ab).abs() < 1e-9);
        prop_assert_eq!(ade(&a, &a).unwrap(), 0.0);
    }
}
