use coforecast::forecaster::{train, ModelConfig, ModelParams, TrainConfig};
use coforecast::geometry::RelativePose;
use coforecast::metrics::ade;
use coforecast::rng::sub_seed;
use coforecast::scenarios::{
    calibrated_walk, monotone_within_pooled_std, run_cooperative, run_occlusion, run_sensitivity,
    synthetic_training_windows, CooperativeConfig, PoseConfig, SensitivityConfig, SyntheticDatasetConfig,
};
use coforecast::scene::{reference_rig, synth_walk, OcclusionKind, WalkKind, REFERENCE_ESTIMATE_EULER};
use nalgebra::Vector3;
use std::sync::OnceLock;

fn model() -> &'static ModelParams {
    static MODEL: OnceLock<ModelParams> = OnceLock::new();
    MODEL.get_or_init(|| {
        let data =
            synthetic_training_windows(&SyntheticDatasetConfig { windows: 120, ..Default::default() }, 1).unwrap();
        let cfg = ModelConfig { hidden: 12, ..Default::default() };
        train(&data, cfg, &TrainConfig { epochs: 15, ..Default::default() }, 1).unwrap().params
    })
}

fn coop(sigma_px: f64, outliers: f64, use_true_pose: bool) -> CooperativeConfig {
    CooperativeConfig {
        pose: PoseConfig { sigma_px, outlier_fraction: outliers, ..Default::default() },
        passes: 10,
        use_true_pose,
    }
}

#[test]
fn exact_matches_transfer_exactly() {
    let walk = synth_walk(WalkKind::Turn, 8.0, 0.4, 1.2, 3).unwrap();
    let r = run_cooperative(&reference_rig(), &walk, model(), &coop(0.0, 0.0, false), 3).unwrap();
    assert!(r.transform_ade.mean < 1e-6, "{}", r.transform_ade.mean);
    assert!(r.pose_error.euler_deg < 1e-6);
}

#[test]
fn noisy_reference_rig_stays_within_a_metre() {
    for seed in 0..5 {
        let walk = synth_walk(WalkKind::SCurve, 8.0, 0.4, 1.2, seed).unwrap();
        let r = run_cooperative(&reference_rig(), &walk, model(), &coop(0.5, 0.2, false), seed).unwrap();
        assert!(r.transform_ade.mean < 1.0, "seed {seed}: {}", r.transform_ade.mean);
    }
}

#[test]
fn true_pose_lower_bounds_the_estimate() {
    let rig = reference_rig();
    for seed in 0..6 {
        let walk = synth_walk(WalkKind::Straight, 8.0, 0.4, 1.2, seed).unwrap();
        let est = run_cooperative(&rig, &walk, model(), &coop(0.5, 0.2, false), seed).unwrap();
        let truth = run_cooperative(&rig, &walk, model(), &coop(0.5, 0.2, true), seed).unwrap();
        assert!(truth.transform_ade.mean < est.transform_ade.mean, "seed {seed}");
    }
}

#[test]
fn runs_repeat_exactly() {
    let walk = synth_walk(WalkKind::Turn, 8.0, 0.4, 1.0, 8).unwrap();
    let rig = reference_rig();
    for kind in [OcclusionKind::None, OcclusionKind::Intermittent, OcclusionKind::Partial] {
        let a = run_occlusion(kind, &rig, &walk, model(), &coop(0.5, 0.2, false), 8).unwrap();
        let b = run_occlusion(kind, &rig, &walk, model(), &coop(0.5, 0.2, false), 8).unwrap();
        assert_eq!(a.without_runtime(), b.without_runtime(), "{kind:?}");
    }
}

#[test]
fn no_occlusion_is_the_cooperative_run() {
    let walk = synth_walk(WalkKind::Straight, 8.0, 0.4, 1.2, 2).unwrap();
    let rig = reference_rig();
    let a = run_occlusion(OcclusionKind::None, &rig, &walk, model(), &coop(0.5, 0.2, false), 2).unwrap();
    let b = run_cooperative(&rig, &walk, model(), &coop(0.5, 0.2, false), 2).unwrap();
    assert_eq!(a.without_runtime(), b.without_runtime());
}

#[test]
fn partial_occlusion_transfer_tracks_the_visible_suffix() {
    let walk = synth_walk(WalkKind::Straight, 8.0, 0.4, 1.2, 5).unwrap();
    let r = run_occlusion(OcclusionKind::Partial, &reference_rig(), &walk, model(), &coop(0.5, 0.2, false), 5).unwrap();
    let s = r.series.as_ref().unwrap();
    let visible: Vec<usize> = (0..s.truth.len()).filter(|&i| !s.masked[i]).collect();
    let pick = |v: &[[f64; 2]]| visible.iter().map(|&i| v[i]).collect::<Vec<_>>();
    assert!(ade(&pick(&s.transformed), &pick(&s.truth)).unwrap() < 0.1);
    assert!(r.containment.is_some());
}

#[test]
fn sensitivity_grows_with_noise() {
    let rig = reference_rig();
    let t = Vector3::from(coforecast::scene::REFERENCE_RIG_TRANSLATION);
    let nominal = RelativePose::from_euler(&REFERENCE_ESTIMATE_EULER, t).unwrap();
    let walk = calibrated_walk(&rig, &nominal, 0.2, 8.0, 0.4).unwrap();
    let sigmas = vec![0.0, 0.05, 0.4];
    let cfg = SensitivityConfig { sigmas, nominal: Some(nominal), seed: 0, ..Default::default() };
    let rows = run_sensitivity(&cfg, &rig, &walk).unwrap();
    assert_eq!(rows[0].ade.std, 0.0);
    assert!(rows[1].ade.std / rows[1].ade.mean < 0.5);
    assert!(rows[2].ade.mean > 3.0 * rows[1].ade.mean);
    assert!(monotone_within_pooled_std(&rows));
}

/// Mean ADE of the deterministic forecast over `windows`.
fn forecast_ade(params: &ModelParams, windows: &[coforecast::forecaster::TrainingWindow]) -> f64 {
    let total: f64 = windows
        .iter()
        .map(|w| {
            let (means, _) = params.forward(&w.past, None).unwrap();
            let truth: Vec<[f64; 2]> = w.future.iter().map(|s| s.position()).collect();
            ade(&means, &truth).unwrap()
        })
        .sum();
    total / windows.len() as f64
}

#[test]
fn velocity_features_are_not_inferior_on_turns() {
    let cfg = SyntheticDatasetConfig { windows: 300, kinds: vec![WalkKind::Turn], ..Default::default() };
    let data = synthetic_training_windows(&cfg, sub_seed(0, "ablation-train")).unwrap();
    let held_out = synthetic_training_windows(
        &SyntheticDatasetConfig { windows: 100, ..cfg.clone() },
        sub_seed(0, "ablation-test"),
    )
    .unwrap();
    let tc = TrainConfig { epochs: 40, ..Default::default() };
    let ades: Vec<f64> = [4, 2]
        .into_iter()
        .map(|features| {
            let mc = ModelConfig { hidden: 16, features, ..Default::default() };
            forecast_ade(&train(&data, mc, &tc, 0).unwrap().params, &held_out)
        })
        .collect();
    eprintln!("turn ablation ADE: (x, y, u, v) {:.4} m, (x, y) {:.4} m", ades[0], ades[1]);
    assert!(ades[0] <= 1.1 * ades[1], "{ades:?}");
}
