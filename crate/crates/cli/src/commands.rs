use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::Serialize;

use coforecast::data::{load_raw, merge_sources, read_cache, split, window, write_cache, ColumnMap, WindowConfig};
use coforecast::forecaster::{
    evaluate_nll, load_checkpoint, save_checkpoint, train, write_forecast_csv, ModelConfig, ModelParams, TrainConfig,
    TrainingWindow,
};
use coforecast::geometry::io::read_correspondences;
use coforecast::geometry::{
    decompose_essential, essential_from_fundamental, ransac_fundamental, set_scale, PoseJson, RansacConfig,
    RelativePose,
};
use coforecast::metrics::write_trace_csv;
use coforecast::rng::{indexed_seed, rng_from_seed, sub_seed};
use coforecast::scenarios::{
    calibrated_walk, estimate_rig_pose, monotone_within_pooled_std, run_cooperative, run_occlusion, run_sensitivity,
    synthetic_training_windows, write_report_json, write_sensitivity_csv, write_series_csv, Containment,
    CooperativeConfig, PoseConfig, PoseError, ScenarioReport, SensitivityConfig, SensitivityRow,
    SyntheticDatasetConfig,
};
use coforecast::scene::{
    apply_occlusion, read_walk_csv, reference_rig, synth_walk, write_walk_csv, CameraRig, GroundTruthWalk, RigJson,
    WalkKind, DEFAULT_DT_S, DEFAULT_DURATION_S, REFERENCE_ESTIMATE_EULER,
};

use crate::failure::Failure;
use crate::manifest::RunContext;
use crate::output::Outputs;
use crate::{
    Command, ForecastArgs, MatchArgs, OcclusionArgs, PoseArgs, PrepareArgs, RigArgs, SweepArgs, SynthDataArgs,
    SynthWalkArgs, TrainArgs, WalkArgs,
};

pub fn dispatch(cmd: &Command, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    match cmd {
        Command::Prepare(a) => prepare(a, ctx, out),
        Command::Train(a) => train_cmd(a, ctx, out),
        Command::Pose(a) => pose(a, ctx, out),
        Command::Sweep(a) => sweep(a, ctx, out),
        Command::Forecast(a) => forecast(a, ctx, out),
        Command::Occlusion(a) => occlusion(a, ctx, out),
        Command::SynthWalk(a) => synth_walk_cmd(a, ctx, out),
        Command::SynthData(a) => synth_data(a, ctx, out),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

pub fn replay_argv(path: &Path) -> Result<Vec<String>, Failure> {
    let m: crate::manifest::RunManifest = serde_json::from_reader(BufReader::new(open(path)?))?;
    if m.argv.is_empty() {
        return Err(Failure::Input(format!("{}: manifest has no argv", path.display())));
    }
    Ok(m.argv)
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_rig(args: &RigArgs, ctx: &mut RunContext) -> Result<CameraRig, Failure> {
    match &args.rig {
        None => Ok(reference_rig()),
        Some(path) => {
            ctx.record_input(path)?;
            let json: RigJson = serde_json::from_reader(BufReader::new(open(path)?))?;
            Ok(CameraRig::try_from(&json)?)
        }
    }
}

fn load_model(path: &Path, ctx: &mut RunContext) -> Result<ModelParams, Failure> {
    ctx.record_input(path)?;
    Ok(load_checkpoint(BufReader::new(open(path)?))?.params)
}

fn pose_config(m: &MatchArgs) -> PoseConfig {
    PoseConfig {
        points: m.points,
        sigma_px: m.pixel_noise,
        outlier_fraction: m.outliers,
        ransac: RansacConfig { iterations: m.iterations, confidence: m.confidence, threshold_px: m.threshold, seed: 0 },
    }
}

fn write_walk(out: &mut Outputs, path: &Path, walk: &GroundTruthWalk) -> Result<(), Failure> {
    out.write(path, |w| Ok(write_walk_csv(w, walk)?))
}

/// Wall-clock time goes to the manifest only, so reports are byte-identical
/// across runs with the same seed.
fn write_report(out: &mut Outputs, path: &Path, report: &ScenarioReport) -> Result<(), Failure> {
    let report = report.without_runtime();
    out.write(path, |w| {
        write_report_json(&mut *w, &report)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn prepare(a: &PrepareArgs, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    let columns = ColumnMap { frame: a.columns[0], ped: a.columns[1], x: a.columns[2], y: a.columns[3] };
    let config = WindowConfig { dt: a.dt, past: a.past, future: a.future, stride: a.stride, fps: a.fps };
    ctx.set_config(&serde_json::json!({ "window": config, "columns": columns }));

    let mut inputs = Vec::new();
    let mut sources = Vec::new();
    for path in &a.input {
        let digest = ctx.record_input(path)?;
        inputs.push((path.display().to_string(), digest));
        sources.push(load_raw(path, columns)?);
    }
    let records = if sources.len() == 1 { sources.pop().expect("one source") } else { merge_sources(sources)? };
    let name = a.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("+");
    let ds = window(&records, config, &name)?;
    if ds.is_empty() {
        return Err(Failure::Input(format!(
            "no track is long enough for a {}-sample window ({} tracks skipped)",
            config.len(),
            ds.skipped_tracks
        )));
    }
    log::info!("{} windows from {} pedestrians", ds.len(), ds.pedestrians().len());
    out.write(&a.out.join("dataset.cache"), |w| Ok(write_cache(w, &ds, &inputs)?))?;
    out.write_json(
        &a.out.join("summary.json"),
        &serde_json::json!({
            "windows": ds.len(),
            "pedestrians": ds.pedestrians().len(),
            "skipped_tracks": ds.skipped_tracks,
            "standardization": ds.standardization,
        }),
    )
}

#[derive(Serialize)]
struct TrainReport {
    windows: usize,
    test_windows: usize,
    parameters: usize,
    initial_loss: Option<f64>,
    final_loss: Option<f64>,
    final_eval_nll: Option<f64>,
    test_nll: Option<f64>,
}

fn train_cmd(a: &TrainArgs, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    ctx.seed = Some(a.seed);
    let (mut past, mut future) = (8, 12);
    let (train_set, test_set): (Vec<TrainingWindow>, Vec<TrainingWindow>) = match (&a.cache, a.synthetic) {
        (Some(path), _) => {
            ctx.record_input(path)?;
            let (ds, _) = read_cache(BufReader::new(open(path)?))?;
            past = ds.config.past;
            future = ds.config.future;
            match a.test_fraction {
                Some(f) => {
                    let (tr, te) = split(&ds, f, sub_seed(a.seed, "split"))?;
                    (tr.training_windows(), te.training_windows())
                }
                None => (ds.training_windows(), Vec::new()),
            }
        }
        (None, Some(n)) => {
            let cfg = SyntheticDatasetConfig { windows: n, ..Default::default() };
            let all = synthetic_training_windows(&cfg, sub_seed(a.seed, "data"))?;
            match a.test_fraction {
                Some(f) if f > 0.0 && f < 1.0 => {
                    let n_test = (f * n as f64).round() as usize;
                    let (te, tr) = all.split_at(n_test);
                    (tr.to_vec(), te.to_vec())
                }
                Some(f) => return Err(Failure::Input(format!("test fraction {f} outside (0, 1)"))),
                None => (all, Vec::new()),
            }
        }
        (None, None) => return Err(Failure::Input("either --cache or --synthetic is required".into())),
    };
    let model = ModelConfig { hidden: a.hidden, features: a.features, dropout: a.dropout, past, future };
    let cfg = TrainConfig { epochs: a.epochs, batch: a.batch, lr: a.lr, feed: a.feed.into(), ..Default::default() };
    ctx.set_config(&serde_json::json!({ "model": model, "train": cfg, "test_fraction": a.test_fraction }));

    let outcome = train(&train_set, model, &cfg, a.seed)?;
    let test_nll = if test_set.is_empty() { None } else { Some(evaluate_nll(&outcome.params, &test_set, cfg.feed)?) };

    out.write(&a.out.join("checkpoint.json"), |w| Ok(save_checkpoint(w, &outcome.params, &outcome.loss_trace)?))?;
    out.write(&a.out.join("loss.csv"), |w| {
        writeln!(w, "epoch,train_loss,eval_nll")?;
        for (i, (l, e)) in outcome.loss_trace.iter().zip(&outcome.eval_trace).enumerate() {
            writeln!(w, "{},{l},{e}", i + 1)?;
        }
        Ok(())
    })?;
    let report = TrainReport {
        windows: train_set.len(),
        test_windows: test_set.len(),
        parameters: outcome.params.parameter_count(),
        initial_loss: outcome.initial_loss(),
        final_loss: outcome.final_loss(),
        final_eval_nll: outcome.eval_trace.last().copied(),
        test_nll,
    };
    out.write_json(&a.out.join("report.json"), &report)?;

    if let (Some(first), Some(last)) = (report.initial_loss, report.final_loss) {
        if a.lr > 0.0 && a.epochs > 1 && !(last < first) {
            return Err(Failure::invariant("training", format!("loss did not decrease ({first} → {last})")));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PoseReport {
    estimate: PoseJson,
    truth: PoseJson,
    error: PoseError,
    matches: usize,
    ransac_inliers: usize,
    /// Only known for synthetic matches.
    true_inliers: Option<usize>,
    inlier_recall: Option<f64>,
    iterations_run: usize,
}

fn pose(a: &PoseArgs, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    ctx.seed = Some(a.seed);
    let rig = load_rig(&a.rig, ctx)?;
    let cfg = pose_config(&a.matching);
    ctx.set_config(&serde_json::json!({ "pose": cfg, "rig": RigJson::from(&rig), "matches": a.matches }));

    let report = match &a.matches {
        None => {
            let est = estimate_rig_pose(&rig, &cfg, a.seed)?;
            PoseReport {
                estimate: PoseJson::from(&est.pose),
                truth: PoseJson::from(&rig.pose),
                error: est.error,
                matches: est.matches,
                ransac_inliers: est.ransac_inliers,
                true_inliers: Some(est.true_inliers),
                inlier_recall: Some(est.inlier_recall),
                iterations_run: est.iterations_run,
            }
        }
        Some(path) => {
            ctx.record_input(path)?;
            let matches = read_correspondences(BufReader::new(open(path)?))?;
            let ransac = RansacConfig { seed: sub_seed(a.seed, "ransac"), ..cfg.ransac };
            let outcome = ransac_fundamental(&matches, &ransac)?;
            let e = essential_from_fundamental(&outcome.fundamental, &rig.k1, &rig.k2)?;
            let inliers: Vec<_> = matches.iter().zip(&outcome.inliers).filter(|(_, &k)| k).map(|(m, _)| *m).collect();
            let est = set_scale(&decompose_essential(&e, &inliers, &rig.k1, &rig.k2)?, rig.baseline())?;
            PoseReport {
                estimate: PoseJson::from(&est),
                truth: PoseJson::from(&rig.pose),
                error: PoseError::between(&est, &rig.pose),
                matches: matches.len(),
                ransac_inliers: outcome.inlier_count(),
                true_inliers: None,
                inlier_recall: None,
                iterations_run: outcome.iterations_run,
            }
        }
    };
    println!(
        "roll {:+.3}°  pitch {:+.3}°  yaw {:+.3}°  (truth {:+.3}° {:+.3}° {:+.3}°)  rotation error {:.3}°  inliers {}/{}",
        report.estimate.euler_deg[0],
        report.estimate.euler_deg[1],
        report.estimate.euler_deg[2],
        report.truth.euler_deg[0],
        report.truth.euler_deg[1],
        report.truth.euler_deg[2],
        report.error.rotation_deg,
        report.ransac_inliers,
        report.matches,
    );
    out.write_json(&a.out.join("pose.json"), &report.estimate)?;
    out.write_json(&a.out.join("report.json"), &report)
}

#[derive(Serialize)]
struct SweepReport {
    nominal: PoseJson,
    walk_depth_m: f64,
    rows: Vec<SensitivityRow>,
    monotone_within_pooled_std: bool,
}

fn sweep(a: &SweepArgs, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    ctx.seed = Some(a.seed);
    let rig = load_rig(&a.rig, ctx)?;
    let nominal = match (&a.nominal, &a.rig.rig) {
        (Some(path), _) => {
            ctx.record_input(path)?;
            let json: PoseJson = serde_json::from_reader(BufReader::new(open(path)?))?;
            let pose = RelativePose::try_from(&json)?;
            if pose.scale().is_some() {
                pose
            } else {
                set_scale(&pose, rig.baseline())?
            }
        }
        (None, None) => {
            RelativePose::from_euler(&REFERENCE_ESTIMATE_EULER, rig.pose.translation().expect("rig pose is metric"))?
        }
        (None, Some(_)) => rig.pose,
    };
    let cfg = SensitivityConfig {
        sigmas: a.sigmas.clone(),
        samples: a.samples,
        translation_scale: a.translation_scale,
        nominal: Some(nominal),
        seed: a.seed,
    };
    ctx.set_config(&serde_json::json!({
        "sigmas": cfg.sigmas,
        "samples": cfg.samples,
        "translation_scale": cfg.translation_scale,
        "target_ade": a.target_ade,
        "nominal": PoseJson::from(&nominal),
        "rig": RigJson::from(&rig),
    }));

    let walk = calibrated_walk(&rig, &nominal, a.target_ade, DEFAULT_DURATION_S, DEFAULT_DT_S)?;
    let rows = run_sensitivity(&cfg, &rig, &walk)?;
    for r in &rows {
        println!("σ {:>5.1}%  ADE {:.4} ± {:.4} m", 100.0 * r.sigma, r.ade.mean, r.ade.std);
    }
    let monotone = monotone_within_pooled_std(&rows);
    out.write(&a.out.join("sensitivity.csv"), |w| Ok(write_sensitivity_csv(w, &rows)?))?;
    write_walk(out, &a.out.join("walk.csv"), &walk)?;
    let report = SweepReport {
        nominal: PoseJson::from(&nominal),
        walk_depth_m: walk.samples[0].position.z,
        rows,
        monotone_within_pooled_std: monotone,
    };
    out.write_json(&a.out.join("report.json"), &report)?;
    if !monotone {
        return Err(Failure::invariant("sensitivity", "mean ADE falls by more than the pooled std as σ grows"));
    }
    Ok(())
}

fn load_or_synth_walk(w: &WalkArgs, seed: u64, ctx: &mut RunContext) -> Result<GroundTruthWalk, Failure> {
    match &w.walk {
        Some(path) => {
            ctx.record_input(path)?;
            Ok(read_walk_csv(BufReader::new(open(path)?))?)
        }
        None => Ok(synth_walk(w.kind, w.duration, w.dt, w.speed, sub_seed(seed, "walk"))?),
    }
}

fn write_run(out: &mut Outputs, dir: &Path, report: &ScenarioReport, walk: &GroundTruthWalk) -> Result<(), Failure> {
    let series = report.series.as_ref().expect("scenario runs keep their series");
    write_report(out, &dir.join("report.json"), report)?;
    out.write(&dir.join("series.csv"), |w| Ok(write_series_csv(w, series)?))?;
    out.write(&dir.join("forecast_native.csv"), |w| Ok(write_forecast_csv(w, &series.native)?))?;
    out.write(&dir.join("forecast_cooperative.csv"), |w| Ok(write_forecast_csv(w, &series.cooperative)?))?;
    out.write(&dir.join("trace.csv"), |w| Ok(write_trace_csv(w, &report.trace)?))?;
    write_walk(out, &dir.join("walk.csv"), walk)
}

fn check_trace(report: &ScenarioReport) -> Result<(), Failure> {
    if report.trace.iter().any(|r| !r.kl_nats.is_finite() || !r.entropy_nats.is_finite()) {
        return Err(Failure::Numeric("non-finite divergence trace".into()));
    }
    Ok(())
}

fn forecast(a: &ForecastArgs, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    ctx.seed = Some(a.seed);
    let model = load_model(&a.checkpoint, ctx)?;
    let rig = load_rig(&a.rig, ctx)?;
    let walk = load_or_synth_walk(&a.walk, a.seed, ctx)?;
    let cfg = CooperativeConfig { pose: pose_config(&a.matching), passes: a.passes, use_true_pose: a.true_pose };
    ctx.set_config(&serde_json::json!({ "cooperative": cfg, "walk": walk.model, "rig": RigJson::from(&rig) }));

    let report = run_cooperative(&rig, &walk, &model, &cfg, a.seed)?;
    println!(
        "transform ADE {:.4} m  forecast ADE {:.4} m (native {:.4} m)",
        report.transform_ade.mean, report.forecast_ade.mean, report.native_forecast_ade.mean
    );
    write_run(out, &a.out, &report, &walk)?;
    check_trace(&report)
}

#[derive(Serialize)]
struct OcclusionSummary {
    runs: Vec<OcclusionRun>,
    pooled: Option<Containment>,
    min_containment: f64,
}

#[derive(Serialize)]
struct OcclusionRun {
    dir: PathBuf,
    kind: WalkKind,
    forecast_ade: f64,
    containment: Option<Containment>,
}

fn occlusion(a: &OcclusionArgs, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    ctx.seed = Some(a.seed);
    let model = load_model(&a.checkpoint, ctx)?;
    let rig = load_rig(&a.rig, ctx)?;
    if a.kinds.is_empty() {
        return Err(Failure::Input("at least one walk kind is required".into()));
    }
    let cfg = CooperativeConfig { pose: pose_config(&a.matching), passes: a.passes, use_true_pose: false };
    ctx.set_config(&serde_json::json!({
        "cooperative": cfg,
        "occlusion": a.occlusion,
        "kinds": a.kinds,
        "speed": a.speed,
        "duration": a.duration,
        "dt": a.dt,
        "min_containment": a.min_containment,
        "rig": RigJson::from(&rig),
    }));

    let walk_base = sub_seed(a.seed, "walk");
    let mut runs = Vec::with_capacity(a.kinds.len());
    let mut counts = Vec::new();
    for (i, &kind) in a.kinds.iter().enumerate() {
        let mut walk = synth_walk(kind, a.duration, a.dt, a.speed, indexed_seed(walk_base, i as u64))?;
        apply_occlusion(&mut walk, a.occlusion, model.config.past);
        let report = run_occlusion(a.occlusion, &rig, &walk, &model, &cfg, indexed_seed(a.seed, i as u64))?;
        check_trace(&report)?;
        let dir = PathBuf::from(format!("walk-{i}"));
        write_run(out, &a.out.join(&dir), &report, &walk)?;
        if let Some(c) = report.containment {
            println!("walk {i} ({kind:?}): {}/{} hidden positions inside", c.inside, c.total);
            counts.push(c);
        }
        runs.push(OcclusionRun { dir, kind, forecast_ade: report.forecast_ade.mean, containment: report.containment });
    }
    let pooled = Containment::pooled(&counts);
    out.write_json(
        &a.out.join("summary.json"),
        &OcclusionSummary { runs, pooled, min_containment: a.min_containment },
    )?;
    if let Some(p) = pooled {
        println!("pooled containment {}/{} ({:.1}%)", p.inside, p.total, 100.0 * p.fraction());
        if p.total > 0 && p.fraction() < a.min_containment {
            return Err(Failure::invariant(
                "containment",
                format!("{:.3} of hidden positions inside, need {}", p.fraction(), a.min_containment),
            ));
        }
    }
    Ok(())
}

fn synth_walk_cmd(a: &SynthWalkArgs, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    ctx.seed = Some(a.seed);
    let mut walk = synth_walk(a.kind, a.duration, a.dt, a.speed, a.seed)?;
    apply_occlusion(&mut walk, a.occlusion, a.past);
    ctx.set_config(&serde_json::json!({ "model": walk.model, "occlusion": a.occlusion, "past": a.past }));
    write_walk(out, &a.out.join("walk.csv"), &walk)
}

/// Tracks at staggered start frames, annotated every `frame_step` frames at
/// 25 fps, one walk shape per pedestrian in rotation.
fn synth_data(a: &SynthDataArgs, ctx: &mut RunContext, out: &mut Outputs) -> Result<(), Failure> {
    ctx.seed = Some(a.seed);
    if a.frame_step == 0 {
        return Err(Failure::Input("frame step must be positive".into()));
    }
    ctx.set_config(&serde_json::json!({
        "pedestrians": a.pedestrians,
        "duration": a.duration,
        "frame_step": a.frame_step,
    }));
    let dt = a.frame_step as f64 / coforecast::data::DEFAULT_FPS;
    let kinds = [WalkKind::Straight, WalkKind::Turn, WalkKind::SCurve];
    let mut speeds = rng_from_seed(sub_seed(a.seed, "speed"));
    let mut rows = Vec::new();
    for p in 0..a.pedestrians {
        let speed = speeds.random_range(0.8..=1.6);
        let walk = synth_walk(kinds[p % kinds.len()], a.duration, dt, speed, indexed_seed(a.seed, p as u64))?;
        let start = p as u64 * 3 * a.frame_step;
        for (k, s) in walk.samples.iter().enumerate() {
            rows.push((start + k as u64 * a.frame_step, p + 1, s.position.x, s.position.z));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    out.write(&a.out.join("tracks.txt"), |w| {
        for (frame, ped, x, z) in &rows {
            writeln!(w, "{frame}\t{ped}\t{x:.6}\t{z:.6}")?;
        }
        Ok(())
    })
}
