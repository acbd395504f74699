use std::f64::consts::TAU;
use std::io::{Read, Write};

use nalgebra::{Vector2, Vector3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;

use super::SceneError;

/// Height of the walking surface below camera 1 (camera y points down).
pub const GROUND_Y: f64 = 1.5;

/// Default regime: 8 s at 0.4 s → 20 samples, 8 observed and 12 forecast.
pub const DEFAULT_DURATION_S: f64 = 8.0;
pub const DEFAULT_DT_S: f64 = 0.4;
pub const DEFAULT_PAST: usize = 8;
pub const DEFAULT_FUTURE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkKind {
    Straight,
    Turn,
    SCurve,
}

impl std::str::FromStr for WalkKind {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "straight" => Ok(Self::Straight),
            "turn" => Ok(Self::Turn),
            "s-curve" | "scurve" => Ok(Self::SCurve),
            other => Err(SceneError::InvalidArgument(format!("unknown walk kind {other:?}"))),
        }
    }
}

/// Continuous walk on the ground plane `Y = ground_y` of camera 1's frame.
///
/// Positions and velocities are closed-form, so velocities are exact
/// derivatives rather than finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkModel {
    pub kind: WalkKind,
    /// Starting (X, Z).
    pub start: [f64; 2],
    /// Initial heading in the X–Z plane, radians from +X towards +Z.
    pub heading: f64,
    /// m/s. For s-curves, the speed of the carrier line.
    pub speed: f64,
    pub ground_y: f64,
    /// Turn: signed rate (rad/s) applied from `turn_onset` (s) on.
    pub turn_rate: f64,
    pub turn_onset: f64,
    /// S-curve: lateral sinusoid amplitude (m) and period (s).
    pub amplitude: f64,
    pub period: f64,
}

impl WalkModel {
    pub fn straight(start: [f64; 2], heading: f64, speed: f64) -> Self {
        Self {
            kind: WalkKind::Straight,
            start,
            heading,
            speed,
            ground_y: GROUND_Y,
            turn_rate: 0.0,
            turn_onset: 0.0,
            amplitude: 0.0,
            period: 1.0,
        }
    }

    fn direction(a: f64) -> Vector2<f64> {
        Vector2::new(a.cos(), a.sin())
    }

    fn planar_position(&self, t: f64) -> Vector2<f64> {
        let p0 = Vector2::from(self.start);
        match self.kind {
            WalkKind::Straight => p0 + Self::direction(self.heading) * self.speed * t,
            WalkKind::Turn => {
                let straight = t.min(self.turn_onset);
                let p_on = p0 + Self::direction(self.heading) * self.speed * straight;
                let tau = (t - self.turn_onset).max(0.0);
                if tau == 0.0 || self.turn_rate == 0.0 {
                    return p_on + Self::direction(self.heading) * self.speed * tau;
                }
                let (h0, h1) = (self.heading, self.heading + self.turn_rate * tau);
                let r = self.speed / self.turn_rate;
                p_on + Vector2::new(r * (h1.sin() - h0.sin()), -r * (h1.cos() - h0.cos()))
            }
            WalkKind::SCurve => {
                let d = Self::direction(self.heading);
                let n = Vector2::new(-d.y, d.x);
                p0 + d * self.speed * t + n * self.amplitude * (TAU * t / self.period).sin()
            }
        }
    }

    fn planar_velocity(&self, t: f64) -> Vector2<f64> {
        match self.kind {
            WalkKind::Straight => Self::direction(self.heading) * self.speed,
            WalkKind::Turn => Self::direction(self.heading_at(t)) * self.speed,
            WalkKind::SCurve => {
                let d = Self::direction(self.heading);
                let n = Vector2::new(-d.y, d.x);
                let w = TAU / self.period;
                d * self.speed + n * self.amplitude * w * (w * t).cos()
            }
        }
    }

    /// Direction of travel at time `t`, radians.
    pub fn heading_at(&self, t: f64) -> f64 {
        match self.kind {
            WalkKind::Turn => self.heading + self.turn_rate * (t - self.turn_onset).max(0.0),
            _ => {
                let v = self.planar_velocity(t);
                v.y.atan2(v.x)
            }
        }
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        let p = self.planar_position(t);
        Vector3::new(p.x, self.ground_y, p.y)
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let v = self.planar_velocity(t);
        Vector3::new(v.x, 0.0, v.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSample {
    pub t: f64,
    /// Camera-1 (world) coordinates, metres.
    pub position: Vector3<f64>,
    /// m/s, in the same frame.
    pub velocity: Vector3<f64>,
}

/// A sampled walk with per-camera occlusion masks.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthWalk {
    pub dt: f64,
    pub samples: Vec<WalkSample>,
    pub occluded_cam1: Vec<bool>,
    pub occluded_cam2: Vec<bool>,
    /// The generating model; absent for walks read back from CSV.
    pub model: Option<WalkModel>,
}

impl GroundTruthWalk {
    /// Samples `model` at `t = k·dt` for `k = 0..round(duration/dt)`.
    pub fn sample(model: WalkModel, duration_s: f64, dt: f64) -> Result<Self, SceneError> {
        if !(dt > 0.0 && duration_s > 0.0) {
            return Err(SceneError::InvalidArgument("duration and time step must be positive".into()));
        }
        let n = (duration_s / dt).round() as usize;
        if n == 0 {
            return Err(SceneError::InvalidArgument("walk would have no samples".into()));
        }
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                WalkSample { t, position: model.position(t), velocity: model.velocity(t) }
            })
            .collect();
        Ok(Self { dt, samples, occluded_cam1: vec![false; n], occluded_cam2: vec![false; n], model: Some(model) })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A smooth walk of the given kind at `speed`, with the remaining shape
/// parameters (start, heading, turn rate and onset, s-curve amplitude and
/// period) drawn from `seed`.
///
/// Starts are drawn with X in [-1, 1] m and Z in [4, 6] m on the ground
/// plane; the heading is uniform.
pub fn synth_walk(
    kind: WalkKind,
    duration_s: f64,
    dt: f64,
    speed: f64,
    seed: u64,
) -> Result<GroundTruthWalk, SceneError> {
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(SceneError::InvalidArgument(format!("speed must be non-negative, got {speed}")));
    }
    let mut rng = rng_from_seed(seed);
    let start = [rng.random_range(-1.0..=1.0), rng.random_range(4.0..=6.0)];
    let heading = rng.random_range(0.0..TAU);
    let mut model = WalkModel::straight(start, heading, speed);
    model.kind = kind;
    match kind {
        WalkKind::Straight => {}
        WalkKind::Turn => {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            model.turn_rate = sign * rng.random_range(0.15..=0.45);
            model.turn_onset = rng.random_range(0.0..=duration_s / 2.0);
        }
        WalkKind::SCurve => {
            model.amplitude = rng.random_range(0.3..=0.8);
            model.period = rng.random_range(5.0..=9.0);
        }
    }
    GroundTruthWalk::sample(model, duration_s, dt)
}

/// Which part of the horizon camera 2 loses the pedestrian in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OcclusionKind {
    None,
    /// Hidden between 1 s and 3 s after the forecast origin.
    Intermittent,
    /// Hidden from the start of the walk until 1 s after the forecast origin.
    Partial,
}

impl std::str::FromStr for OcclusionKind {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "intermittent" => Ok(Self::Intermittent),
            "partial" => Ok(Self::Partial),
            other => Err(SceneError::InvalidArgument(format!("unknown occlusion kind {other:?}"))),
        }
    }
}

pub const INTERMITTENT_WINDOW_S: (f64, f64) = (1.0, 3.0);
pub const PARTIAL_END_S: f64 = 1.0;

/// Camera-2 occlusion mask for `walk`, with times measured from the forecast
/// origin (the last observed sample, index `past - 1`).
pub fn occlusion_mask(walk: &GroundTruthWalk, kind: OcclusionKind, past: usize) -> Vec<bool> {
    let origin = walk.samples.get(past.saturating_sub(1)).map_or(0.0, |s| s.t);
    const EPS: f64 = 1e-9;
    walk.samples
        .iter()
        .map(|s| {
            let rel = s.t - origin;
            match kind {
                OcclusionKind::None => false,
                OcclusionKind::Intermittent => {
                    rel >= INTERMITTENT_WINDOW_S.0 - EPS && rel <= INTERMITTENT_WINDOW_S.1 + EPS
                }
                OcclusionKind::Partial => rel < PARTIAL_END_S - EPS,
            }
        })
        .collect()
}

pub fn apply_occlusion(walk: &mut GroundTruthWalk, kind: OcclusionKind, past: usize) {
    walk.occluded_cam2 = occlusion_mask(walk, kind, past);
}

pub const WALK_CSV_HEADER: [&str; 8] = ["t", "x", "y", "z", "u", "v", "occluded_cam1", "occluded_cam2"];

/// Writes `t, x, y, z, u, v, occluded_cam1, occluded_cam2`; `u` and `v` are
/// the ground-plane velocity components along X and Z.
pub fn write_walk_csv<W: Write>(writer: W, walk: &GroundTruthWalk) -> Result<(), SceneError> {
    let rows = walk
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.t, s.position, s.velocity, walk.occluded_cam1[i], walk.occluded_cam2[i]));
    write_rows(writer, rows)
}

pub(crate) fn write_rows<W: Write>(
    writer: W,
    rows: impl Iterator<Item = (f64, Vector3<f64>, Vector3<f64>, bool, bool)>,
) -> Result<(), SceneError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(WALK_CSV_HEADER).map_err(csv_err)?;
    for (t, p, v, o1, o2) in rows {
        w.write_record([
            t.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.z.to_string(),
            v.x.to_string(),
            v.z.to_string(),
            u8::from(o1).to_string(),
            u8::from(o2).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_walk_csv<R: Read>(reader: R) -> Result<GroundTruthWalk, SceneError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != WALK_CSV_HEADER {
        return Err(SceneError::Parse { line: 1, msg: format!("unexpected header {header:?}") });
    }
    let mut walk =
        GroundTruthWalk { dt: 0.0, samples: vec![], occluded_cam1: vec![], occluded_cam2: vec![], model: None };
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(csv_err)?;
        let num = |j: usize| -> Result<f64, SceneError> {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| SceneError::Parse { line, msg: format!("bad value in column {}", WALK_CSV_HEADER[j]) })
        };
        let flag = |j: usize| -> Result<bool, SceneError> {
            match rec.get(j).map(str::trim) {
                Some("0") | Some("false") => Ok(false),
                Some("1") | Some("true") => Ok(true),
                _ => Err(SceneError::Parse { line, msg: format!("bad flag in column {}", WALK_CSV_HEADER[j]) }),
            }
        };
        walk.samples.push(WalkSample {
            t: num(0)?,
            position: Vector3::new(num(1)?, num(2)?, num(3)?),
            velocity: Vector3::new(num(4)?, 0.0, num(5)?),
        });
        walk.occluded_cam1.push(flag(6)?);
        walk.occluded_cam2.push(flag(7)?);
    }
    if walk.samples.len() >= 2 {
        walk.dt = walk.samples[1].t - walk.samples[0].t;
    }
    Ok(walk)
}

fn csv_err(e: csv::Error) -> SceneError {
    let line = e.position().map_or(0, |p| p.line());
    SceneError::Parse { line, msg: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn straight_walk_kinematics() {
        let w = synth_walk(WalkKind::Straight, 8.0, 0.4, 1.2, 1).unwrap();
        assert_eq!(w.len(), 20);
        let m = w.model.unwrap();
        assert_relative_eq!((m.position(8.0) - m.position(0.0)).norm(), 9.6, epsilon = 1e-12);
        assert_eq!(DEFAULT_PAST + DEFAULT_FUTURE, w.len());
    }

    #[test]
    fn turn_has_monotone_heading_and_constant_speed() {
        for seed in 0..10 {
            let w = synth_walk(WalkKind::Turn, 8.0, 0.4, 1.3, seed).unwrap();
            let m = w.model.unwrap();
            let headings: Vec<f64> = w.samples.iter().map(|s| m.heading_at(s.t)).collect();
            let sign = m.turn_rate.signum();
            assert!(headings.windows(2).all(|p| sign * (p[1] - p[0]) >= 0.0));
            assert!(sign * (headings[19] - headings[0]) > 0.0);
            for s in &w.samples {
                assert!((s.velocity.norm() - 1.3).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn velocity_is_derivative_of_position() {
        for kind in [WalkKind::Straight, WalkKind::Turn, WalkKind::SCurve] {
            let m = synth_walk(kind, 8.0, 0.4, 1.1, 4).unwrap().model.unwrap();
            let h = 1e-5;
            for k in 0..40 {
                let t = 0.2 * k as f64 + 0.013;
                let fd = (m.position(t + h) - m.position(t - h)) / (2.0 * h);
                assert!((fd - m.velocity(t)).norm() < 1e-9, "{kind:?} at {t}");
            }
        }
    }

    #[test]
    fn occlusion_windows() {
        let mut w = synth_walk(WalkKind::Straight, 8.0, 0.4, 1.2, 1).unwrap();
        apply_occlusion(&mut w, OcclusionKind::Intermittent, DEFAULT_PAST);
        let idx: Vec<usize> = (0..20).filter(|&i| w.occluded_cam2[i]).collect();
        // Origin at t = 2.8 s, hidden for t in [3.8, 5.8].
        assert_eq!(idx, vec![10, 11, 12, 13, 14]);
        apply_occlusion(&mut w, OcclusionKind::Partial, DEFAULT_PAST);
        let idx: Vec<usize> = (0..20).filter(|&i| w.occluded_cam2[i]).collect();
        assert_eq!(idx, (0..=9).collect::<Vec<_>>());
        apply_occlusion(&mut w, OcclusionKind::None, DEFAULT_PAST);
        assert!(w.occluded_cam2.iter().all(|&o| !o));
    }

    #[test]
    fn csv_round_trip() {
        let mut w = synth_walk(WalkKind::SCurve, 8.0, 0.4, 1.0, 2).unwrap();
        apply_occlusion(&mut w, OcclusionKind::Intermittent, 8);
        let mut buf = Vec::new();
        write_walk_csv(&mut buf, &w).unwrap();
        assert!(buf.starts_with(b"t,x,y,z,u,v,occluded_cam1,occluded_cam2\n"));
        let back = read_walk_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, w.samples);
        assert_eq!(back.occluded_cam2, w.occluded_cam2);
        assert_eq!(back.dt, w.dt);
    }
}
