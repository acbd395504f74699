use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DataError, RawRecord, DEFAULT_FPS};
use crate::forecaster::{Standardization, StateSample, TrainingWindow};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub dt: f64,
    pub past: usize,
    pub future: usize,
    pub stride: usize,
    /// Frame rate used to turn frame ids into seconds.
    pub fps: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { dt: 0.4, past: 8, future: 12, stride: 1, fps: DEFAULT_FPS }
    }
}

impl WindowConfig {
    pub fn len(&self) -> usize {
        self.past + self.future
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<(), DataError> {
        if !(self.dt > 0.0) || !(self.fps > 0.0) || self.stride == 0 || self.past == 0 || self.future == 0 {
            return Err(DataError::InvalidArgument("dt, fps, stride, past and future must be positive".into()));
        }
        Ok(())
    }
}

/// `past + future` uniformly spaced states of one pedestrian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataWindow {
    pub ped: u64,
    /// Time of the first sample, seconds.
    pub t0: f64,
    pub samples: Vec<StateSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub windows: Vec<DataWindow>,
    pub source: String,
    pub config: WindowConfig,
    pub standardization: Standardization,
    /// Tracks too short to yield a single window.
    pub skipped_tracks: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn pedestrians(&self) -> BTreeSet<u64> {
        self.windows.iter().map(|w| w.ped).collect()
    }

    pub fn training_windows(&self) -> Vec<TrainingWindow> {
        let p = self.config.past;
        self.windows
            .iter()
            .map(|w| TrainingWindow { past: w.samples[..p].to_vec(), future: w.samples[p..].to_vec() })
            .collect()
    }

    fn restat(mut self) -> Self {
        let p = self.config.past;
        self.standardization = Standardization::fit(self.windows.iter().map(|w| (&w.samples[..p], &w.samples[p..])));
        self
    }
}

/// Linear interpolation of a time-sorted track onto `t0 + k·dt`, followed by
/// central-difference velocities (one-sided at the ends).
fn resample(times: &[f64], xy: &[[f64; 2]], dt: f64) -> Vec<StateSample> {
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let n = (span / dt + 1e-9).floor() as usize + 1;
    let mut pos = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        while seg + 2 < times.len() && times[seg + 1] < t {
            seg += 1;
        }
        if times.len() == 1 {
            pos.push(xy[0]);
            continue;
        }
        let (ta, tb) = (times[seg], times[seg + 1]);
        let a = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        pos.push([xy[seg][0] + a * (xy[seg + 1][0] - xy[seg][0]), xy[seg][1] + a * (xy[seg + 1][1] - xy[seg][1])]);
    }
    (0..n)
        .map(|k| {
            let vel = if n == 1 {
                [0.0, 0.0]
            } else {
                let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
                let span = (hi - lo) as f64 * dt;
                [(pos[hi][0] - pos[lo][0]) / span, (pos[hi][1] - pos[lo][1]) / span]
            };
            StateSample::new(pos[k][0], pos[k][1], vel[0], vel[1])
        })
        .collect()
}

/// Cuts records into overlapping windows, pedestrian by pedestrian.
///
/// Records must be grouped by pedestrian with increasing frames, as
/// [`super::parse_raw`] returns them.
pub fn window(records: &[RawRecord], config: WindowConfig, source: &str) -> Result<WindowedDataset, DataError> {
    config.validate()?;
    let mut windows = Vec::new();
    let mut skipped = 0;
    let len = config.len();
    for track in records.chunk_by(|a, b| a.ped == b.ped) {
        if track.windows(2).any(|w| w[1].frame <= w[0].frame) {
            return Err(DataError::InvalidArgument(format!("frames of pedestrian {} not increasing", track[0].ped)));
        }
        let times: Vec<f64> = track.iter().map(|r| r.frame as f64 / config.fps).collect();
        let xy: Vec<[f64; 2]> = track.iter().map(|r| [r.x, r.y]).collect();
        let states = resample(&times, &xy, config.dt);
        if states.len() < len {
            skipped += 1;
            continue;
        }
        let mut start = 0;
        while start + len <= states.len() {
            windows.push(DataWindow {
                ped: track[0].ped,
                t0: times[0] + start as f64 * config.dt,
                samples: states[start..start + len].to_vec(),
            });
            start += config.stride;
        }
    }
    if skipped > 0 {
        log::info!("{skipped} tracks shorter than {len} samples skipped");
    }
    Ok(WindowedDataset {
        windows,
        source: source.to_string(),
        config,
        standardization: Standardization::identity(),
        skipped_tracks: skipped,
    }
    .restat())
}

/// Splits by pedestrian id so that no pedestrian contributes windows to both
/// parts. `round(test_fraction · peds)` pedestrians, chosen by a seeded
/// shuffle, go to the test side.
pub fn split(
    dataset: &WindowedDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(WindowedDataset, WindowedDataset), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut ids: Vec<u64> = dataset.pedestrians().into_iter().collect();
    ids.shuffle(&mut rng_from_seed(seed));
    let n_test = (test_fraction * ids.len() as f64).round() as usize;
    let test_ids: BTreeSet<u64> = ids[..n_test].iter().copied().collect();
    let part = |test: bool| {
        WindowedDataset {
            windows: dataset.windows.iter().filter(|w| test_ids.contains(&w.ped) == test).cloned().collect(),
            source: dataset.source.clone(),
            config: dataset.config,
            standardization: dataset.standardization,
            skipped_tracks: 0,
        }
        .restat()
    };
    Ok((part(false), part(true)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(ped: u64, n: usize, step: u64) -> Vec<RawRecord> {
        (0..n as u64).map(|k| RawRecord { frame: k * step, ped, x: 0.5 * k as f64, y: -0.2 * k as f64 }).collect()
    }

    #[test]
    fn window_counts() {
        let cfg = WindowConfig::default();
        assert_eq!(window(&track(1, 20, 10), cfg, "t").unwrap().len(), 1);
        assert_eq!(window(&track(1, 21, 10), cfg, "t").unwrap().len(), 2);
        let short = window(&track(1, 19, 10), cfg, "t").unwrap();
        assert_eq!((short.len(), short.skipped_tracks), (0, 1));
    }

    #[test]
    fn constant_velocity_is_recovered() {
        // 0.5 m per 0.4 s along x.
        let ds = window(&track(3, 25, 10), WindowConfig::default(), "t").unwrap();
        for w in &ds.windows {
            for s in &w.samples {
                assert!((s.u - 1.25).abs() < 1e-9 && (s.v + 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn finer_input_is_interpolated() {
        // 0.2 s spacing; every other sample lands on the grid.
        let recs = track(1, 41, 5);
        let ds = window(&recs, WindowConfig::default(), "t").unwrap();
        assert_eq!(ds.len(), 2);
        assert!((ds.windows[0].samples[1].x - recs[2].x).abs() < 1e-12);
    }

    #[test]
    fn split_by_pedestrian() {
        let recs: Vec<_> = (0..10).flat_map(|p| track(p, 22, 10)).collect();
        let ds = window(&recs, WindowConfig::default(), "t").unwrap();
        let (train, test) = split(&ds, 0.2, 4).unwrap();
        assert_eq!(test.pedestrians().len(), 2);
        assert!(train.pedestrians().is_disjoint(&test.pedestrians()));
        assert_eq!(train.len() + test.len(), ds.len());
        assert_eq!(split(&ds, 0.2, 4).unwrap(), (train, test));
    }
}
