use std::collections::BTreeSet;
use std::fs;

use coforecast::data::{
    load_raw, merge_sources, read_cache, split, window, write_cache, ColumnMap, DataError, RawRecord, WindowConfig,
};
use proptest::prelude::*;

/// Tracks sampled every 10 frames at 25 fps, i.e. already on the 0.4 s grid.
fn tracks(lengths: &[usize]) -> Vec<RawRecord> {
    lengths
        .iter()
        .enumerate()
        .flat_map(|(ped, &n)| {
            (0..n).map(move |k| {
                let t = k as f64 * 0.4;
                RawRecord {
                    frame: 7 + 10 * k as u64,
                    ped: ped as u64,
                    x: 1.0 + 0.9 * t + 0.2 * (1.3 * t).sin(),
                    y: -2.0 + 0.4 * t * t / (1.0 + t),
                }
            })
        })
        .collect()
}

#[test]
fn files_load_window_and_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tracks.txt");
    let text: String =
        tracks(&[22, 25, 5]).iter().map(|r| format!("{}\t{}\t{:.6}\t{:.6}\n", r.frame, r.ped, r.x, r.y)).collect();
    fs::write(&path, text).unwrap();

    let records = load_raw(&path, ColumnMap::default()).unwrap();
    assert_eq!(records.len(), 52);
    let ds = window(&records, WindowConfig::default(), "tracks.txt").unwrap();
    assert_eq!(ds.len(), 3 + 6);
    assert_eq!(ds.skipped_tracks, 1);

    let cache = dir.path().join("dataset.cache");
    write_cache(fs::File::create(&cache).unwrap(), &ds, &[("tracks.txt".into(), "0".repeat(64))]).unwrap();
    let (back, header) = read_cache(fs::File::open(&cache).unwrap()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(header.inputs[0].0, "tracks.txt");

    let mut bytes = fs::read(&cache).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    assert!(matches!(read_cache(bytes.as_slice()), Err(DataError::Checksum)));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_raw("/no/such/file.txt".as_ref(), ColumnMap::default()), Err(DataError::Io(_))));
}

#[test]
fn merged_sources_keep_pedestrians_apart() {
    let merged = merge_sources(vec![tracks(&[20]), tracks(&[20])]).unwrap();
    let ds = window(&merged, WindowConfig::default(), "two files").unwrap();
    assert_eq!(ds.pedestrians().len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_count_is_sum_of_excess_lengths(lengths in prop::collection::vec(1usize..60, 1..12)) {
        let ds = window(&tracks(&lengths), WindowConfig::default(), "synthetic").unwrap();
        let expected: usize = lengths.iter().map(|&l| l.saturating_sub(19)).sum();
        prop_assert_eq!(ds.len(), expected);
        prop_assert_eq!(ds.skipped_tracks, lengths.iter().filter(|&&l| l < 20).count());
        for w in &ds.windows {
            prop_assert_eq!(w.samples.len(), 20);
        }
    }

    #[test]
    fn resampling_a_uniform_track_is_identity(n in 20usize..50) {
        let records = tracks(&[n]);
        let ds = window(&records, WindowConfig { stride: 20, ..Default::default() }, "uniform").unwrap();
        for (i, w) in ds.windows.iter().enumerate() {
            for (k, s) in w.samples.iter().enumerate() {
                let r = &records[20 * i + k];
                prop_assert!((s.x - r.x).abs() < 1e-9 && (s.y - r.y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn split_is_seeded_and_leak_free(peds in 2usize..30, fraction in 0.05f64..0.95, seed in 0u64..1000) {
        let ds = window(&tracks(&vec![21; peds]), WindowConfig::default(), "split").unwrap();
        let (train, test) = split(&ds, fraction, seed).unwrap();
        let (a, b): (BTreeSet<u64>, BTreeSet<u64>) = (train.pedestrians(), test.pedestrians());
        prop_assert!(a.is_disjoint(&b));
        prop_assert_eq!(a.len() + b.len(), peds);
        prop_assert_eq!(b.len(), (fraction * peds as f64).round() as usize);
        prop_assert_eq!(train.len() + test.len(), ds.len());
        let (train2, test2) = split(&ds, fraction, seed).unwrap();
        prop_assert_eq!(train2, train);
        prop_assert_eq!(test2, test);
    }
}
