use std::io::Write;

use super::{ScenarioReport, ScenarioSeries, SensitivityRow};

pub const SENSITIVITY_CSV_HEADER: [&str; 4] = ["sigma", "ade_mean", "ade_std", "samples"];

pub fn write_sensitivity_csv<W: Write>(writer: W, rows: &[SensitivityRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SENSITIVITY_CSV_HEADER)?;
    for r in rows {
        w.write_record([r.sigma.to_string(), r.ade.mean.to_string(), r.ade.std.to_string(), r.ade.n.to_string()])?;
    }
    w.flush()
}

pub const SERIES_CSV_HEADER: [&str; 9] =
    ["t", "truth_x", "truth_y", "transformed_x", "transformed_y", "masked", "role", "input_x", "input_y"];

/// One row per walk sample: camera 2's ground truth, the transformed
/// camera-1 track, whether camera 2 was blind, and (for the observed past)
/// the position fed to the cooperative forecast. `role` is `past` or
/// `future`.
pub fn write_series_csv<W: Write>(writer: W, s: &ScenarioSeries) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SERIES_CSV_HEADER)?;
    for i in 0..s.truth.len() {
        let (role, ix, iy) = if i < s.past {
            ("past", s.input[i][0].to_string(), s.input[i][1].to_string())
        } else {
            ("future", String::new(), String::new())
        };
        w.write_record([
            s.times[i].to_string(),
            s.truth[i][0].to_string(),
            s.truth[i][1].to_string(),
            s.transformed[i][0].to_string(),
            s.transformed[i][1].to_string(),
            u8::from(s.masked[i]).to_string(),
            role.to_string(),
            ix,
            iy,
        ])?;
    }
    w.flush()
}

pub fn write_report_json<W: Write>(writer: W, report: &ScenarioReport) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(writer, report)
}
