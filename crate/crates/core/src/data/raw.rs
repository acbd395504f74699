use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// ETH/UCY annotations are indexed by video frame at 25 fps.
pub const DEFAULT_FPS: f64 = 25.0;

/// One annotated position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub frame: u64,
    pub ped: u64,
    pub x: f64,
    pub y: f64,
}

/// Zero-based column positions of frame, pedestrian id, x and y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub frame: usize,
    pub ped: usize,
    pub x: usize,
    pub y: usize,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self { frame: 0, ped: 1, x: 2, y: 3 }
    }
}

impl ColumnMap {
    fn width(&self) -> usize {
        self.frame.max(self.ped).max(self.x).max(self.y) + 1
    }
}

fn parse_index(cell: &str, line: usize, what: &str) -> Result<u64, DataError> {
    let v: f64 =
        cell.parse().map_err(|_| DataError::Parse { line, msg: format!("{what} {cell:?} is not a number") })?;
    if !(v >= 0.0) || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(DataError::Parse { line, msg: format!("{what} {cell:?} is not a non-negative integer") });
    }
    Ok(v as u64)
}

fn parse_coord(cell: &str, line: usize) -> Result<f64, DataError> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::Parse { line, msg: format!("coordinate {cell:?} is not a finite number") }),
    }
}

/// Parses a whitespace-separated table. Blank lines and lines starting with
/// `#` are skipped. Records come back grouped by pedestrian and sorted by
/// frame; when a `(frame, ped)` pair repeats, the later line wins and a
/// warning is logged.
pub fn parse_raw<R: Read>(reader: R, columns: ColumnMap) -> Result<Vec<RawRecord>, DataError> {
    let mut by_key: BTreeMap<(u64, u64), (usize, RawRecord)> = BTreeMap::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = trimmed.split_whitespace().collect();
        if cells.len() < columns.width() {
            return Err(DataError::Parse {
                line: line_no,
                msg: format!("expected at least {} columns, found {}", columns.width(), cells.len()),
            });
        }
        let rec = RawRecord {
            frame: parse_index(cells[columns.frame], line_no, "frame")?,
            ped: parse_index(cells[columns.ped], line_no, "pedestrian id")?,
            x: parse_coord(cells[columns.x], line_no)?,
            y: parse_coord(cells[columns.y], line_no)?,
        };
        if let Some((prev, _)) = by_key.insert((rec.ped, rec.frame), (line_no, rec)) {
            log::warn!(
                "line {line_no}: duplicate frame {} for pedestrian {} (line {prev} dropped)",
                rec.frame,
                rec.ped
            );
        }
    }
    if by_key.is_empty() {
        return Err(DataError::EmptyFile);
    }
    Ok(by_key.into_values().map(|(_, r)| r).collect())
}

pub fn load_raw(path: &Path, columns: ColumnMap) -> Result<Vec<RawRecord>, DataError> {
    parse_raw(std::fs::File::open(path)?, columns)
}

/// Concatenates several files' records, giving pedestrians of file `i` the
/// id `(i << 32) | ped` so ids never collide across files.
pub fn merge_sources(sources: Vec<Vec<RawRecord>>) -> Result<Vec<RawRecord>, DataError> {
    let mut out = Vec::new();
    for (i, recs) in sources.into_iter().enumerate() {
        for mut r in recs {
            if r.ped >> 32 != 0 {
                return Err(DataError::InvalidArgument(format!("pedestrian id {} too large to merge", r.ped)));
            }
            r.ped |= (i as u64) << 32;
            out.push(r);
        }
    }
    out.sort_by_key(|r| (r.ped, r.frame));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_lines_four_records() {
        let text = "10 1 1.0 2.0\n0 1 0.5 1.5\n0 2 3.0 -1.0\n10 2 3.5 -1.2\n";
        let r = parse_raw(text.as_bytes(), ColumnMap::default()).unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!((r[0].ped, r[0].frame), (1, 0));
        assert_eq!((r[1].ped, r[1].frame), (1, 10));
    }

    #[test]
    fn float_formatted_ids_are_accepted() {
        let r = parse_raw("1.0000000e+01 2.0 1 2\n".as_bytes(), ColumnMap::default()).unwrap();
        assert_eq!((r[0].frame, r[0].ped), (10, 2));
    }

    #[test]
    fn bad_cell_reports_line() {
        let err = parse_raw("0 1 1 1\n\n10 1 abc 2\n".as_bytes(), ColumnMap::default()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, .. }));
    }

    #[test]
    fn duplicates_keep_last() {
        let r = parse_raw("0 1 1 1\n0 1 5 5\n".as_bytes(), ColumnMap::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].x, 5.0);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse_raw("# nothing\n".as_bytes(), ColumnMap::default()), Err(DataError::EmptyFile)));
    }

    #[test]
    fn column_map() {
        let cols = ColumnMap { frame: 0, ped: 1, x: 3, y: 2 };
        let r = parse_raw("0 1 7 8\n".as_bytes(), cols).unwrap();
        assert_eq!((r[0].x, r[0].y), (8.0, 7.0));
    }
}
