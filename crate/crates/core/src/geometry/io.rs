//! Correspondence CSV: header `ax,ay,bx,by`, one match per row, pixels.

use std::io::{Read, Write};

use super::{Correspondence, GeometryError};

pub const CORRESPONDENCE_HEADER: [&str; 4] = ["ax", "ay", "bx", "by"];

pub fn read_correspondences<R: Read>(reader: R) -> Result<Vec<Correspondence>, GeometryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != CORRESPONDENCE_HEADER {
        return Err(GeometryError::Parse {
            line: 1,
            msg: format!("expected header ax,ay,bx,by, got {}", cols.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        if rec.len() != 4 {
            return Err(GeometryError::Parse { line, msg: format!("expected 4 fields, got {}", rec.len()) });
        }
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| GeometryError::Parse { line, msg: format!("not a finite number: {field:?}") })?;
        }
        out.push(Correspondence::new(v[0], v[1], v[2], v[3]));
    }
    Ok(out)
}

pub fn write_correspondences<W: Write>(writer: W, matches: &[Correspondence]) -> Result<(), GeometryError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CORRESPONDENCE_HEADER).map_err(|e| csv_error(e, 0))?;
    for m in matches {
        w.write_record([m.a().x, m.a().y, m.b().x, m.b().y].map(|v| v.to_string())).map_err(|e| csv_error(e, 0))?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error, line: u64) -> GeometryError {
    let line = e.position().map_or(line, |p| p.line());
    GeometryError::Parse { line, msg: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = vec![Correspondence::new(1.5, 2.0, 3.25, -4.0), Correspondence::new(0.1, 0.2, 0.3, 0.4)];
        let mut buf = Vec::new();
        write_correspondences(&mut buf, &m).unwrap();
        assert!(buf.starts_with(b"ax,ay,bx,by\n"));
        assert_eq!(read_correspondences(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn header_required() {
        let err = read_correspondences("1,2,3,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 1, .. }));
    }

    #[test]
    fn bad_cell_reports_line() {
        let err = read_correspondences("ax,ay,bx,by\n1,2,3,4\n1,x,3,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 3, .. }), "{err:?}");
    }
}
