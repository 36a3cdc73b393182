//! CSV output. RFC-4180 with a header row, UTF-8, `.` decimal separator.
//!
//! Floats go through the shortest-roundtrip formatter so identical runs
//! produce identical bytes on any worker count.

use std::path::Path;

use crate::errors::{io_err, CliError};

/// Shortest representation that parses back to the same bits.
pub fn fnum(x: f64) -> String {
    format!("{x}")
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    w.write_record(header)
        .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(CliError::Io(format!(
                "row width {} does not match header width {} in {}",
                row.len(),
                header.len(),
                path.display()
            )));
        }
        w.write_record(&row)
            .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| io_err("flush csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_through_the_formatter() {
        for &x in &[0.1, 1.0 / 3.0, 2.5e-4, -7.25, f64::MIN_POSITIVE, 1e300] {
            let s = fnum(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fnum(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn writer_emits_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(
            &p,
            &["a", "b"],
            vec![vec!["1".to_string(), "x,y".to_string()]],
        )
        .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("a,b\n"));
        assert!(text.contains("\"x,y\""));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let err = write_csv(&p, &["a", "b"], vec![vec!["1".to_string()]]).unwrap_err();
        assert!(format!("{err}").contains("width"));
    }
}
