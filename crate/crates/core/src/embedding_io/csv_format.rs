//! RFC-4180 CSV of numeric columns with an optional header row.

use crate::linalg::Matrix;
use crate::{Error, Result};

fn err(reason: impl Into<String>) -> Error {
    Error::format("csv", reason)
}

/// Parse all cells as 64-bit floats. A first row containing any
/// non-numeric cell is treated as a header and skipped.
pub fn read(bytes: &[u8]) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if line == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        let row_index = rows.len();
        let mut row = Vec::with_capacity(parsed.len());
        for (col, (cell, value)) in record.iter().zip(parsed).enumerate() {
            let value =
                value.ok_or_else(|| err(format!("cell at row {row_index}, column {col} is not a number: {cell:?}")))?;
            if !value.is_finite() {
                return Err(Error::NonFinite { row: row_index, col, value });
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(err(format!("row {row_index} has {} columns, expected {w}", row.len())))
            }
            _ => {}
        }
        rows.push(row);
    }
    let d = width.unwrap_or(0);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_row_slice(rows.len(), d, &flat))
}

pub fn write(m: &Matrix) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        writer.write_record(&row).map_err(|e| err(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_two() {
        let m = read(b"1.0,2\n3,4.5\n-1e3,0\n").unwrap();
        assert_eq!(m, Matrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.5, -1000.0, 0.0]));
    }

    #[test]
    fn header_row_is_skipped() {
        let m = read(b"x,y\n1,2\n3,4\n").unwrap();
        assert_eq!(m.shape(), (2, 2));
    }

    #[test]
    fn nan_cell_is_reported() {
        match read(b"1,2\n3,NaN\n") {
            Err(Error::NonFinite { row: 1, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(read(b"1,2\n3\n").is_err());
        assert!(read(b"1,2\n3,abc\n").is_err());
    }

    #[test]
    fn write_round_trips_exactly() {
        let m = Matrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-17, 1e300]);
        assert_eq!(read(&write(&m).unwrap()).unwrap(), m);
    }
}
