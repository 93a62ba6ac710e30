//! CSV matrices and tables. Reals are written with 17 significant digits
//! so `f64` values round-trip exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path.display(), e.to_string())
}

/// Writes a header row (when given) and one CSV row per record.
pub fn write_table(path: &Path, header: Option<&[String]>, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    if let Some(h) = header {
        w.write_record(h).map_err(|e| csv_err(path, e))?;
    }
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix<T: Scalar>(path: &Path, m: &Tensor<T>, header: Option<&[String]>) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| fmt_real(v.as_f64())).collect())
        .collect();
    write_table(path, header, &rows)
}

/// Reads a numeric matrix; a first row that does not parse as numbers is
/// returned as the header.
pub fn read_matrix<T: Scalar>(path: &Path) -> Result<(Tensor<T>, Option<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut header = None;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(vals) => {
                if *cols.get_or_insert(vals.len()) != vals.len() {
                    return Err(Error::format(path.display(), format!("row {k} has {} fields", vals.len())));
                }
                data.extend(vals.into_iter().map(T::of));
                rows += 1;
            }
            Err(_) if k == 0 => header = Some(rec.iter().map(str::to_string).collect()),
            Err(e) => return Err(Error::format(path.display(), format!("row {k}: {e}"))),
        }
    }
    let cols = cols.ok_or_else(|| Error::format(path.display(), "no numeric rows"))?;
    Ok((Tensor::matrix(rows, cols, data), header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = Tensor::from_rows(&[vec![0.1, 1.0 / 3.0, -2.5e-300], vec![f64::MAX, 0.0, 1e17]]);
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        write_matrix(&p, &m, Some(&names)).unwrap();
        let (back, header) = read_matrix::<f64>(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(header.unwrap(), names);
        write_matrix(&p, &m, None).unwrap();
        assert!(read_matrix::<f64>(&p).unwrap().1.is_none());
        assert_eq!(fmt_real(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix::<f64>(&p).is_err());
        std::fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(matches!(read_matrix::<f64>(&p), Err(Error::Format { .. })));
    }
}
