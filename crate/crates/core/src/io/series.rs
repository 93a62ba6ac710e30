//! ROI time series and correlation matrices on disk.
//!
//! Binary layout, little endian: magic `BHGT`, `u32` rows (N), `u32`
//! columns (T), then `N·T` `f64` values row by row.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::TimeSeriesMatrix;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const SERIES_MAGIC: &[u8; 4] = b"BHGT";

pub fn encode_matrix<T: Scalar>(m: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * m.len());
    out.extend_from_slice(SERIES_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_matrix<T: Scalar>(bytes: &[u8], path: &Path) -> Result<Tensor<T>> {
    let bad = |r: &str| Error::format(path.display(), r);
    if bytes.len() < 12 || &bytes[..4] != SERIES_MAGIC {
        return Err(bad("missing BHGT header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let t = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != n * t * 8 {
        return Err(bad(&format!("payload of {} bytes for {n}×{t}", body.len())));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok(Tensor::matrix(n, t, data))
}

pub fn write_series<T: Scalar>(path: &Path, ts: &TimeSeriesMatrix<T>) -> Result<()> {
    std::fs::write(path, encode_matrix(ts.values()))?;
    Ok(())
}

/// Reads `.bin` files as BHGT binary and anything else as CSV.
pub fn read_series<T: Scalar>(path: &Path) -> Result<TimeSeriesMatrix<T>> {
    let m = if path.extension().is_some_and(|e| e == "bin") {
        decode_matrix(&std::fs::read(path)?, path)?
    } else {
        super::table::read_matrix(path)?.0
    };
    TimeSeriesMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        let ts = TimeSeriesMatrix::new(Tensor::from_rows(&[vec![1.0, 2.0, 4.0], vec![0.5, -1.0, 3.0]])).unwrap();
        write_series(&p, &ts).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"BHGT");
        assert_eq!(bytes.len(), 12 + 6 * 8);
        assert_eq!(read_series::<f64>(&p).unwrap(), ts);
        std::fs::write(&p, &bytes[..20]).unwrap();
        assert!(matches!(read_series::<f64>(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_series() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "t0,t1,t2\n1,2,3\n3,1,2\n").unwrap();
        assert_eq!(read_series::<f64>(&p).unwrap().roi_count(), 2);
    }
}
