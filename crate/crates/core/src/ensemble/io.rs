//! Matrix export formats: CSV with `re,im` cells and the compact `ELSP1`
//! binary layout (magic, little-endian u64 dimension, then 2 n^2 doubles,
//! row-major, re/im interleaved).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::prelude::*;
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"ELSP1";

pub fn write_matrix_csv(matrix: &ArrayView2<Complex64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in matrix.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b",")?;
            }
            write!(out, "{:?},{:?}", v.re, v.im)?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<Complex64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Cache(format!("bad CSV cell: {e}")))?;
        if cells.len() % 2 != 0 {
            return Err(Error::Cache("odd number of CSV cells in matrix row".into()));
        }
        rows.push(cells.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect());
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Cache("CSV matrix is not square".into()));
    }
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, n), flat).map_err(|e| Error::Cache(e.to_string()))
}

pub fn write_matrix_elsp1(matrix: &ArrayView2<Complex64>, path: impl AsRef<Path>) -> Result<()> {
    let n = matrix.nrows();
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(n as u64).to_le_bytes())?;
    for v in matrix.iter() {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_elsp1(path: impl AsRef<Path>) -> Result<Array2<Complex64>> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Cache(format!("bad magic {:?}", magic)));
    }
    let mut dim = [0u8; 8];
    input.read_exact(&mut dim)?;
    let n = u64::from_le_bytes(dim) as usize;
    let mut data = Vec::with_capacity(n * n);
    let mut buf = [0u8; 16];
    for _ in 0..n * n {
        input.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..16].try_into().unwrap());
        data.push(Complex64::new(re, im));
    }
    Array2::from_shape_vec((n, n), data).map_err(|e| Error::Cache(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{make_gaussian_atoms, sample_elliptic, EnsembleConfig};

    #[test]
    fn csv_and_binary_roundtrip() {
        let cfg = EnsembleConfig::new(17, make_gaussian_atoms(0.5, -0.25).unwrap(), 99);
        let sample = sample_elliptic(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("m.csv");
        let bin = dir.path().join("m.elsp1");
        write_matrix_csv(&sample.m.view(), &csv).unwrap();
        write_matrix_elsp1(&sample.m.view(), &bin).unwrap();
        assert_eq!(read_matrix_csv(&csv).unwrap(), sample.m);
        assert_eq!(read_matrix_elsp1(&bin).unwrap(), sample.m);
    }

    #[test]
    fn binary_rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTELSP1xxxxxxxx").unwrap();
        assert!(read_matrix_elsp1(&path).is_err());
    }
}
