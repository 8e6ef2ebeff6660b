//! Artifact serialization: complex matrices as CSV, reports as key-sorted JSON.

use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::CMatrix;

type C = Complex64;

fn io_err(e: impl std::fmt::Display) -> LabError {
    LabError::Io(e.to_string())
}

/// One CSV record per row; entry `(i, j)` fills fields `2j` and `2j+1` as `re,im`.
pub fn matrix_to_csv(a: &CMatrix) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let mut record = Vec::with_capacity(2 * a.ncols());
    for i in 0..a.nrows() {
        record.clear();
        for j in 0..a.ncols() {
            let z = a[(i, j)];
            record.push(format!("{:e}", z.re));
            record.push(format!("{:e}", z.im));
        }
        w.write_record(&record).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(io_err)?;
    String::from_utf8(bytes).map_err(io_err)
}

pub fn matrix_from_csv(text: &str) -> Result<CMatrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<C>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        if rec.len() % 2 != 0 {
            return Err(LabError::Io(format!("row {}: odd number of fields", line + 1)));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| LabError::Io(format!("row {}: `{s}` is not a number", line + 1)));
        let mut row = Vec::with_capacity(rec.len() / 2);
        for k in (0..rec.len()).step_by(2) {
            row.push(C::new(parse(&rec[k])?, parse(&rec[k + 1])?));
        }
        if rows.first().is_some_and(|r0| r0.len() != row.len()) {
            return Err(LabError::Io(format!("row {}: ragged matrix", line + 1)));
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(CMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// A header record followed by data records, quoted where RFC 4180 requires it.
pub fn records_to_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(io_err)?;
    String::from_utf8(bytes).map_err(io_err)
}

/// Pretty JSON with object keys in sorted order and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // serde_json::Value keeps object keys in a BTreeMap
    let v = serde_json::to_value(value).map_err(io_err)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(io_err)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let a = CMatrix::from_row_slice(2, 2, &[C::new(1.0, 0.0), C::new(0.0, -2.0), C::new(0.5, 0.25), C::new(-3.0, 4.0)]);
        let s = matrix_to_csv(&a).unwrap();
        assert_eq!(s, "1e0,0e0,0e0,-2e0\n5e-1,2.5e-1,-3e0,4e0\n");
        assert_eq!(matrix_from_csv(&s).unwrap(), a);
    }

    #[test]
    fn csv_rejects_ragged() {
        assert!(matrix_from_csv("1,0,2,0\n1,0\n").is_err());
        assert!(matrix_from_csv("1,0,2\n").is_err());
    }

    #[test]
    fn records_are_quoted() {
        let s = records_to_csv(&["n", "label"], &[vec!["1".into(), "a,b".into()], vec!["2".into(), "say \"hi\"".into()]]).unwrap();
        assert_eq!(s, "n,label\n1,\"a,b\"\n2,\"say \"\"hi\"\"\"\n");
    }

    #[test]
    fn json_keys_sorted() {
        #[derive(Serialize)]
        struct R {
            zeta: u8,
            alpha: u8,
            mid: Vec<u8>,
        }
        let s = to_json(&R { zeta: 1, alpha: 2, mid: vec![] }).unwrap();
        let a = s.find("alpha").unwrap();
        let m = s.find("mid").unwrap();
        let z = s.find("zeta").unwrap();
        assert!(a < m && m < z);
        assert!(s.ends_with('\n'));
    }

    proptest! {
        #[test]
        fn csv_round_trip(vals in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..30), cols in 1usize..6) {
            let rows = vals.len().div_ceil(cols);
            let a = CMatrix::from_fn(rows, cols, |i, j| {
                let (re, im) = vals[(i * cols + j) % vals.len()];
                C::new(re, im)
            });
            prop_assert_eq!(matrix_from_csv(&matrix_to_csv(&a).unwrap()).unwrap(), a);
        }
    }
}
