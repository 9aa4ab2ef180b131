//! File formats: point-set CSV, matrix CSV and the `DMAT` binary matrix format.
//!
//! `DMAT` layout: the ASCII magic `DMAT`, then `u32` row count and `u32`
//! column count (both little-endian), then `rows * cols` little-endian `f64`
//! values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metric::PointSet;

pub const DMAT_MAGIC: &[u8; 4] = b"DMAT";

/// Magic, rows, cols, then 4 reserved zero bytes so the body is 8-byte aligned.
pub const DMAT_HEADER_LEN: usize = 16;

pub fn write_dmat<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::invalid("too many rows for DMAT"))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::invalid("too many columns for DMAT"))?;
    w.write_all(DMAT_MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    w.write_all(&[0u8; 4])?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dmat<R: Read>(mut r: R) -> Result<DMatrix<f64>> {
    let mut header = [0u8; DMAT_HEADER_LEN];
    r.read_exact(&mut header).map_err(|_| Error::format("truncated DMAT header"))?;
    if &header[..4] != DMAT_MAGIC {
        return Err(Error::format("bad DMAT magic"));
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let len = rows.checked_mul(cols).ok_or_else(|| Error::format("DMAT size overflow"))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != len * 8 {
        return Err(Error::format(format!(
            "DMAT body has {} bytes, expected {} for {rows}x{cols}",
            body.len(),
            len * 8
        )));
    }
    let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn save_dmat(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dmat(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_dmat(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    read_dmat(BufReader::new(File::open(path)?)).map_err(|e| with_path(e, path))
}

/// Headerless CSV, one matrix row per line.
pub fn write_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..m.nrows() {
        wr.write_record(m.row(i).iter().map(|v| format_f64(*v)))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::format(format!("row {rows} has {} fields", rec.len())));
        }
        for field in rec.iter() {
            values.push(parse_f64(field, rows)?);
        }
        rows += 1;
    }
    let cols = cols.ok_or(Error::Empty("matrix CSV"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn save_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    write_matrix_csv(BufWriter::new(File::create(path)?), m)
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    read_matrix_csv(BufReader::new(File::open(path)?)).map_err(|e| with_path(e, path))
}

/// Point CSV with header `x0,x1,...,x{d-1}`.
pub fn read_points_csv<R: Read>(r: R) -> Result<PointSet> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rd.headers()?.clone();
    for (idx, name) in header.iter().enumerate() {
        if name.trim() != format!("x{idx}") {
            return Err(Error::format(format!("header field {idx} is `{name}`, expected `x{idx}`")));
        }
    }
    let dim = header.len();
    let mut coords = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(Error::format(format!("point {row} has {} coordinates, expected {dim}", rec.len())));
        }
        for field in rec.iter() {
            coords.push(parse_f64(field, row)?);
        }
    }
    PointSet::from_flat(coords, dim)
}

pub fn write_points_csv<W: Write>(w: W, points: &PointSet) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record((0..points.dim()).map(|i| format!("x{i}")))?;
    for p in points.iter() {
        wr.write_record(p.iter().map(|v| format_f64(*v)))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn load_points_csv(path: impl AsRef<Path>) -> Result<PointSet> {
    let path = path.as_ref();
    read_points_csv(BufReader::new(File::open(path)?)).map_err(|e| with_path(e, path))
}

pub fn save_points_csv(path: impl AsRef<Path>, points: &PointSet) -> Result<()> {
    write_points_csv(BufWriter::new(File::create(path)?), points)
}

/// Shortest decimal form that round-trips.
/// Shortest representation that parses back to the same value.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(field: &str, row: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::format(format!("row {row}: cannot parse `{field}` as a number")))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { path: None, msg } => Error::Format { path: Some(path.to_path_buf()), msg },
        other => other,
    }
}
