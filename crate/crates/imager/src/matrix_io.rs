//! Matrix and vector file formats.
//!
//! Binary matrix layout, all little endian:
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 8 | magic `RISCMAT1` |
//! | 8 | 8 | rows, u64 |
//! | 16 | 8 | cols, u64 |
//! | 24 | 16·rows·cols | row-major entries, each `re` then `im` as f64 |
//!
//! CSV matrices have a `re0,im0,re1,im1,...` header and one line per row.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ris_core::recovery::RecoveryResult;
use ris_core::{CMatrix, CVector, Cx};

use crate::error::ImagerError;

pub const MAGIC: &[u8; 8] = b"RISCMAT1";

fn create(path: &Path) -> Result<BufWriter<File>, ImagerError> {
    File::create(path).map(BufWriter::new).map_err(|e| ImagerError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, ImagerError> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, ImagerError> {
    csv::Reader::from_path(path).map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> ImagerError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ImagerError::io(path, io),
        other => ImagerError::format(path, format!("{other:?}")),
    }
}

pub fn encode_binary(m: &CMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 16 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            out.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<CMatrix, String> {
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err("not a complex matrix file (bad magic)".into());
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, cols) = (word(8) as usize, word(16) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| n.checked_add(24))
        .ok_or("matrix dimensions overflow")?;
    if bytes.len() != expected {
        return Err(format!("{rows}x{cols} matrix needs {expected} bytes, file has {}", bytes.len()));
    }
    let f = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        let at = 24 + 16 * (i * cols + j);
        Cx::new(f(at), f(at + 8))
    }))
}

pub fn write_binary(m: &CMatrix, path: &Path) -> Result<(), ImagerError> {
    let mut w = create(path)?;
    w.write_all(&encode_binary(m)).and_then(|_| w.flush()).map_err(|e| ImagerError::io(path, e))
}

pub fn read_binary(path: &Path) -> Result<CMatrix, ImagerError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| ImagerError::io(path, e))?;
    decode_binary(&bytes).map_err(|m| ImagerError::format(path, m))
}

pub fn write_matrix_csv(m: &CMatrix, path: &Path) -> Result<(), ImagerError> {
    let mut w = csv_writer(path)?;
    let header: Vec<String> = (0..m.ncols()).flat_map(|j| [format!("re{j}"), format!("im{j}")]).collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .flat_map(|j| [m[(i, j)].re.to_string(), m[(i, j)].im.to_string()])
            .collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ImagerError::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<CMatrix, ImagerError> {
    let mut r = csv_reader(path)?;
    let width = r.headers().map_err(|e| csv_error(path, e))?.len();
    if width % 2 != 0 {
        return Err(ImagerError::format(path, "odd number of columns; expected re,im pairs"));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for field in record.iter() {
            values.push(parse_f64(path, field)?);
        }
        rows += 1;
    }
    let cols = width / 2;
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        let at = 2 * (i * cols + j);
        Cx::new(values[at], values[at + 1])
    }))
}

/// Reads a single-column matrix as a vector.
pub fn read_vector_csv(path: &Path) -> Result<CVector, ImagerError> {
    let m = read_matrix_csv(path)?;
    if m.ncols() != 1 {
        return Err(ImagerError::format(path, format!("expected one complex column, found {}", m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

pub fn write_vector_csv(v: &CVector, path: &Path) -> Result<(), ImagerError> {
    write_matrix_csv(&CMatrix::from_column_slice(v.len(), 1, v.as_slice()), path)
}

fn parse_f64(path: &Path, s: &str) -> Result<f64, ImagerError> {
    s.trim()
        .parse()
        .map_err(|_| ImagerError::format(path, format!("'{s}' is not a number")))
}

/// `index,re,im`, one line per entry.
pub fn write_reflectivity_csv(v: &CVector, path: &Path) -> Result<(), ImagerError> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "re", "im"]).map_err(|e| csv_error(path, e))?;
    for (i, z) in v.iter().enumerate() {
        w.write_record([i.to_string(), z.re.to_string(), z.im.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ImagerError::io(path, e))
}

pub fn read_reflectivity_csv(path: &Path) -> Result<CVector, ImagerError> {
    let mut r = csv_reader(path)?;
    let mut entries = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != 3 {
            return Err(ImagerError::format(path, "expected index,re,im"));
        }
        let idx: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| ImagerError::format(path, format!("bad index '{}'", &record[0])))?;
        entries.push((idx, Cx::new(parse_f64(path, &record[1])?, parse_f64(path, &record[2])?)));
    }
    let len = entries.iter().map(|(i, _)| i + 1).max().unwrap_or(0);
    if entries.len() != len {
        return Err(ImagerError::format(path, "indices must cover 0..K exactly once"));
    }
    let mut v = CVector::zeros(len);
    for (i, z) in entries {
        v[i] = z;
    }
    Ok(v)
}

/// One `index` line per support element.
pub fn write_support_csv(support: &[usize], path: &Path) -> Result<(), ImagerError> {
    let mut w = csv_writer(path)?;
    w.write_record(["index"]).map_err(|e| csv_error(path, e))?;
    for i in support {
        w.write_record([i.to_string()]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ImagerError::io(path, e))
}

/// `index,re,im,in_support` for every pixel, and a one-line
/// `residual,iterations,converged` summary in `summary_path`.
pub fn write_recovery(result: &RecoveryResult, path: &Path, summary_path: &Path) -> Result<(), ImagerError> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "re", "im", "in_support"]).map_err(|e| csv_error(path, e))?;
    for (i, z) in result.r_hat.iter().enumerate() {
        let flag = if result.support.contains(&i) { "1" } else { "0" };
        w.write_record([i.to_string(), z.re.to_string(), z.im.to_string(), flag.into()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ImagerError::io(path, e))?;

    let mut s = csv_writer(summary_path)?;
    s.write_record(["residual", "iterations", "converged"])
        .map_err(|e| csv_error(summary_path, e))?;
    s.write_record([
        result.residual_norm.to_string(),
        result.iterations.to_string(),
        result.converged.to_string(),
    ])
    .map_err(|e| csv_error(summary_path, e))?;
    s.flush().map_err(|e| ImagerError::io(summary_path, e))
}

/// `iteration,J` starting at iteration 1.
pub fn write_design_log(objectives: &[f64], path: &Path) -> Result<(), ImagerError> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "J"]).map_err(|e| csv_error(path, e))?;
    for (i, j) in objectives.iter().enumerate() {
        w.write_record([(i + 1).to_string(), j.to_string()]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| ImagerError::io(path, e))
}
