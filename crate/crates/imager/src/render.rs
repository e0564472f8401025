//! Amplitude maps: CSV, portable graymap, and a terminal preview.
//!
//! Pixel `k` of a `rows × cols` grid sits at `(k / cols, k % cols)`; rows run
//! along range, columns along cross-range.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{GrayImage, ImageEncoder, Luma};

use crate::error::ImagerError;
use crate::matrix_io::csv_error;

/// Gray level at or above which a raster pixel counts as lit.
pub const LIT_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl AmplitudeMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, String> {
        if rows * cols != values.len() {
            return Err(format!("{} values do not fill a {rows}x{cols} grid", values.len()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("amplitudes must be finite and nonnegative".into());
        }
        Ok(Self { rows, cols, values })
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Linear scaling from 0 to the peak amplitude onto 0..=255.
    pub fn to_gray(&self) -> GrayImage {
        let peak = self.peak();
        GrayImage::from_fn(self.cols as u32, self.rows as u32, |x, y| {
            let v = self.at(y as usize, x as usize);
            let level = if peak > 0.0 { (v / peak * 255.0).round() } else { 0.0 };
            Luma([level as u8])
        })
    }

    /// Coarse preview, one character per pixel.
    pub fn ascii(&self) -> String {
        const RAMP: &[u8] = b" .:-=+*#%@";
        let peak = self.peak();
        let mut out = String::with_capacity((self.cols + 1) * self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let level = if peak > 0.0 { self.at(r, c) / peak } else { 0.0 };
                let i = ((level * (RAMP.len() - 1) as f64).round() as usize).min(RAMP.len() - 1);
                out.push(RAMP[i] as char);
            }
            out.push('\n');
        }
        out
    }
}

/// Fraction of `mask` pixels that are lit in `img`.
pub fn mask_agreement(img: &GrayImage, cols: usize, mask: &[usize]) -> f64 {
    if mask.is_empty() {
        return 1.0;
    }
    let lit = mask
        .iter()
        .filter(|&&k| img.get_pixel((k % cols) as u32, (k / cols) as u32)[0] >= LIT_THRESHOLD)
        .count();
    lit as f64 / mask.len() as f64
}

pub fn write_map_csv(map: &AmplitudeMap, path: &Path) -> Result<(), ImagerError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["row", "col", "amplitude"]).map_err(|e| csv_error(path, e))?;
    for r in 0..map.rows {
        for c in 0..map.cols {
            w.write_record([r.to_string(), c.to_string(), map.at(r, c).to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| ImagerError::io(path, e))
}

/// Reads a `row,col,amplitude` map. The grid shape is the extent of the
/// indices unless `shape` pins it; every pixel must appear exactly once.
pub fn read_map_csv(path: &Path, shape: Option<(usize, usize)>) -> Result<AmplitudeMap, ImagerError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut entries = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let bad = || ImagerError::format(path, format!("bad line '{}'", record.iter().collect::<Vec<_>>().join(",")));
        let row: usize = field(0).parse().map_err(|_| bad())?;
        let col: usize = field(1).parse().map_err(|_| bad())?;
        let amp: f64 = field(2).parse().map_err(|_| bad())?;
        entries.push((row, col, amp));
    }
    let extent = (
        entries.iter().map(|e| e.0 + 1).max().unwrap_or(0),
        entries.iter().map(|e| e.1 + 1).max().unwrap_or(0),
    );
    let (rows, cols) = match shape {
        Some(s) if extent.0 > s.0 || extent.1 > s.1 => {
            return Err(ImagerError::format(
                path,
                format!("map extends to {}x{}, expected {}x{}", extent.0, extent.1, s.0, s.1),
            ))
        }
        Some(s) => s,
        None => extent,
    };
    let mut values = vec![f64::NAN; rows * cols];
    for (r, c, a) in entries {
        let slot = &mut values[r * cols + c];
        if !slot.is_nan() {
            return Err(ImagerError::format(path, format!("pixel ({r}, {c}) appears twice")));
        }
        *slot = a;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(ImagerError::format(path, format!("map does not cover the {rows}x{cols} grid")));
    }
    AmplitudeMap::new(rows, cols, values).map_err(|m| ImagerError::format(path, m))
}

/// Binary (`P5`) graymap with maxval 255.
pub fn write_pgm(map: &AmplitudeMap, path: &Path) -> Result<(), ImagerError> {
    let img = map.to_gray();
    let file = File::create(path).map_err(|e| ImagerError::io(path, e))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::L8)
        .map_err(|e| ImagerError::format(path, e.to_string()))
}
