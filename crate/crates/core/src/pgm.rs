//! Binary PGM (P5) rendering of a sparse feature matrix.

use std::io::Write;

use crate::error::{Error, Result};
use crate::sparse::SparseFeatureMatrix;

/// Grayscale raster with one byte per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.pixels.len() + 32);
        self.write_pgm(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

/// One pixel per cell: rows are data points, columns are features.
/// Intensity is `round(255 * v / v_max)`; absent cells are black.
pub fn render(f: &SparseFeatureMatrix) -> Result<GrayImage> {
    let vmax = f.max_value();
    if f.nnz() == 0 || vmax <= 0.0 {
        return Err(Error::data("cannot render a matrix without stored entries"));
    }
    let (width, height) = (f.n_cols(), f.n_rows());
    let mut pixels = vec![0u8; width * height];
    for (i, j, v) in f.iter() {
        pixels[i * width + j] = (255.0 * v / vmax).round().clamp(0.0, 255.0) as u8;
    }
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}
