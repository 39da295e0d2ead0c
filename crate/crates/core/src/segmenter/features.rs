use crate::error::{Error, Result};
use crate::tensor::Volume;

pub const NUM_FEATURES: usize = 7;

/// Box-filter radii of the smoothed intensity features.
pub const SMOOTHING_RADII: [usize; 3] = [1, 2, 4];

/// Per-pixel feature vectors of a 2D slice, interleaved:
/// `[intensity, box_r1, box_r2, box_r4, row/rows, col/cols, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    dims: (usize, usize),
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn num_pixels(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * NUM_FEATURES..(i + 1) * NUM_FEATURES]
    }

    /// Values of one feature channel in row-major order.
    pub fn channel(&self, f: usize) -> Vec<f64> {
        self.data.chunks_exact(NUM_FEATURES).map(|px| px[f]).collect()
    }
}

/// Mean over the `(2r+1)²` window with indices clamped to the image.
fn box_filter(src: &[f64], rows: usize, cols: usize, radius: usize) -> Vec<f64> {
    let n = (2 * radius + 1) as f64;
    let clamp = |i: isize, len: usize| i.clamp(0, len as isize - 1) as usize;
    let mut horiz = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut s = 0.0;
            for d in -(radius as isize)..=radius as isize {
                s += src[r * cols + clamp(c as isize + d, cols)];
            }
            horiz[r * cols + c] = s / n;
        }
    }
    let mut out = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut s = 0.0;
            for d in -(radius as isize)..=radius as isize {
                s += horiz[clamp(r as isize + d, rows) * cols + c];
            }
            out[r * cols + c] = s / n;
        }
    }
    out
}

pub fn extract_features(slice: &Volume) -> Result<FeatureMap> {
    let (rows, cols) = match slice.dims() {
        &[r, c] => (r, c),
        d => {
            return Err(Error::invariant(format!(
                "features need a 2D slice, got rank {}",
                d.len()
            )))
        }
    };
    let intensity: Vec<f64> = (0..slice.len()).map(|i| slice.normalized(i)).collect();
    let smoothed: Vec<Vec<f64>> = SMOOTHING_RADII
        .iter()
        .map(|&r| box_filter(&intensity, rows, cols, r))
        .collect();
    let mut data = Vec::with_capacity(rows * cols * NUM_FEATURES);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            data.extend_from_slice(&[
                intensity[i],
                smoothed[0][i],
                smoothed[1][i],
                smoothed[2][i],
                r as f64 / rows as f64,
                c as f64 / cols as f64,
                1.0,
            ]);
        }
    }
    Ok(FeatureMap {
        dims: (rows, cols),
        data,
    })
}
