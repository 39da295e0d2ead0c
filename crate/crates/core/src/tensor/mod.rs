//! Volumes, label maps and per-pixel class fields, plus their on-disk formats.

mod manifest;
mod pgm;
mod vtf;

pub use manifest::{load_manifest, save_manifest, Case, DatasetManifest, Split};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, PgmKind};
pub use vtf::{decode, encode, load_labels, load_probmap, load_tensor, load_volume, save_tensor, Tensor};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of tissue classes: background, CSF, GM, WM.
pub const NUM_CLASSES: usize = 4;

pub const BACKGROUND: u8 = 0;
pub const CSF: u8 = 1;
pub const GM: u8 = 2;
pub const WM: u8 = 3;

/// Tolerance on the per-pixel channel sum of a [`ProbMap`].
pub const PROB_SUM_TOLERANCE: f64 = 1e-5;

fn check_dims(dims: &[usize]) -> Result<usize> {
    if !(2..=3).contains(&dims.len()) {
        return Err(Error::invariant(format!(
            "spatial rank must be 2 or 3, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::invariant(format!("dims must be positive, got {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::invariant(format!("dims {dims:?} overflow")))
}

fn check_len(dims: &[usize], per_pixel: usize, len: usize) -> Result<usize> {
    let n = check_dims(dims)?;
    if n * per_pixel != len {
        return Err(Error::invariant(format!(
            "data length {len} does not match dims {dims:?} x {per_pixel}"
        )));
    }
    Ok(n)
}

/// Copy one 2D slice out of a row-major 3D buffer holding `per_pixel` values per voxel.
fn slice_buffer<T: Copy>(
    dims: &[usize],
    data: &[T],
    per_pixel: usize,
    axis: usize,
    index: usize,
) -> Result<(Vec<usize>, Vec<T>)> {
    if dims.len() != 3 {
        return Err(Error::invariant(format!(
            "slice2d needs a 3D object, got rank {}",
            dims.len()
        )));
    }
    if axis > 2 {
        return Err(Error::invariant(format!("axis {axis} out of range for rank 3")));
    }
    if index >= dims[axis] {
        return Err(Error::OutOfRange {
            axis,
            index,
            len: dims[axis],
        });
    }
    let (d0, d1, d2) = (dims[0], dims[1], dims[2]);
    let out_dims: Vec<usize> = (0..3).filter(|&a| a != axis).map(|a| dims[a]).collect();
    let mut out = Vec::with_capacity(out_dims[0] * out_dims[1] * per_pixel);
    let mut push = |i: usize, j: usize, k: usize| {
        let base = ((i * d1 + j) * d2 + k) * per_pixel;
        out.extend_from_slice(&data[base..base + per_pixel]);
    };
    match axis {
        0 => (0..d1).for_each(|j| (0..d2).for_each(|k| push(index, j, k))),
        1 => (0..d0).for_each(|i| (0..d2).for_each(|k| push(i, index, k))),
        _ => (0..d0).for_each(|i| (0..d1).for_each(|j| push(i, j, index))),
    }
    Ok((out_dims, out))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Intensities {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl Intensities {
    pub fn len(&self) -> usize {
        match self {
            Intensities::U8(v) => v.len(),
            Intensities::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Scalar intensity grid, row-major, 2D or 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Vec<usize>,
    data: Intensities,
}

impl Volume {
    pub fn new(dims: Vec<usize>, data: Intensities) -> Result<Self> {
        check_len(&dims, 1, data.len())?;
        Ok(Self { dims, data })
    }

    pub fn from_u8(dims: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        Self::new(dims, Intensities::U8(data))
    }

    pub fn from_f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::new(dims, Intensities::F32(data))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &Intensities {
        &self.data
    }

    /// Intensity at flat index `i` mapped to `[0, 1]`: u8 divides by 255, f32 is clamped.
    pub fn normalized(&self, i: usize) -> f64 {
        match &self.data {
            Intensities::U8(v) => v[i] as f64 / 255.0,
            Intensities::F32(v) => {
                let x = v[i] as f64;
                if x.is_nan() {
                    0.0
                } else {
                    x.clamp(0.0, 1.0)
                }
            }
        }
    }

    pub fn slice2d(&self, axis: usize, index: usize) -> Result<Volume> {
        let (dims, data) = match &self.data {
            Intensities::U8(v) => {
                let (d, s) = slice_buffer(&self.dims, v, 1, axis, index)?;
                (d, Intensities::U8(s))
            }
            Intensities::F32(v) => {
                let (d, s) = slice_buffer(&self.dims, v, 1, axis, index)?;
                (d, Intensities::F32(s))
            }
        };
        Ok(Volume { dims, data })
    }

    /// The 2D slices a segmenter sees: the object itself when 2D, axis-0 slices when 3D.
    pub fn axial_slices(&self) -> Vec<Volume> {
        match self.rank() {
            2 => vec![self.clone()],
            _ => (0..self.dims[0])
                .map(|i| self.slice2d(0, i).expect("in range"))
                .collect(),
        }
    }
}

/// Integer class grid with values in `0..NUM_CLASSES`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    dims: Vec<usize>,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(dims: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        check_len(&dims, 1, data.len())?;
        if let Some((i, &v)) = data.iter().enumerate().find(|(_, &v)| v as usize >= NUM_CLASSES) {
            return Err(Error::invariant(format!(
                "label value {v} at index {i} is not a class id"
            )));
        }
        Ok(Self { dims, data })
    }

    /// Label map filled with one class.
    pub fn filled(dims: Vec<usize>, class_id: u8) -> Result<Self> {
        let n = check_dims(&dims)?;
        Self::new(dims, vec![class_id; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Value at `(row, col)` of a 2D map.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.dims[1] + col]
    }

    pub fn slice2d(&self, axis: usize, index: usize) -> Result<LabelMap> {
        let (dims, data) = slice_buffer(&self.dims, &self.data, 1, axis, index)?;
        Ok(LabelMap { dims, data })
    }

    pub fn axial_slices(&self) -> Vec<LabelMap> {
        match self.rank() {
            2 => vec![self.clone()],
            _ => (0..self.dims[0])
                .map(|i| self.slice2d(0, i).expect("in range"))
                .collect(),
        }
    }

    /// Inverse of [`LabelMap::axial_slices`]: one slice gives a 2D map, more give a 3D stack.
    pub fn stack_axial(slices: &[LabelMap]) -> Result<LabelMap> {
        let first = slices
            .first()
            .ok_or_else(|| Error::invariant("cannot stack zero slices"))?;
        if slices.len() == 1 {
            return Ok(first.clone());
        }
        let mut data = Vec::with_capacity(first.len() * slices.len());
        for s in slices {
            if s.dims != first.dims || s.rank() != 2 {
                return Err(Error::DimMismatch {
                    left: first.dims.clone(),
                    right: s.dims.clone(),
                });
            }
            data.extend_from_slice(&s.data);
        }
        let mut dims = vec![slices.len()];
        dims.extend_from_slice(&first.dims);
        Ok(LabelMap { dims, data })
    }
}

/// Per-pixel class probabilities, channel dimension last (pixel-interleaved).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> ProbMap<S> {
    pub fn new(dims: Vec<usize>, data: Vec<S>) -> Result<Self> {
        check_len(&dims, NUM_CLASSES, data.len())?;
        if let Some(pixel) = first_invalid_pixel(&data) {
            return Err(Error::invariant(format!(
                "pixel {pixel} is not a probability vector: {:?}",
                &data[pixel * NUM_CLASSES..(pixel + 1) * NUM_CLASSES]
            )));
        }
        Ok(Self { dims, data })
    }

    /// Every pixel 0.25 on each channel.
    pub fn uniform(dims: Vec<usize>) -> Result<Self> {
        let n = check_dims(&dims)?;
        Self::new(dims, vec![S::narrow(0.25); n * NUM_CLASSES])
    }

    /// One-hot encoding of a label map.
    pub fn one_hot(labels: &LabelMap) -> Self {
        let mut data = vec![S::zero(); labels.len() * NUM_CLASSES];
        for (i, &c) in labels.data().iter().enumerate() {
            data[i * NUM_CLASSES + c as usize] = S::one();
        }
        Self {
            dims: labels.dims().to_vec(),
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_pixels(&self) -> usize {
        self.data.len() / NUM_CLASSES
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn pixel(&self, i: usize) -> &[S] {
        &self.data[i * NUM_CLASSES..(i + 1) * NUM_CLASSES]
    }

    pub fn cast<T: Scalar>(&self) -> Result<ProbMap<T>> {
        ProbMap::new(
            self.dims.clone(),
            self.data.iter().map(|v| T::narrow(v.widen())).collect(),
        )
    }
}

/// Index of the first pixel whose channels are out of `[0, 1]` or do not sum to one.
pub(crate) fn first_invalid_pixel<S: Scalar>(data: &[S]) -> Option<usize> {
    data.chunks_exact(NUM_CLASSES).position(|px| {
        let mut sum = 0.0;
        for v in px {
            let v = v.widen();
            if !(0.0..=1.0).contains(&v) {
                return true;
            }
            sum += v;
        }
        (sum - 1.0).abs() > PROB_SUM_TOLERANCE
    })
}

/// Unnormalized per-pixel class scores, same layout as [`ProbMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Logits<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Logits<S> {
    pub fn new(dims: Vec<usize>, data: Vec<S>) -> Result<Self> {
        check_len(&dims, NUM_CLASSES, data.len())?;
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_pixels(&self) -> usize {
        self.data.len() / NUM_CLASSES
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_shape_bookkeeping() {
        let v = Volume::from_u8(vec![4, 5, 6], vec![0; 120]).unwrap();
        assert_eq!(v.slice2d(2, 0).unwrap().dims(), &[4, 5]);
        assert_eq!(v.slice2d(1, 4).unwrap().dims(), &[4, 6]);
        assert_eq!(v.slice2d(0, 3).unwrap().dims(), &[5, 6]);
    }

    #[test]
    fn slice_values_follow_row_major_layout() {
        let v = Volume::from_u8(vec![2, 2, 2], (0..8).collect()).unwrap();
        assert_eq!(v.slice2d(0, 1).unwrap().data(), &Intensities::U8(vec![4, 5, 6, 7]));
        // axis 1 index 0 keeps (i, k): 0,1,4,5
        assert_eq!(v.slice2d(1, 0).unwrap().data(), &Intensities::U8(vec![0, 1, 4, 5]));
        // axis 2 index 1 keeps (i, j): 1,3,5,7
        assert_eq!(v.slice2d(2, 1).unwrap().data(), &Intensities::U8(vec![1, 3, 5, 7]));
    }

    #[test]
    fn slicing_constant_volume_is_constant() {
        let v = Volume::from_f32(vec![3, 4, 5], vec![0.5; 60]).unwrap();
        for axis in 0..3 {
            let s = v.slice2d(axis, 1).unwrap();
            match s.data() {
                Intensities::F32(d) => assert!(d.iter().all(|&x| x == 0.5)),
                _ => unreachable!(),
            }
        }
        // source untouched
        assert_eq!(v.len(), 60);
    }

    #[test]
    fn slice_errors() {
        let v = Volume::from_u8(vec![2, 3, 4], vec![0; 24]).unwrap();
        assert!(matches!(
            v.slice2d(1, 3),
            Err(Error::OutOfRange {
                axis: 1,
                index: 3,
                len: 3
            })
        ));
        let flat = Volume::from_u8(vec![2, 3], vec![0; 6]).unwrap();
        assert!(flat.slice2d(0, 0).is_err());
    }

    #[test]
    fn label_values_are_gated() {
        assert!(LabelMap::new(vec![2, 2], vec![0, 1, 2, 3]).is_ok());
        assert!(LabelMap::new(vec![2, 2], vec![0, 1, 7, 3]).is_err());
        assert!(LabelMap::new(vec![2, 2], vec![0, 1, 2]).is_err());
        assert!(LabelMap::new(vec![0, 2], vec![]).is_err());
    }

    #[test]
    fn probmap_normalization_is_checked() {
        assert!(ProbMap::<f32>::new(vec![1, 1], vec![0.25; 4]).is_ok());
        assert!(ProbMap::<f32>::new(vec![1, 1], vec![0.225; 4]).is_err());
        assert!(ProbMap::<f64>::new(vec![1, 1], vec![1.5, -0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn stack_inverts_axial_slices() {
        let l = LabelMap::new(vec![3, 2, 2], (0..12).map(|i| (i % 4) as u8).collect()).unwrap();
        assert_eq!(LabelMap::stack_axial(&l.axial_slices()).unwrap(), l);
    }
}
