//! VTF1 binary tensor format.
//!
//! ```text
//! "VTF1" | dtype u8 (0=u8, 1=f32 LE) | kind u8 (0=volume, 1=labelmap, 2=probmap)
//!        | rank u8 | rank x u32 LE dims | row-major payload
//! ```
//! Probability maps carry an implicit trailing channel dimension of 4.
//! Label maps are always u8 and probability maps always f32.

use std::path::Path;

use super::{first_invalid_pixel, Intensities, LabelMap, ProbMap, Volume, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::fsutil;

const MAGIC: &[u8; 4] = b"VTF1";
const DTYPE_U8: u8 = 0;
const DTYPE_F32: u8 = 1;
const KIND_VOLUME: u8 = 0;
const KIND_LABELS: u8 = 1;
const KIND_PROBS: u8 = 2;

/// Any object a VTF1 file can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Volume(Volume),
    Labels(LabelMap),
    Probs(ProbMap<f32>),
}

impl Tensor {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Tensor::Volume(_) => "volume",
            Tensor::Labels(_) => "labelmap",
            Tensor::Probs(_) => "probmap",
        }
    }
}

impl From<Volume> for Tensor {
    fn from(v: Volume) -> Self {
        Tensor::Volume(v)
    }
}

impl From<LabelMap> for Tensor {
    fn from(v: LabelMap) -> Self {
        Tensor::Labels(v)
    }
}

impl From<ProbMap<f32>> for Tensor {
    fn from(v: ProbMap<f32>) -> Self {
        Tensor::Probs(v)
    }
}

fn header(out: &mut Vec<u8>, dtype: u8, kind: u8, dims: &[usize]) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[dtype, kind, dims.len() as u8]);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::new();
    match t {
        Tensor::Volume(v) => match v.data() {
            Intensities::U8(d) => {
                header(&mut out, DTYPE_U8, KIND_VOLUME, v.dims());
                out.extend_from_slice(d);
            }
            Intensities::F32(d) => {
                header(&mut out, DTYPE_F32, KIND_VOLUME, v.dims());
                put_f32s(&mut out, d);
            }
        },
        Tensor::Labels(l) => {
            header(&mut out, DTYPE_U8, KIND_LABELS, l.dims());
            out.extend_from_slice(l.data());
        }
        Tensor::Probs(p) => {
            header(&mut out, DTYPE_F32, KIND_PROBS, p.dims());
            put_f32s(&mut out, p.data());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format(0, "missing VTF1 magic"));
    }
    if bytes.len() < 7 {
        return Err(Error::format(bytes.len(), "truncated header"));
    }
    let (dtype, kind, rank) = (bytes[4], bytes[5], bytes[6] as usize);
    if dtype > DTYPE_F32 {
        return Err(Error::format(4, format!("unknown dtype {dtype}")));
    }
    if kind > KIND_PROBS {
        return Err(Error::format(5, format!("unknown kind {kind}")));
    }
    match (kind, dtype) {
        (KIND_LABELS, DTYPE_F32) => return Err(Error::format(4, "label maps must be u8")),
        (KIND_PROBS, DTYPE_U8) => return Err(Error::format(4, "probability maps must be f32")),
        _ => {}
    }
    if !(2..=3).contains(&rank) {
        return Err(Error::format(6, format!("rank {rank} out of range (2..=3)")));
    }
    let dims_end = 7 + 4 * rank;
    if bytes.len() < dims_end {
        return Err(Error::format(bytes.len(), "truncated dims"));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut pixels = 1usize;
    for i in 0..rank {
        let off = 7 + 4 * i;
        let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        if d == 0 {
            return Err(Error::format(off, "zero dimension"));
        }
        pixels = pixels
            .checked_mul(d)
            .ok_or_else(|| Error::format(off, "dimension product overflows"))?;
        dims.push(d);
    }
    let per_pixel = if kind == KIND_PROBS { NUM_CLASSES } else { 1 };
    let width = if dtype == DTYPE_F32 { 4 } else { 1 };
    let payload_len = pixels
        .checked_mul(per_pixel * width)
        .ok_or_else(|| Error::format(dims_end, "payload size overflows"))?;
    let expected = dims_end + payload_len;
    if bytes.len() < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, have {}", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected, "trailing bytes after payload"));
    }
    let payload = &bytes[dims_end..];
    let f32s = || -> Vec<f32> {
        payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let t = match kind {
        KIND_VOLUME if dtype == DTYPE_U8 => Tensor::Volume(Volume::from_u8(dims, payload.to_vec())?),
        KIND_VOLUME => Tensor::Volume(Volume::from_f32(dims, f32s())?),
        KIND_LABELS => {
            if let Some(i) = payload.iter().position(|&v| v as usize >= NUM_CLASSES) {
                return Err(Error::format(
                    dims_end + i,
                    format!("label value {} is not a class id", payload[i]),
                ));
            }
            Tensor::Labels(LabelMap::new(dims, payload.to_vec())?)
        }
        _ => {
            let data = f32s();
            if let Some(px) = first_invalid_pixel(&data) {
                return Err(Error::format(
                    dims_end + px * NUM_CLASSES * 4,
                    format!(
                        "pixel {px} channels {:?} are not a normalized probability vector",
                        &data[px * NUM_CLASSES..(px + 1) * NUM_CLASSES]
                    ),
                ));
            }
            Tensor::Probs(ProbMap::new(dims, data)?)
        }
    };
    Ok(t)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Writes atomically: a failed save leaves no file behind.
pub fn save_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), &encode(t))
}

fn wrong_kind(path: &Path, want: &str, got: &Tensor) -> Error {
    Error::invariant(format!(
        "{}: expected a {want}, found a {}",
        path.display(),
        got.kind_name()
    ))
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    match load_tensor(path)? {
        Tensor::Volume(v) => Ok(v),
        other => Err(wrong_kind(path, "volume", &other)),
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    match load_tensor(path)? {
        Tensor::Labels(v) => Ok(v),
        other => Err(wrong_kind(path, "labelmap", &other)),
    }
}

pub fn load_probmap(path: impl AsRef<Path>) -> Result<ProbMap<f32>> {
    let path = path.as_ref();
    match load_tensor(path)? {
        Tensor::Probs(v) => Ok(v),
        other => Err(wrong_kind(path, "probmap", &other)),
    }
}
