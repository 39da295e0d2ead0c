//! Binary 8-bit PGM ("P5", maxval 255) import and export for 2D fixtures.

use std::path::Path;

use super::{Intensities, LabelMap, Tensor, Volume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmKind {
    Volume,
    LabelMap,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("expected {what}")))
    }
}

/// Parse a P5 image into a 2D object with dims `(height, width)`.
pub fn decode_pgm(bytes: &[u8], kind: PgmKind) -> Result<Tensor> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::format(0, "missing P5 magic"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::format(
            maxval_at,
            format!("maxval {maxval} unsupported, need 255"),
        ));
    }
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::format(cur.pos, "expected whitespace before raster"));
    }
    let start = cur.pos + 1;
    let n = width * height;
    if bytes.len() < start + n {
        return Err(Error::format(bytes.len(), "truncated raster"));
    }
    let raster = bytes[start..start + n].to_vec();
    let dims = vec![height, width];
    Ok(match kind {
        PgmKind::Volume => Tensor::Volume(Volume::from_u8(dims, raster)?),
        PgmKind::LabelMap => {
            if let Some(i) = raster.iter().position(|&v| v as usize >= super::NUM_CLASSES) {
                return Err(Error::format(
                    start + i,
                    format!("label value {} is not a class id", raster[i]),
                ));
            }
            Tensor::Labels(LabelMap::new(dims, raster)?)
        }
    })
}

pub fn load_pgm(path: impl AsRef<Path>, kind: PgmKind) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, kind)
}

/// Export a 2D u8 volume or label map as P5.
pub fn encode_pgm(t: &Tensor) -> Result<Vec<u8>> {
    let (dims, data): (&[usize], &[u8]) = match t {
        Tensor::Volume(v) => match v.data() {
            Intensities::U8(d) => (v.dims(), d),
            Intensities::F32(_) => return Err(Error::invariant("PGM export needs u8 intensities")),
        },
        Tensor::Labels(l) => (l.dims(), l.data()),
        Tensor::Probs(_) => return Err(Error::invariant("probability maps cannot be exported as PGM")),
    };
    if dims.len() != 2 {
        return Err(Error::invariant(format!(
            "PGM export needs a 2D object, got rank {}",
            dims.len()
        )));
    }
    let mut out = format!("P5\n{} {}\n255\n", dims[1], dims[0]).into_bytes();
    out.extend_from_slice(data);
    Ok(out)
}
