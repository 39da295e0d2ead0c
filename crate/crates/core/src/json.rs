//! JSON output with a fixed float rendering: 17 significant digits in
//! exponent form (`1.0000000000000001e-1`), non-finite values as `null`.
//! Struct fields keep declaration order and maps are `BTreeMap`s, so the
//! byte stream depends only on the values.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

struct FixedFloat;

impl FixedFloat {
    fn write<W: ?Sized + io::Write>(w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{v:.16e}")
        } else {
            w.write_all(b"null")
        }
    }
}

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        Self::write(w, v)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        Self::write(w, v as f64)
    }
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, FixedFloat);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    let mut s = String::from_utf8(out).expect("serde_json emits UTF-8");
    s.push('\n');
    s
}
