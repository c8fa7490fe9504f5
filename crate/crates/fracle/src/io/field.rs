//! Binary field dumps with a text sidecar.
//!
//! Layout (little endian): 8 magic bytes, u32 version, u8 kind (0 grid,
//! 1 free), u32 n, n × u64 sizes, n × f64 lengths, f64 extra, then the
//! values as row-major f64. For a free field the lengths are 2R and the
//! extra slot holds the decay hint; for a grid function it holds s.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};

use crate::domain::{BoxDomain, Grid, GridFunction};
use crate::error::{Error, Result};
use crate::hls::FreeField;

pub const MAGIC: &[u8; 8] = b"FRACLEFD";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug)]
pub enum FieldRef<'a> {
    Grid(&'a GridFunction),
    Free(&'a FreeField),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Grid,
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedField {
    pub kind: FieldKind,
    pub lengths: Vec<f64>,
    pub extra: f64,
    pub values: ArrayD<f64>,
}

impl LoadedField {
    pub fn into_grid_function(self) -> Result<GridFunction> {
        if self.kind != FieldKind::Grid {
            return Err(Error::Format("dump holds a free field".into()));
        }
        let d = BoxDomain::new(self.lengths, self.extra)?;
        let g = Grid::new(&d, self.values.shape())?;
        GridFunction::new(&g, self.values)
    }

    pub fn into_free_field(self) -> Result<FreeField> {
        if self.kind != FieldKind::Free {
            return Err(Error::Format("dump holds a grid function".into()));
        }
        FreeField::new(0.5 * self.lengths[0], self.values, self.extra)
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

pub fn encode_field(f: FieldRef) -> Vec<u8> {
    let (kind, lengths, extra, values): (u8, Vec<f64>, f64, &ArrayD<f64>) = match f {
        FieldRef::Grid(g) => (0, g.grid().domain().lengths().to_vec(), g.grid().domain().s(), g.values()),
        FieldRef::Free(v) => (1, vec![2.0 * v.half_width(); v.dim()], v.decay_hint(), v.values()),
    };
    let mut out = Vec::with_capacity(32 + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&(values.ndim() as u32).to_le_bytes());
    for &m in values.shape() {
        out.extend_from_slice(&(m as u64).to_le_bytes());
    }
    for l in &lengths {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&extra.to_le_bytes());
    for v in values.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.at + k > self.bytes.len() {
            return Err(Error::Format(format!("truncated dump at byte {}", self.at)));
        }
        let s = &self.bytes[self.at..self.at + k];
        self.at += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_field(bytes: &[u8]) -> Result<LoadedField> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a field dump (bad magic bytes)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "field dump version {version} is not supported (expected {VERSION})"
        )));
    }
    let kind = match r.take(1)?[0] {
        0 => FieldKind::Grid,
        1 => FieldKind::Free,
        k => return Err(Error::Format(format!("unknown field kind {k}"))),
    };
    let n = r.u32()? as usize;
    if n == 0 || n > 8 {
        return Err(Error::Format(format!("implausible dimension {n}")));
    }
    let sizes = (0..n).map(|_| r.u64().map(|m| m as usize)).collect::<Result<Vec<_>>>()?;
    let lengths = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let extra = r.f64()?;
    let count: usize = sizes.iter().product();
    if bytes.len() - r.at != 8 * count {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected {}",
            bytes.len() - r.at,
            8 * count
        )));
    }
    let vals = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let values = ArrayD::from_shape_vec(IxDyn(&sizes), vals).map_err(|e| Error::Format(e.to_string()))?;
    Ok(LoadedField {
        kind,
        lengths,
        extra,
        values,
    })
}

/// Writes the binary dump and `<path>.txt` describing it.
pub fn dump_field(f: FieldRef, path: &Path) -> Result<()> {
    let bytes = encode_field(f);
    fs::write(path, &bytes)?;
    let (kind, shape, lengths, extra) = match f {
        FieldRef::Grid(g) => ("grid", g.values().shape().to_vec(), g.grid().domain().lengths().to_vec(), ("s", g.grid().domain().s())),
        FieldRef::Free(v) => ("free", v.values().shape().to_vec(), vec![2.0 * v.half_width(); v.dim()], ("decay_hint", v.decay_hint())),
    };
    let fmt = |v: &[f64]| v.iter().map(|x| super::table::fmt_full(*x)).collect::<Vec<_>>().join(", ");
    let header = format!(
        "format = fracle field dump\nversion = {VERSION}\nkind = {kind}\nn = {}\nsizes = {}\nlengths = {}\n{} = {}\nlayout = row-major little-endian f64\nbytes = {}\n",
        shape.len(),
        shape.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
        fmt(&lengths),
        extra.0,
        super::table::fmt_full(extra.1),
        bytes.len()
    );
    fs::write(sidecar(path), header)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<LoadedField> {
    decode_field(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_mismatch_is_explicit() {
        let f = FreeField::from_fn(2, 1.0, 5, 1.0, |x| x[0] * x[0]).unwrap();
        let mut b = encode_field(FieldRef::Free(&f));
        b[8] = 9;
        let err = decode_field(&b).unwrap_err().to_string();
        assert!(err.contains("version 9"), "{err}");
        b[0] = b'X';
        assert!(decode_field(&b).is_err());
    }

    #[test]
    fn free_field_round_trip() {
        let f = FreeField::from_fn(3, 2.5, 7, 1.5, |x| 1.0 / (1.0 + x.iter().map(|v| v * v).sum::<f64>())).unwrap();
        let back = decode_field(&encode_field(FieldRef::Free(&f))).unwrap().into_free_field().unwrap();
        assert_eq!(back, f);
    }
}
