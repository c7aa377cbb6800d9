//! Binary parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "RRLC"  u32 version  u8 precision-bits  u32 record-count
//! per record: u32 name-len, name (UTF-8), u32 rank, rank x u64 dims,
//!             product(dims) raw elements at the header precision
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RRLC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One named parameter array. Values are held as `f64`, which represents
/// every `f32` exactly, so round trips are bit-exact at either precision.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// 32 or 64.
    pub precision: u8,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.precision != 32 && self.precision != 64 {
            return Err(Error::Checkpoint(format!("unsupported precision {}", self.precision)));
        }
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(self.precision);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            let count: usize = p.shape.iter().product();
            if count != p.values.len() {
                return Err(Error::Checkpoint(format!("{}: shape {:?} holds {count} values, got {}", p.name, p.shape, p.values.len())));
            }
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
            for &d in &p.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &p.values {
                if self.precision == 32 {
                    (v as f32).write_le(&mut out);
                } else {
                    v.write_le(&mut out);
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("missing RRLC magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let precision = r.take(1)?[0];
        if precision != 32 && precision != 64 {
            return Err(Error::Checkpoint(format!("unsupported precision {precision}")));
        }
        let count = r.u32()? as usize;
        let mut params = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(16));
            for _ in 0..rank {
                let d = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
                shape.push(usize::try_from(d).map_err(|_| Error::Checkpoint(format!("{name}: dimension {d} too large")))?);
            }
            let elems = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflows")))?;
            let width = precision as usize / 8;
            let raw = r.take(elems.checked_mul(width).ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflows")))?)?;
            let values = raw
                .chunks_exact(width)
                .map(|c| if precision == 32 { f32::read_le(c) as f64 } else { f64::read_le(c) })
                .collect();
            params.push(ParamRecord { name, shape, values });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { precision, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Checkpoint(format!("truncated at byte {}", self.pos))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
