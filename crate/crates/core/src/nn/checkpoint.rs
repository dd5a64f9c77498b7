//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic            8 bytes  "COEXCKPT"
//! version          u32      1
//! config hash      32 bytes
//! metadata count   u32
//!   key            u32 length + UTF-8 bytes
//!   value          u32 length + UTF-8 bytes
//! block count      u32
//!   name           u32 length + UTF-8 bytes
//!   ndims          u32
//!   dims           ndims x u64
//!   values         prod(dims) x f64 (IEEE-754 bits)
//! ```
//!
//! Values are stored as raw bits, so a write/read cycle is bit-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::TensorBuffer;

pub const MAGIC: &[u8; 8] = b"COEXCKPT";
pub const FORMAT_VERSION: u32 = 1;

const MAX_STRING: usize = 1 << 20;
const MAX_VALUES: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub metadata: BTreeMap<String, String>,
    blocks: Vec<(String, TensorBuffer<f64>)>,
}

impl Checkpoint {
    pub fn new(config_hash: [u8; 32]) -> Self {
        Self {
            config_hash,
            metadata: BTreeMap::new(),
            blocks: Vec::new(),
        }
    }

    pub fn blocks(&self) -> &[(String, TensorBuffer<f64>)] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&TensorBuffer<f64>> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn push_block(&mut self, name: impl Into<String>, tensor: TensorBuffer<f64>) -> Result<()> {
        let name = name.into();
        if self.block(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate block {name}")));
        }
        self.blocks.push((name, tensor));
        Ok(())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.config_hash)?;
        write_len(w, self.metadata.len())?;
        for (k, v) in &self.metadata {
            write_str(w, k)?;
            write_str(w, v)?;
        }
        write_len(w, self.blocks.len())?;
        for (name, t) in &self.blocks {
            write_str(w, name)?;
            write_len(w, t.shape().len())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in t.values() {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let mut config_hash = [0u8; 32];
        read_exact(r, &mut config_hash)?;
        let mut ck = Checkpoint::new(config_hash);
        for _ in 0..read_u32(r)? {
            let k = read_str(r)?;
            let v = read_str(r)?;
            ck.metadata.insert(k, v);
        }
        for _ in 0..read_u32(r)? {
            let name = read_str(r)?;
            let ndims = read_u32(r)? as usize;
            if ndims > 8 {
                return Err(Error::Checkpoint(format!("block {name} has {ndims} dimensions")));
            }
            let mut shape = Vec::with_capacity(ndims);
            let mut count: u64 = 1;
            for _ in 0..ndims {
                let d = read_u64(r)?;
                count = count.saturating_mul(d);
                shape.push(d as usize);
            }
            if count > MAX_VALUES {
                return Err(Error::Checkpoint(format!("block {name} is implausibly large")));
            }
            let mut values = Vec::with_capacity(count as usize);
            for _ in 0..count {
                values.push(f64::from_bits(read_u64(r)?));
            }
            let t = TensorBuffer::new(shape, values)
                .map_err(|e| Error::Checkpoint(format!("block {name}: {e}")))?;
            ck.push_block(name, t)?;
        }
        Ok(ck)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Writes to a sibling temp file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let mut slice = bytes.as_slice();
        let ck = Self::read_from(&mut slice)?;
        if !slice.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", slice.len())));
        }
        Ok(ck)
    }
}

fn write_len<W: Write>(w: &mut W, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| Error::Checkpoint("length exceeds u32".into()))?;
    w.write_all(&n.to_le_bytes())?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_len(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Checkpoint("truncated file".into()),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = read_u32(r)? as usize;
    if n > MAX_STRING {
        return Err(Error::Checkpoint(format!("string of {n} bytes")));
    }
    let mut b = vec![0u8; n];
    read_exact(r, &mut b)?;
    String::from_utf8(b).map_err(|_| Error::Checkpoint("string is not UTF-8".into()))
}
