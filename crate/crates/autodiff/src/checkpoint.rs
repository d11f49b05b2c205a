//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   "MPECKPT\0"
//! version      u32       currently 1
//! meta_len     u32       byte length of the metadata string
//! metadata     meta_len  UTF-8, free-form (models store a JSON header)
//! count        u32       number of tensors
//! count x {
//!   name_len   u32
//!   name       name_len  UTF-8
//!   trainable  u8        0 or 1
//!   rank       u32
//!   dims       rank x u64
//!   values     prod(dims) x f64
//! }
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MPECKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, store: &ParamStore, metadata: &str) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    write_str(&mut w, metadata)?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (_, p) in store.iter() {
        write_str(&mut w, &p.name)?;
        w.write_all(&[p.trainable as u8])?;
        w.write_all(&(p.value.rank() as u32).to_le_bytes())?;
        for d in p.value.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint back into a fresh store (gradients unset) and its
/// metadata string.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(ParamStore, String)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let metadata = read_str(&mut r)?;
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name = read_str(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        store.add(name, Tensor::new(shape, data)?, flag[0] != 0)?;
    }
    Ok((store, metadata))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Checkpoint(e.to_string()))
}
