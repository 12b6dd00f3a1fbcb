//! Binary tensor container and small file helpers.
//!
//! Container layout (all integers little-endian):
//! magic "LTSR", u32 version, u32 block count, then per block:
//! u16 name length, name bytes, u8 dtype tag (0 = f64, 1 = raw bytes),
//! u32 rank, rank x u64 dims, row-major payload. The format is fixed so
//! outputs hash identically across platforms.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LTSR";
const VERSION: u32 = 1;
const DTYPE_F64: u8 = 0;
const DTYPE_BYTES: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum BlockData {
    F64(Vec<f64>),
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlock {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: BlockData,
}

/// An ordered collection of named tensor blocks.
#[derive(Debug, Default, Clone)]
pub struct TensorStore {
    blocks: Vec<TensorBlock>,
    index: HashMap<String, usize>,
}

impl TensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.blocks.iter().map(|b| b.name.as_str())
    }

    pub fn insert_f64(&mut self, name: &str, dims: Vec<u64>, data: Vec<f64>) -> Result<()> {
        let expected: u64 = dims.iter().product();
        if expected != data.len() as u64 {
            return Err(Error::Format(format!(
                "block '{name}': {} values for dims {dims:?}",
                data.len()
            )));
        }
        self.push(TensorBlock {
            name: name.to_string(),
            dims,
            data: BlockData::F64(data),
        })
    }

    pub fn insert_bytes(&mut self, name: &str, data: Vec<u8>) -> Result<()> {
        let dims = vec![data.len() as u64];
        self.push(TensorBlock {
            name: name.to_string(),
            dims,
            data: BlockData::Bytes(data),
        })
    }

    fn push(&mut self, block: TensorBlock) -> Result<()> {
        if self.index.contains_key(&block.name) {
            return Err(Error::Format(format!("duplicate block '{}'", block.name)));
        }
        if block.name.len() > u16::MAX as usize {
            return Err(Error::Format("block name too long".into()));
        }
        self.index.insert(block.name.clone(), self.blocks.len());
        self.blocks.push(block);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&TensorBlock> {
        self.index
            .get(name)
            .map(|&i| &self.blocks[i])
            .ok_or_else(|| Error::Format(format!("missing block '{name}'")))
    }

    pub fn get_f64(&self, name: &str) -> Result<(&[u64], &[f64])> {
        let block = self.get(name)?;
        match &block.data {
            BlockData::F64(v) => Ok((&block.dims, v)),
            BlockData::Bytes(_) => Err(Error::Format(format!("block '{name}' is not f64"))),
        }
    }

    pub fn get_bytes(&self, name: &str) -> Result<&[u8]> {
        let block = self.get(name)?;
        match &block.data {
            BlockData::Bytes(v) => Ok(v),
            BlockData::F64(_) => Err(Error::Format(format!("block '{name}' is not bytes"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for block in &self.blocks {
            out.extend_from_slice(&(block.name.len() as u16).to_le_bytes());
            out.extend_from_slice(block.name.as_bytes());
            match &block.data {
                BlockData::F64(values) => {
                    out.push(DTYPE_F64);
                    out.extend_from_slice(&(block.dims.len() as u32).to_le_bytes());
                    for d in &block.dims {
                        out.extend_from_slice(&d.to_le_bytes());
                    }
                    for v in values {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                BlockData::Bytes(bytes) => {
                    out.push(DTYPE_BYTES);
                    out.extend_from_slice(&(block.dims.len() as u32).to_le_bytes());
                    for d in &block.dims {
                        out.extend_from_slice(&d.to_le_bytes());
                    }
                    out.extend_from_slice(bytes);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        let magic = cursor.take(4)?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic; not a tensor container".into()));
        }
        let version = cursor.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = cursor.u32()? as usize;
        let mut store = TensorStore::new();
        for _ in 0..count {
            let name_len = cursor.u16()? as usize;
            let name = String::from_utf8(cursor.take(name_len)?.to_vec())
                .map_err(|_| Error::Format("block name is not UTF-8".into()))?;
            let dtype = cursor.u8()?;
            let rank = cursor.u32()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(cursor.u64()?);
            }
            let count: u64 = dims.iter().product();
            match dtype {
                DTYPE_F64 => {
                    let raw = cursor.take(count as usize * 8)?;
                    let values = raw
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    store.push(TensorBlock {
                        name,
                        dims,
                        data: BlockData::F64(values),
                    })?;
                }
                DTYPE_BYTES => {
                    let raw = cursor.take(count as usize)?.to_vec();
                    store.push(TensorBlock {
                        name,
                        dims,
                        data: BlockData::Bytes(raw),
                    })?;
                }
                other => return Err(Error::Format(format!("unknown dtype tag {other}"))),
            }
        }
        Ok(store)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("container truncated".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Write via a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(bytes)?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    std::fs::rename(&tmp.0, path)?;
    Ok(())
}

fn tempfile_in(dir: &Path, target: &Path) -> Result<(std::path::PathBuf, std::fs::File)> {
    let stem = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    for attempt in 0..1000 {
        let candidate = dir.join(format!(".{stem}.tmp{attempt}"));
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&candidate)
        {
            Ok(f) => return Ok((candidate, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::Io(std::io::Error::other("no free temp file name")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_garbage_and_duplicates() {
        assert!(TensorStore::from_bytes(b"NOPE").is_err());
        let mut store = TensorStore::new();
        store.insert_f64("a", vec![2], vec![1.0, 2.0]).unwrap();
        assert!(store.insert_f64("a", vec![1], vec![3.0]).is_err());
        assert!(store.insert_f64("b", vec![3], vec![0.0]).is_err());
        assert!(store.get_f64("missing").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_preserves_blocks(
            values in proptest::collection::vec(-1e12f64..1e12, 0..40),
            extra in proptest::collection::vec(any::<u8>(), 0..64),
        ) {
            let mut store = TensorStore::new();
            store.insert_f64("tensor", vec![values.len() as u64], values.clone()).unwrap();
            store.insert_bytes("meta", extra.clone()).unwrap();
            let back = TensorStore::from_bytes(&store.to_bytes()).unwrap();
            let (dims, data) = back.get_f64("tensor").unwrap();
            prop_assert_eq!(dims, &[values.len() as u64]);
            prop_assert_eq!(data, values.as_slice());
            prop_assert_eq!(back.get_bytes("meta").unwrap(), extra.as_slice());
        }
    }
}
