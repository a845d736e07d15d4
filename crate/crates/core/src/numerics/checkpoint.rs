//! Binary parameter container.
//!
//! Layout: the 8-byte magic `BIGCKPT\x01`, a little-endian `u64` header
//! length, a UTF-8 JSON header, then every array's `f64` values in
//! little-endian order. The header lists arrays in storage order with their
//! name, shape and element offset, plus free-form metadata.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BIGCKPT\x01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub arrays: Vec<NamedArray>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    meta: serde_json::Value,
    arrays: Vec<Entry>,
}

impl Checkpoint {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: &[f64]) -> Result<()> {
        let name = name.into();
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape("checkpoint array", n, data.len()));
        }
        if self.arrays.iter().any(|a| a.name == name) {
            return Err(Error::Schema(format!("duplicate checkpoint array `{name}`")));
        }
        self.arrays.push(NamedArray {
            name,
            shape: shape.to_vec(),
            data: data.to_vec(),
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Schema(format!("checkpoint has no array `{name}`")))
    }

    /// Array data, checking its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&[f64]> {
        let a = self.get(name)?;
        if a.shape != shape {
            return Err(Error::Schema(format!(
                "checkpoint array `{name}` has shape {:?}, model expects {:?}",
                a.shape, shape
            )));
        }
        Ok(&a.data)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut offset = 0;
        let arrays = self
            .arrays
            .iter()
            .map(|a| {
                let e = Entry {
                    name: a.name.clone(),
                    shape: a.shape.clone(),
                    offset,
                };
                offset += a.data.len();
                e
            })
            .collect();
        let header = serde_json::to_vec(&Header {
            format_version: FORMAT_VERSION,
            meta: self.meta.clone(),
            arrays,
        })?;
        out.write_all(MAGIC)?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        for a in &self.arrays {
            for v in &a.data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Schema("not a checkpoint file (bad magic)".into()));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let len = usize::try_from(u64::from_le_bytes(len))
            .map_err(|_| Error::Schema("checkpoint header too large".into()))?;
        let mut header = vec![0u8; len];
        input.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "checkpoint format version {} (expected {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        let values: Vec<f64> = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if rest.len() % 8 != 0 {
            return Err(Error::Schema("truncated checkpoint payload".into()));
        }
        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut expected_offset = 0;
        for e in header.arrays {
            let n: usize = e.shape.iter().product();
            if e.offset != expected_offset || e.offset + n > values.len() {
                return Err(Error::Schema(format!("checkpoint array `{}` out of bounds", e.name)));
            }
            arrays.push(NamedArray {
                data: values[e.offset..e.offset + n].to_vec(),
                name: e.name,
                shape: e.shape,
            });
            expected_offset += n;
        }
        if expected_offset != values.len() {
            return Err(Error::Schema("trailing data in checkpoint".into()));
        }
        Ok(Self {
            meta: header.meta,
            arrays,
        })
    }

    /// Writes to `path` through a temporary file and rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let f = std::fs::File::create(&tmp)?;
            self.write(std::io::BufWriter::new(f))?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing {
                path: path.to_path_buf(),
            },
            _ => Error::Io(e),
        })?;
        Self::read(std::io::BufReader::new(f))
    }
}
