//! Binary parameter checkpoints.
//!
//! Layout (little-endian): magic `RPNN1`, `u32` version, `u32` tensor count,
//! then per tensor `u32` name length, name bytes, `u8` dtype (0 = f64,
//! 1 = UTF-8 text), `u32` rank, `u64` extents, raw data; finally a CRC32 of
//! everything before it.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::params::ParamSet;
use super::NnError;

pub const MAGIC: &[u8; 5] = b"RPNN1";
pub const VERSION: u32 = 1;
const CONFIG_NAME: &str = "__config__";
const DTYPE_F64: u8 = 0;
const DTYPE_TEXT: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
    pub config: String,
}

impl Checkpoint {
    pub fn from_params(params: &ParamSet, config: &str) -> Self {
        let tensors = params
            .ids()
            .map(|id| NamedTensor {
                name: params.name(id).to_string(),
                shape: params.shape(id).to_vec(),
                data: params.block(id).to_vec(),
            })
            .collect();
        Self { tensors, config: config.to_string() }
    }

    /// Copies stored values into `params`; names and shapes must match exactly.
    pub fn apply_to(&self, params: &mut ParamSet) -> Result<(), NnError> {
        if self.tensors.len() != params.n_blocks() {
            return Err(NnError::Checkpoint(format!(
                "checkpoint has {} tensors, model has {}",
                self.tensors.len(),
                params.n_blocks()
            )));
        }
        for t in &self.tensors {
            let id = params.find(&t.name).ok_or_else(|| NnError::Checkpoint(format!("unknown tensor {}", t.name)))?;
            if params.shape(id) != t.shape.as_slice() {
                return Err(NnError::Checkpoint(format!("shape mismatch for {}", t.name)));
            }
            params.set_block(id, &t.data)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.write_u32::<LittleEndian>(VERSION).unwrap();
        buf.write_u32::<LittleEndian>(self.tensors.len() as u32 + 1).unwrap();
        for t in &self.tensors {
            write_name(&mut buf, &t.name);
            buf.push(DTYPE_F64);
            buf.write_u32::<LittleEndian>(t.shape.len() as u32).unwrap();
            for &d in &t.shape {
                buf.write_u64::<LittleEndian>(d as u64).unwrap();
            }
            for &v in &t.data {
                buf.write_f64::<LittleEndian>(v).unwrap();
            }
        }
        write_name(&mut buf, CONFIG_NAME);
        buf.push(DTYPE_TEXT);
        buf.write_u32::<LittleEndian>(1).unwrap();
        buf.write_u64::<LittleEndian>(self.config.len() as u64).unwrap();
        buf.extend_from_slice(self.config.as_bytes());
        let crc = crc32fast::hash(&buf);
        buf.write_u32::<LittleEndian>(crc).unwrap();
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let bad = |m: &str| NnError::Checkpoint(m.to_string());
        if bytes.len() < MAGIC.len() + 12 {
            return Err(bad("truncated"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = (&tail[..]).read_u32::<LittleEndian>()?;
        if crc32fast::hash(body) != stored {
            return Err(bad("checksum mismatch"));
        }
        let mut r = body;
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let count = r.read_u32::<LittleEndian>()?;
        let mut tensors = Vec::new();
        let mut config = None;
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
            let dtype = r.read_u8()?;
            let rank = r.read_u32::<LittleEndian>()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u64::<LittleEndian>()? as usize);
            }
            let n: usize = shape.iter().product();
            match dtype {
                DTYPE_F64 => {
                    if n * 8 > r.len() {
                        return Err(bad("truncated tensor data"));
                    }
                    let mut data = vec![0.0; n];
                    r.read_f64_into::<LittleEndian>(&mut data)?;
                    tensors.push(NamedTensor { name, shape, data });
                }
                DTYPE_TEXT => {
                    if n > r.len() {
                        return Err(bad("truncated text"));
                    }
                    let mut text = vec![0u8; n];
                    r.read_exact(&mut text)?;
                    config = Some(String::from_utf8(text).map_err(|_| bad("config is not UTF-8"))?);
                }
                d => return Err(NnError::Checkpoint(format!("unknown dtype {d}"))),
            }
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self { tensors, config: config.ok_or_else(|| bad("missing config"))? })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn write_name(buf: &mut Vec<u8>, name: &str) {
    buf.write_u32::<LittleEndian>(name.len() as u32).unwrap();
    buf.extend_from_slice(name.as_bytes());
}
