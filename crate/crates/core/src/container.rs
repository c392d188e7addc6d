//! Binary model container: magic, format version, model kind, a JSON config
//! snapshot and named parameter blobs, each followed by its SHA-256.
//!
//! ```text
//! magic[8] version:u32 kind:u16 config_len:u32 config[..] n_blobs:u32
//!   { name_len:u16 name[..] data_len:u64 data[..] sha256[32] }*
//! ```
//! All integers little-endian.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{bytes_to_f64s, f64s_to_bytes, write_atomic};

pub const MAGIC: [u8; 8] = *b"RISKDET\0";
pub const FORMAT_VERSION: u32 = 1;
pub const MIN_SUPPORTED_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ModelKind {
    Tagger = 1,
    Scaler = 2,
    Doc2Vec = 3,
    Lda = 4,
    Shallow = 5,
    CAttention = 6,
    Manifest = 7,
}

impl ModelKind {
    fn from_u16(v: u16) -> Result<ModelKind> {
        Ok(match v {
            1 => ModelKind::Tagger,
            2 => ModelKind::Scaler,
            3 => ModelKind::Doc2Vec,
            4 => ModelKind::Lda,
            5 => ModelKind::Shallow,
            6 => ModelKind::CAttention,
            7 => ModelKind::Manifest,
            other => return Err(Error::Container(format!("unknown model kind {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub version: u32,
    pub kind: ModelKind,
    pub config: String,
    pub blobs: Vec<(String, Vec<u8>)>,
}

impl ModelContainer {
    pub fn new<C: Serialize>(kind: ModelKind, config: &C) -> Result<ModelContainer> {
        Ok(ModelContainer {
            version: FORMAT_VERSION,
            kind,
            config: serde_json::to_string(config)?,
            blobs: Vec::new(),
        })
    }

    pub fn config<C: DeserializeOwned>(&self) -> Result<C> {
        Ok(serde_json::from_str(&self.config)?)
    }

    pub fn push_bytes(&mut self, name: &str, data: Vec<u8>) {
        self.blobs.push((name.to_string(), data));
    }

    pub fn push_f64s(&mut self, name: &str, values: &[f64]) {
        self.push_bytes(name, f64s_to_bytes(values));
    }

    pub fn push_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.push_bytes(name, serde_json::to_vec(value)?);
        Ok(())
    }

    pub fn bytes(&self, name: &str) -> Result<&[u8]> {
        self.blobs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| Error::Container(format!("missing blob `{name}`")))
    }

    pub fn f64s(&self, name: &str) -> Result<Vec<f64>> {
        bytes_to_f64s(self.bytes(name)?)
            .ok_or_else(|| Error::Container(format!("blob `{name}` is not a whole number of f64 values")))
    }

    pub fn json<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        Ok(serde_json::from_slice(self.bytes(name)?)?)
    }

    pub fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Container(format!("expected a {kind:?} model, found {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.kind as u16).to_le_bytes());
        out.extend_from_slice(&(self.config.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&(self.blobs.len() as u32).to_le_bytes());
        for (name, data) in &self.blobs {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(data.len() as u64).to_le_bytes());
            out.extend_from_slice(data);
            out.extend_from_slice(&Sha256::digest(data));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelContainer> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Container("bad magic; not a model container".into()));
        }
        let version = u32::from_le_bytes(r.array()?);
        if !(MIN_SUPPORTED_VERSION..=FORMAT_VERSION).contains(&version) {
            return Err(Error::Container(format!("unsupported format version {version}")));
        }
        let kind = ModelKind::from_u16(u16::from_le_bytes(r.array()?))?;
        let config_len = u32::from_le_bytes(r.array()?) as usize;
        let config = String::from_utf8(r.take(config_len)?.to_vec())
            .map_err(|_| Error::Container("config is not UTF-8".into()))?;
        let n_blobs = u32::from_le_bytes(r.array()?);
        let mut blobs = Vec::new();
        for _ in 0..n_blobs {
            let name_len = u16::from_le_bytes(r.array()?) as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Container("blob name is not UTF-8".into()))?;
            let data_len = usize::try_from(u64::from_le_bytes(r.array()?))
                .map_err(|_| Error::Container("blob too large".into()))?;
            let data = r.take(data_len)?.to_vec();
            let digest = r.take(32)?;
            if Sha256::digest(&data).as_slice() != digest {
                return Err(Error::Checksum(name));
            }
            blobs.push((name, data));
        }
        if r.pos != bytes.len() {
            return Err(Error::Container("trailing bytes after last blob".into()));
        }
        Ok(ModelContainer {
            version,
            kind,
            config,
            blobs,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelContainer> {
        ModelContainer::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Container("truncated container".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }
}

/// Types that persist through a [`ModelContainer`].
pub trait Persist: Sized {
    fn to_container(&self) -> Result<ModelContainer>;
    fn from_container(c: &ModelContainer) -> Result<Self>;

    fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container()?.save(path)
    }

    fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&ModelContainer::load(path)?)
    }
}
