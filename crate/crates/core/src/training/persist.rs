use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{FusionModel, ModelConfig};
use super::vocab::Vocabulary;
use crate::datakit::LabelSpace;
use crate::error::{Error, Result};
use crate::textprep::Lexicons;

pub const MAGIC: &[u8; 8] = b"FUSELAB\0";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    labels: LabelSpace,
    vocab: Vocabulary,
    config_hash: String,
    num_blocks: usize,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the canonical JSON form of `config`.
pub fn config_hash(config: &ModelConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex(&Sha256::digest(&json))
}

/// Serializes a model: magic, version, JSON header, named `f64` LE parameter
/// blocks, then a SHA-256 of everything before it.
pub fn model_to_bytes(model: &FusionModel) -> Vec<u8> {
    let header = Header {
        config: model.config.clone(),
        labels: model.labels.clone(),
        vocab: model.vocab.clone(),
        config_hash: config_hash(&model.config),
        num_blocks: model.store.len(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for id in model.store.ids() {
        let name = model.store.name(id).as_bytes();
        let t = model.store.get(id);
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of model data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length overflows usize".into()))
    }
}

/// Inverse of [`model_to_bytes`]. Lexicons come from the environment.
pub fn model_from_bytes(bytes: &[u8]) -> Result<FusionModel> {
    if bytes.len() < MAGIC.len() + 4 + 8 + CHECKSUM_LEN {
        return Err(Error::Format("model file too short; checksum missing".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Format("checksum mismatch; the model file is corrupt or truncated".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("not a fuselab model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let header_len = r.len()?;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.config_hash != config_hash(&header.config) {
        return Err(Error::Format("config hash does not match the stored config".into()));
    }
    let lexicons = Arc::new(Lexicons::from_env()?);
    let mut model = FusionModel::new(
        header.config,
        header.labels,
        header.vocab,
        lexicons,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    if header.num_blocks != model.store.len() {
        return Err(Error::Format(format!(
            "file has {} parameter blocks, the architecture needs {}",
            header.num_blocks,
            model.store.len()
        )));
    }
    for _ in 0..header.num_blocks {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
            .to_string();
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.len()).collect::<Result<Vec<usize>>>()?;
        let id = model
            .store
            .find(&name)
            .ok_or_else(|| Error::Format(format!("unknown parameter block {name:?}")))?;
        if model.store.get(id).shape() != shape.as_slice() {
            return Err(Error::Format(format!(
                "parameter {name:?} has shape {shape:?}, expected {:?}",
                model.store.get(id).shape()
            )));
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("block too large".into()))?)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        model.store.set_value(id, &values)?;
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes after parameter blocks".into()));
    }
    Ok(model)
}

pub fn save_model(model: &FusionModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<FusionModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
