//! Model files: an architecture descriptor header followed by the canonical
//! parameter bytes, integrity-checked with CRC32.
//!
//! Layout (little-endian): magic "AESM", version u16, kind u8, dataset tag
//! u16, z_dims u32, aux u32 (penultimate width for classifiers, 0 otherwise),
//! param byte length u64, param bytes, crc32 over everything before it.

use std::fs;
use std::path::Path;

use crate::data::DatasetName;
use crate::models::{AutoencoderSpec, Classifier, ModelError, ModelId};
use crate::nn::{deserialize_params, serialize_params, ParamSet};

const MODEL_MAGIC: [u8; 4] = *b"AESM";
const MODEL_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Encoder,
    Decoder,
    Classifier,
}

impl ModelKind {
    fn tag(self) -> u8 {
        match self {
            ModelKind::Encoder => 0,
            ModelKind::Decoder => 1,
            ModelKind::Classifier => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ModelKind::Encoder),
            1 => Some(ModelKind::Decoder),
            2 => Some(ModelKind::Classifier),
            _ => None,
        }
    }
}

/// Parsed model file: enough to rebuild the network and its parameters.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub dataset: DatasetName,
    pub z_dims: usize,
    pub aux: u32,
    pub params: ParamSet<f32>,
    /// CRC32 of the stored bytes; stable across save/load cycles.
    pub checksum: u32,
}

fn encode_model(kind: ModelKind, id: ModelId, aux: u32, params: &ParamSet<f32>) -> Vec<u8> {
    let param_bytes = serialize_params(params);
    let mut buf = Vec::with_capacity(param_bytes.len() + 32);
    buf.extend_from_slice(&MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.push(kind.tag());
    buf.extend_from_slice(&id.dataset_tag().to_le_bytes());
    buf.extend_from_slice(&(id.z_dims as u32).to_le_bytes());
    buf.extend_from_slice(&aux.to_le_bytes());
    buf.extend_from_slice(&(param_bytes.len() as u64).to_le_bytes());
    buf.extend_from_slice(&param_bytes);
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Writes a model file; returns its CRC32 checksum.
pub fn save_model_file(
    path: &Path,
    kind: ModelKind,
    id: ModelId,
    aux: u32,
    params: &ParamSet<f32>,
) -> Result<u32, ModelError> {
    let buf = encode_model(kind, id, aux, params);
    let crc = crc32fast::hash(&buf[..buf.len() - 4]);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    fs::write(path, &buf).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(crc)
}

/// Reads and validates a model file, reconstructing the parameter layout
/// from the architecture named in the header.
pub fn load_model_file(path: &Path) -> Result<ModelFile, ModelError> {
    let buf = fs::read(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    if buf.len() < 25 + 4 {
        return Err(ModelError::BadFile(format!("{}: too short", path.display())));
    }
    let (body, crc_bytes) = buf.split_at(buf.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let crc = crc32fast::hash(body);
    if crc != stored_crc {
        return Err(ModelError::BadFile(format!(
            "{}: checksum mismatch (stored {stored_crc:#010x}, computed {crc:#010x})",
            path.display()
        )));
    }
    if body[0..4] != MODEL_MAGIC {
        return Err(ModelError::BadFile(format!("{}: bad magic", path.display())));
    }
    let version = u16::from_le_bytes(body[4..6].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(ModelError::BadFile(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let kind = ModelKind::from_tag(body[6])
        .ok_or_else(|| ModelError::BadFile(format!("{}: unknown kind {}", path.display(), body[6])))?;
    let dataset_tag = u16::from_le_bytes(body[7..9].try_into().unwrap());
    let z_dims = u32::from_le_bytes(body[9..13].try_into().unwrap()) as usize;
    let aux = u32::from_le_bytes(body[13..17].try_into().unwrap());
    let plen = u64::from_le_bytes(body[17..25].try_into().unwrap()) as usize;
    if body.len() != 25 + plen {
        return Err(ModelError::BadFile(format!(
            "{}: parameter length field disagrees with file size",
            path.display()
        )));
    }
    let id = ModelId::from_tag(dataset_tag, z_dims).ok_or_else(|| {
        ModelError::BadFile(format!("{}: unknown dataset tag {dataset_tag}", path.display()))
    })?;

    let template = match kind {
        ModelKind::Encoder => AutoencoderSpec::build(id.dataset, id.z_dims)?.encoder.param_template(),
        ModelKind::Decoder => AutoencoderSpec::build(id.dataset, id.z_dims)?.decoder.param_template(),
        ModelKind::Classifier => Classifier::build(id.dataset, 0).network.param_template(),
    };
    let params = deserialize_params(&body[25..], &template)
        .map_err(|e| ModelError::BadFile(format!("{}: {e}", path.display())))?;
    Ok(ModelFile {
        kind,
        dataset: id.dataset,
        z_dims,
        aux,
        params,
        checksum: crc,
    })
}
