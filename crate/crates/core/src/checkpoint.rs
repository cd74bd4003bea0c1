//! Single-file model container.
//!
//! Layout: `b"FNDF"`, a `u32` LE format version, a `u64` LE header length,
//! the UTF-8 JSON header, then every array as raw LE `f32` values at the
//! offsets listed in the header's array directory.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::diffusion::{DiffusionModel, NoiseSchedule, ScheduleParams, TrainingRecord};
use crate::error::{Error, Result};
use crate::nn::{Network, NetworkShape};
use crate::schema::TableSchema;
use crate::transforms::{ColumnScaler, EmbeddingMatrix, NumericScaler, ScalerMethod};

pub const MAGIC: &[u8; 4] = b"FNDF";
pub const FORMAT_VERSION: u32 = 1;

const EMBEDDING_ARRAY: &str = "embeddings";
const PREAMBLE: usize = 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the payload.
    pub offset: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScalerHeader {
    method: ScalerMethod,
    columns: Vec<ColumnScaler>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Header {
    pub schema: TableSchema,
    pub schema_hash: String,
    scaler: ScalerHeader,
    pub embedding_dim: usize,
    pub network: NetworkShape,
    pub schedule: ScheduleParams,
    pub label_prior: Vec<f64>,
    pub provenance: Option<TrainingRecord>,
    pub arrays: Vec<ArrayEntry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

/// Serialize a model to checkpoint bytes.
pub fn to_bytes(model: &DiffusionModel) -> Vec<u8> {
    let mut arrays = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    let mut push = |name: &str, shape: Vec<usize>, data: &[f32]| {
        arrays.push(ArrayEntry {
            name: name.to_string(),
            shape,
            offset: payload.len() as u64,
        });
        for v in data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    };
    let emb = model.embeddings.weights();
    push(
        EMBEDDING_ARRAY,
        emb.shape().to_vec(),
        emb.as_slice().expect("embedding table is contiguous"),
    );
    for (name, shape, data) in model.network.tensors() {
        push(&name, shape, data);
    }
    let header = Header {
        schema: model.schema.clone(),
        schema_hash: model.schema.hash(),
        scaler: ScalerHeader {
            method: model.scaler.method(),
            columns: model.scaler.columns().to_vec(),
        },
        embedding_dim: model.embeddings.dim(),
        network: model.network.shape(),
        schedule: model.schedule.params(),
        label_prior: model.label_prior.clone(),
        provenance: model.training.clone(),
        arrays,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out
}

/// Parse the preamble and JSON header; returns the header and payload.
pub fn read_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < PREAMBLE {
        return Err(corrupt(format!("file is {} bytes, shorter than the preamble", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let rest = &bytes[PREAMBLE..];
    if header_len > rest.len() as u64 {
        return Err(corrupt(format!(
            "header length {header_len} exceeds remaining {} bytes",
            rest.len()
        )));
    }
    let (json, payload) = rest.split_at(header_len as usize);
    let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(format!("header: {e}")))?;
    Ok((header, payload))
}

/// Rebuild a model from checkpoint bytes, checking every recorded invariant.
pub fn from_bytes(bytes: &[u8]) -> Result<DiffusionModel> {
    let (header, payload) = read_header(bytes)?;
    if header.schema.hash() != header.schema_hash {
        return Err(corrupt("schema hash does not match embedded schema"));
    }
    let dummy = Network::<f32>::zeros(header.network).map_err(|e| corrupt(format!("network shape: {e}")))?;
    let mut expected = vec![(
        EMBEDDING_ARRAY.to_string(),
        vec![
            header
                .schema
                .columns()
                .iter()
                .filter_map(|c| c.vocabulary().map(|v| v.len()))
                .sum(),
            header.embedding_dim,
        ],
    )];
    expected.extend(dummy.tensor_specs());
    if header.arrays.len() != expected.len() {
        return Err(corrupt(format!(
            "directory lists {} arrays, expected {}",
            header.arrays.len(),
            expected.len()
        )));
    }
    let mut offset = 0u64;
    let mut arrays = Vec::with_capacity(expected.len());
    for (entry, (name, shape)) in header.arrays.iter().zip(&expected) {
        if &entry.name != name || &entry.shape != shape {
            return Err(corrupt(format!(
                "array `{}` {:?} where `{name}` {shape:?} was expected",
                entry.name, entry.shape
            )));
        }
        if entry.offset != offset {
            return Err(corrupt(format!("array `{name}` at offset {} instead of {offset}", entry.offset)));
        }
        let len = shape.iter().product::<usize>() * 4;
        let end = offset as usize + len;
        if end > payload.len() {
            return Err(corrupt(format!("array `{name}` runs past the end of the file")));
        }
        let data: Vec<f32> = payload[offset as usize..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        arrays.push(data);
        offset = end as u64;
    }
    if offset as usize != payload.len() {
        return Err(corrupt(format!(
            "{} trailing bytes after the last array",
            payload.len() - offset as usize
        )));
    }

    let mut arrays = arrays.into_iter();
    let emb = arrays.next().expect("embedding array present");
    let emb = Array2::from_shape_vec((expected[0].1[0], expected[0].1[1]), emb).expect("shape checked");
    let embeddings = EmbeddingMatrix::from_weights(&header.schema, emb).map_err(|e| corrupt(e.to_string()))?;
    let network = Network::from_tensors(header.network, arrays.collect()).map_err(|e| corrupt(e.to_string()))?;
    let scaler =
        NumericScaler::from_parts(header.scaler.method, header.scaler.columns).map_err(|e| corrupt(e.to_string()))?;
    if scaler.len() != header.schema.numeric_indices().len() {
        return Err(corrupt("scaler column count does not match schema"));
    }
    let schedule = NoiseSchedule::from_params(header.schedule).map_err(|e| corrupt(e.to_string()))?;
    let k = header.schema.num_classes();
    let m = crate::transforms::encoded_width(&header.schema, header.embedding_dim);
    if header.network.num_classes != k || header.network.input_width != m {
        return Err(corrupt("network shape does not match schema"));
    }
    if header.label_prior.len() != k || header.label_prior.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(corrupt("label prior does not match schema"));
    }
    Ok(DiffusionModel {
        schema: header.schema,
        scaler,
        embeddings,
        network,
        schedule,
        label_prior: header.label_prior,
        training: header.provenance,
    })
}

pub fn save(model: &DiffusionModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<DiffusionModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
