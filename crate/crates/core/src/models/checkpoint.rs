//! Binary model checkpoints.
//!
//! ```text
//! "AFM1" | u32 LE header length | JSON header | f64 LE payload
//! ```
//!
//! The payload holds every parameter in canonical order (the order of
//! [`Parameters::params`], listed by name and shape in the header),
//! followed by the normalization `min` and `max` vectors of rgb, flow and
//! audio.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, FusionModel, ModalitySet, SequenceLayout};
use crate::dataio::{EmotionDimension, MinMax, Modality, NormalizationStats};
use crate::error::{Error, FormatError, Result};
use crate::nn::{Parameters, Vector};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AFM1";
const FORMAT_VERSION: u32 = 1;

/// Everything stored beside the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub dimension: EmotionDimension,
    pub seed: u64,
    /// Training configuration, kept verbatim for provenance.
    pub train_config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: FusionModel,
    pub normalization: NormalizationStats,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: u32,
    architecture: Architecture,
    dimension: EmotionDimension,
    modalities: ModalitySet,
    sequence: SequenceLayout,
    seed: u64,
    train_config: serde_json::Value,
    parameters: Vec<TensorEntry>,
    normalization_fitted_on: Vec<String>,
}

impl Checkpoint {
    /// Rejects a checkpoint trained for another architecture or dimension.
    pub fn expect(&self, architecture: Architecture, dimension: EmotionDimension) -> Result<()> {
        if self.model.architecture() != architecture {
            return Err(Error::invalid(format!(
                "checkpoint holds a {} model, expected {architecture}",
                self.model.architecture()
            )));
        }
        if self.meta.dimension != dimension {
            return Err(Error::invalid(format!(
                "checkpoint was trained for {}, expected {dimension}",
                self.meta.dimension
            )));
        }
        Ok(())
    }
}

fn bad(msg: impl Into<String>) -> Error {
    FormatError::Checkpoint(msg.into()).into()
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let params = ckpt.model.params();
    let header = Header {
        format: FORMAT_VERSION,
        architecture: ckpt.model.architecture(),
        dimension: ckpt.meta.dimension,
        modalities: ckpt.model.modalities(),
        sequence: ckpt.model.sequence(),
        seed: ckpt.meta.seed,
        train_config: ckpt.meta.train_config.clone(),
        parameters: params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                rows: p.rows,
                cols: p.cols,
            })
            .collect(),
        normalization_fitted_on: ckpt.normalization.fitted_on.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    let values = params.iter().map(|p| p.values.len()).sum::<usize>()
        + Modality::ALL.iter().map(|m| 2 * m.dim()).sum::<usize>();
    let mut out = Vec::with_capacity(8 + json.len() + 8 * values);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let mut push = |vals: &[f64]| {
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    for p in &params {
        push(p.values);
    }
    for m in Modality::ALL {
        let mm = ckpt.normalization.modality(m);
        if mm.dim() != m.dim() {
            return Err(Error::shape("normalization stats", m.dim(), mm.dim()));
        }
        push(&mm.min);
        push(&mm.max);
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 8 {
        return Err(FormatError::TruncatedHeader(bytes.len()).into());
    }
    if bytes[..4] != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: [bytes[0], bytes[1], bytes[2], bytes[3]],
        }
        .into());
    }
    let json_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let json = bytes
        .get(8..8 + json_len)
        .ok_or_else(|| bad(format!("header of {json_len} bytes runs past end of file")))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(format!("header: {e}")))?;
    if header.format != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {}", header.format)));
    }
    header.sequence.validate()?;
    let mut model = FusionModel::zeros(header.architecture, &header.modalities, header.sequence);

    let expected: Vec<(String, usize, usize)> = model.params().iter().map(|p| (p.name.clone(), p.rows, p.cols)).collect();
    let declared: Vec<(String, usize, usize)> =
        header.parameters.iter().map(|t| (t.name.clone(), t.rows, t.cols)).collect();
    if expected != declared {
        return Err(bad("parameter list does not match the declared architecture"));
    }

    let payload = &bytes[8 + json_len..];
    let needed = model.param_count() + Modality::ALL.iter().map(|m| 2 * m.dim()).sum::<usize>();
    if payload.len() != 8 * needed {
        return Err(FormatError::PayloadLength {
            expected: 8 * needed,
            actual: payload.len(),
        }
        .into());
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for p in model.params_mut() {
        for v in p.values.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    let mut take = |n: usize| -> Vector { values.by_ref().take(n).collect::<Vec<_>>().into() };
    let mut stats = Vec::with_capacity(3);
    for m in Modality::ALL {
        let min = take(m.dim());
        let max = take(m.dim());
        stats.push(MinMax { min, max });
    }
    let audio = stats.pop().expect("3 modalities");
    let flow = stats.pop().expect("3 modalities");
    let rgb = stats.pop().expect("3 modalities");
    if !model.all_finite() {
        return Err(Error::NonFinite("checkpoint parameters"));
    }
    Ok(Checkpoint {
        model,
        normalization: NormalizationStats {
            rgb,
            flow,
            audio,
            fitted_on: header.normalization_fitted_on,
        },
        meta: CheckpointMeta {
            dimension: header.dimension,
            seed: header.seed,
            train_config: header.train_config,
        },
    })
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = encode_checkpoint(ckpt)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
