//! Versioned JSON checkpoints.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::decoder::DecoderParams;
use super::encoder::{Encoder, FeatureTableEncoder, ToyEncoder};
use super::scorer::{EncoderBackend, PairScorer};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "evalfilter-pair-scorer";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum EncoderRecord {
    Toy(ToyEncoder),
    Pretrained {
        name: String,
        dim: usize,
        max_len: usize,
        features: PathBuf,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointRecord {
    format: String,
    version: u32,
    d1: usize,
    d2: usize,
    rope: bool,
    seed: u64,
    epochs_trained: usize,
    encoder: EncoderRecord,
    decoder: DecoderParams,
}

/// Writes the model. A pretrained-adapter model records the path of its
/// feature export, which must be passed as `features`.
pub fn save_checkpoint(model: &PairScorer, path: &Path, features: Option<&Path>) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(model, features)?).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_bytes(model: &PairScorer, features: Option<&Path>) -> Result<Vec<u8>> {
    let encoder = match model.encoder() {
        EncoderBackend::Toy(e) => EncoderRecord::Toy(e.clone()),
        EncoderBackend::Pretrained(e) => EncoderRecord::Pretrained {
            name: e.name().to_string(),
            dim: e.dim(),
            max_len: e.max_len(),
            features: features
                .ok_or_else(|| Error::Config("pretrained checkpoints need the feature export path".into()))?
                .to_path_buf(),
        },
    };
    let record = CheckpointRecord {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        d1: model.decoder().d1(),
        d2: model.decoder().d2(),
        rope: model.decoder().rope,
        seed: model.seed(),
        epochs_trained: model.epochs_trained(),
        encoder,
        decoder: model.decoder().clone(),
    };
    serde_json::to_vec(&record).map_err(|e| Error::Validation(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<PairScorer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let record: CheckpointRecord = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })?;
    if record.format != CHECKPOINT_FORMAT {
        return Err(Error::Validation(format!(
            "{} is not a pair-scorer checkpoint (format `{}`)",
            path.display(),
            record.format
        )));
    }
    if record.version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            record.version
        )));
    }
    let encoder = match record.encoder {
        EncoderRecord::Toy(e) => EncoderBackend::Toy(e),
        EncoderRecord::Pretrained {
            name,
            max_len,
            features,
            ..
        } => EncoderBackend::Pretrained(FeatureTableEncoder::from_jsonl(&name, &features, max_len)?),
    };
    if record.decoder.d2() != record.d2 || record.decoder.rope != record.rope {
        return Err(Error::Validation("checkpoint header disagrees with decoder".into()));
    }
    let mut model = PairScorer::new(encoder, record.decoder, record.seed)?;
    model.epochs_trained = record.epochs_trained;
    Ok(model)
}
