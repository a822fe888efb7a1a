//! JSON checkpoint container for a [`TrainedModel`].
//!
//! Layout (top-level keys):
//!
//! | key | content |
//! |---|---|
//! | `format`, `version` | `"elm-misinfo-checkpoint"`, `1` |
//! | `config_hash` | SHA-256 of the compact JSON of `config` |
//! | `config` | the full [`TrainConfig`] |
//! | `feature_dim`, `vocab_size` | model input sizes |
//! | `tensors` | `[{name, shape, data}]` in [`ModelParams::tensor_names`] order |
//! | `preprocessor` | vocabulary tokens (id order), scaler min/max, bigram list |
//! | `lexicons` | sentiment and urgency entries, sorted by word |
//! | `history`, `best_epoch`, `fitted_on` | training record |
//!
//! Floats are written in shortest round-trip form, so save → load is
//! bit-exact.

use std::fs;
use std::path::Path;

use rand::rngs::mock::StepRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::json_hash;
use crate::features::FeatureExtractor;
use crate::model::ModelParams;
use crate::nn::Params;
use crate::text::Lexicon;
use crate::train::{EpochRecord, Preprocessor, TrainConfig, TrainedModel};

pub const FORMAT: &str = "elm-misinfo-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format {format:?} version {version}")]
    Unsupported { format: String, version: u32 },
    #[error("config hash mismatch: stored {stored}, computed {computed}")]
    HashMismatch { stored: String, computed: String },
    #[error("tensor {name}: {reason}")]
    Tensor { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LexiconRecord {
    name: String,
    default_score: f64,
    entries: Vec<(String, f64)>,
}

impl From<&Lexicon> for LexiconRecord {
    fn from(l: &Lexicon) -> Self {
        LexiconRecord {
            name: l.name.clone(),
            default_score: l.default_score,
            entries: l
                .sorted_entries()
                .into_iter()
                .map(|(w, s)| (w.to_string(), s))
                .collect(),
        }
    }
}

impl From<LexiconRecord> for Lexicon {
    fn from(r: LexiconRecord) -> Self {
        Lexicon::from_entries(r.name, r.default_score, r.entries)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Lexicons {
    sentiment: LexiconRecord,
    urgency: LexiconRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    config_hash: String,
    config: TrainConfig,
    feature_dim: usize,
    vocab_size: usize,
    tensors: Vec<TensorRecord>,
    preprocessor: Preprocessor,
    lexicons: Lexicons,
    history: Vec<EpochRecord>,
    best_epoch: usize,
    fitted_on: Vec<String>,
}

pub fn config_hash(config: &TrainConfig) -> String {
    json_hash(config)
}

pub fn to_json(model: &TrainedModel) -> Result<String, CheckpointError> {
    let tensors = model
        .params
        .tensor_names()
        .into_iter()
        .zip(model.params.tensors())
        .map(|(name, t)| TensorRecord {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        })
        .collect();
    let container = Container {
        format: FORMAT.to_string(),
        version: VERSION,
        config_hash: config_hash(&model.config),
        config: model.config.clone(),
        feature_dim: model.params.feature_dim,
        vocab_size: model.preprocessor.vocab.len(),
        tensors,
        preprocessor: model.preprocessor.clone(),
        lexicons: Lexicons {
            sentiment: (&model.extractor.sentiment).into(),
            urgency: (&model.extractor.urgency).into(),
        },
        history: model.history.clone(),
        best_epoch: model.best_epoch,
        fitted_on: model.fitted_on.clone(),
    };
    Ok(serde_json::to_string(&container)?)
}

pub fn from_json(json: &str) -> Result<TrainedModel, CheckpointError> {
    let c: Container = serde_json::from_str(json)?;
    if c.format != FORMAT || c.version != VERSION {
        return Err(CheckpointError::Unsupported {
            format: c.format,
            version: c.version,
        });
    }
    let computed = config_hash(&c.config);
    if computed != c.config_hash {
        return Err(CheckpointError::HashMismatch {
            stored: c.config_hash,
            computed,
        });
    }

    // build a correctly shaped skeleton, then overwrite every tensor
    let mut params = ModelParams::new(
        c.config.variant,
        &c.config.architecture,
        c.vocab_size,
        c.feature_dim,
        &mut StepRng::new(0, 0),
    );
    let names = params.tensor_names();
    if names.len() != c.tensors.len() {
        return Err(CheckpointError::Tensor {
            name: "*".into(),
            reason: format!(
                "expected {} tensors, found {}",
                names.len(),
                c.tensors.len()
            ),
        });
    }
    for ((name, slot), record) in names.into_iter().zip(params.tensors_mut()).zip(c.tensors) {
        if record.name != name {
            return Err(CheckpointError::Tensor {
                name: record.name,
                reason: format!("expected {name} at this position"),
            });
        }
        if record.shape != slot.shape() || record.data.len() != slot.len() {
            return Err(CheckpointError::Tensor {
                name: record.name,
                reason: format!("shape {:?} does not match {:?}", record.shape, slot.shape()),
            });
        }
        slot.data_mut().copy_from_slice(&record.data);
    }

    Ok(TrainedModel {
        params,
        preprocessor: c.preprocessor,
        extractor: FeatureExtractor::new(c.lexicons.sentiment.into(), c.lexicons.urgency.into()),
        config: c.config,
        history: c.history,
        best_epoch: c.best_epoch,
        fitted_on: c.fitted_on,
    })
}

pub fn save(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel, CheckpointError> {
    from_json(&fs::read_to_string(path)?)
}
