//! Mini-batch training with binary cross-entropy, Adam and early stopping.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Label};
use crate::digest::id_set_hash;
use crate::features::{BigramVocabulary, FeatureError, FeatureExtractor, FeatureScaler, ELM_DIM};
use crate::model::{Architecture, ModelParams, Sample, Variant};
use crate::nn::{Dropout, Mode, NnError, Params, OOV_INDEX, PAD_INDEX};
use crate::optim::{AdamConfig, AdamState};
use crate::text::tokenize;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss or gradient in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Extra features appended for the combined variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtendedFeatures {
    /// Number of top training-fold bigrams whose counts are appended.
    pub bigrams: usize,
    pub subjectivity: bool,
}

impl Default for ExtendedFeatures {
    fn default() -> Self {
        ExtendedFeatures {
            bigrams: BigramVocabulary::DEFAULT_SIZE,
            subjectivity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// `None` disables early stopping; the final parameters are kept.
    pub early_stop_patience: Option<usize>,
    pub val_fraction: f64,
    pub seed: u64,
    pub max_seq_len: usize,
    pub dropout_rate: f64,
    /// Minimum training-fold frequency for a token to get its own id.
    pub min_token_freq: usize,
    pub architecture: Architecture,
    pub extended: ExtendedFeatures,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Base,
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            early_stop_patience: Some(2),
            val_fraction: 0.1,
            seed: 42,
            max_seq_len: 100,
            dropout_rate: 0.5,
            min_token_freq: 2,
            architecture: Architecture::default(),
            extended: ExtendedFeatures::default(),
        }
    }
}

impl TrainConfig {
    pub fn for_variant(variant: Variant) -> Self {
        TrainConfig {
            variant,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return bad("val_fraction must lie in (0, 0.5)");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.max_seq_len == 0 {
            return bad("max_seq_len must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    /// Width of the (unscaled and scaled) feature row for this variant.
    pub fn feature_dim(&self, bigrams: usize) -> usize {
        match self.variant {
            Variant::Base => 0,
            Variant::FeaturesOnly | Variant::Enhanced => ELM_DIM,
            Variant::Combined => ELM_DIM + bigrams + usize::from(self.extended.subjectivity),
        }
    }
}

/// Binary cross-entropy with the prediction clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(pred: f64, label: f64) -> f64 {
    let p = pred.clamp(1e-7, 1.0 - 1e-7);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Token → id mapping. Id 0 is padding, 1 is out-of-vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub const PAD: &'static str = "<pad>";
    pub const OOV: &'static str = "<oov>";

    /// Tokens of the documents' cleaned text with frequency at least
    /// `min_freq`, ordered by descending frequency then alphabetically.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>, min_freq: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            for tok in tokenize(doc.clean_text()).iter() {
                *counts.entry(tok.to_string()).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_freq.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = [Self::PAD.to_string(), Self::OOV.to_string()]
            .into_iter()
            .chain(kept.into_iter().map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV_INDEX)
    }

    /// Ids of `text`, truncated to `max_len` and right-padded to
    /// `max(max_len, min_len)`.
    pub fn encode(&self, text: &str, max_len: usize, min_len: usize) -> Vec<usize> {
        let target = max_len.max(min_len);
        let mut ids: Vec<usize> = tokenize(text)
            .iter()
            .take(max_len)
            .map(|t| self.id(t))
            .collect();
        ids.resize(target, PAD_INDEX);
        ids
    }
}

/// Patience-based stopping rule on validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// This epoch is the new best; snapshot it.
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

impl EpochRecord {
    /// `key=value` progress line.
    pub fn to_kv_line(&self) -> String {
        match self.val_loss {
            Some(v) => format!(
                "epoch={} train_loss={:.6} val_loss={:.6}",
                self.epoch, self.train_loss, v
            ),
            None => format!(
                "epoch={} train_loss={:.6} val_loss=NA",
                self.epoch, self.train_loss
            ),
        }
    }
}

/// Everything fitted on training rows that turns a document into a
/// [`Sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub variant: Variant,
    pub vocab: Vocabulary,
    pub scaler: Option<FeatureScaler>,
    pub bigrams: Option<BigramVocabulary>,
    pub extended: ExtendedFeatures,
    pub max_seq_len: usize,
    pub kernel: usize,
}

impl Preprocessor {
    pub fn fit(
        config: &TrainConfig,
        fit_docs: &[&Document],
        extractor: &FeatureExtractor,
    ) -> Result<Self, TrainError> {
        let variant = config.variant;
        let vocab = if variant.uses_text() {
            Vocabulary::build(fit_docs.iter().copied(), config.min_token_freq)
        } else {
            Vocabulary::from_tokens(vec![Vocabulary::PAD.into(), Vocabulary::OOV.into()])
        };
        let bigrams = variant
            .uses_extended_features()
            .then(|| BigramVocabulary::fit(fit_docs.iter().copied(), config.extended.bigrams));
        let mut pre = Preprocessor {
            variant,
            vocab,
            scaler: None,
            bigrams,
            extended: config.extended,
            max_seq_len: config.max_seq_len,
            kernel: config.architecture.kernel,
        };
        if variant.uses_features() {
            let rows: Vec<Vec<f64>> = fit_docs
                .iter()
                .map(|d| pre.raw_features(d, extractor))
                .collect();
            pre.scaler = Some(FeatureScaler::fit(&rows)?);
        }
        Ok(pre)
    }

    pub fn feature_dim(&self) -> usize {
        self.scaler.as_ref().map(FeatureScaler::width).unwrap_or(0)
    }

    /// Unscaled feature row for this variant.
    pub fn raw_features(&self, doc: &Document, extractor: &FeatureExtractor) -> Vec<f64> {
        if !self.variant.uses_features() {
            return Vec::new();
        }
        let mut row = extractor.elm_vector(doc).values.to_vec();
        if let Some(bg) = &self.bigrams {
            row.extend(bg.counts(doc));
            if self.extended.subjectivity {
                row.push(extractor.subjectivity(doc));
            }
        }
        row
    }

    pub fn sample(
        &self,
        doc: &Document,
        extractor: &FeatureExtractor,
    ) -> Result<Sample, TrainError> {
        let ids = if self.variant.uses_text() {
            self.vocab
                .encode(doc.clean_text(), self.max_seq_len, self.kernel)
        } else {
            Vec::new()
        };
        let features = match &self.scaler {
            Some(s) => s.transform(&self.raw_features(doc, extractor))?,
            None => Vec::new(),
        };
        Ok(Sample {
            ids,
            features,
            label: doc.label().as_f64(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub preprocessor: Preprocessor,
    pub extractor: FeatureExtractor,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Ids of the documents the vocabulary, scaler and bigrams were fitted on.
    pub fitted_on: Vec<String>,
}

impl TrainedModel {
    pub fn predict(&self, doc: &Document) -> Result<f64, TrainError> {
        let sample = self.preprocessor.sample(doc, &self.extractor)?;
        Ok(self.params.predict(&sample)?)
    }

    /// SHA-256 over the sorted ids of the fitting rows.
    pub fn fit_digest(&self) -> String {
        id_set_hash(&self.fitted_on)
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stratified carve-out of `fraction` of each class for validation.
/// Returns `(fit, validation)` index lists into `docs`.
fn validation_split(docs: &[&Document], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_stream(seed, 1);
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for class in [Label::Authentic, Label::Fake] {
        let mut members: Vec<usize> = (0..docs.len())
            .filter(|&i| docs[i].label() == class)
            .collect();
        members.shuffle(&mut rng);
        let n_val = if members.len() >= 2 {
            ((members.len() as f64 * fraction).round() as usize).clamp(1, members.len() - 1)
        } else {
            0
        };
        val.extend_from_slice(&members[..n_val]);
        fit.extend_from_slice(&members[n_val..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

fn mean_loss(params: &ModelParams, samples: &[Sample]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for s in samples {
        total += bce_loss(params.predict(s)?, s.label);
    }
    Ok(total / samples.len() as f64)
}

/// Trains one variant on `docs`, reporting each epoch to `progress`.
pub fn train_with_progress(
    docs: &[&Document],
    config: &TrainConfig,
    extractor: &FeatureExtractor,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainedModel, TrainError> {
    config.validate()?;
    if docs.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let fakes = docs.iter().filter(|d| d.label() == Label::Fake).count();
    if fakes == 0 || fakes == docs.len() {
        return Err(TrainError::SingleClassTrainingSet);
    }

    let (fit_idx, val_idx) = validation_split(docs, config.val_fraction, config.seed);
    let fit_docs: Vec<&Document> = fit_idx.iter().map(|&i| docs[i]).collect();
    let preprocessor = Preprocessor::fit(config, &fit_docs, extractor)?;

    let to_samples = |idx: &[usize]| -> Result<Vec<Sample>, TrainError> {
        idx.iter()
            .map(|&i| preprocessor.sample(docs[i], extractor))
            .collect()
    };
    let fit_samples = to_samples(&fit_idx)?;
    let val_samples = to_samples(&val_idx)?;

    let mut init_rng = rng_stream(config.seed, 0);
    let mut params = ModelParams::new(
        config.variant,
        &config.architecture,
        preprocessor.vocab.len(),
        preprocessor.feature_dim(),
        &mut init_rng,
    );
    let mut shuffle_rng = rng_stream(config.seed, 2);
    let mut dropout_rng = rng_stream(config.seed, 3);
    let dropout = Dropout::new(config.dropout_rate);
    let adam = config.adam();
    let mut adam_state = AdamState::new();
    let mut grads = params.zeros_like();

    let mut stopper = config.early_stop_patience.map(EarlyStopping::new);
    let mut best: Option<(usize, ModelParams)> = None;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..fit_samples.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            for &i in batch {
                let s = &fit_samples[i];
                let cache = params.forward(
                    s,
                    dropout,
                    Mode::Train,
                    config.architecture.feature_dropout,
                    &mut dropout_rng,
                )?;
                epoch_loss += bce_loss(cache.prob, s.label);
                // d(bce ∘ σ)/d(logit)
                let grad_logit = (cache.prob - s.label) / batch.len() as f64;
                params.backward(s, &cache, grad_logit, &mut grads);
            }
            if !grads.is_finite() {
                return Err(TrainError::NonFinite { epoch });
            }
            let grad_refs = grads.tensors();
            adam_state.step(&adam, &mut params.tensors_mut(), &grad_refs)?;
        }
        let train_loss = epoch_loss / fit_samples.len() as f64;
        if !train_loss.is_finite() || !params.is_finite() {
            return Err(TrainError::NonFinite { epoch });
        }
        let val_loss = if val_samples.is_empty() {
            None
        } else {
            Some(mean_loss(&params, &val_samples)?)
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
        };
        progress(&record);
        history.push(record);

        if let (Some(stopper), Some(v)) = (stopper.as_mut(), val_loss) {
            match stopper.observe(epoch, v) {
                StopDecision::Improved => best = Some((epoch, params.clone())),
                StopDecision::Continue => {}
                StopDecision::Stop => break,
            }
        }
    }

    let (best_epoch, params) = match best {
        Some((epoch, p)) => (epoch, p),
        None => (history.len(), params),
    };

    Ok(TrainedModel {
        params,
        preprocessor,
        extractor: extractor.clone(),
        config: config.clone(),
        history,
        best_epoch,
        fitted_on: fit_docs.iter().map(|d| d.id().to_string()).collect(),
    })
}

pub fn train(
    docs: &[&Document],
    config: &TrainConfig,
    extractor: &FeatureExtractor,
) -> Result<TrainedModel, TrainError> {
    train_with_progress(docs, config, extractor, &mut |_| {})
}
