//! The four classifier variants assembled from [`crate::nn`] layers.
//!
//! Text path: embedding → conv1d + ReLU → dropout → LSTM (final hidden
//! state). The enhanced and combined variants concatenate scaled cue
//! features after the LSTM output; the features-only variant skips the
//! text path and uses a small ReLU hidden layer instead.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{
    concat_features, max_pool, max_pool_backward, sigmoid, Conv1d, ConvCache, DenseHead, Dropout,
    DropoutMask, Embedding, Linear, Lstm, LstmCache, Mode, NnError, Params, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Text only.
    Base,
    /// The ten cue features only.
    FeaturesOnly,
    /// Text plus the ten cue features.
    Enhanced,
    /// Text plus cue features plus bigram counts and subjectivity.
    Combined,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Base,
        Variant::FeaturesOnly,
        Variant::Enhanced,
        Variant::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::FeaturesOnly => "features_only",
            Variant::Enhanced => "enhanced",
            Variant::Combined => "combined",
        }
    }

    pub fn uses_text(self) -> bool {
        !matches!(self, Variant::FeaturesOnly)
    }

    pub fn uses_features(self) -> bool {
        !matches!(self, Variant::Base)
    }

    pub fn uses_extended_features(self) -> bool {
        matches!(self, Variant::Combined)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "base" => Ok(Variant::Base),
            "features_only" | "features" => Ok(Variant::FeaturesOnly),
            "enhanced" => Ok(Variant::Enhanced),
            "combined" => Ok(Variant::Combined),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

/// How the convolutional feature map is reduced to a fixed-size vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceReducer {
    /// Run the LSTM over the feature map and keep its final hidden state.
    #[default]
    Lstm,
    /// Per-filter max over positions (pool-then-dense ablation).
    MaxPool,
}

/// Layer sizes. Defaults follow the reference architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub embedding_dim: usize,
    pub filters: usize,
    pub kernel: usize,
    pub lstm_units: usize,
    /// Hidden width of the features-only network.
    pub feature_hidden: usize,
    pub reducer: SequenceReducer,
    /// Apply dropout to the cue-feature branch as well as the text path.
    pub feature_dropout: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            embedding_dim: 100,
            filters: 64,
            kernel: 3,
            lstm_units: 100,
            feature_hidden: 32,
            reducer: SequenceReducer::Lstm,
            feature_dropout: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEncoder {
    pub embedding: Embedding,
    pub conv: Conv1d,
    pub lstm: Option<Lstm>,
}

impl TextEncoder {
    fn output_dim(&self) -> usize {
        match &self.lstm {
            Some(l) => l.hidden(),
            None => self.conv.num_filters(),
        }
    }
}

/// Learnable tensors of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: Variant,
    pub text: Option<TextEncoder>,
    pub feature_hidden: Option<Linear>,
    pub head: DenseHead,
    pub feature_dim: usize,
}

/// One training or inference example in model-ready form.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub ids: Vec<usize>,
    /// Scaled cue features (empty for the base variant).
    pub features: Vec<f64>,
    pub label: f64,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    embedded: Option<Tensor>,
    conv: Option<(Tensor, ConvCache)>,
    text_mask: DropoutMask,
    dropped: Option<Tensor>,
    lstm: Option<LstmCache>,
    pool_argmax: Option<Vec<usize>>,
    feature_mask: DropoutMask,
    features_in: Vec<f64>,
    hidden_pre: Option<Vec<f64>>,
    head_input: Vec<f64>,
    pub logit: f64,
    pub prob: f64,
}

impl ModelParams {
    pub fn new<R: Rng + ?Sized>(
        variant: Variant,
        arch: &Architecture,
        vocab_size: usize,
        feature_dim: usize,
        rng: &mut R,
    ) -> Self {
        let text = variant.uses_text().then(|| {
            let embedding = Embedding::new(vocab_size, arch.embedding_dim, rng);
            let conv = Conv1d::new(arch.filters, arch.kernel, arch.embedding_dim, rng);
            let lstm = (arch.reducer == SequenceReducer::Lstm)
                .then(|| Lstm::new(arch.filters, arch.lstm_units, rng));
            TextEncoder {
                embedding,
                conv,
                lstm,
            }
        });
        let feature_dim = if variant.uses_features() {
            feature_dim
        } else {
            0
        };
        let (feature_hidden, head_in) = match &text {
            None => (
                Some(Linear::new(feature_dim, arch.feature_hidden, rng)),
                arch.feature_hidden,
            ),
            Some(enc) => (None, enc.output_dim() + feature_dim),
        };
        ModelParams {
            variant,
            text,
            feature_hidden,
            head: DenseHead::new(head_in, rng),
            feature_dim,
        }
    }

    pub fn kernel(&self) -> usize {
        self.text.as_ref().map(|t| t.conv.kernel()).unwrap_or(1)
    }

    /// Width of the vector fed to the sigmoid head.
    pub fn head_input_dim(&self) -> usize {
        self.head.input_dim()
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        sample: &Sample,
        dropout: Dropout,
        mode: Mode,
        feature_dropout: bool,
        rng: &mut R,
    ) -> Result<ForwardCache, NnError> {
        if sample.features.len() != self.feature_dim {
            return Err(NnError::DimensionMismatch {
                expected: self.feature_dim,
                found: sample.features.len(),
            });
        }
        let mut cache = ForwardCache {
            embedded: None,
            conv: None,
            text_mask: None,
            dropped: None,
            lstm: None,
            pool_argmax: None,
            feature_mask: None,
            features_in: Vec::new(),
            hidden_pre: None,
            head_input: Vec::new(),
            logit: 0.0,
            prob: 0.0,
        };

        let features = if feature_dropout && !sample.features.is_empty() {
            let t = Tensor::from_vec(&[sample.features.len()], sample.features.clone())?;
            let (out, mask) = dropout.forward(&t, mode, rng);
            cache.feature_mask = mask;
            out.into_vec()
        } else {
            sample.features.clone()
        };

        let head_input = match (&self.text, &self.feature_hidden) {
            (Some(enc), _) => {
                let embedded = enc.embedding.forward(&sample.ids)?;
                let (conv_out, conv_cache) = enc.conv.forward(&embedded)?;
                let (dropped, mask) = dropout.forward(&conv_out, mode, rng);
                let text_repr = match &enc.lstm {
                    Some(lstm) => {
                        let (state, lstm_cache) = lstm.forward(&dropped)?;
                        cache.lstm = Some(lstm_cache);
                        state.h
                    }
                    None => {
                        let (pooled, arg) = max_pool(&dropped)?;
                        cache.pool_argmax = Some(arg);
                        pooled
                    }
                };
                cache.embedded = Some(embedded);
                cache.conv = Some((conv_out, conv_cache));
                cache.text_mask = mask;
                cache.dropped = Some(dropped);
                concat_features(&text_repr, &features)
            }
            (None, Some(hidden)) => {
                let pre = hidden.forward(&features)?;
                let act = pre.iter().map(|&v| v.max(0.0)).collect();
                cache.hidden_pre = Some(pre);
                act
            }
            (None, None) => unreachable!("a model has a text path or a feature network"),
        };
        cache.features_in = features;
        cache.logit = self.head.logit(&head_input)?;
        cache.prob = sigmoid(cache.logit);
        cache.head_input = head_input;
        Ok(cache)
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the output logit is `grad_logit`.
    pub fn backward(
        &self,
        sample: &Sample,
        cache: &ForwardCache,
        grad_logit: f64,
        grads: &mut ModelParams,
    ) {
        let grad_head_in = self
            .head
            .backward_logit(&cache.head_input, grad_logit, &mut grads.head);

        match (&self.text, &self.feature_hidden) {
            (Some(enc), _) => {
                let genc = grads
                    .text
                    .as_mut()
                    .expect("gradient buffer mirrors the model");
                let text_dim = enc.output_dim();
                let grad_repr = &grad_head_in[..text_dim];
                let dropped = cache.dropped.as_ref().expect("text forward cached");
                let grad_dropped = match &enc.lstm {
                    Some(lstm) => lstm.backward(
                        dropped,
                        cache.lstm.as_ref().expect("lstm cache"),
                        grad_repr,
                        genc.lstm.as_mut().expect("lstm grads"),
                    ),
                    None => max_pool_backward(
                        cache.pool_argmax.as_ref().expect("pool cache"),
                        grad_repr,
                        dropped.rows(),
                    ),
                };
                let grad_conv_out = Dropout::backward(&cache.text_mask, &grad_dropped);
                let embedded = cache.embedded.as_ref().expect("embedding cached");
                let (_, conv_cache) = cache.conv.as_ref().expect("conv cached");
                let grad_embedded =
                    enc.conv
                        .backward(embedded, conv_cache, &grad_conv_out, &mut genc.conv);
                enc.embedding
                    .backward(&sample.ids, &grad_embedded, &mut genc.embedding);
            }
            (None, Some(hidden)) => {
                let pre = cache.hidden_pre.as_ref().expect("hidden cached");
                let grad_pre: Vec<f64> = grad_head_in
                    .iter()
                    .zip(pre)
                    .map(|(&g, &p)| if p > 0.0 { g } else { 0.0 })
                    .collect();
                hidden.backward(
                    &cache.features_in,
                    &grad_pre,
                    grads
                        .feature_hidden
                        .as_mut()
                        .expect("gradient buffer mirrors the model"),
                );
            }
            (None, None) => unreachable!(),
        }
    }

    /// Inference-mode probability.
    pub fn predict(&self, sample: &Sample) -> Result<f64, NnError> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        Ok(self
            .forward(sample, Dropout::new(0.0), Mode::Eval, false, &mut rng)?
            .prob)
    }
}

impl Params for ModelParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        if let Some(enc) = &self.text {
            out.extend(enc.embedding.tensors());
            out.extend(enc.conv.tensors());
            if let Some(l) = &enc.lstm {
                out.extend(l.tensors());
            }
        }
        if let Some(h) = &self.feature_hidden {
            out.extend(h.tensors());
        }
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        if let Some(enc) = &mut self.text {
            out.extend(enc.embedding.tensors_mut());
            out.extend(enc.conv.tensors_mut());
            if let Some(l) = &mut enc.lstm {
                out.extend(l.tensors_mut());
            }
        }
        if let Some(h) = &mut self.feature_hidden {
            out.extend(h.tensors_mut());
        }
        out.extend(self.head.tensors_mut());
        out
    }
}

impl ModelParams {
    /// Tensor names in the same order as [`Params::tensors`].
    pub fn tensor_names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if let Some(enc) = &self.text {
            out.push("embedding.weights");
            out.extend(["conv.filters", "conv.bias"]);
            if enc.lstm.is_some() {
                out.extend(["lstm.w_input", "lstm.w_hidden", "lstm.bias"]);
            }
        }
        if self.feature_hidden.is_some() {
            out.extend(["feature_hidden.weight", "feature_hidden.bias"]);
        }
        out.extend(["head.weight", "head.bias"]);
        out
    }
}
