//! Cross-validation driver: train every variant on every fold and score the
//! held-out documents.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, DocumentSet, FoldPlan, Label};
use crate::eval::{self, ConfusionMatrix, EvalError, MetricSet, DEFAULT_THRESHOLD};
use crate::features::FeatureExtractor;
use crate::model::Variant;
use crate::train::{train_with_progress, EpochRecord, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum CvError {
    #[error("no variants requested")]
    NoVariants,
    #[error("fold plan covers {plan} documents but the corpus has {corpus}")]
    PlanMismatch { plan: usize, corpus: usize },
    #[error("training failed on fold {fold} ({variant}): {source}")]
    Training {
        fold: usize,
        variant: Variant,
        #[source]
        source: TrainError,
    },
    #[error("evaluation failed on fold {fold} ({variant}): {source}")]
    Evaluation {
        fold: usize,
        variant: Variant,
        #[source]
        source: EvalError,
    },
    #[error("fold {fold} ({variant}): preprocessing was fitted on a held-out document")]
    Leakage { fold: usize, variant: Variant },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl CvError {
    /// Fold index of a per-fold failure.
    pub fn fold(&self) -> Option<usize> {
        match self {
            CvError::Training { fold, .. }
            | CvError::Evaluation { fold, .. }
            | CvError::Leakage { fold, .. } => Some(*fold),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub variant: Variant,
    pub scores: Vec<ScoredDoc>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Digest of the ids the vocabulary, scaler and bigrams were fitted on.
    pub fit_digest: String,
}

impl FoldResult {
    /// Builds a result from stored scores, computing the confusion matrix
    /// and metrics at the default threshold.
    pub fn from_scores(
        fold: usize,
        variant: Variant,
        scores: Vec<ScoredDoc>,
        history: Vec<EpochRecord>,
        best_epoch: usize,
        fit_digest: String,
    ) -> Result<Self, EvalError> {
        let (confusion, metrics) = score_metrics(&scores)?;
        Ok(FoldResult {
            fold,
            variant,
            scores,
            confusion,
            metrics,
            history,
            best_epoch,
            fit_digest,
        })
    }

    /// Confusion matrix and metrics recomputed from the stored scores.
    pub fn recompute(&self) -> Result<(ConfusionMatrix, MetricSet), EvalError> {
        score_metrics(&self.scores)
    }

    pub fn score_values(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.score).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.scores.iter().map(|s| s.label).collect()
    }
}

fn score_metrics(scores: &[ScoredDoc]) -> Result<(ConfusionMatrix, MetricSet), EvalError> {
    let s: Vec<f64> = scores.iter().map(|d| d.score).collect();
    let l: Vec<Label> = scores.iter().map(|d| d.label).collect();
    let e = eval::evaluate(&s, &l, DEFAULT_THRESHOLD)?;
    Ok((e.confusion, e.metrics))
}

/// Per-fold seed derived from the global seed (SplitMix64 finalizer).
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    let mut z = seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Progress callback: `(fold, variant, epoch record)`.
pub type Progress<'a> = &'a (dyn Fn(usize, Variant, &EpochRecord) + Sync);

/// Trains one variant on the train side of `fold` and scores its test side.
pub fn run_fold(
    set: &DocumentSet,
    plan: &FoldPlan,
    fold: usize,
    config: &TrainConfig,
    extractor: &FeatureExtractor,
    progress: Progress<'_>,
) -> Result<FoldResult, CvError> {
    let docs = set.documents();
    let variant = config.variant;
    let train_docs: Vec<&Document> = plan
        .train_indices(fold)
        .into_iter()
        .map(|i| &docs[i])
        .collect();
    let test_docs: Vec<&Document> = plan
        .test_indices(fold)
        .into_iter()
        .map(|i| &docs[i])
        .collect();

    let fold_config = TrainConfig {
        seed: fold_seed(config.seed, fold),
        ..config.clone()
    };
    let model = train_with_progress(&train_docs, &fold_config, extractor, &mut |r| {
        progress(fold, variant, r)
    })
    .map_err(|source| CvError::Training {
        fold,
        variant,
        source,
    })?;

    let test_ids: HashSet<&str> = test_docs.iter().map(|d| d.id()).collect();
    if model
        .fitted_on
        .iter()
        .any(|id| test_ids.contains(id.as_str()))
    {
        return Err(CvError::Leakage { fold, variant });
    }

    let mut scores = Vec::with_capacity(test_docs.len());
    for d in &test_docs {
        let score = model.predict(d).map_err(|source| CvError::Training {
            fold,
            variant,
            source,
        })?;
        scores.push(ScoredDoc {
            doc_id: d.id().to_string(),
            score,
            label: d.label(),
        });
    }
    FoldResult::from_scores(
        fold,
        variant,
        scores,
        model.history.clone(),
        model.best_epoch,
        model.fit_digest(),
    )
    .map_err(|source| CvError::Evaluation {
        fold,
        variant,
        source,
    })
}

/// Runs every `(fold, variant)` pair, using up to `jobs` worker threads.
/// Results are ordered by fold, then by the order of `configs`.
pub fn cross_validate(
    set: &DocumentSet,
    plan: &FoldPlan,
    configs: &[TrainConfig],
    extractor: &FeatureExtractor,
    jobs: usize,
    progress: Progress<'_>,
) -> Result<Vec<FoldResult>, CvError> {
    if configs.is_empty() {
        return Err(CvError::NoVariants);
    }
    if plan.assignments.len() != set.len() {
        return Err(CvError::PlanMismatch {
            plan: plan.assignments.len(),
            corpus: set.len(),
        });
    }
    let tasks: Vec<(usize, &TrainConfig)> = (0..plan.k)
        .flat_map(|f| configs.iter().map(move |c| (f, c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CvError::ThreadPool(e.to_string()))?;
    let results: Vec<Result<FoldResult, CvError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(fold, config)| run_fold(set, plan, fold, config, extractor, progress))
            .collect()
    });
    // first failure in task order, so the reported fold is deterministic
    results.into_iter().collect()
}
