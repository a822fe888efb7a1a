//! Central-route and peripheral-route cue features, their concatenation,
//! the extended features used by the combined variant, and min-max scaling.
//!
//! Central features read a document's cleaned text; peripheral features read
//! the raw text, since cleaning destroys the case and punctuation cues they
//! measure.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::text::{
    bundled_sentiment, bundled_urgency, count_syllables, split_sentences, tokenize, Lexicon,
};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot fit a scaler on an empty training set")]
    EmptyTrainingSet,
    #[error("row has {found} features, scaler expects {expected}")]
    WidthMismatch { expected: usize, found: usize },
}

pub const ELM_DIM: usize = 10;

/// Canonical feature order used everywhere: `c1..c5` then `p1..p5`.
pub const FEATURE_NAMES: [&str; ELM_DIM] = [
    "flesch_kincaid_grade",
    "vocabulary_richness",
    "sentiment_polarity",
    "text_length",
    "avg_words_per_sentence",
    "exclamation_ratio",
    "question_ratio",
    "capitalization_ratio",
    "all_caps_count",
    "urgency_frequency",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CentralVector {
    pub flesch_kincaid_grade: f64,
    pub vocabulary_richness: f64,
    pub sentiment_polarity: f64,
    pub text_length: usize,
    pub avg_words_per_sentence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PeripheralVector {
    pub exclamation_ratio: f64,
    pub question_ratio: f64,
    pub capitalization_ratio: f64,
    pub all_caps_count: usize,
    pub urgency_frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ElmVector {
    pub values: [f64; ELM_DIM],
}

impl ElmVector {
    pub fn new(central: &CentralVector, peripheral: &PeripheralVector) -> Self {
        ElmVector {
            values: [
                central.flesch_kincaid_grade,
                central.vocabulary_richness,
                central.sentiment_polarity,
                central.text_length as f64,
                central.avg_words_per_sentence,
                peripheral.exclamation_ratio,
                peripheral.question_ratio,
                peripheral.capitalization_ratio,
                peripheral.all_caps_count as f64,
                peripheral.urgency_frequency,
            ],
        }
    }

    pub fn feature_names() -> &'static [&'static str; ELM_DIM] {
        &FEATURE_NAMES
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Computes cue features with a fixed pair of lexicons.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub sentiment: Lexicon,
    pub urgency: Lexicon,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor {
            sentiment: bundled_sentiment(),
            urgency: bundled_urgency(),
        }
    }
}

impl FeatureExtractor {
    pub fn new(sentiment: Lexicon, urgency: Lexicon) -> Self {
        FeatureExtractor { sentiment, urgency }
    }

    pub fn central_features(&self, doc: &Document) -> CentralVector {
        self.central_from_text(doc.clean_text())
    }

    /// Central features of already-cleaned text.
    pub fn central_from_text(&self, text: &str) -> CentralVector {
        let tokens = tokenize(text);
        let words = tokens.len();
        if words == 0 {
            return CentralVector::default();
        }
        // tokens exist, so there is at least one sentence
        let sentences = split_sentences(text).len().max(1);
        let syllables: usize = tokens.iter().map(count_syllables).sum();
        let lowered: Vec<String> = tokens.iter().map(str::to_lowercase).collect();
        let unique: HashSet<&str> = lowered.iter().map(String::as_str).collect();
        let polarity_sum: f64 = lowered.iter().map(|w| self.sentiment.score(w)).sum();

        let words_f = words as f64;
        let words_per_sentence = words_f / sentences as f64;
        CentralVector {
            flesch_kincaid_grade: 0.39 * words_per_sentence + 11.8 * (syllables as f64 / words_f)
                - 15.59,
            vocabulary_richness: unique.len() as f64 / words_f,
            sentiment_polarity: (polarity_sum / words_f).clamp(-1.0, 1.0),
            text_length: words,
            avg_words_per_sentence: words_per_sentence,
        }
    }

    pub fn peripheral_features(&self, doc: &Document) -> PeripheralVector {
        self.peripheral_from_text(doc.raw_text())
    }

    /// Peripheral features of unprocessed text.
    pub fn peripheral_from_text(&self, raw: &str) -> PeripheralVector {
        let tokens = tokenize(raw);
        let n = tokens.len();
        if n == 0 {
            return PeripheralVector::default();
        }
        let n_f = n as f64;
        let exclamations = raw.chars().filter(|&c| c == '!').count();
        let questions = raw.chars().filter(|&c| c == '?').count();
        let capitalized = tokens
            .iter()
            .filter(|t| {
                t.chars()
                    .find(|c| c.is_alphabetic())
                    .is_some_and(char::is_uppercase)
            })
            .count();
        let all_caps = tokens
            .iter()
            .filter(|t| {
                t.chars().count() >= 2 && t.chars().all(|c| c.is_alphabetic() && c.is_uppercase())
            })
            .count();
        let urgent = tokens
            .iter()
            .filter(|t| self.urgency.contains(&t.to_lowercase()))
            .count();

        PeripheralVector {
            exclamation_ratio: exclamations as f64 / n_f,
            question_ratio: questions as f64 / n_f,
            capitalization_ratio: capitalized as f64 / n_f,
            all_caps_count: all_caps,
            urgency_frequency: urgent as f64 / n_f,
        }
    }

    pub fn elm_vector(&self, doc: &Document) -> ElmVector {
        ElmVector::new(&self.central_features(doc), &self.peripheral_features(doc))
    }

    /// Fraction of cleaned-text tokens found in the sentiment lexicon,
    /// whatever their sign.
    pub fn subjectivity(&self, doc: &Document) -> f64 {
        let tokens = tokenize(doc.clean_text());
        if tokens.is_empty() {
            return 0.0;
        }
        let hits = tokens.iter().filter(|t| self.sentiment.contains(t)).count();
        hits as f64 / tokens.len() as f64
    }
}

fn bigrams(text: &str) -> Vec<(String, String)> {
    let tokens: Vec<String> = tokenize(text).iter().map(str::to_lowercase).collect();
    tokens
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect()
}

/// The most document-frequent bigrams of a training fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigramVocabulary {
    pub bigrams: Vec<(String, String)>,
}

impl BigramVocabulary {
    pub const DEFAULT_SIZE: usize = 50;

    /// Top `size` bigrams of the documents' cleaned text by document
    /// frequency; ties are broken lexicographically.
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a Document>, size: usize) -> Self {
        let mut df: BTreeMap<(String, String), usize> = BTreeMap::new();
        for doc in docs {
            let unique: HashSet<(String, String)> = bigrams(doc.clean_text()).into_iter().collect();
            for bg in unique {
                *df.entry(bg).or_default() += 1;
            }
        }
        let mut ranked: Vec<_> = df.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        BigramVocabulary {
            bigrams: ranked.into_iter().take(size).map(|(bg, _)| bg).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bigrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bigrams.is_empty()
    }

    /// Occurrence count of each vocabulary bigram in the document.
    pub fn counts(&self, doc: &Document) -> Vec<f64> {
        let doc_bigrams = bigrams(doc.clean_text());
        self.bigrams
            .iter()
            .map(|bg| doc_bigrams.iter().filter(|d| *d == bg).count() as f64)
            .collect()
    }
}

/// Per-feature min-max scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    /// Constant columns get `max = min + 1` so they map to 0.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, FeatureError> {
        let first = rows.first().ok_or(FeatureError::EmptyTrainingSet)?.as_ref();
        let width = first.len();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(FeatureError::WidthMismatch {
                    expected: width,
                    found: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        for j in 0..width {
            if max[j] <= min[j] {
                max[j] = min[j] + 1.0;
            }
        }
        Ok(FeatureScaler { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// `(x - min) / (max - min)` clamped to `[0, 1]`.
    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.width() {
            return Err(FeatureError::WidthMismatch {
                expected: self.width(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect())
    }

    pub fn transform_elm(&self, v: &ElmVector) -> Result<ElmVector, FeatureError> {
        let scaled = self.transform(&v.values)?;
        let mut values = [0.0; ELM_DIM];
        values.copy_from_slice(&scaled);
        Ok(ElmVector { values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceFile;

    fn doc(raw: &str) -> Document {
        Document::new("d", raw, SourceFile::FakeNews)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn central_the_cat_sat() {
        let fx = FeatureExtractor::default();
        let c = fx.central_features(&doc("The cat sat."));
        assert!(
            close(c.flesch_kincaid_grade, -2.62),
            "{}",
            c.flesch_kincaid_grade
        );
        assert_eq!(c.vocabulary_richness, 1.0);
        assert_eq!(c.text_length, 3);
        assert_eq!(c.avg_words_per_sentence, 3.0);
    }

    #[test]
    fn central_degenerate_and_polarity() {
        let fx = FeatureExtractor::default();
        assert_eq!(fx.central_features(&doc("")), CentralVector::default());
        assert_eq!(
            fx.central_features(&doc("!!! ???")),
            CentralVector::default()
        );

        let lex = Lexicon::from_entries("s", 0.0, [("good", 0.7)]);
        let fx = FeatureExtractor::new(lex, bundled_urgency());
        let c = fx.central_features(&doc("good good good"));
        assert!(close(c.sentiment_polarity, 0.7));
        assert!(close(c.vocabulary_richness, 1.0 / 3.0));
    }

    #[test]
    fn peripheral_examples() {
        let fx = FeatureExtractor::default();
        let p = fx.peripheral_features(&doc("BREAKING: Cure found!!"));
        assert!(close(p.exclamation_ratio, 2.0 / 3.0));
        assert!(close(p.capitalization_ratio, 2.0 / 3.0));
        assert_eq!(p.all_caps_count, 1);
        assert!(close(p.urgency_frequency, 1.0 / 3.0));

        assert_eq!(
            fx.peripheral_features(&doc("no signals here")),
            PeripheralVector::default()
        );

        let p = fx.peripheral_features(&doc("Act NOW!"));
        assert_eq!(p.urgency_frequency, 1.0);
        assert_eq!(p.exclamation_ratio, 0.5);
        assert_eq!(p.all_caps_count, 1);
    }

    #[test]
    fn single_letter_caps_are_not_shouting() {
        let fx = FeatureExtractor::default();
        let p = fx.peripheral_features(&doc("I saw A cat"));
        assert_eq!(p.all_caps_count, 0);
        assert!(close(p.capitalization_ratio, 0.5));
    }

    #[test]
    fn elm_vector_shape_and_order() {
        let fx = FeatureExtractor::default();
        let d = doc("The cat sat.");
        let v = fx.elm_vector(&d);
        let c = fx.central_features(&d);
        assert_eq!(v.values.len(), ELM_DIM);
        assert_eq!(v.values[0], c.flesch_kincaid_grade);
        assert_eq!(v.values[3], 3.0);
        assert_eq!(fx.elm_vector(&doc("")).values, [0.0; ELM_DIM]);
    }

    #[test]
    fn scaler_rules() {
        let rows = vec![vec![0.0; 10], vec![1.0; 10]];
        let s = FeatureScaler::fit(&rows).unwrap();
        assert_eq!(s.transform(&[0.0; 10]).unwrap(), vec![0.0; 10]);
        assert_eq!(s.transform(&[1.0; 10]).unwrap(), vec![1.0; 10]);

        let constant = FeatureScaler::fit(&[vec![5.0], vec![5.0]]).unwrap();
        assert_eq!(constant.transform(&[5.0]).unwrap(), vec![0.0]);

        let s = FeatureScaler::fit(&[vec![0.0], vec![10.0]]).unwrap();
        assert_eq!(s.transform(&[5.0]).unwrap(), vec![0.5]);
        assert_eq!(s.transform(&[-3.0]).unwrap(), vec![0.0]);
        assert_eq!(s.transform(&[10.0]).unwrap(), vec![1.0]);
        assert_eq!(s.transform(&[12.0]).unwrap(), vec![1.0]);

        let empty: Vec<Vec<f64>> = Vec::new();
        assert_eq!(
            FeatureScaler::fit(&empty),
            Err(FeatureError::EmptyTrainingSet)
        );
        assert!(matches!(
            s.transform(&[1.0, 2.0]),
            Err(FeatureError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn bigram_vocabulary_ranks_by_document_frequency() {
        let docs = [
            doc("stay home stay home"),
            doc("stay home now"),
            doc("go home now"),
        ];
        let vocab = BigramVocabulary::fit(docs.iter(), 2);
        assert_eq!(
            vocab.bigrams,
            vec![
                ("home".to_string(), "now".to_string()),
                ("stay".to_string(), "home".to_string())
            ]
        );
        assert_eq!(vocab.counts(&docs[0]), vec![0.0, 2.0]);
    }

    #[test]
    fn subjectivity_counts_lexicon_hits() {
        let lex = Lexicon::from_entries("s", 0.0, [("good", 0.7), ("bad", -0.5)]);
        let fx = FeatureExtractor::new(lex, bundled_urgency());
        assert_eq!(fx.subjectivity(&doc("good and bad news")), 0.5);
        assert_eq!(fx.subjectivity(&doc("")), 0.0);
    }
}
