//! Dataset ingestion, text cleaning and stratified fold planning.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::is_sentence_terminator;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("dataset file not found: {0}")]
    FileNotFound(String),
    #[error("{file}: malformed row {row}: {reason}")]
    MalformedRow {
        file: String,
        row: usize,
        reason: String,
    },
    #[error("{0}: no column named \"text\" in header")]
    MissingTextColumn(String),
    #[error("a class has {found} documents but {k} folds were requested")]
    TooFewDocuments { k: usize, found: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("i/o error reading {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
}

/// Which of the two input files a document came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFile {
    TrueNews,
    FakeNews,
}

/// Binary class. Fake is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Authentic,
    Fake,
}

impl Label {
    pub fn value(self) -> u8 {
        match self {
            Label::Authentic => 0,
            Label::Fake => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn from_value(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Authentic),
            1 => Some(Label::Fake),
            _ => None,
        }
    }
}

impl From<SourceFile> for Label {
    fn from(s: SourceFile) -> Label {
        match s {
            SourceFile::TrueNews => Label::Authentic,
            SourceFile::FakeNews => Label::Fake,
        }
    }
}

/// One news item. Built only through [`Document::new`] so that the label
/// always agrees with the source file and `clean_text` with `raw_text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    id: String,
    raw_text: String,
    clean_text: String,
    source_file: SourceFile,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        raw_text: impl Into<String>,
        source_file: SourceFile,
    ) -> Self {
        let raw_text = raw_text.into();
        let clean_text = clean_text(&raw_text);
        Document {
            id: id.into(),
            raw_text,
            clean_text,
            source_file,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }

    pub fn clean_text(&self) -> &str {
        &self.clean_text
    }

    pub fn source_file(&self) -> SourceFile {
        self.source_file
    }

    pub fn label(&self) -> Label {
        self.source_file.into()
    }

    /// True when cleaning removed every character. Such documents still
    /// carry peripheral cues in `raw_text`.
    pub fn is_empty_after_cleaning(&self) -> bool {
        self.clean_text.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSet {
    documents: Vec<Document>,
    dropped_rows: usize,
}

impl DocumentSet {
    pub fn new(documents: Vec<Document>) -> Self {
        DocumentSet {
            documents,
            dropped_rows: 0,
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// `(n_true, n_fake)`
    pub fn class_counts(&self) -> (usize, usize) {
        let fake = self
            .documents
            .iter()
            .filter(|d| d.label() == Label::Fake)
            .count();
        (self.documents.len() - fake, fake)
    }

    /// Rows skipped at ingestion because their text was blank.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn empty_after_cleaning(&self) -> usize {
        self.documents
            .iter()
            .filter(|d| d.is_empty_after_cleaning())
            .count()
    }
}

struct FileRows {
    docs: Vec<Document>,
    dropped: usize,
}

fn read_file(path: &Path, source: SourceFile) -> Result<FileRows, CorpusError> {
    let name = path.display().to_string();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::FileNotFound(name.clone()),
        _ => CorpusError::Io {
            file: name.clone(),
            source: e,
        },
    })?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes.as_slice());

    let headers = reader.headers().map_err(|e| csv_error(&name, e))?.clone();
    let text_col = headers
        .iter()
        .position(|h| {
            h.trim()
                .trim_start_matches('\u{feff}')
                .eq_ignore_ascii_case("text")
        })
        .ok_or_else(|| CorpusError::MissingTextColumn(name.clone()))?;

    let prefix = match source {
        SourceFile::TrueNews => "true",
        SourceFile::FakeNews => "fake",
    };

    let mut docs = Vec::new();
    let mut dropped = 0;
    let mut last_row = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        last_row = row;
        let record = record.map_err(|e| csv_error(&name, e))?;
        let text = record.get(text_col).unwrap_or("");
        if text.trim().is_empty() {
            dropped += 1;
            continue;
        }
        docs.push(Document::new(format!("{prefix}-{row}"), text, source));
    }

    // An unterminated quoted field swallows the rest of the file without a
    // parse error; RFC 4180 escaping always yields an even quote count.
    if bytes.iter().filter(|&&b| b == b'"').count() % 2 == 1 {
        return Err(CorpusError::MalformedRow {
            file: name,
            row: last_row,
            reason: "unclosed quote".into(),
        });
    }

    Ok(FileRows { docs, dropped })
}

fn csv_error(file: &str, e: csv::Error) -> CorpusError {
    let row = e.position().map(|p| p.record() as usize).unwrap_or(0);
    let reason = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => {
            format!("expected {expected_len} columns, found {len}")
        }
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => e.to_string(),
    };
    CorpusError::MalformedRow {
        file: file.to_string(),
        row,
        reason,
    }
}

/// Reads the authentic-news and fake-news files into one document set,
/// true-news rows first. Rows with blank text are dropped and counted.
pub fn load_dataset(
    true_path: impl AsRef<Path>,
    fake_path: impl AsRef<Path>,
) -> Result<DocumentSet, CorpusError> {
    let t = read_file(true_path.as_ref(), SourceFile::TrueNews)?;
    let f = read_file(fake_path.as_ref(), SourceFile::FakeNews)?;
    let mut documents = t.docs;
    documents.extend(f.docs);
    Ok(DocumentSet {
        documents,
        dropped_rows: t.dropped + f.dropped,
    })
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"https?://\S*|www\.\S*").expect("valid url regex"))
}

#[inline]
fn keep_char(c: char) -> bool {
    c == ' ' || is_sentence_terminator(c) || (c.is_alphanumeric() && !c.is_uppercase())
}

/// Lowercases, strips URLs and special characters, and collapses whitespace.
///
/// Only letters, digits, spaces and `. ! ?` survive.
pub fn clean_text(raw: &str) -> String {
    let lowered: String = raw
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .collect();
    let no_urls = url_pattern().replace_all(&lowered, " ");
    let filtered: String = no_urls.chars().filter(|&c| keep_char(c)).collect();
    // filtering can splice a new "www." together, e.g. "ww-w.x"
    let filtered = url_pattern().replace_all(&filtered, " ");
    filtered
        .split(' ')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Assignment of every document to one of `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles each class with a seeded RNG and deals it round-robin into `k`
/// folds, so every fold keeps the global class ratio to within one document.
pub fn stratified_folds(set: &DocumentSet, k: usize, seed: u64) -> Result<FoldPlan, CorpusError> {
    let labels: Vec<Label> = set.documents().iter().map(Document::label).collect();
    stratified_assign(&labels, k, seed).map(|assignments| FoldPlan {
        k,
        seed,
        assignments,
    })
}

pub(crate) fn stratified_assign(
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, CorpusError> {
    if k < 2 {
        return Err(CorpusError::InvalidFoldCount(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    for class in [Label::Authentic, Label::Fake] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(CorpusError::TooFewDocuments {
                k,
                found: members.len(),
            });
        }
        members.shuffle(&mut rng);
        for (slot, &doc) in members.iter().enumerate() {
            assignments[doc] = slot % k;
        }
    }
    Ok(assignments)
}
