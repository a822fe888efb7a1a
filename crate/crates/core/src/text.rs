//! Tokenization, sentence splitting, syllable counting and word lexicons.
//!
//! Everything here is a pure function of its input. The feature extractors
//! build on these primitives, so their conventions (what counts as a token,
//! where a sentence ends) fix the denominators of every ratio feature.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon file not found: {0}")]
    FileNotFound(String),
    #[error("malformed lexicon line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("i/o error reading lexicon: {0}")]
    Io(#[from] std::io::Error),
}

/// Word tokens of a text together with their character spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenList {
    pub tokens: Vec<String>,
    /// `(start, end)` character offsets, end exclusive.
    pub spans: Vec<(usize, usize)>,
}

impl TokenList {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

#[inline]
fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

#[inline]
pub(crate) fn is_sentence_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits `text` into maximal runs of letters, digits and apostrophes.
///
/// Runs made only of apostrophes (stray quote marks) are discarded. Casing
/// is preserved.
pub fn tokenize(text: &str) -> TokenList {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut has_alnum = false;

    let mut flush = |current: &mut String, has_alnum: &mut bool, start: usize, end: usize| {
        if *has_alnum {
            tokens.push(std::mem::take(current));
            spans.push((start, end));
        } else {
            current.clear();
        }
        *has_alnum = false;
    };

    let mut pos = 0;
    for (i, c) in text.chars().enumerate() {
        pos = i + 1;
        if is_token_char(c) {
            if current.is_empty() {
                start = i;
            }
            has_alnum |= c.is_alphanumeric();
            current.push(c);
        } else if !current.is_empty() {
            flush(&mut current, &mut has_alnum, start, i);
        }
    }
    if !current.is_empty() {
        flush(&mut current, &mut has_alnum, start, pos);
    }

    TokenList { tokens, spans }
}

/// Splits text into sentences ending at `.`, `!` or `?`.
///
/// A run of terminators closes one sentence. Segments that contain no token
/// are dropped, and an unterminated tail counts as a sentence when it holds
/// at least one token.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();

    while let Some(c) = chars.next() {
        current.push(c);
        if is_sentence_terminator(c) {
            while let Some(&next) = chars.peek() {
                if !is_sentence_terminator(next) {
                    break;
                }
                current.push(next);
                chars.next();
            }
            push_sentence(&mut sentences, &mut current);
        }
    }
    push_sentence(&mut sentences, &mut current);
    sentences
}

fn push_sentence(out: &mut Vec<String>, current: &mut String) {
    let sentence = current.trim();
    if !tokenize(sentence).is_empty() {
        out.push(sentence.to_string());
    }
    current.clear();
}

/// Vowel-group syllable estimate for a single token. Always at least 1.
pub fn count_syllables(word: &str) -> usize {
    let lower = word.to_lowercase();
    let mut groups = 0;
    let mut in_group = false;
    for c in lower.chars() {
        let vowel = matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
        if vowel && !in_group {
            groups += 1;
        }
        in_group = vowel;
    }
    // silent final e
    if lower.ends_with('e') && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

/// A case-insensitive word → score table.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    entries: HashMap<String, f64>,
    pub default_score: f64,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, default_score: f64) -> Self {
        Lexicon {
            name: name.into(),
            entries: HashMap::new(),
            default_score,
        }
    }

    /// Builds a lexicon from `(word, score)` pairs; later duplicates win.
    pub fn from_entries<I, S>(name: impl Into<String>, default_score: f64, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::new(name, default_score);
        for (word, score) in entries {
            lex.insert(word.as_ref(), score);
        }
        lex
    }

    pub fn insert(&mut self, word: &str, score: f64) {
        self.entries.insert(word.to_lowercase(), score);
    }

    /// Score of `word`, or the default for absent words.
    pub fn score(&self, word: &str) -> f64 {
        self.get(word).unwrap_or(self.default_score)
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        if let Some(&s) = self.entries.get(word) {
            return Some(s);
        }
        self.entries.get(&word.to_lowercase()).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by word, for stable hashing and serialization.
    pub fn sorted_entries(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, &s)| (k.as_str(), s)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// Parses the `word<TAB>score` format. A missing score means 1.0;
    /// blank lines and `#` comments are skipped.
    pub fn parse(
        name: impl Into<String>,
        content: &str,
        default_score: f64,
    ) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::new(name, default_score);
        for (idx, raw_line) in content.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim_end_matches('\r');
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let word = fields.next().unwrap_or("").trim();
            if word.is_empty() {
                return Err(LexiconError::MalformedLine {
                    line: line_no,
                    reason: "empty word".into(),
                });
            }
            if word.chars().any(char::is_whitespace) {
                return Err(LexiconError::MalformedLine {
                    line: line_no,
                    reason: format!(
                        "word {word:?} contains whitespace (fields must be tab-separated)"
                    ),
                });
            }
            let score = match fields.next().map(str::trim) {
                None | Some("") => 1.0,
                Some(s) => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| LexiconError::MalformedLine {
                        line: line_no,
                        reason: format!("score {s:?} is not a finite number"),
                    })?,
            };
            if fields.next().is_some() {
                return Err(LexiconError::MalformedLine {
                    line: line_no,
                    reason: "more than two fields".into(),
                });
            }
            lex.insert(word, score);
        }
        Ok(lex)
    }
}

/// Loads a lexicon file; the lexicon is named after the file stem.
pub fn load_lexicon(path: impl AsRef<Path>, default_score: f64) -> Result<Lexicon, LexiconError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => LexiconError::FileNotFound(path.display().to_string()),
        _ => LexiconError::Io(e),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "lexicon".into());
    Lexicon::parse(name, &content, default_score)
}

const SENTIMENT_DATA: &str = include_str!("../data/sentiment.tsv");
const URGENCY_DATA: &str = include_str!("../data/urgency.tsv");

/// The bundled word-polarity lexicon (scores in [-1, 1], unknown words 0).
pub fn bundled_sentiment() -> Lexicon {
    Lexicon::parse("sentiment", SENTIMENT_DATA, 0.0).expect("bundled sentiment lexicon parses")
}

/// The bundled urgency word list (all scores 1.0).
pub fn bundled_urgency() -> Lexicon {
    Lexicon::parse("urgency", URGENCY_DATA, 0.0).expect("bundled urgency lexicon parses")
}
