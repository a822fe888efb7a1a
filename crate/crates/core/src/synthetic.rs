//! Seeded toy corpora with controllable content and cue signals.
//!
//! Each document is a few short sentences of neutral filler words. Content
//! signal comes from class-specific marker words. Cue signal comes from
//! `!!` sentence endings, shorter sentences and all-caps words. The text
//! path cannot see these: cleaning lowercases text and tokenization drops
//! punctuation.

use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, DocumentSet, SourceFile};

const FILLER: &[&str] = &[
    "the", "a", "of", "in", "on", "for", "with", "from", "about", "this", "that", "city", "people",
    "week", "state", "data", "public", "number", "water", "river", "table", "paper", "office",
    "county", "agency", "update", "clinic", "survey", "report", "group", "area", "road", "school",
    "market", "region", "team", "staff", "plan", "site", "center", "board", "line", "level",
    "field", "local", "time", "year", "day", "case", "note",
];

/// Class markers for fake documents.
pub const FAKE_MARKERS: &[&str] = &["garlic", "bleach", "vapor", "onion", "copper", "ginger"];
/// Class markers for true documents.
pub const TRUE_MARKERS: &[&str] = &["trial", "cohort", "dosage", "sample", "review", "panel"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub docs_per_class: usize,
    /// Filler words per document (before markers are inserted).
    pub words: usize,
    /// Marker slots per document.
    pub marker_slots: usize,
    /// Probability that a slot holds a marker of the document's own class.
    pub marker_prob: f64,
    /// Probability that a slot holds a marker of the other class.
    pub marker_noise: f64,
    /// Probability that a fake document carries the shouting cues.
    pub cue_prob: f64,
    /// Probability that a true document carries the shouting cues.
    pub cue_noise: f64,
    /// Words upper-cased in a document that carries the cues.
    pub shout_words: usize,
    /// Words per sentence in documents that carry the cues (others use 5).
    pub cue_sentence_words: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            docs_per_class: 300,
            words: 10,
            marker_slots: 2,
            marker_prob: 0.5,
            marker_noise: 0.05,
            cue_prob: 0.8,
            cue_noise: 0.15,
            shout_words: 1,
            cue_sentence_words: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub true_texts: Vec<String>,
    pub fake_texts: Vec<String>,
}

fn render(
    words: &mut [String],
    cues: bool,
    config: &SyntheticConfig,
    rng: &mut ChaCha8Rng,
) -> String {
    let shout_words = config.shout_words;
    if cues {
        let picks = rand::seq::index::sample(rng, words.len(), shout_words.min(words.len()));
        for i in picks {
            words[i] = words[i].to_uppercase();
        }
    }
    let end = if cues { "!!" } else { "." };
    let mut out = String::new();
    let per_sentence = if cues {
        config.cue_sentence_words.max(1)
    } else {
        5
    };
    for (n, sentence) in words.chunks(per_sentence).enumerate() {
        if n > 0 {
            out.push(' ');
        }
        let mut s = sentence.join(" ");
        if let Some(first) = s.get(0..1) {
            if !sentence[0].chars().all(|c| c.is_uppercase()) {
                s = first.to_uppercase() + &s[1..];
            }
        }
        out.push_str(&s);
        out.push_str(end);
    }
    out
}

fn document(config: &SyntheticConfig, fake: bool, rng: &mut ChaCha8Rng) -> String {
    let (own, other) = if fake {
        (FAKE_MARKERS, TRUE_MARKERS)
    } else {
        (TRUE_MARKERS, FAKE_MARKERS)
    };
    let mut words: Vec<String> = (0..config.words)
        .map(|_| FILLER.choose(rng).expect("filler").to_string())
        .collect();
    for _ in 0..config.marker_slots {
        let roll: f64 = rng.gen();
        let marker = if roll < config.marker_prob {
            own.choose(rng)
        } else if roll < config.marker_prob + config.marker_noise {
            other.choose(rng)
        } else {
            None
        };
        if let Some(m) = marker {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, m.to_string());
        }
    }
    let cues = rng.gen_bool(if fake {
        config.cue_prob
    } else {
        config.cue_noise
    });
    render(&mut words, cues, config, rng)
}

impl SyntheticCorpus {
    pub fn generate(config: &SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut true_texts = Vec::with_capacity(config.docs_per_class);
        let mut fake_texts = Vec::with_capacity(config.docs_per_class);
        for _ in 0..config.docs_per_class {
            true_texts.push(document(config, false, &mut rng));
            fake_texts.push(document(config, true, &mut rng));
        }
        SyntheticCorpus {
            true_texts,
            fake_texts,
        }
    }

    /// Documents with the same ids [`crate::corpus::load_dataset`] assigns.
    pub fn to_document_set(&self) -> DocumentSet {
        let docs = self
            .true_texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("true-{}", i + 1), t.clone(), SourceFile::TrueNews))
            .chain(self.fake_texts.iter().enumerate().map(|(i, t)| {
                Document::new(format!("fake-{}", i + 1), t.clone(), SourceFile::FakeNews)
            }))
            .collect();
        DocumentSet::new(docs)
    }

    /// Writes the two classes as single-column `text` CSV files.
    pub fn write_csv(
        &self,
        true_path: impl AsRef<Path>,
        fake_path: impl AsRef<Path>,
    ) -> io::Result<()> {
        for (path, texts) in [
            (true_path.as_ref(), &self.true_texts),
            (fake_path.as_ref(), &self.fake_texts),
        ] {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["text"])?;
            for t in texts {
                w.write_record([t])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}
