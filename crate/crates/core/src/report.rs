//! Aggregated comparison reports and the CSV/JSON files of a run.
//!
//! Every CSV starts with a `#` stamp line carrying the config hash and seed,
//! followed by the header row. Readers in this module skip `#` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::cv::{FoldResult, ScoredDoc};
use crate::eval::{self, ConfusionMatrix, EvalError, MetricSet, RocCurve};
use crate::model::Variant;
use crate::stats::{paired_t_test, wilcoxon_signed_rank, Direction, PValueMethod, PairedSample};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no fold results")]
    Empty,
    #[error("variant {variant} is missing fold {fold}")]
    MissingFold { variant: Variant, fold: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, reason: impl ToString) -> ReportError {
    ReportError::Parse {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Provenance recorded in every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn csv_line(&self) -> String {
        format!(
            "# elm-misinfo config_hash={} seed={}\n",
            self.config_hash, self.seed
        )
    }

    /// Parses a line written by [`Stamp::csv_line`].
    pub fn parse_line(line: &str) -> Option<Stamp> {
        let rest = line.trim().strip_prefix("# elm-misinfo ")?;
        let mut hash = None;
        let mut seed = None;
        for part in rest.split_whitespace() {
            match part.split_once('=') {
                Some(("config_hash", v)) => hash = Some(v.to_string()),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => {}
            }
        }
        Some(Stamp {
            config_hash: hash?,
            seed: seed?,
        })
    }

    /// Reads the stamp from the first line of `path`.
    pub fn read_from(path: &Path) -> Result<Stamp, ReportError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let first = text.lines().next().unwrap_or_default();
        Stamp::parse_line(first)
            .or_else(|| stamp_in_markup(&text))
            .ok_or_else(|| parse_err(path, "missing config stamp"))
    }
}

fn stamp_in_markup(text: &str) -> Option<Stamp> {
    let start = text.find("<!-- elm-misinfo ")?;
    let end = text[start..].find("-->")? + start;
    Stamp::parse_line(&format!("# {}", &text[start + 5..end]))
}

/// Paired tests on per-fold accuracies. Fields are `None` when a test is
/// undefined for the data (see `notes`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub w_plus: Option<f64>,
    pub w_minus: Option<f64>,
    pub w: Option<f64>,
    pub n_eff: Option<usize>,
    pub p_exact_two_sided: Option<f64>,
    pub p_one_sided: Option<f64>,
    pub method: Option<PValueMethod>,
    pub t: Option<f64>,
    pub df: Option<usize>,
    /// One-sided t-test p for "treatment > baseline".
    pub p_t_one_sided: Option<f64>,
    /// One-sided t-test p for "baseline > treatment".
    pub p_t_one_sided_reverse: Option<f64>,
    pub notes: Vec<String>,
}

impl Significance {
    pub fn compute(baseline: &[f64], treatment: &[f64]) -> Significance {
        let mut s = Significance {
            w_plus: None,
            w_minus: None,
            w: None,
            n_eff: None,
            p_exact_two_sided: None,
            p_one_sided: None,
            method: None,
            t: None,
            df: None,
            p_t_one_sided: None,
            p_t_one_sided_reverse: None,
            notes: Vec::new(),
        };
        let sample = match PairedSample::new(baseline.to_vec(), treatment.to_vec()) {
            Ok(p) => p,
            Err(e) => {
                s.notes.push(e.to_string());
                return s;
            }
        };
        match wilcoxon_signed_rank(&sample) {
            Ok(w) => {
                s.w_plus = Some(w.w_plus);
                s.w_minus = Some(w.w_minus);
                s.w = Some(w.w_statistic);
                s.n_eff = Some(w.n_effective);
                s.p_exact_two_sided = Some(w.p_value);
                s.p_one_sided = Some(w.p_one_sided);
                s.method = Some(w.method);
            }
            Err(e) => s.notes.push(format!("wilcoxon: {e}")),
        }
        match (
            paired_t_test(&sample, Direction::TreatmentGreater),
            paired_t_test(&sample, Direction::BaselineGreater),
        ) {
            (Ok(fwd), Ok(rev)) => {
                s.t = Some(fwd.t_statistic);
                s.df = Some(fwd.degrees_of_freedom);
                s.p_t_one_sided = Some(fwd.p_one_sided);
                s.p_t_one_sided_reverse = Some(rev.p_one_sided);
            }
            (Err(e), _) | (_, Err(e)) => s.notes.push(format!("t-test: {e}")),
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub mean: MetricSet,
    pub per_fold: Vec<MetricSet>,
    /// Confusion matrix summed over folds.
    pub confusion: ConfusionMatrix,
}

impl VariantSummary {
    pub fn accuracies(&self) -> Vec<f64> {
        self.per_fold.iter().map(|m| m.accuracy).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: Variant,
    pub treatment: Variant,
    /// `treatment - baseline` on the mean metrics.
    pub delta: MetricSet,
    pub baseline_accuracies: Vec<f64>,
    pub treatment_accuracies: Vec<f64>,
    pub significance: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub variant: Variant,
    pub metrics: MetricSet,
}

/// Headline results reported for the original COVID19-FNIR study
/// (fractions, not percentages).
pub fn reference_values() -> Vec<ReferenceRow> {
    let row = |variant, v| ReferenceRow {
        variant,
        metrics: MetricSet::from_values(v),
    };
    vec![
        row(Variant::Base, [0.9490, 0.9367, 0.9633, 0.9497, 0.9843]),
        row(
            Variant::FeaturesOnly,
            [0.9005, 0.9081, 0.8913, 0.8996, 0.9662],
        ),
        row(Variant::Enhanced, [0.9737, 0.9688, 0.9850, 0.9741, 0.9950]),
        row(Variant::Combined, [0.9937, 0.9888, 0.9980, 0.9941, 0.9980]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub k: usize,
    pub variants: Vec<VariantSummary>,
    pub comparisons: Vec<Comparison>,
    /// The enhanced-vs-base comparison when both ran, else the first one.
    pub significance: Option<Significance>,
    pub reference: Vec<ReferenceRow>,
    /// Wall-clock creation time; the only field allowed to differ between
    /// identical runs.
    pub generated_unix_secs: Option<u64>,
}

/// Pairs to compare: every other variant against base when base ran,
/// otherwise every variant against the first.
fn comparison_pairs(order: &[Variant]) -> Vec<(Variant, Variant)> {
    let baseline = if order.contains(&Variant::Base) {
        Variant::Base
    } else {
        match order.first() {
            Some(&v) => v,
            None => return Vec::new(),
        }
    };
    order
        .iter()
        .filter(|&&v| v != baseline)
        .map(|&v| (baseline, v))
        .collect()
}

impl ComparisonReport {
    /// Aggregates fold results. `variants` fixes the output order; metrics
    /// are recomputed from the stored scores.
    pub fn build(
        folds: &[FoldResult],
        variants: &[Variant],
        k: usize,
        stamp: &Stamp,
    ) -> Result<Self, ReportError> {
        if folds.is_empty() {
            return Err(ReportError::Empty);
        }
        let mut summaries = Vec::new();
        for &variant in variants {
            let mut per_fold = Vec::with_capacity(k);
            let mut confusion = ConfusionMatrix::default();
            for fold in 0..k {
                let r = folds
                    .iter()
                    .find(|r| r.variant == variant && r.fold == fold)
                    .ok_or(ReportError::MissingFold { variant, fold })?;
                let (cm, m) = r.recompute()?;
                confusion.add(&cm);
                per_fold.push(m);
            }
            summaries.push(VariantSummary {
                variant,
                mean: MetricSet::mean(&per_fold).expect("k >= 1"),
                per_fold,
                confusion,
            });
        }
        let find = |v: Variant| {
            summaries
                .iter()
                .find(|s| s.variant == v)
                .expect("summarised")
        };
        let comparisons: Vec<Comparison> = comparison_pairs(variants)
            .into_iter()
            .map(|(b, t)| {
                let (sb, st) = (find(b), find(t));
                Comparison {
                    baseline: b,
                    treatment: t,
                    delta: st.mean.minus(&sb.mean),
                    baseline_accuracies: sb.accuracies(),
                    treatment_accuracies: st.accuracies(),
                    significance: Significance::compute(&sb.accuracies(), &st.accuracies()),
                }
            })
            .collect();
        let significance = comparisons
            .iter()
            .find(|c| c.baseline == Variant::Base && c.treatment == Variant::Enhanced)
            .or_else(|| comparisons.first())
            .map(|c| c.significance.clone());
        let reference = reference_values()
            .into_iter()
            .filter(|r| variants.contains(&r.variant))
            .collect();
        Ok(ComparisonReport {
            schema_version: SCHEMA_VERSION,
            config_hash: stamp.config_hash.clone(),
            seed: stamp.seed,
            k,
            variants: summaries,
            comparisons,
            significance,
            reference,
            generated_unix_secs: None,
        })
    }

    pub fn summary(&self, variant: Variant) -> Option<&VariantSummary> {
        self.variants.iter().find(|s| s.variant == variant)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    /// Metrics as rows, variants as columns, plus improvement columns for
    /// each compared variant, followed by the reference values.
    pub fn to_text_table(&self) -> String {
        let columns: Vec<Variant> = self.variants.iter().map(|s| s.variant).collect();
        let improvements: Vec<&Comparison> = {
            let text_feature: Vec<&Comparison> = self
                .comparisons
                .iter()
                .filter(|c| matches!(c.treatment, Variant::Enhanced | Variant::Combined))
                .collect();
            if text_feature.is_empty() {
                self.comparisons.iter().collect()
            } else {
                text_feature
            }
        };
        let labels = ["Acc", "Prec", "Rec", "F1", "ROC"];
        let pct = |v: f64| format!("{:.2}%", v * 100.0);
        let signed = |v: f64| format!("{:+.2}%", v * 100.0);

        let mut header = vec!["Metric".to_string()];
        header.extend(columns.iter().map(|v| v.to_string()));
        for c in &improvements {
            header.push(if improvements.len() == 1 {
                "Improvement".to_string()
            } else {
                format!("Improvement ({})", c.treatment)
            });
        }
        let mut rows = vec![header];
        for (i, label) in labels.iter().enumerate() {
            let mut row = vec![label.to_string()];
            row.extend(self.variants.iter().map(|s| pct(s.mean.values()[i])));
            row.extend(improvements.iter().map(|c| signed(c.delta.values()[i])));
            rows.push(row);
        }
        let mut out = render_rows(&rows);

        if let Some(sig) = &self.significance {
            out.push('\n');
            if let (Some(w), Some(p)) = (sig.w, sig.p_exact_two_sided) {
                let _ = writeln!(
                    out,
                    "Wilcoxon signed-rank on fold accuracies: W = {w}, p = {p:.6}"
                );
            }
            if let (Some(t), Some(df), Some(p), Some(q)) =
                (sig.t, sig.df, sig.p_t_one_sided, sig.p_t_one_sided_reverse)
            {
                let _ = writeln!(
                    out,
                    "Paired t-test: t = {t:.4}, df = {df}, p(treatment > baseline) = {p:.4}, p(baseline > treatment) = {q:.4}"
                );
            }
            for note in &sig.notes {
                let _ = writeln!(out, "note: {note}");
            }
        }

        if !self.reference.is_empty() {
            let mut rows = vec![{
                let mut h = vec!["Reference".to_string()];
                h.extend(self.reference.iter().map(|r| r.variant.to_string()));
                h
            }];
            for (i, label) in labels.iter().enumerate() {
                let mut row = vec![label.to_string()];
                row.extend(self.reference.iter().map(|r| pct(r.metrics.values()[i])));
                rows.push(row);
            }
            out.push_str("\nReported on COVID19-FNIR (10-fold CV):\n");
            out.push_str(&render_rows(&rows));
        }
        out
    }
}

fn render_rows(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn write_csv(
    path: &Path,
    stamp: &Stamp,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let to_io = |e: csv::Error| io::Error::other(e.to_string());
    w.write_record(header)
        .map_err(to_io)
        .map_err(io_err(path))?;
    for r in rows {
        w.write_record(r).map_err(to_io).map_err(io_err(path))?;
    }
    let body = w
        .into_inner()
        .map_err(|e| io::Error::other(e.to_string()))
        .map_err(io_err(path))?;
    let mut bytes = stamp.csv_line().into_bytes();
    bytes.extend(body);
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    r.records()
        .collect::<Result<_, _>>()
        .map_err(|e| parse_err(path, e))
}

fn field<'r>(path: &Path, rec: &'r csv::StringRecord, i: usize) -> Result<&'r str, ReportError> {
    rec.get(i)
        .ok_or_else(|| parse_err(path, format!("missing column {i}")))
}

fn num<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    i: usize,
) -> Result<T, ReportError> {
    field(path, rec, i)?
        .parse()
        .map_err(|_| parse_err(path, format!("bad number in column {i}")))
}

pub fn scores_file_name(variant: Variant, fold: usize) -> String {
    format!("scores_{variant}_{fold}.csv")
}

pub fn write_scores_csv(
    path: &Path,
    stamp: &Stamp,
    scores: &[ScoredDoc],
) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|s| {
            vec![
                s.doc_id.clone(),
                s.score.to_string(),
                s.label.value().to_string(),
            ]
        })
        .collect();
    write_csv(path, stamp, &["doc_id", "score", "label"], &rows)
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoredDoc>, ReportError> {
    read_csv(path)?
        .iter()
        .map(|rec| {
            let label: u8 = num(path, rec, 2)?;
            Ok(ScoredDoc {
                doc_id: field(path, rec, 0)?.to_string(),
                score: num(path, rec, 1)?,
                label: Label::from_value(label)
                    .ok_or_else(|| parse_err(path, format!("bad label {label}")))?,
            })
        })
        .collect()
}

pub const FOLDS_HEADER: [&str; 7] = ["fold", "variant", "acc", "prec", "rec", "f1", "auc"];

pub fn write_folds_csv(
    path: &Path,
    stamp: &Stamp,
    folds: &[FoldResult],
) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = folds
        .iter()
        .map(|r| {
            let mut row = vec![r.fold.to_string(), r.variant.to_string()];
            row.extend(r.metrics.values().iter().map(f64::to_string));
            row
        })
        .collect();
    write_csv(path, stamp, &FOLDS_HEADER, &rows)
}

/// `(fold, variant, metrics)` rows of a run's `folds.csv`.
pub fn read_folds_csv(path: &Path) -> Result<Vec<(usize, Variant, MetricSet)>, ReportError> {
    read_csv(path)?
        .iter()
        .map(|rec| {
            let variant: Variant = field(path, rec, 1)?
                .parse()
                .map_err(|e: String| parse_err(path, e))?;
            let mut v = [0.0; 5];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = num(path, rec, i + 2)?;
            }
            Ok((num(path, rec, 0)?, variant, MetricSet::from_values(v)))
        })
        .collect()
}

pub fn write_confusion_csv(
    path: &Path,
    stamp: &Stamp,
    folds: &[&FoldResult],
) -> Result<(), ReportError> {
    let mut total = ConfusionMatrix::default();
    let mut rows = Vec::new();
    for r in folds {
        total.add(&r.confusion);
        let c = r.confusion;
        rows.push(vec![
            r.fold.to_string(),
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
        ]);
    }
    rows.push(vec![
        "all".into(),
        total.tp.to_string(),
        total.tn.to_string(),
        total.fp.to_string(),
        total.fn_.to_string(),
    ]);
    write_csv(path, stamp, &["fold", "tp", "tn", "fp", "fn"], &rows)
}

/// ROC over the pooled out-of-fold scores of one variant.
pub fn pooled_roc(folds: &[&FoldResult]) -> Result<RocCurve, ReportError> {
    let scores: Vec<f64> = folds.iter().flat_map(|r| r.score_values()).collect();
    let labels: Vec<Label> = folds.iter().flat_map(|r| r.labels()).collect();
    Ok(eval::roc_curve(&scores, &labels)?)
}

pub fn write_roc_csv(path: &Path, stamp: &Stamp, roc: &RocCurve) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = roc
        .points
        .iter()
        .zip(&roc.thresholds)
        .map(|(&(fpr, tpr), &t)| vec![fpr.to_string(), tpr.to_string(), t.to_string()])
        .collect();
    write_csv(path, stamp, &["fpr", "tpr", "threshold"], &rows)
}

pub fn read_roc_csv(path: &Path) -> Result<RocCurve, ReportError> {
    let mut points = Vec::new();
    let mut thresholds = Vec::new();
    for rec in read_csv(path)? {
        points.push((num(path, &rec, 0)?, num(path, &rec, 1)?));
        thresholds.push(num(path, &rec, 2)?);
    }
    Ok(RocCurve { points, thresholds })
}

/// Writes `report.json`, `folds.csv` and the per-variant score, confusion
/// and ROC files into `dir`.
pub fn write_run_outputs(
    dir: &Path,
    report: &ComparisonReport,
    folds: &[FoldResult],
) -> Result<(), ReportError> {
    let stamp = Stamp {
        config_hash: report.config_hash.clone(),
        seed: report.seed,
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let report_path = dir.join("report.json");
    fs::write(&report_path, report.to_json()).map_err(io_err(&report_path))?;
    write_folds_csv(&dir.join("folds.csv"), &stamp, folds)?;

    let mut by_variant: BTreeMap<Variant, Vec<&FoldResult>> = BTreeMap::new();
    for r in folds {
        by_variant.entry(r.variant).or_default().push(r);
        write_scores_csv(
            &dir.join(scores_file_name(r.variant, r.fold)),
            &stamp,
            &r.scores,
        )?;
    }
    for (variant, mut rs) in by_variant {
        rs.sort_by_key(|r| r.fold);
        write_confusion_csv(&dir.join(format!("confusion_{variant}.csv")), &stamp, &rs)?;
        write_roc_csv(
            &dir.join(format!("roc_{variant}.csv")),
            &stamp,
            &pooled_roc(&rs)?,
        )?;
    }
    Ok(())
}
