use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use elm_misinfo::corpus::{load_dataset, stratified_folds, DocumentSet, FoldPlan};
use elm_misinfo::cv::{cross_validate, FoldResult};
use elm_misinfo::digest::{json_hash, sha256_hex};
use elm_misinfo::eval::{self, MetricSet};
use elm_misinfo::features::{FeatureExtractor, ELM_DIM, FEATURE_NAMES};
use elm_misinfo::model::Variant;
use elm_misinfo::report::{self, ComparisonReport, Stamp};
use elm_misinfo::svg;
use elm_misinfo::text::{bundled_sentiment, bundled_urgency, load_lexicon};
use elm_misinfo::train::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{DataArgs, FeaturesArgs, IngestArgs, LexiconArgs, PlotArgs, RunArgs, VerifyArgs};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_TRAINING: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

fn input_error(message: impl ToString) -> CliError {
    CliError {
        code: EXIT_INPUT,
        message: message.to_string(),
    }
}

fn training_error(message: impl ToString) -> CliError {
    CliError {
        code: EXIT_TRAINING,
        message: message.to_string(),
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InputDigest {
    role: String,
    path: PathBuf,
    sha256: String,
}

/// Written next to each command's outputs so `verify` can recheck them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    command: String,
    config_hash: String,
    seed: u64,
    inputs: Vec<InputDigest>,
    config: Value,
    outputs: Vec<String>,
}

impl Manifest {
    fn file_name(command: &str) -> String {
        format!("{command}_manifest.json")
    }

    fn new(command: &str, seed: u64, inputs: Vec<InputDigest>, config: Value) -> Manifest {
        let mut m = Manifest {
            command: command.to_string(),
            config_hash: String::new(),
            seed,
            inputs,
            config,
            outputs: Vec::new(),
        };
        m.config_hash = m.compute_hash();
        m
    }

    /// Hash over the command, seed, input contents and settings. Paths are
    /// excluded so moving the inputs does not change it.
    fn compute_hash(&self) -> String {
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|i| json!({"role": i.role, "sha256": i.sha256}))
            .collect();
        json_hash(&json!({
            "command": self.command,
            "seed": self.seed,
            "inputs": inputs,
            "config": self.config,
        }))
    }

    fn stamp(&self) -> Stamp {
        Stamp {
            config_hash: self.config_hash.clone(),
            seed: self.seed,
        }
    }

    fn write(&self, dir: &Path) -> CliResult {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write_file(&dir.join(Self::file_name(&self.command)), json.as_bytes())
    }

    fn read(path: &Path) -> CliResult<Manifest> {
        let text = fs::read_to_string(path)
            .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir)
        .map_err(|e| input_error(format!("cannot create {}: {e}", dir.display())))
}

fn digest_file(role: &str, path: &Path) -> CliResult<InputDigest> {
    let bytes = fs::read(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok(InputDigest {
        role: role.to_string(),
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    })
}

fn load_corpus(data: &DataArgs) -> CliResult<(DocumentSet, Vec<InputDigest>)> {
    let set = load_dataset(&data.true_csv, &data.fake_csv).map_err(input_error)?;
    let digests = vec![
        digest_file("true_csv", &data.true_csv)?,
        digest_file("fake_csv", &data.fake_csv)?,
    ];
    Ok((set, digests))
}

fn load_extractor(
    args: &LexiconArgs,
    digests: &mut Vec<InputDigest>,
) -> CliResult<FeatureExtractor> {
    let sentiment = match &args.sentiment_lexicon {
        Some(p) => {
            digests.push(digest_file("sentiment_lexicon", p)?);
            load_lexicon(p, 0.0).map_err(input_error)?
        }
        None => bundled_sentiment(),
    };
    let urgency = match &args.urgency_lexicon {
        Some(p) => {
            digests.push(digest_file("urgency_lexicon", p)?);
            load_lexicon(p, 0.0).map_err(input_error)?
        }
        None => bundled_urgency(),
    };
    Ok(FeatureExtractor::new(sentiment, urgency))
}

fn csv_bytes(
    stamp: &Stamp,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(stamp.csv_line().into_bytes());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn make_plan(set: &DocumentSet, k: usize, seed: u64) -> CliResult<FoldPlan> {
    stratified_folds(set, k, seed).map_err(input_error)
}

pub fn ingest(args: &IngestArgs) -> CliResult {
    let (set, inputs) = load_corpus(&args.data)?;
    let plan = make_plan(&set, args.k, args.seed)?;
    let mut manifest = Manifest::new("ingest", args.seed, inputs, json!({"k": args.k}));
    let stamp = manifest.stamp();

    let folds = csv_bytes(
        &stamp,
        &["doc_id", "label", "fold"],
        set.documents().iter().zip(&plan.assignments).map(|(d, f)| {
            vec![
                d.id().to_string(),
                d.label().value().to_string(),
                f.to_string(),
            ]
        }),
    );
    let (n_true, n_fake) = set.class_counts();
    let summary = json!({
        "schema_version": report::SCHEMA_VERSION,
        "config_hash": stamp.config_hash,
        "seed": stamp.seed,
        "k": args.k,
        "documents": set.len(),
        "true_count": n_true,
        "fake_count": n_fake,
        "fake_fraction": n_fake as f64 / set.len().max(1) as f64,
        "dropped_rows": set.dropped_rows(),
        "empty_after_cleaning": set.empty_after_cleaning(),
        "fold_sizes": plan.fold_sizes(),
    });

    create_dir(&args.out)?;
    write_file(&args.out.join("folds.csv"), &folds)?;
    let summary = serde_json::to_string_pretty(&summary).expect("json") + "\n";
    write_file(&args.out.join("corpus_summary.json"), summary.as_bytes())?;
    manifest.outputs = vec!["folds.csv".into(), "corpus_summary.json".into()];
    manifest.write(&args.out)?;
    println!(
        "documents={} true={} fake={} dropped_rows={} k={} folds={}",
        set.len(),
        n_true,
        n_fake,
        set.dropped_rows(),
        args.k,
        args.out.join("folds.csv").display()
    );
    Ok(())
}

pub fn features(args: &FeaturesArgs) -> CliResult {
    let (set, mut inputs) = load_corpus(&args.data)?;
    let extractor = load_extractor(&args.lexicons, &mut inputs)?;
    let mut manifest = Manifest::new(
        "features",
        args.seed,
        inputs,
        json!({"features": FEATURE_NAMES}),
    );
    let stamp = manifest.stamp();

    let mut header = vec!["doc_id", "label"];
    header.extend(FEATURE_NAMES);
    let rows = set.documents().iter().map(|d| {
        let v = extractor.elm_vector(d);
        let mut row = vec![d.id().to_string(), d.label().value().to_string()];
        row.extend(v.values.iter().map(f64::to_string));
        row
    });
    let bytes = csv_bytes(&stamp, &header, rows);
    debug_assert_eq!(header.len(), ELM_DIM + 2);

    create_dir(&args.out)?;
    write_file(&args.out.join("features.csv"), &bytes)?;
    manifest.outputs = vec!["features.csv".into()];
    manifest.write(&args.out)?;
    println!(
        "documents={} features={}",
        set.len(),
        args.out.join("features.csv").display()
    );
    Ok(())
}

fn parse_variants(names: &[String]) -> CliResult<Vec<Variant>> {
    let mut out: Vec<Variant> = Vec::new();
    for n in names.iter().filter(|n| !n.trim().is_empty()) {
        let v: Variant = n.parse().map_err(input_error)?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(input_error("no variants given"));
    }
    Ok(out)
}

fn run_configs(args: &RunArgs, variants: &[Variant]) -> CliResult<Vec<TrainConfig>> {
    variants
        .iter()
        .map(|&variant| {
            let c = TrainConfig {
                variant,
                epochs: args.epochs,
                batch_size: args.batch_size,
                learning_rate: args.learning_rate,
                early_stop_patience: (args.patience > 0).then_some(args.patience),
                seed: args.seed,
                max_seq_len: args.max_seq_len,
                ..TrainConfig::default()
            };
            c.validate().map_err(input_error)?;
            Ok(c)
        })
        .collect()
}

pub fn run(args: &RunArgs) -> CliResult {
    let variants = parse_variants(&args.variants)?;
    let configs = run_configs(args, &variants)?;
    let (set, mut inputs) = load_corpus(&args.data)?;
    let extractor = load_extractor(&args.lexicons, &mut inputs)?;
    let plan = make_plan(&set, args.k, args.seed)?;
    let mut manifest = Manifest::new(
        "run",
        args.seed,
        inputs,
        json!({"k": args.k, "variants": variants, "train": configs}),
    );
    let stamp = manifest.stamp();

    let jobs = args.jobs.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let quiet = args.quiet;
    let progress = move |fold: usize, variant: Variant, r: &elm_misinfo::train::EpochRecord| {
        if !quiet {
            println!("fold={fold} variant={variant} {}", r.to_kv_line());
        }
    };
    let folds = cross_validate(&set, &plan, &configs, &extractor, jobs, &progress)
        .map_err(training_error)?;
    let mut report =
        ComparisonReport::build(&folds, &variants, args.k, &stamp).map_err(training_error)?;
    report.generated_unix_secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());

    create_dir(&args.out)?;
    report::write_run_outputs(&args.out, &report, &folds).map_err(input_error)?;
    manifest.outputs = run_output_names(&folds);
    if args.plots {
        manifest.outputs.extend(render_plots(&args.out, &stamp)?);
    }
    manifest.write(&args.out)?;
    print!("{}", report.to_text_table());
    Ok(())
}

fn run_output_names(folds: &[FoldResult]) -> Vec<String> {
    let mut names = vec!["report.json".to_string(), "folds.csv".to_string()];
    let mut variants: Vec<Variant> = Vec::new();
    for r in folds {
        names.push(report::scores_file_name(r.variant, r.fold));
        if !variants.contains(&r.variant) {
            variants.push(r.variant);
        }
    }
    for v in variants {
        names.push(format!("confusion_{v}.csv"));
        names.push(format!("roc_{v}.csv"));
    }
    names
}

/// Writes both plots into `dir`; returns the file names.
fn render_plots(dir: &Path, stamp: &Stamp) -> CliResult<Vec<String>> {
    let mut curves = Vec::new();
    for v in Variant::ALL {
        let path = dir.join(format!("roc_{v}.csv"));
        if !path.exists() {
            continue;
        }
        let curve = report::read_roc_csv(&path).map_err(input_error)?;
        if curve.points.len() < 2 {
            return Err(input_error(format!(
                "{}: no ROC points for {v}",
                path.display()
            )));
        }
        let auc = eval::auc(&curve);
        curves.push((v, curve, auc));
    }
    if curves.is_empty() {
        return Err(input_error(format!(
            "{}: no roc_<variant>.csv files",
            dir.display()
        )));
    }

    let folds_path = dir.join("folds.csv");
    let rows = report::read_folds_csv(&folds_path).map_err(input_error)?;
    let mut means: Vec<(Variant, MetricSet)> = Vec::new();
    for v in Variant::ALL {
        let sets: Vec<MetricSet> = rows.iter().filter(|r| r.1 == v).map(|r| r.2).collect();
        if let Some(m) = MetricSet::mean(&sets) {
            means.push((v, m));
        }
    }
    if means.is_empty() {
        return Err(input_error(format!(
            "{}: no fold rows",
            folds_path.display()
        )));
    }
    let baseline = if means.iter().any(|m| m.0 == Variant::Base) {
        Variant::Base
    } else {
        means[0].0
    };
    let base_mean = means
        .iter()
        .find(|m| m.0 == baseline)
        .expect("baseline present")
        .1;
    let deltas: Vec<(Variant, MetricSet)> = means
        .iter()
        .filter(|m| m.0 != baseline)
        .map(|&(v, m)| (v, m.minus(&base_mean)))
        .collect();

    write_file(
        &dir.join("roc.svg"),
        svg::roc_svg(&curves, stamp).as_bytes(),
    )?;
    write_file(
        &dir.join("improvement.svg"),
        svg::improvement_svg(&deltas, baseline, stamp).as_bytes(),
    )?;
    Ok(vec!["roc.svg".into(), "improvement.svg".into()])
}

pub fn plot(args: &PlotArgs) -> CliResult {
    let manifest_path = args.out.join(Manifest::file_name("run"));
    let folds_path = args.out.join("folds.csv");
    if !folds_path.exists() {
        return Err(input_error(format!(
            "{}: not a run directory (no folds.csv)",
            args.out.display()
        )));
    }
    let stamp = Stamp::read_from(&folds_path).map_err(input_error)?;
    let names = render_plots(&args.out, &stamp)?;
    if manifest_path.exists() {
        let mut m = Manifest::read(&manifest_path)?;
        for n in names {
            if !m.outputs.contains(&n) {
                m.outputs.push(n);
            }
        }
        m.write(&args.out)?;
    }
    println!(
        "wrote {} and {}",
        args.out.join("roc.svg").display(),
        args.out.join("improvement.svg").display()
    );
    Ok(())
}

fn output_stamp(path: &Path) -> Result<Stamp, String> {
    if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_str(&fs::read_to_string(path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let hash = v
            .get("config_hash")
            .and_then(Value::as_str)
            .ok_or("no config_hash field")?;
        let seed = v
            .get("seed")
            .and_then(Value::as_u64)
            .ok_or("no seed field")?;
        Ok(Stamp {
            config_hash: hash.to_string(),
            seed,
        })
    } else {
        Stamp::read_from(path).map_err(|e| e.to_string())
    }
}

/// Recomputes per-fold metrics from the score files and compares them with
/// folds.csv.
fn check_run_scores(dir: &Path) -> Result<(), String> {
    let rows = report::read_folds_csv(&dir.join("folds.csv")).map_err(|e| e.to_string())?;
    for (fold, variant, stored) in rows {
        let scores = report::read_scores_csv(&dir.join(report::scores_file_name(variant, fold)))
            .map_err(|e| e.to_string())?;
        let r = FoldResult::from_scores(fold, variant, scores, Vec::new(), 0, String::new())
            .map_err(|e| e.to_string())?;
        if r.metrics != stored {
            return Err(format!("fold {fold} {variant}: metrics differ from scores"));
        }
    }
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CliResult {
    let mut manifests = Vec::new();
    for cmd in ["ingest", "features", "run"] {
        let p = args.out.join(Manifest::file_name(cmd));
        if p.exists() {
            manifests.push(Manifest::read(&p)?);
        }
    }
    if manifests.is_empty() {
        return Err(input_error(format!(
            "{}: no manifest files found",
            args.out.display()
        )));
    }
    let mut problems = Vec::new();
    for m in &manifests {
        let computed = m.compute_hash();
        if computed != m.config_hash {
            problems.push(format!(
                "{}: recorded config hash does not match its settings",
                m.command
            ));
        }
        for input in &m.inputs {
            match fs::read(&input.path) {
                Ok(bytes) if sha256_hex(&bytes) == input.sha256 => {}
                Ok(_) => problems.push(format!(
                    "{}: input {} changed",
                    m.command,
                    input.path.display()
                )),
                Err(e) => problems.push(format!(
                    "{}: input {}: {e}",
                    m.command,
                    input.path.display()
                )),
            }
        }
        let expected = m.stamp();
        for name in &m.outputs {
            match output_stamp(&args.out.join(name)) {
                Ok(s) if s == expected => {}
                Ok(s) => problems.push(format!(
                    "{name}: stamped config_hash={} seed={}, manifest has config_hash={} seed={}",
                    s.config_hash, s.seed, expected.config_hash, expected.seed
                )),
                Err(e) => problems.push(format!("{name}: {e}")),
            }
        }
        if m.command == "run" {
            if let Err(e) = check_run_scores(&args.out) {
                problems.push(e);
            }
        }
        println!(
            "checked {} ({} outputs) config_hash={}",
            m.command,
            m.outputs.len(),
            m.config_hash
        );
    }
    if problems.is_empty() {
        println!("ok");
        Ok(())
    } else {
        for p in &problems {
            println!("mismatch: {p}");
        }
        Err(input_error(format!(
            "{} verification problem(s)",
            problems.len()
        )))
    }
}
