use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use e2h::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use e2h::corpus::{self, Corpus, Split, SyntheticDist, TextSample, Vocab};
use e2h::detector::DetectorParams;
use e2h::metrics::{self, ReportCollection, ScoredSet};
use e2h::theory::{self, Cell};
use e2h::trainer;
use e2h::{Error, RunConfig};

use crate::{plots, Common};

pub const CHECKPOINT_FILE: &str = "checkpoint.e2h";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const ECHO_FILE: &str = "resolved_config.txt";

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Integrity(String),
    Verification(String),
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Integrity(_) => 3,
            Failure::Verification(_) => 4,
            Failure::Other(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Integrity(m) | Failure::Verification(m) | Failure::Other(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            Error::Integrity(_) => Failure::Integrity(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionKey {
    #[value(name = "source_model")]
    SourceModel,
    Domain,
    Variant,
    /// Everything in one partition.
    None,
}

impl PartitionKey {
    fn tag(self, s: &TextSample) -> String {
        let tag = match self {
            PartitionKey::SourceModel => s.source_model.clone(),
            PartitionKey::Domain => s.domain.clone(),
            PartitionKey::Variant => s.variant.to_string(),
            PartitionKey::None => "all".into(),
        };
        if tag.is_empty() {
            "untagged".into()
        } else {
            tag
        }
    }
}

fn resolve_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) if !path.exists() => {
            return Err(Failure::Usage(format!("config file {} does not exist", path.display())))
        }
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for assignment in &common.overrides {
        config.apply_override(assignment)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    for &t in &common.fpr {
        if !(0.0..1.0).contains(&t) {
            return Err(Failure::Usage(format!("--fpr must lie in [0,1), got {t}")));
        }
    }
    Ok(config)
}

fn require_file(path: &Path, what: &str) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn load_corpus(path: &Path) -> Result<Corpus, Failure> {
    require_file(path, "corpus")?;
    let corpus = corpus::load_jsonl(path)?;
    log_notices(&corpus);
    Ok(corpus)
}

fn log_notices(corpus: &Corpus) {
    for notice in corpus.notices() {
        log::warn!("{notice}");
    }
}

fn prepare_out(common: &Common) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&common.out)
        .map_err(|e| Failure::Other(format!("cannot create {}: {e}", common.out.display())))?;
    Ok(common.out.clone())
}

/// Writes the resolved configuration, preceded by the command's own
/// arguments as comments, so the file can be fed back through `--config`.
fn write_echo(out: &Path, command: &str, args: &[(&str, String)], config: &RunConfig) -> Outcome {
    let mut text = format!("# command = {command}\n");
    for (k, v) in args {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    text.push_str(&config.to_text());
    write_file(&out.join(ECHO_FILE), text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))
}

fn fpr_list(common: &Common) -> String {
    common.fpr.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

/// Scores `samples`, groups them by `by`, and writes the metrics file (and
/// plots when requested).
fn evaluate(
    common: &Common,
    out: &Path,
    det: &DetectorParams,
    vocab: &Vocab,
    max_len: usize,
    samples: Vec<&TextSample>,
    by: PartitionKey,
) -> Result<ReportCollection, Failure> {
    let scores = trainer::score_samples(det, vocab, max_len, samples.iter().copied())?;
    let mut grouped: BTreeMap<String, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
    for (s, score) in samples.iter().zip(scores) {
        let entry = grouped.entry(by.tag(s)).or_default();
        entry.0.push(score);
        entry.1.push(s.label);
    }
    let mut sets = BTreeMap::new();
    for (name, (scores, labels)) in grouped {
        sets.insert(name, ScoredSet::new(scores, labels)?);
    }
    let report = metrics::report(&sets, &common.fpr, None)?;
    for name in &report.skipped {
        log::warn!("partition `{name}` has a single class and was skipped");
    }
    write_file(&out.join(METRICS_FILE), report.to_json_string().as_bytes())?;
    if common.plots {
        for name in report.partitions.keys() {
            let set = &sets[name];
            let stem = sanitize(name);
            let roc = metrics::roc_curve(set)?;
            write_file(&out.join(format!("roc_{stem}.svg")), plots::roc_svg(name, &roc).as_bytes())?;
            let hist = metrics::score_histogram(set, 20)?;
            write_file(
                &out.join(format!("hist_{stem}.svg")),
                plots::histogram_svg(name, &hist).as_bytes(),
            )?;
        }
    }
    for (name, r) in &report.partitions {
        log::info!("{name}: auroc {:.4} (n_pos {}, n_neg {})", r.auroc, r.n_pos, r.n_neg);
    }
    Ok(report)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn save_history(out: &Path, history: &trainer::TrainHistory) -> Outcome {
    history.write_jsonl(out.join(HISTORY_FILE))?;
    Ok(())
}

pub fn train(common: &Common, corpus_path: &Path, by: PartitionKey) -> Outcome {
    let config = resolve_config(common)?;
    let corpus = load_corpus(corpus_path)?.split(config.train_frac, config.seed)?;
    let out = prepare_out(common)?;
    write_echo(
        &out,
        "train",
        &[("corpus", corpus_path.display().to_string()), ("fpr", fpr_list(common))],
        &config,
    )?;

    let outcome = match trainer::train(&config, &corpus) {
        Err(Error::Diverged { step, history }) => {
            save_history(&out, &history)?;
            return Err(Failure::Other(format!("training diverged at step {step}; history kept")));
        }
        other => other?,
    };
    save_history(&out, &outcome.history)?;
    let supervisor = (config.lambda > 0.0).then(|| outcome.supervisor.clone());
    let ckpt = Checkpoint::new(config.clone(), outcome.vocab.clone(), outcome.detector.clone(), supervisor);
    save_checkpoint(&ckpt, out.join(CHECKPOINT_FILE))?;
    evaluate(
        common,
        &out,
        &outcome.detector,
        &outcome.vocab,
        config.max_len,
        corpus.in_split(Split::Val).collect(),
        by,
    )?;
    Ok(())
}

fn open_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    require_file(path, "checkpoint")?;
    Ok(load_checkpoint(path)?)
}

pub fn eval(common: &Common, ckpt_path: &Path, corpus_path: &Path, by: PartitionKey, all: bool) -> Outcome {
    for &t in &common.fpr {
        if !(0.0..1.0).contains(&t) {
            return Err(Failure::Usage(format!("--fpr must lie in [0,1), got {t}")));
        }
    }
    let ckpt = open_checkpoint(ckpt_path)?;
    let corpus = load_corpus(corpus_path)?;
    let out = prepare_out(common)?;
    write_echo(
        &out,
        "eval",
        &[
            ("checkpoint", ckpt_path.display().to_string()),
            ("corpus", corpus_path.display().to_string()),
            ("samples", if all { "all" } else { "test" }.to_string()),
            ("fpr", fpr_list(common)),
        ],
        &ckpt.config,
    )?;
    let split;
    let samples: Vec<&TextSample> = if all {
        corpus.samples().iter().collect()
    } else {
        split = corpus.split(ckpt.config.train_frac, ckpt.config.seed)?;
        split.in_split(Split::Test).collect()
    };
    evaluate(common, &out, &ckpt.detector, &ckpt.vocab, ckpt.config.max_len, samples, by)?;
    Ok(())
}

pub fn kd(common: &Common, teacher_path: &Path, corpus_path: &Path, by: PartitionKey) -> Outcome {
    let config = resolve_config(common)?;
    let teacher = open_checkpoint(teacher_path)?;
    let corpus = load_corpus(corpus_path)?.split(config.train_frac, config.seed)?;
    let out = prepare_out(common)?;
    write_echo(
        &out,
        "kd",
        &[
            ("teacher", teacher_path.display().to_string()),
            ("corpus", corpus_path.display().to_string()),
            ("fpr", fpr_list(common)),
        ],
        &config,
    )?;
    let outcome = match trainer::kd_train(&teacher.detector, &teacher.vocab, &config, &corpus) {
        Err(Error::Diverged { step, history }) => {
            save_history(&out, &history)?;
            return Err(Failure::Other(format!("distillation diverged at step {step}; history kept")));
        }
        other => other?,
    };
    save_history(&out, &outcome.history)?;
    let ckpt = Checkpoint::new(config.clone(), teacher.vocab.clone(), outcome.student.clone(), None);
    save_checkpoint(&ckpt, out.join(CHECKPOINT_FILE))?;
    evaluate(
        common,
        &out,
        &outcome.student,
        &teacher.vocab,
        config.max_len,
        corpus.in_split(Split::Val).collect(),
        by,
    )?;
    Ok(())
}

pub fn mix(common: &Common, corpus_path: &Path, fraction: f64) -> Outcome {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Failure::Usage(format!("--fraction must lie in [0,1], got {fraction}")));
    }
    let config = resolve_config(common)?;
    let corpus = load_corpus(corpus_path)?;
    let out = prepare_out(common)?;
    write_echo(
        &out,
        "mix",
        &[
            ("corpus", corpus_path.display().to_string()),
            ("fraction", fraction.to_string()),
        ],
        &config,
    )?;
    let mixed = corpus::make_mixed(&corpus, fraction, config.seed)?;
    log_notices(&mixed);
    corpus::write_jsonl(&mixed, out.join("mixed.jsonl"))?;
    Ok(())
}

pub fn synth(common: &Common, human: Vec<f64>, machine: Vec<f64>, length: usize, count: usize, alpha: f64) -> Outcome {
    let config = resolve_config(common)?;
    let args = [
        ("human", join(&human)),
        ("machine", join(&machine)),
        ("length", length.to_string()),
        ("count", count.to_string()),
        ("alpha", alpha.to_string()),
    ];
    let dist = SyntheticDist::new(human, machine).map_err(|e| Failure::Usage(e.to_string()))?;
    let corpus = corpus::gen_synthetic(&dist, length, count, alpha, config.seed).map_err(|e| match e {
        Error::Input(m) => Failure::Usage(m),
        other => other.into(),
    })?;
    log_notices(&corpus);
    let out = prepare_out(common)?;
    write_echo(&out, "synth", &args, &config)?;
    corpus::write_jsonl(&corpus, out.join("synthetic.jsonl"))?;
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn verify_theorems(common: &Common, grid: Option<&Path>, strict: bool) -> Outcome {
    let cells: Vec<Cell> = match grid {
        Some(path) => {
            require_file(path, "grid")?;
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid grid: {e}")))?
        }
        None => theory::default_grid(),
    };
    let out = prepare_out(common)?;
    write_echo(
        &out,
        "verify-theorems",
        &[
            ("grid", grid.map_or("default".into(), |p| p.display().to_string())),
            ("strict", strict.to_string()),
        ],
        &resolve_config(common)?,
    )?;
    let report = theory::run_theorem_suite(&cells).map_err(|e| match e {
        Error::Input(m) | Error::Validation(m) => Failure::Usage(m),
        other => other.into(),
    })?;
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Other(e.to_string()))?;
    json.push('\n');
    write_file(&out.join("theorems.json"), json.as_bytes())?;

    let s = &report.summary;
    println!(
        "cells: {} evaluated, {} skipped; violations: {}",
        s.cells_evaluated,
        s.cells_skipped,
        s.violations.len()
    );
    for v in &s.violations {
        println!("  {v}");
    }
    for skipped in &report.skipped {
        println!(
            "  skipped n={} k={} alpha={}: {}",
            skipped.cell.n, skipped.cell.k, skipped.cell.alpha, skipped.reason
        );
    }
    if !s.passed {
        return Err(Failure::Verification(format!("{} violation(s)", s.violations.len())));
    }
    if strict && !report.skipped.is_empty() {
        return Err(Failure::Verification(format!(
            "{} cell(s) exceed the enumeration budget",
            report.skipped.len()
        )));
    }
    Ok(())
}

pub fn report(common: &Common, paths: &[PathBuf]) -> Outcome {
    let mut keys: Vec<String> = Vec::new();
    let mut rows: Vec<(String, String, metrics::MetricReport)> = Vec::new();
    for path in paths {
        require_file(path, "metrics file")?;
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let collection = ReportCollection::from_json(&value)?;
        let source = path.display().to_string();
        let named = collection
            .partitions
            .into_iter()
            .chain(collection.avg.map(|r| (metrics::AVG_KEY.to_string(), r)));
        for (name, r) in named {
            for k in r.tpr_at_fpr.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
            rows.push((source.clone(), name, r));
        }
    }

    let mut table = String::from("| source | partition | AUROC |");
    for k in &keys {
        table.push_str(&format!(" TPR@FPR={k} |"));
    }
    table.push_str("\n|---|---|---|");
    table.push_str(&"---|".repeat(keys.len()));
    table.push('\n');
    for (source, name, r) in &rows {
        table.push_str(&format!("| {source} | {name} | {:.4} |", r.auroc));
        for k in &keys {
            match r.tpr_at_fpr.get(k) {
                Some(v) => table.push_str(&format!(" {v:.4} |")),
                None => table.push_str(" - |"),
            }
        }
        table.push('\n');
    }
    print!("{table}");
    let out = prepare_out(common)?;
    let sources: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    write_echo(&out, "report", &[("metrics", sources.join(","))], &resolve_config(common)?)?;
    write_file(&out.join("report.md"), table.as_bytes())
}
