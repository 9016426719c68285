//! The `facetrec` command line.

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use crate::corpus::{
    build_documents, label_records, load_corpus, scan_corpus, write_corpus, LabeledCorpus,
    NormalizationTable,
};
use crate::error::{Error, Result};
use crate::eval::{
    self, make_folds, parse_report_csv, render_report, run_experiment, Provenance, ReportFormat,
};
use crate::features::{load_embeddings, FeatureDescriptor, Flavor};
use crate::inventory::{load_scoring_key, score_inventory, Domain, Facet, ScoringKey};
use crate::models::{predict, TrainedModel};
use crate::synth::{self, SynthConfig, MODERATE_SIGNAL};
use config::{
    ClassifierKind, ExperimentConfig, FeatureKind, ModelEntry, Overrides, ResolvedConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "facetrec",
    version,
    about = "Personality facet recognition from author text"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a corpus file and print summary statistics.
    Validate(ValidateArgs),
    /// Print domain and facet scores for every author as CSV.
    Score(ScoreArgs),
    /// Generate a synthetic corpus, embedding files and an experiment config.
    Synth(SynthArgs),
    /// Run a cross-validated experiment and write report.txt, report.csv and manifest.toml.
    Run(RunArgs),
    /// Render a report.csv as a table or re-emit it as CSV.
    Report(ReportArgs),
    /// Train one configured model on the whole corpus for one facet.
    Train(TrainArgs),
    /// Label a corpus with a trained model.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Corpus in JSON Lines format.
    #[arg(long)]
    corpus: PathBuf,
    /// Scoring key (TOML); the built-in BFI-44 key by default.
    #[arg(long)]
    scoring_key: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Normalization table (TOML); the built-in table by default.
    #[arg(long)]
    normalization: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file; stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    authors: usize,
    /// Share of tokens that are facet marker words.
    #[arg(long, default_value_t = MODERATE_SIGNAL)]
    signal: f64,
    /// Exactly half the authors positive on every facet.
    #[arg(long)]
    balanced: bool,
    #[arg(long, default_value_t = 64)]
    embedding_dim: usize,
    /// Folds written into the generated experiment config.
    #[arg(long, default_value_t = config::DEFAULT_FOLDS)]
    folds: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Embedding file for embedding models (only those of --flavor, if given).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, value_parser = parse_flavor)]
    flavor: Option<Flavor>,
    #[arg(long)]
    smote_k: Option<usize>,
    #[arg(long)]
    smote_ratio: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_flavor(s: &str) -> std::result::Result<Flavor, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_facet(s: &str) -> std::result::Result<Facet, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl OverrideArgs {
    fn overrides(&self, out: Option<PathBuf>) -> Overrides {
        Overrides {
            seed: self.seed,
            folds: self.folds,
            jobs: self.jobs,
            vocab_size: self.vocab_size,
            embeddings: self.embeddings.clone(),
            flavor: self.flavor,
            smote_k: self.smote_k,
            smote_ratio: self.smote_ratio,
            out,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// A report.csv written by `run`.
    csv: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct TrainArgs {
    config: PathBuf,
    /// Name of the `[[model]]` entry to train.
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_facet)]
    facet: Facet,
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Embedding file the model was trained with, for embedding models.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    normalization: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Failures print one `error[class]: message` line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), e.to_string().replace('\n', " "));
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Run(a) => cmd_run(&a.config, &a.overrides.overrides(a.out.clone())).map(|_| ()),
        Command::Report(a) => cmd_report(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn key_from(path: Option<&Path>) -> Result<ScoringKey> {
    path.map_or_else(|| Ok(ScoringKey::bfi44_default()), load_scoring_key)
}

fn table_from(path: Option<&Path>) -> Result<NormalizationTable> {
    path.map_or_else(
        || Ok(NormalizationTable::default_table()),
        NormalizationTable::load,
    )
}

fn label_summary(corpus: &LabeledCorpus) -> String {
    let mut out = format!("{:<16} {:>9} {:>9}\n", "facet", "threshold", "positive");
    for facet in Facet::ALL {
        out.push_str(&format!(
            "{:<16} {:>9.4} {:>9.3}\n",
            facet.name(),
            corpus.threshold(facet),
            corpus.positive_rate(facet)
        ));
    }
    let degenerate: Vec<&str> = corpus
        .degenerate_facets()
        .iter()
        .map(|f| f.name())
        .collect();
    out.push_str(&format!(
        "degenerate facets: {}\n",
        if degenerate.is_empty() {
            "none".to_string()
        } else {
            degenerate.join(", ")
        }
    ));
    out
}

fn cmd_validate(a: &ValidateArgs) -> Result<()> {
    let path = &a.input.corpus;
    let key = key_from(a.input.scoring_key.as_deref())?;
    let table = table_from(a.normalization.as_deref())?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (records, mut problems) = scan_corpus(&text);
    for r in &records {
        if let Err(e) = r.inventory.validate(&key) {
            problems.push(e.context(format!("author {}", r.author_id)));
        }
    }
    for p in &problems {
        eprintln!("{}: {p}", path.display());
    }
    if !problems.is_empty() {
        return Err(Error::Validation(format!(
            "{} problem(s) in {}",
            problems.len(),
            path.display()
        )));
    }
    let posts: usize = records.iter().map(|r| r.posts.len()).sum();
    let docs = build_documents(&records, &table);
    let tokens: usize = docs.iter().map(|d| d.tokens.len()).sum();
    let corpus = label_records(&records, &key, &table)?;
    let mut out = format!(
        "authors: {}\nposts: {posts}\ntokens: {tokens}\nauthors without tokens: {}\n",
        records.len(),
        records.len() - docs.len()
    );
    out.push_str(&label_summary(&corpus));
    emit(None, &out)
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let key = key_from(a.input.scoring_key.as_deref())?;
    let records = load_corpus(&a.input.corpus)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("author_id")
        .chain(Domain::ALL.iter().map(|d| d.name()))
        .chain(Facet::ALL.iter().map(|f| f.name()));
    w.write_record(header).map_err(csv_error)?;
    for r in &records {
        let s = score_inventory(&r.inventory, &key)
            .map_err(|e| e.context(format!("author {}", r.author_id)))?;
        let row = std::iter::once(r.author_id.clone()).chain(
            s.domains
                .iter()
                .chain(s.facets.iter())
                .map(|v| v.to_string()),
        );
        w.write_record(row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    emit(
        a.out.as_deref(),
        &String::from_utf8(bytes).expect("csv output is UTF-8"),
    )
}

fn csv_error(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

/// The config `synth` writes next to its corpus: baseline, BoW + Naive Bayes,
/// and logistic regression on each embedding flavor.
pub fn synth_experiment(seed: u64, folds: usize) -> ExperimentConfig {
    let lr = |name: &str, file: &str, flavor| ModelEntry {
        embeddings: Some(file.into()),
        flavor: Some(flavor),
        ..ModelEntry::new(
            name,
            ClassifierKind::LogisticRegression,
            FeatureKind::Embeddings,
        )
    };
    ExperimentConfig {
        seed: Some(seed),
        folds: Some(folds),
        jobs: None,
        corpus: "corpus.jsonl".into(),
        scoring_key: None,
        normalization: None,
        out: Some("out".into()),
        smote: Default::default(),
        models: vec![
            ModelEntry::new("baseline", ClassifierKind::Majority, FeatureKind::None),
            ModelEntry::new("bow-nb", ClassifierKind::NaiveBayes, FeatureKind::Bow),
            lr("skip-lr", "skip.vec", Flavor::Skip),
            lr("cbow-lr", "cbow.vec", Flavor::Cbow),
        ],
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        seed: a.seed,
        authors: a.authors,
        signal: a.signal,
        balanced: a.balanced,
        embedding_dim: a.embedding_dim,
        ..Default::default()
    };
    let generated = synth::generate(&cfg, &ScoringKey::bfi44_default())?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_corpus(a.out.join("corpus.jsonl"), &generated.records)?;
    generated.skip.write(a.out.join("skip.vec"))?;
    generated.cbow.write(a.out.join("cbow.vec"))?;
    let experiment = synth_experiment(a.seed, a.folds);
    let toml_path = a.out.join("experiment.toml");
    std::fs::write(&toml_path, experiment.to_toml_string())
        .map_err(|e| Error::io(&toml_path, e))?;
    info!(
        "wrote {} authors to {}",
        generated.records.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Manifest {
    format: &'static str,
    version: &'static str,
    digest: String,
    notes: Vec<String>,
    labels: LabelManifest,
    config: ExperimentConfig,
}

#[derive(Serialize)]
struct LabelManifest {
    authors: usize,
    degenerate: Vec<&'static str>,
    thresholds: BTreeMap<&'static str, f64>,
    positive_rates: BTreeMap<&'static str, f64>,
}

fn load_resolved(path: &Path, ov: &Overrides) -> Result<ResolvedConfig> {
    let file = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    ResolvedConfig::resolve(file, base, ov).map_err(|e| e.context(path.display().to_string()))
}

fn load_labeled(cfg: &ResolvedConfig) -> Result<LabeledCorpus> {
    let key = cfg.load_key()?;
    let table = cfg.load_normalization()?;
    label_records(&cfg.load_corpus()?, &key, &table)
}

/// Files written by [`run_config`] and their contents.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub table: String,
    pub csv: String,
}

fn cmd_run(config_path: &Path, ov: &Overrides) -> Result<RunOutput> {
    let output = run_config(config_path, ov)?;
    emit(None, &output.table)?;
    Ok(output)
}

/// Runs the configured experiment and writes report.txt, report.csv and
/// manifest.toml to its output directory.
pub fn run_config(config_path: &Path, ov: &Overrides) -> Result<RunOutput> {
    let cfg = load_resolved(config_path, ov)?;
    let corpus = load_labeled(&cfg)?;
    let setups = cfg.setups()?;
    let labels: Vec<(Facet, Vec<bool>)> = corpus
        .active_facets()
        .into_iter()
        .map(|f| (f, corpus.labels_for(f)))
        .collect();
    let plan = make_folds(&labels, cfg.folds, cfg.seed)?;
    let digest = cfg.digest()?;

    let mut notes = vec![
        format!("facetrec {}, seed {}, config {}", env!("CARGO_PKG_VERSION"), cfg.seed, &digest[..16]),
        format!(
            "{} authors, {}-fold cross-validation stratified per facet, macro-F1 averaged over folds",
            corpus.len(),
            cfg.folds
        ),
        format!(
            "SMOTE k={} ratio={} applied to training folds only",
            cfg.smote.k, cfg.smote.ratio
        ),
    ];
    if !corpus.degenerate_facets().is_empty() {
        let names: Vec<&str> = corpus
            .degenerate_facets()
            .iter()
            .map(|f| f.name())
            .collect();
        notes.push(format!("single-class facets skipped: {}", names.join(", ")));
    }
    let provenance = Provenance {
        seed: cfg.seed,
        config_digest: digest.clone(),
        notes: notes.clone(),
        started: Some(std::time::SystemTime::now()),
        finished: None,
    };
    let mut report = run_experiment(
        &corpus,
        &setups,
        &cfg.resample(),
        &plan,
        cfg.jobs,
        provenance,
    )?;
    report.provenance.finished = Some(std::time::SystemTime::now());

    let manifest = Manifest {
        format: "facetrec-manifest/1",
        version: env!("CARGO_PKG_VERSION"),
        digest,
        notes,
        labels: LabelManifest {
            authors: corpus.len(),
            degenerate: corpus
                .degenerate_facets()
                .iter()
                .map(|f| f.name())
                .collect(),
            thresholds: Facet::ALL
                .iter()
                .map(|&f| (f.name(), corpus.threshold(f)))
                .collect(),
            positive_rates: Facet::ALL
                .iter()
                .map(|&f| (f.name(), corpus.positive_rate(f)))
                .collect(),
        },
        config: cfg.settings(),
    };
    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let table = render_report(&report, ReportFormat::Table);
    let csv = render_report(&report, ReportFormat::Csv);
    let files = [
        ("report.txt", table.clone()),
        ("report.csv", csv.clone()),
        (
            "manifest.toml",
            toml::to_string(&manifest).expect("manifest serializes"),
        ),
    ];
    for (name, text) in files {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    if let (Some(s), Some(f)) = (report.provenance.started, report.provenance.finished) {
        info!(
            "finished in {:.1?}",
            f.duration_since(s).unwrap_or_default()
        );
    }
    Ok(RunOutput {
        out_dir: out.clone(),
        table,
        csv,
    })
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.csv).map_err(|e| Error::io(&a.csv, e))?;
    let report = parse_report_csv(&text).map_err(|e| e.context(a.csv.display().to_string()))?;
    let format = match a.format {
        FormatArg::Table => ReportFormat::Table,
        FormatArg::Csv => ReportFormat::Csv,
    };
    emit(None, &render_report(&report, format))
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = load_resolved(&a.config, &a.overrides.overrides(None))?;
    let index = cfg
        .models
        .iter()
        .position(|m| m.name == a.model)
        .ok_or_else(|| Error::config("model", format!("no [[model]] named {}", a.model)))?;
    let corpus = load_labeled(&cfg)?;
    let setup = cfg.setups()?.swap_remove(index);
    let model = eval::train_facet_model(&corpus, &setup, a.facet, &cfg.resample())?;
    model.save(&a.out)
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let table = table_from(a.normalization.as_deref())?;
    let records = load_corpus(&a.corpus)?;
    let docs = build_documents(&records, &table);
    let descriptor = model.features.clone().ok_or_else(|| {
        Error::Data(format!(
            "{} does not record its features",
            a.model.display()
        ))
    })?;
    let store = match (&descriptor, &a.embeddings) {
        (FeatureDescriptor::Embeddings { flavor, .. }, Some(p)) => {
            Some(load_embeddings(p, *flavor)?)
        }
        _ => None,
    };
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| d.tokens.clone()).collect();
    let rows = eval::vectorize(&descriptor, &tokens, store.as_ref())?;
    let predictions = predict(&model, &rows)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["author_id", "label", "score"])
        .map_err(csv_error)?;
    for ((d, label), score) in docs
        .iter()
        .zip(&predictions.labels)
        .zip(&predictions.scores)
    {
        let label = if *label { "1" } else { "0" };
        w.write_record([d.author_id.as_str(), label, &score.to_string()])
            .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    emit(
        a.out.as_deref(),
        &String::from_utf8(bytes).expect("csv output is UTF-8"),
    )
}
