//! Stratified cross-validation, macro-F1 scoring, per-facet aggregation and
//! report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};
use crate::features::{
    avg_vectorize, bow_matrix, bow_vectorize, build_vocabulary, embedding_matrix, BowMode,
    EmbeddingStore, FeatureDescriptor, FeatureMatrix, Vocabulary,
};
use crate::inventory::Facet;
use crate::models::{self, LogisticRegressionConfig, TrainedModel};
use crate::resample::{smote, ResampleConfig};
use crate::rng;

/// Mean F1 values closer than this share a win.
const WIN_TIE_EPSILON: f64 = 1e-12;

/// Per-facet fold assignment: `fold_of(facet)[doc]` is the evaluation fold of `doc`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    n_folds: usize,
    seed: u64,
    assignments: BTreeMap<Facet, Vec<usize>>,
}

impl FoldPlan {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn facets(&self) -> impl Iterator<Item = Facet> + '_ {
        self.assignments.keys().copied()
    }

    pub fn fold_of(&self, facet: Facet) -> Option<&[usize]> {
        self.assignments.get(&facet).map(Vec::as_slice)
    }

    /// `(train, test)` document indices for one facet and fold.
    pub fn split(&self, facet: Facet, fold: usize) -> Option<(Vec<usize>, Vec<usize>)> {
        let folds = self.assignments.get(&facet)?;
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..folds.len()).partition(|&i| folds[i] == fold);
        Some((train, test))
    }
}

/// Seeded shuffle, then round-robin over positives followed by negatives, so
/// fold sizes and per-fold positive counts each differ by at most one.
pub fn stratified_assignment<R: rand::Rng>(
    labels: &[bool],
    n_folds: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(rng);
    let (pos, neg): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| labels[i]);
    let mut folds = vec![0; labels.len()];
    for (slot, doc) in pos.into_iter().chain(neg).enumerate() {
        folds[doc] = slot % n_folds;
    }
    folds
}

pub fn make_folds(labels: &[(Facet, Vec<bool>)], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::config("folds", "need at least 2 folds"));
    }
    let mut assignments = BTreeMap::new();
    for (facet, y) in labels {
        if y.len() < n_folds {
            return Err(Error::config(
                "folds",
                format!("{} documents cannot fill {n_folds} folds", y.len()),
            ));
        }
        let mut rng = rng::stream(seed, &format!("folds/{facet}"));
        assignments.insert(*facet, stratified_assignment(y, n_folds, &mut rng));
    }
    Ok(FoldPlan {
        n_folds,
        seed,
        assignments,
    })
}

/// F1 of `positive_class`. With no true positives the score is 0, except
/// when the class is absent from both gold and predictions, which scores 1.
pub fn f1_binary(gold: &[bool], predicted: &[bool], positive_class: bool) -> Result<f64> {
    if gold.len() != predicted.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&g, &p) in gold.iter().zip(predicted) {
        match (g == positive_class, p == positive_class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fnn += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(if fp == 0 && fnn == 0 { 1.0 } else { 0.0 });
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fnn) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean of the positive-class and negative-class F1.
pub fn f1_macro(gold: &[bool], predicted: &[bool]) -> Result<f64> {
    Ok((f1_binary(gold, predicted, true)? + f1_binary(gold, predicted, false)?) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Majority,
    NaiveBayes { alpha: f64 },
    LogisticRegression { config: LogisticRegressionConfig },
}

impl Classifier {
    pub fn train(&self, rows: &[Vec<f64>], labels: &[bool], dim: usize) -> Result<TrainedModel> {
        match self {
            Classifier::Majority => models::train_majority(labels, dim),
            Classifier::NaiveBayes { alpha } => models::train_naive_bayes(rows, labels, *alpha),
            Classifier::LogisticRegression { config } => {
                models::train_logistic_regression(rows, labels, config)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classifier::Majority => "majority",
            Classifier::NaiveBayes { .. } => "naive_bayes",
            Classifier::LogisticRegression { .. } => "logistic_regression",
        }
    }
}

/// Feature inputs with any external resources already loaded.
#[derive(Debug, Clone)]
pub enum FeatureInput {
    None,
    Bow { vocab_size: usize, mode: BowMode },
    Embeddings(Arc<EmbeddingStore>),
}

impl FeatureInput {
    pub fn matrix(&self, corpus: &LabeledCorpus) -> Result<FeatureMatrix> {
        self.build(corpus).map(|(m, _)| m)
    }

    /// The feature matrix plus a descriptor that lets [`vectorize`] repeat
    /// the same transformation on new documents.
    pub fn build(&self, corpus: &LabeledCorpus) -> Result<(FeatureMatrix, FeatureDescriptor)> {
        Ok(match self {
            FeatureInput::None => (FeatureMatrix::empty(corpus.len()), FeatureDescriptor::None),
            FeatureInput::Bow { vocab_size, mode } => {
                let vocab = build_vocabulary(corpus, *vocab_size)?;
                (
                    bow_matrix(corpus, &vocab, *mode),
                    FeatureDescriptor::bow(&vocab, *mode),
                )
            }
            FeatureInput::Embeddings(store) => (
                embedding_matrix(corpus, store),
                FeatureDescriptor::embeddings(store),
            ),
        })
    }
}

/// Featurizes token lists as described by `descriptor`. Embedding features
/// need the same store the model was trained with, checked by fingerprint.
pub fn vectorize(
    descriptor: &FeatureDescriptor,
    documents: &[Vec<String>],
    store: Option<&EmbeddingStore>,
) -> Result<Vec<Vec<f64>>> {
    match descriptor {
        FeatureDescriptor::None => Ok(vec![Vec::new(); documents.len()]),
        FeatureDescriptor::Bow {
            mode, vocabulary, ..
        } => {
            let vocab = Vocabulary::from_tokens(vocabulary)?;
            Ok(documents
                .iter()
                .map(|d| bow_vectorize(d, &vocab, *mode).to_dense(vocab.len()))
                .collect())
        }
        FeatureDescriptor::Embeddings {
            fingerprint,
            flavor,
            ..
        } => {
            let store = store.ok_or_else(|| {
                Error::config(
                    "embeddings",
                    format!("model needs the {flavor} embedding file"),
                )
            })?;
            if store.fingerprint() != *fingerprint {
                return Err(Error::Data(
                    "embedding file differs from the one the model was trained with".into(),
                ));
            }
            Ok(documents.iter().map(|d| avg_vectorize(d, store)).collect())
        }
    }
}

/// One model under evaluation: a name, a feature recipe and a classifier.
#[derive(Debug, Clone)]
pub struct ModelSetup {
    pub name: String,
    pub features: FeatureInput,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_digest: String,
    /// Free-form lines printed in the table header.
    pub notes: Vec<String>,
    /// Wall-clock bounds of the run. Never written to report files, which
    /// must be reproducible byte for byte.
    #[serde(skip)]
    pub started: Option<std::time::SystemTime>,
    #[serde(skip)]
    pub finished: Option<std::time::SystemTime>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetResult {
    pub facet: Facet,
    pub fold_f1: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResult {
    pub name: String,
    pub facets: Vec<FacetResult>,
    pub overall: f64,
    pub wins: usize,
}

impl ModelResult {
    pub fn facet(&self, facet: Facet) -> Option<&FacetResult> {
        self.facets.iter().find(|r| r.facet == facet)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub folds: usize,
    pub facets: Vec<Facet>,
    pub models: Vec<ModelResult>,
    pub provenance: Provenance,
}

impl EvaluationReport {
    /// Aggregates per-fold scores keyed by `(model, facet)`, with models in
    /// the order given by `names`.
    pub fn from_fold_scores(
        names: &[String],
        facets: &[Facet],
        folds: usize,
        scores: &BTreeMap<(usize, Facet), Vec<f64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut models = Vec::with_capacity(names.len());
        for (m, name) in names.iter().enumerate() {
            let mut results = Vec::with_capacity(facets.len());
            for &facet in facets {
                let fold_f1 = scores
                    .get(&(m, facet))
                    .ok_or_else(|| Error::Data(format!("no scores for {name}/{facet}")))?
                    .clone();
                if fold_f1.len() != folds {
                    return Err(Error::Data(format!(
                        "{name}/{facet} has {} fold scores, expected {folds}",
                        fold_f1.len()
                    )));
                }
                let mean = fold_f1.iter().sum::<f64>() / folds as f64;
                results.push(FacetResult {
                    facet,
                    fold_f1,
                    mean,
                });
            }
            let overall = if results.is_empty() {
                0.0
            } else {
                results.iter().map(|r| r.mean).sum::<f64>() / results.len() as f64
            };
            models.push(ModelResult {
                name: name.clone(),
                facets: results,
                overall,
                wins: 0,
            });
        }
        for i in 0..facets.len() {
            let best = models
                .iter()
                .map(|m| m.facets[i].mean)
                .fold(f64::NEG_INFINITY, f64::max);
            for m in models.iter_mut() {
                if best - m.facets[i].mean <= WIN_TIE_EPSILON {
                    m.wins += 1;
                }
            }
        }
        Ok(EvaluationReport {
            folds,
            facets: facets.to_vec(),
            models,
            provenance,
        })
    }

    pub fn model(&self, name: &str) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.name == name)
    }
}

/// Cross-validates every model on every non-degenerate facet of the plan.
///
/// Per cell: split, SMOTE the training rows only, train, predict the held
/// out rows, score macro-F1. Cells may run on `jobs` threads; the report is
/// assembled in `(model, facet, fold)` order regardless.
pub fn run_experiment(
    corpus: &LabeledCorpus,
    setups: &[ModelSetup],
    resample: &ResampleConfig,
    plan: &FoldPlan,
    jobs: usize,
    provenance: Provenance,
) -> Result<EvaluationReport> {
    resample.validate()?;
    if setups.is_empty() {
        return Err(Error::config("models", "no models configured"));
    }
    let facets: Vec<Facet> = plan
        .facets()
        .filter(|f| !corpus.degenerate_facets().contains(f))
        .collect();

    let matrices = setups
        .iter()
        .map(|s| {
            s.features
                .matrix(corpus)
                .map_err(|e| e.context(format!("model {}", s.name)))
        })
        .collect::<Result<Vec<_>>>()?;

    let labels: BTreeMap<Facet, Vec<bool>> =
        facets.iter().map(|&f| (f, corpus.labels_for(f))).collect();
    let cells: Vec<(usize, Facet, usize)> = (0..setups.len())
        .flat_map(|m| {
            facets
                .iter()
                .flat_map(move |&f| (0..plan.n_folds()).map(move |k| (m, f, k)))
        })
        .collect();

    let run_cell = |&(m, facet, fold): &(usize, Facet, usize)| -> Result<f64> {
        let setup = &setups[m];
        let (train, test) = plan
            .split(facet, fold)
            .ok_or_else(|| Error::Data(format!("fold plan has no facet {facet}")))?;
        let y = &labels[&facet];
        let matrix = &matrices[m];
        let cfg = ResampleConfig {
            seed: rng::derive_seed(resample.seed, &format!("smote/{facet}/{fold}")),
            ..*resample
        };
        let train_rows = matrix.select_dense(&train);
        let train_y: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let balanced = smote(&train_rows, &train_y, &cfg)?;
        let model = setup
            .classifier
            .train(&balanced.rows, &balanced.labels, matrix.width())?;
        let predicted = models::predict(&model, &matrix.select_dense(&test))?;
        let gold: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        f1_macro(&gold, &predicted.labels)
    };
    let with_context = |cell: &(usize, Facet, usize)| {
        run_cell(cell).map_err(|e| {
            e.context(format!(
                "model {}, facet {}, fold {}",
                setups[cell.0].name, cell.1, cell.2
            ))
        })
    };

    let results: Vec<Result<f64>> = if jobs <= 1 {
        cells.iter().map(with_context).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))?;
        pool.install(|| cells.par_iter().map(with_context).collect())
    };

    let mut scores: BTreeMap<(usize, Facet), Vec<f64>> = BTreeMap::new();
    for (&(m, facet, _), result) in cells.iter().zip(results) {
        scores.entry((m, facet)).or_default().push(result?);
    }
    let names: Vec<String> = setups.iter().map(|s| s.name.clone()).collect();
    let report =
        EvaluationReport::from_fold_scores(&names, &facets, plan.n_folds(), &scores, provenance)?;
    for m in &report.models {
        info!("{}: overall {:.4}, wins {}", m.name, m.overall, m.wins);
    }
    Ok(report)
}

/// Trains one setup on the whole corpus for `facet`, with SMOTE applied to
/// all of it, and attaches the feature descriptor for later prediction.
pub fn train_facet_model(
    corpus: &LabeledCorpus,
    setup: &ModelSetup,
    facet: Facet,
    resample: &ResampleConfig,
) -> Result<TrainedModel> {
    if corpus.degenerate_facets().contains(&facet) {
        return Err(Error::Data(format!(
            "facet {facet} has a single class in this corpus"
        )));
    }
    let (matrix, descriptor) = setup.features.build(corpus)?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    let cfg = ResampleConfig {
        seed: rng::derive_seed(resample.seed, &format!("smote/{facet}/all")),
        ..*resample
    };
    let balanced = smote(&matrix.select_dense(&all), &corpus.labels_for(facet), &cfg)?;
    let model = setup
        .classifier
        .train(&balanced.rows, &balanced.labels, matrix.width())
        .map_err(|e| e.context(format!("model {}, facet {facet}", setup.name)))?;
    Ok(model.with_features(descriptor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Csv => render_csv(report),
    }
}

fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    for note in &report.provenance.notes {
        let _ = writeln!(out, "# {note}");
    }
    let name_width = report
        .models
        .iter()
        .map(|m| m.name.len())
        .chain(std::iter::once("model".len()))
        .max()
        .unwrap_or(5);
    let mut header = format!("{:<name_width$}  {:>7}  {:>4}", "model", "overall", "wins");
    for facet in Facet::ALL {
        let _ = write!(header, "  {:>7}", facet.short_name());
    }
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", "-".repeat(header.len()));
    for m in &report.models {
        let _ = write!(
            out,
            "{:<name_width$}  {:>7.2}  {:>4}",
            m.name, m.overall, m.wins
        );
        for facet in Facet::ALL {
            match m.facet(facet) {
                Some(r) => {
                    let _ = write!(out, "  {:>7.2}", r.mean);
                }
                None => {
                    let _ = write!(out, "  {:>7}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Per-fold rows, then aggregate rows (`fold = mean`, `facet = overall`,
/// `facet = wins` with `fold = count`), all with columns `model,facet,fold,f1`.
fn render_csv(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "facet", "fold", "f1"])
        .expect("in-memory write");
    for m in &report.models {
        for r in &m.facets {
            for (k, f1) in r.fold_f1.iter().enumerate() {
                w.write_record([&m.name, r.facet.name(), &k.to_string(), &f1.to_string()])
                    .expect("in-memory write");
            }
        }
    }
    for m in &report.models {
        for r in &m.facets {
            w.write_record([&m.name, r.facet.name(), "mean", &r.mean.to_string()])
                .expect("in-memory write");
        }
        w.write_record([&m.name, "overall", "mean", &m.overall.to_string()])
            .expect("in-memory write");
        w.write_record([&m.name, "wins", "count", &m.wins.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Rebuilds a report from the per-fold rows of a CSV written by
/// [`render_report`]; aggregate rows are recomputed and cross-checked.
pub fn parse_report_csv(text: &str) -> Result<EvaluationReport> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut names: Vec<String> = Vec::new();
    let mut facets: Vec<Facet> = Vec::new();
    let mut scores: BTreeMap<(usize, Facet), Vec<f64>> = BTreeMap::new();
    let mut aggregates: Vec<(String, String, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let location = format!("report csv line {}", i + 2);
        let record = record.map_err(|e| Error::parse(&location, e.to_string()))?;
        if record.len() != 4 {
            return Err(Error::parse(&location, "expected 4 columns"));
        }
        let (model, facet, fold, value) = (&record[0], &record[1], &record[2], &record[3]);
        let value: f64 = value
            .parse()
            .map_err(|_| Error::parse(&location, format!("bad number `{value}`")))?;
        if fold == "mean" || fold == "count" {
            aggregates.push((model.to_string(), facet.to_string(), value));
            continue;
        }
        let fold: usize = fold
            .parse()
            .map_err(|_| Error::parse(&location, format!("bad fold `{fold}`")))?;
        let facet: Facet = facet
            .parse()
            .map_err(|e: Error| Error::parse(&location, e.to_string()))?;
        let m = match names.iter().position(|n| n == model) {
            Some(m) => m,
            None => {
                names.push(model.to_string());
                names.len() - 1
            }
        };
        if !facets.contains(&facet) {
            facets.push(facet);
        }
        let entry = scores.entry((m, facet)).or_default();
        if entry.len() != fold {
            return Err(Error::parse(&location, "fold rows out of order"));
        }
        entry.push(value);
    }
    facets.sort();
    let folds = scores.values().map(Vec::len).max().unwrap_or(0);
    let report =
        EvaluationReport::from_fold_scores(&names, &facets, folds, &scores, Provenance::default())?;
    for (model, facet, value) in aggregates {
        let m = report.model(&model).ok_or_else(|| {
            Error::parse(
                "report csv",
                format!("aggregate row for unknown model {model}"),
            )
        })?;
        let expected = match facet.as_str() {
            "overall" => m.overall,
            "wins" => m.wins as f64,
            other => {
                let f: Facet = other.parse()?;
                m.facet(f).map(|r| r.mean).unwrap_or(f64::NAN)
            }
        };
        if (expected - value).abs() > 1e-9 {
            return Err(Error::parse(
                "report csv",
                format!(
                    "aggregate {model}/{facet} = {value} disagrees with fold rows ({expected})"
                ),
            ));
        }
    }
    Ok(report)
}
