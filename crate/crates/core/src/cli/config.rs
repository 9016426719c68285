//! Experiment configuration files.
//!
//! ```toml
//! seed = 7                      # required, here or via --seed
//! folds = 10
//! jobs = 1
//! corpus = "corpus.jsonl"       # paths are relative to this file
//! scoring_key = "key.toml"      # optional, built-in BFI-44 key otherwise
//! normalization = "norm.toml"   # optional, built-in table otherwise
//! out = "out"
//!
//! [smote]
//! k = 5
//! ratio = 1.0
//!
//! [[model]]
//! name = "bow-nb"
//! classifier = "naive_bayes"    # majority | naive_bayes | logistic_regression
//! features = "bow"              # none | bow | embeddings
//! vocab_size = 3000
//! alpha = 1.0
//! ```
//!
//! Embedding models take `embeddings` (a path) and `flavor`; logistic
//! regression takes `l2`, `learning_rate`, `max_epochs` and `tolerance`.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus, AuthorRecord, NormalizationTable};
use crate::error::{Error, Result};
use crate::eval::{Classifier, FeatureInput, ModelSetup};
use crate::features::{load_embeddings, BowMode, EmbeddingStore, Flavor, DEFAULT_VOCAB_SIZE};
use crate::inventory::{load_scoring_key, ScoringKey};
use crate::models::LogisticRegressionConfig;
use crate::resample::ResampleConfig;

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Majority,
    NaiveBayes,
    LogisticRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    #[default]
    None,
    Bow,
    Embeddings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub classifier: ClassifierKind,
    #[serde(default)]
    pub features: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bow_mode: Option<BowMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor: Option<Flavor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl ModelEntry {
    pub fn new(name: &str, classifier: ClassifierKind, features: FeatureKind) -> Self {
        ModelEntry {
            name: name.into(),
            classifier,
            features,
            vocab_size: None,
            bow_mode: None,
            alpha: None,
            embeddings: None,
            flavor: None,
            l2: None,
            learning_rate: None,
            max_epochs: None,
            tolerance: None,
        }
    }

    fn check(&self) -> Result<()> {
        let field = |f: &str| format!("model {}.{f}", self.name);
        let misplaced =
            |f: &str, owner: &str| Error::config(field(f), format!("only applies to {owner}"));
        if self.name.trim().is_empty() || self.name.contains(',') {
            return Err(Error::config(
                "model.name",
                format!("{:?} is not a usable name", self.name),
            ));
        }
        if self.features != FeatureKind::Bow
            && (self.vocab_size.is_some() || self.bow_mode.is_some())
        {
            return Err(misplaced("vocab_size", "bow features"));
        }
        if self.features != FeatureKind::Embeddings
            && (self.embeddings.is_some() || self.flavor.is_some())
        {
            return Err(misplaced("embeddings", "embedding features"));
        }
        if self.classifier != ClassifierKind::NaiveBayes && self.alpha.is_some() {
            return Err(misplaced("alpha", "naive_bayes"));
        }
        let lr_set = [self.l2, self.learning_rate, self.tolerance]
            .iter()
            .any(Option::is_some)
            || self.max_epochs.is_some();
        if self.classifier != ClassifierKind::LogisticRegression && lr_set {
            return Err(misplaced("l2", "logistic_regression"));
        }
        if self.classifier == ClassifierKind::NaiveBayes && self.features == FeatureKind::Embeddings
        {
            return Err(Error::config(
                field("features"),
                "naive_bayes needs non-negative count features",
            ));
        }
        if self.features == FeatureKind::Embeddings {
            if self.embeddings.is_none() {
                return Err(Error::config(field("embeddings"), "missing embedding file"));
            }
            if self.flavor.is_none() {
                return Err(Error::config(field("flavor"), "missing (skip or cbow)"));
            }
        }
        if self.vocab_size == Some(0) {
            return Err(Error::config(field("vocab_size"), "must be positive"));
        }
        Ok(())
    }

    fn lr_config(&self) -> Result<LogisticRegressionConfig> {
        let d = LogisticRegressionConfig::default();
        let cfg = LogisticRegressionConfig {
            l2: self.l2.unwrap_or(d.l2),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
        };
        cfg.validate()
            .map_err(|e| e.context(format!("model {}", self.name)))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteSection {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
}

fn default_k() -> usize {
    ResampleConfig::default().k_neighbors
}

fn default_ratio() -> f64 {
    ResampleConfig::default().target_ratio
}

impl Default for SmoteSection {
    fn default() -> Self {
        SmoteSection {
            k: default_k(),
            ratio: default_ratio(),
        }
    }
}

/// The file as written. Paths are still relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scoring_key: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub smote: SmoteSection,
    #[serde(default, rename = "model")]
    pub models: Vec<ModelEntry>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("experiment config", e.message().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

/// Command-line values that win over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub jobs: Option<usize>,
    pub vocab_size: Option<usize>,
    /// Replaces the embedding file of every embedding model, or only of
    /// those with `flavor` when that is given too.
    pub embeddings: Option<PathBuf>,
    pub flavor: Option<Flavor>,
    pub smote_k: Option<usize>,
    pub smote_ratio: Option<f64>,
    pub out: Option<PathBuf>,
}

/// A validated config with absolute-or-cwd-relative paths and every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub seed: u64,
    pub folds: usize,
    pub jobs: usize,
    pub corpus: PathBuf,
    pub scoring_key: Option<PathBuf>,
    pub normalization: Option<PathBuf>,
    pub out: PathBuf,
    pub smote: SmoteSection,
    pub models: Vec<ModelEntry>,
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ResolvedConfig {
    /// Rebases the file's paths on `base` (the config's directory), applies
    /// overrides and checks everything, including that inputs exist.
    pub fn resolve(file: ExperimentConfig, base: &Path, ov: &Overrides) -> Result<Self> {
        let seed = ov
            .seed
            .or(file.seed)
            .ok_or_else(|| Error::config("seed", "a seed is required (config `seed` or --seed)"))?;
        let mut models = file.models;
        for m in &mut models {
            if let Some(p) = &m.embeddings {
                m.embeddings = Some(rebase(base, p));
            }
            if m.features == FeatureKind::Bow {
                if let Some(v) = ov.vocab_size {
                    m.vocab_size = Some(v);
                }
            }
            if m.features == FeatureKind::Embeddings {
                if let Some(p) = &ov.embeddings {
                    if ov.flavor.is_none() || ov.flavor == m.flavor {
                        m.embeddings = Some(p.clone());
                        if m.flavor.is_none() {
                            m.flavor = ov.flavor;
                        }
                    }
                }
            }
        }
        let resolved = ResolvedConfig {
            seed,
            folds: ov.folds.or(file.folds).unwrap_or(DEFAULT_FOLDS),
            jobs: ov.jobs.or(file.jobs).unwrap_or(1),
            corpus: rebase(base, &file.corpus),
            scoring_key: file.scoring_key.map(|p| rebase(base, &p)),
            normalization: file.normalization.map(|p| rebase(base, &p)),
            out: ov
                .out
                .clone()
                .unwrap_or_else(|| rebase(base, file.out.as_deref().unwrap_or(Path::new("out")))),
            smote: SmoteSection {
                k: ov.smote_k.unwrap_or(file.smote.k),
                ratio: ov.smote_ratio.unwrap_or(file.smote.ratio),
            },
            models,
        };
        resolved.validate()?;
        Ok(resolved)
    }

    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config("folds", "need at least 2 folds"));
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        self.resample().validate()?;
        if self.models.is_empty() {
            return Err(Error::config("model", "no [[model]] entries"));
        }
        let mut names = HashSet::new();
        for m in &self.models {
            m.check()?;
            if !names.insert(m.name.as_str()) {
                return Err(Error::config(
                    "model.name",
                    format!("{} is listed twice", m.name),
                ));
            }
            if m.classifier == ClassifierKind::LogisticRegression {
                m.lr_config()?;
            }
        }
        let mut inputs = vec![("corpus", &self.corpus)];
        inputs.extend(self.scoring_key.iter().map(|p| ("scoring_key", p)));
        inputs.extend(self.normalization.iter().map(|p| ("normalization", p)));
        inputs.extend(
            self.models
                .iter()
                .filter_map(|m| m.embeddings.as_ref().map(|p| ("embeddings", p))),
        );
        for (field, path) in inputs {
            if !path.is_file() {
                return Err(Error::config(
                    field,
                    format!("{} does not exist", path.display()),
                ));
            }
        }
        Ok(())
    }

    pub fn resample(&self) -> ResampleConfig {
        ResampleConfig {
            k_neighbors: self.smote.k,
            target_ratio: self.smote.ratio,
            seed: crate::rng::derive_seed(self.seed, "smote"),
        }
    }

    pub fn load_key(&self) -> Result<ScoringKey> {
        match &self.scoring_key {
            Some(p) => load_scoring_key(p),
            None => Ok(ScoringKey::bfi44_default()),
        }
    }

    pub fn load_normalization(&self) -> Result<NormalizationTable> {
        match &self.normalization {
            Some(p) => NormalizationTable::load(p),
            None => Ok(NormalizationTable::default_table()),
        }
    }

    pub fn load_corpus(&self) -> Result<Vec<AuthorRecord>> {
        load_corpus(&self.corpus)
    }

    /// Loads each distinct embedding file once and builds the model setups.
    pub fn setups(&self) -> Result<Vec<ModelSetup>> {
        let mut stores: HashMap<(PathBuf, Flavor), Arc<EmbeddingStore>> = HashMap::new();
        self.models
            .iter()
            .map(|m| {
                let features = match m.features {
                    FeatureKind::None => FeatureInput::None,
                    FeatureKind::Bow => FeatureInput::Bow {
                        vocab_size: m.vocab_size.unwrap_or(DEFAULT_VOCAB_SIZE),
                        mode: m.bow_mode.unwrap_or_default(),
                    },
                    FeatureKind::Embeddings => {
                        let path = m.embeddings.clone().expect("checked in validate");
                        let flavor = m.flavor.expect("checked in validate");
                        let store = match stores.get(&(path.clone(), flavor)) {
                            Some(s) => s.clone(),
                            None => {
                                let s = Arc::new(load_embeddings(&path, flavor)?);
                                stores.insert((path, flavor), s.clone());
                                s
                            }
                        };
                        FeatureInput::Embeddings(store)
                    }
                };
                let classifier = match m.classifier {
                    ClassifierKind::Majority => Classifier::Majority,
                    ClassifierKind::NaiveBayes => Classifier::NaiveBayes {
                        alpha: m.alpha.unwrap_or(DEFAULT_ALPHA),
                    },
                    ClassifierKind::LogisticRegression => Classifier::LogisticRegression {
                        config: m.lr_config()?,
                    },
                };
                Ok(ModelSetup {
                    name: m.name.clone(),
                    features,
                    classifier,
                })
            })
            .collect()
    }

    /// Every knob with its defaults filled in, as written to the manifest.
    /// Paths are shown as resolved.
    pub fn settings(&self) -> ExperimentConfig {
        let models = self
            .models
            .iter()
            .map(|m| {
                let mut m = m.clone();
                match m.features {
                    FeatureKind::Bow => {
                        m.vocab_size.get_or_insert(DEFAULT_VOCAB_SIZE);
                        m.bow_mode.get_or_insert(BowMode::default());
                    }
                    FeatureKind::Embeddings | FeatureKind::None => {}
                }
                match m.classifier {
                    ClassifierKind::NaiveBayes => {
                        m.alpha.get_or_insert(DEFAULT_ALPHA);
                    }
                    ClassifierKind::LogisticRegression => {
                        let c = m.lr_config().expect("validated");
                        m.l2 = Some(c.l2);
                        m.learning_rate = Some(c.learning_rate);
                        m.max_epochs = Some(c.max_epochs);
                        m.tolerance = Some(c.tolerance);
                    }
                    ClassifierKind::Majority => {}
                }
                m
            })
            .collect();
        ExperimentConfig {
            seed: Some(self.seed),
            folds: Some(self.folds),
            jobs: Some(self.jobs),
            corpus: self.corpus.clone(),
            scoring_key: self.scoring_key.clone(),
            normalization: self.normalization.clone(),
            out: Some(self.out.clone()),
            smote: self.smote,
            models,
        }
    }

    /// SHA-256 over the settings that affect results, with each input file
    /// identified by the hash of its contents rather than its path. `jobs`
    /// and `out` are left out: they do not change the numbers.
    pub fn digest(&self) -> Result<String> {
        let mut settings = self.settings();
        settings.jobs = None;
        settings.out = None;
        let mut inputs = Vec::new();
        let mut hash_file = |p: &mut PathBuf| -> Result<()> {
            let bytes = std::fs::read(&*p).map_err(|e| Error::io(&*p, e))?;
            let h = hex::encode(Sha256::digest(&bytes));
            inputs.push(h.clone());
            *p = PathBuf::from(h);
            Ok(())
        };
        hash_file(&mut settings.corpus)?;
        for p in settings
            .scoring_key
            .iter_mut()
            .chain(settings.normalization.iter_mut())
        {
            hash_file(p)?;
        }
        for m in &mut settings.models {
            if let Some(p) = m.embeddings.as_mut() {
                hash_file(p)?;
            }
        }
        let mut h = Sha256::new();
        h.update(settings.to_toml_string().as_bytes());
        Ok(hex::encode(h.finalize()))
    }
}
