//! Document featurization: bag-of-words counts over a frequency-ranked
//! vocabulary, and occurrence-weighted averages of pre-trained word vectors.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::debug;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};
use crate::rng;

/// Default vocabulary size for bag-of-words features.
pub const DEFAULT_VOCAB_SIZE: usize = 3000;
/// Default embedding dimension.
pub const DEFAULT_EMBEDDING_DIM: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `size` most frequent tokens, ties broken by ascending token.
    pub fn build<'a, I>(documents: I, size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if size == 0 {
            return Err(Error::config("vocab_size", "must be at least 1"));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut any = false;
        for doc in documents {
            any = true;
            for token in doc {
                *counts.entry(token.as_str()).or_default() += 1;
            }
        }
        if !any || counts.is_empty() {
            return Err(Error::Data(
                "cannot build a vocabulary from an empty corpus".into(),
            ));
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(size);
        Ok(Self::from_entries(
            ranked
                .into_iter()
                .map(|(t, c)| (t.to_string(), c))
                .collect(),
        ))
    }

    fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i))
            .collect();
        Vocabulary { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
}

pub fn build_vocabulary(corpus: &LabeledCorpus, vocab_size: usize) -> Result<Vocabulary> {
    Vocabulary::build(
        corpus.documents.iter().map(|d| d.tokens.as_slice()),
        vocab_size,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BowMode {
    /// Raw occurrence counts.
    #[default]
    Counts,
    /// 1 if the token occurs at all.
    Binary,
}

/// A sparse row: strictly increasing column indices with their values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut row = vec![0.0; width];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            row[i] = v;
        }
        row
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn bow_vectorize(tokens: &[String], vocab: &Vocabulary, mode: BowMode) -> SparseRow {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for token in tokens {
        if let Some(col) = vocab.column(token) {
            let entry = counts.entry(col).or_default();
            *entry = match mode {
                BowMode::Counts => *entry + 1.0,
                BowMode::Binary => 1.0,
            };
        }
    }
    let mut pairs: Vec<(usize, f64)> = counts.into_iter().collect();
    pairs.sort_unstable_by_key(|p| p.0);
    let (indices, values) = pairs.into_iter().unzip();
    SparseRow { indices, values }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Sparse(Vec<SparseRow>),
    Dense(Vec<Vec<f64>>),
}

/// Feature rows aligned with document order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    width: usize,
    storage: Storage,
}

impl FeatureMatrix {
    pub fn sparse(width: usize, rows: Vec<SparseRow>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.indices.len() != row.values.len()
                || row.indices.windows(2).any(|w| w[0] >= w[1])
                || row.indices.last().is_some_and(|&i| i >= width)
            {
                return Err(Error::Data(format!("sparse row {r} is malformed")));
            }
            check_finite(&row.values, r)?;
        }
        Ok(FeatureMatrix {
            width,
            storage: Storage::Sparse(rows),
        })
    }

    pub fn dense(width: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Dimension {
                    expected: width,
                    actual: row.len(),
                });
            }
            check_finite(row, r)?;
        }
        Ok(FeatureMatrix {
            width,
            storage: Storage::Dense(rows),
        })
    }

    /// `rows` documents with no features.
    pub fn empty(rows: usize) -> Self {
        FeatureMatrix {
            width: 0,
            storage: Storage::Dense(vec![Vec::new(); rows]),
        }
    }

    pub fn rows(&self) -> usize {
        match &self.storage {
            Storage::Sparse(r) => r.len(),
            Storage::Dense(r) => r.len(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        match &self.storage {
            Storage::Sparse(r) => r[i].to_dense(self.width),
            Storage::Dense(r) => r[i].clone(),
        }
    }

    /// Dense copies of the selected rows, in the given order.
    pub fn select_dense(&self, indices: &[usize]) -> Vec<Vec<f64>> {
        indices.iter().map(|&i| self.dense_row(i)).collect()
    }

    pub fn sparse_rows(&self) -> Option<&[SparseRow]> {
        match &self.storage {
            Storage::Sparse(r) => Some(r),
            Storage::Dense(_) => None,
        }
    }
}

fn check_finite(values: &[f64], row: usize) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("row {row} has a non-finite entry")));
    }
    Ok(())
}

pub fn bow_matrix(corpus: &LabeledCorpus, vocab: &Vocabulary, mode: BowMode) -> FeatureMatrix {
    let rows = corpus
        .documents
        .iter()
        .map(|d| bow_vectorize(&d.tokens, vocab, mode))
        .collect();
    FeatureMatrix::sparse(vocab.len(), rows).expect("bag-of-words rows are well formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Skip,
    Cbow,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::Skip => "skip",
            Flavor::Cbow => "cbow",
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(Flavor::Skip),
            "cbow" => Ok(Flavor::Cbow),
            other => Err(Error::config(
                "flavor",
                format!("expected skip or cbow, got `{other}`"),
            )),
        }
    }
}

/// Word vectors keyed by token, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    flavor: Flavor,
    source: String,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, flavor: Flavor, source: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config(
                "dim",
                "embedding dimension must be at least 1",
            ));
        }
        Ok(EmbeddingStore {
            dim,
            flavor,
            source: source.into(),
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: &[f32]) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if self.index.contains_key(&token) {
            return Err(Error::Data(format!("duplicate token `{token}`")));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Writes word2vec text format with a `count dim` header.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "{} {}", self.len(), self.dim).map_err(io)?;
        for (i, token) in self.tokens.iter().enumerate() {
            write!(out, "{token}").map_err(io)?;
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {v}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Reads a word2vec text file: optional `count dim` header, then one
/// `token v1 ... vd` line per token.
pub fn load_embeddings(path: impl AsRef<Path>, expected_flavor: Flavor) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut store: Option<EmbeddingStore> = None;
    let mut declared: Option<(usize, usize)> = None;
    let source = path.display().to_string();

    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let location = format!("{source}:{}", i + 1);
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 {
            if let (Ok(count), Ok(dim)) = (fields[0].parse(), fields[1].parse()) {
                declared = Some((count, dim));
                store = Some(
                    EmbeddingStore::new(dim, expected_flavor, &source)
                        .map_err(|e| e.context(&location))?,
                );
                continue;
            }
        }
        let (token, values) = fields.split_first().expect("non-empty");
        let vector = values
            .iter()
            .map(|s| match s.parse::<f32>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(
                    &location,
                    format!("bad vector component `{s}`"),
                )),
            })
            .collect::<Result<Vec<f32>>>()?;
        let store = match &mut store {
            Some(s) => s,
            None => store.insert(
                EmbeddingStore::new(vector.len(), expected_flavor, &source)
                    .map_err(|e| e.context(&location))?,
            ),
        };
        if vector.len() != store.dim {
            return Err(Error::parse(
                &location,
                format!(
                    "vector has {} components, expected {}",
                    vector.len(),
                    store.dim
                ),
            ));
        }
        store
            .insert(*token, &vector)
            .map_err(|e| Error::parse(&location, e.to_string()))?;
    }

    let store = store.ok_or_else(|| Error::parse(&source, "no vectors found"))?;
    if let Some((count, _)) = declared {
        if count != store.len() {
            return Err(Error::parse(
                &source,
                format!("header declares {count} vectors, found {}", store.len()),
            ));
        }
    }
    Ok(store)
}

/// Occurrence-weighted mean of the stored vectors of `tokens`; tokens without
/// a vector are skipped, and a document with none maps to the zero vector.
pub fn avg_vectorize(tokens: &[String], store: &EmbeddingStore) -> Vec<f64> {
    let mut sum = vec![0.0f64; store.dim];
    let mut hits = 0usize;
    for token in tokens {
        if let Some(v) = store.get(token) {
            hits += 1;
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
        }
    }
    if hits > 0 {
        let n = hits as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    if !tokens.is_empty() {
        debug!(
            "embedding OOV rate {:.3} over {} tokens",
            1.0 - hits as f64 / tokens.len() as f64,
            tokens.len()
        );
    }
    sum
}

pub fn embedding_matrix(corpus: &LabeledCorpus, store: &EmbeddingStore) -> FeatureMatrix {
    let rows = corpus
        .documents
        .iter()
        .map(|d| avg_vectorize(&d.tokens, store))
        .collect();
    FeatureMatrix::dense(store.dim, rows).expect("averaged vectors are finite")
}

/// Records how a model's input rows were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureDescriptor {
    None,
    Bow {
        mode: BowMode,
        fingerprint: String,
        /// Tokens in column order.
        vocabulary: Vec<String>,
    },
    Embeddings {
        flavor: Flavor,
        source: String,
        dim: usize,
        fingerprint: String,
    },
}

impl FeatureDescriptor {
    pub fn bow(vocab: &Vocabulary, mode: BowMode) -> Self {
        FeatureDescriptor::Bow {
            mode,
            fingerprint: vocab.fingerprint(),
            vocabulary: vocab.tokens().map(String::from).collect(),
        }
    }

    pub fn embeddings(store: &EmbeddingStore) -> Self {
        FeatureDescriptor::Embeddings {
            flavor: store.flavor,
            source: store.source.clone(),
            dim: store.dim,
            fingerprint: store.fingerprint(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureDescriptor::None => 0,
            FeatureDescriptor::Bow { vocabulary, .. } => vocabulary.len(),
            FeatureDescriptor::Embeddings { dim, .. } => *dim,
        }
    }
}

impl Vocabulary {
    /// Rebuilds a vocabulary from tokens in column order (counts unknown, set to 0).
    pub fn from_tokens(tokens: &[String]) -> Result<Self> {
        let v = Self::from_entries(tokens.iter().map(|t| (t.clone(), 0)).collect());
        if v.index.len() != tokens.len() {
            return Err(Error::Data("vocabulary lists a token twice".into()));
        }
        Ok(v)
    }

    /// SHA-256 over the tokens in column order.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (t, _) in &self.entries {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

impl EmbeddingStore {
    /// SHA-256 over tokens and vector bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for (i, t) in self.tokens.iter().enumerate() {
            h.update(t.as_bytes());
            h.update(b"\n");
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Draws a deterministic N(0, I) direction per token and normalizes it.
///
/// Each token's vector depends only on `(seed, token)`, not on list order.
pub fn generate_synthetic_embeddings<'a, I>(
    tokens: I,
    dim: usize,
    seed: u64,
    flavor: Flavor,
) -> Result<EmbeddingStore>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut store = EmbeddingStore::new(dim, flavor, format!("synthetic(seed={seed}, dim={dim})"))?;
    for token in tokens {
        let v = random_unit_vector(dim, &mut rng::stream(seed, &format!("embedding/{token}")));
        store.insert(token, &v)?;
    }
    Ok(store)
}

pub(crate) fn random_unit_vector<R: rand::Rng>(dim: usize, rng: &mut R) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.iter().map(|x| (x / norm) as f32).collect();
        }
    }
}
