//! Corpus ingestion, text normalization, tokenization and above-mean labeling.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;
use std::sync::LazyLock;

use log::warn;
use regex::{Regex, RegexBuilder};
use regex_automata::nfa::thompson::pikevm::{Cache, PikeVM};
use regex_automata::util::syntax;
use regex_automata::{Anchored, Input, MatchKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inventory::{Facet, FacetScores, InventoryResponse};

const DEFAULT_NORMALIZATION: &str = include_str!("../data/normalization.toml");

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\$[A-Za-z][A-Za-z0-9_]*\$").unwrap());

/// One corpus line: an author, their posts, and their BFI-44 answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthorRecord {
    pub author_id: String,
    pub posts: Vec<String>,
    #[serde(rename = "bfi44")]
    pub inventory: InventoryResponse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    pattern: String,
    replacement: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    #[serde(default, rename = "rule")]
    rules: Vec<RuleSpec>,
}

#[derive(Debug, Clone)]
struct Rule {
    spec: RuleSpec,
    // Finds the leftmost match start.
    finder: Regex,
    // Anchored at that start, reports the longest match end.
    longest: PikeVM,
}

/// Ordered substitution rules (laugh expressions, abbreviations, URLs...).
#[derive(Debug, Clone, Default)]
pub struct NormalizationTable {
    rules: Vec<Rule>,
}

impl NormalizationTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The table shipped in `data/normalization.toml`.
    pub fn default_table() -> Self {
        Self::from_toml_str(DEFAULT_NORMALIZATION).expect("bundled normalization table is valid")
    }

    pub fn from_rules<I, P, R>(rules: I) -> Result<Self>
    where
        I: IntoIterator<Item = (P, R)>,
        P: Into<String>,
        R: Into<String>,
    {
        let mut table = NormalizationTable::empty();
        for (i, (pattern, replacement)) in rules.into_iter().enumerate() {
            table.push(
                RuleSpec {
                    pattern: pattern.into(),
                    replacement: replacement.into(),
                },
                i,
            )?;
        }
        Ok(table)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TableFile = toml::from_str(text)
            .map_err(|e| Error::config("normalization table", e.to_string()))?;
        let mut table = NormalizationTable::empty();
        for (i, spec) in file.rules.into_iter().enumerate() {
            table.push(spec, i)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    fn push(&mut self, spec: RuleSpec, position: usize) -> Result<()> {
        let field = format!("rule[{position}]");
        if tokenize(&spec.replacement) != [spec.replacement.as_str()] {
            return Err(Error::config(
                field,
                format!(
                    "replacement `{}` does not survive tokenization as one token",
                    spec.replacement
                ),
            ));
        }
        let finder = RegexBuilder::new(&spec.pattern)
            .case_insensitive(true)
            .build()
            .map_err(|e| Error::config(&field, format!("bad pattern: {e}")))?;
        let longest = PikeVM::builder()
            .configure(PikeVM::config().match_kind(MatchKind::All))
            .syntax(syntax::Config::new().case_insensitive(true))
            .build(&spec.pattern)
            .map_err(|e| Error::config(&field, format!("bad pattern: {e}")))?;
        self.rules.push(Rule {
            spec,
            finder,
            longest,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn to_toml_string(&self) -> String {
        let file = TableFile {
            rules: self.rules.iter().map(|r| r.spec.clone()).collect(),
        };
        toml::to_string(&file).expect("normalization table serializes")
    }

    fn caches(&self) -> Vec<Cache> {
        self.rules
            .iter()
            .map(|r| r.longest.create_cache())
            .collect()
    }

    fn apply(&self, caches: &mut [Cache], text: &str) -> String {
        let mut current = text.to_string();
        for (rule, cache) in self.rules.iter().zip(caches.iter_mut()) {
            let mut out = String::with_capacity(current.len());
            let mut last = 0;
            let mut at = 0;
            while at <= current.len() {
                let Some(m) = rule.finder.find_at(&current, at) else {
                    break;
                };
                let input = Input::new(&current)
                    .range(m.start()..)
                    .anchored(Anchored::Yes);
                let end = rule
                    .longest
                    .find(cache, input)
                    .map_or(m.end(), |l| l.end().max(m.end()));
                if end == m.start() {
                    // Empty matches never replace anything.
                    at = next_boundary(&current, m.start());
                    continue;
                }
                out.push_str(&current[last..m.start()]);
                out.push_str(&rule.spec.replacement);
                last = end;
                at = end;
            }
            out.push_str(&current[last..]);
            current = out;
        }
        current
    }
}

/// Applies every rule of `table`, in order, to `text`.
pub fn normalize(text: &str, table: &NormalizationTable) -> String {
    table.apply(&mut table.caches(), text)
}

/// Lowercased alphanumeric runs; `$NAME$` placeholders pass through untouched.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c == '$' {
            if let Some(m) = PLACEHOLDER.find(rest) {
                flush(&mut word, &mut tokens);
                tokens.push(m.as_str().to_string());
                rest = &rest[m.end()..];
                continue;
            }
        }
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else {
            flush(&mut word, &mut tokens);
        }
        rest = &rest[c.len_utf8()..];
    }
    flush(&mut word, &mut tokens);
    tokens
}

fn next_boundary(s: &str, at: usize) -> usize {
    s[at..]
        .chars()
        .next()
        .map_or(s.len() + 1, |c| at + c.len_utf8())
}

fn flush(word: &mut String, tokens: &mut Vec<String>) {
    if !word.is_empty() {
        tokens.push(std::mem::take(word));
    }
}

/// An author's normalized, tokenized text.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub author_id: String,
    pub tokens: Vec<String>,
}

/// Builds one document per author: posts normalized, joined by a space, tokenized.
///
/// Authors whose text yields no tokens are dropped with a warning.
pub fn build_documents(records: &[AuthorRecord], table: &NormalizationTable) -> Vec<Document> {
    let mut caches = table.caches();
    let mut docs = Vec::with_capacity(records.len());
    for record in records {
        let joined = record
            .posts
            .iter()
            .map(|p| table.apply(&mut caches, p))
            .collect::<Vec<_>>()
            .join(" ");
        let tokens = tokenize(&joined);
        if tokens.is_empty() {
            warn!(
                "author {} has no tokens after normalization; excluded",
                record.author_id
            );
            continue;
        }
        docs.push(Document {
            author_id: record.author_id.clone(),
            tokens,
        });
    }
    docs
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDocument {
    pub author_id: String,
    pub tokens: Vec<String>,
    pub scores: FacetScores,
    labels: [bool; 10],
}

impl LabeledDocument {
    pub fn label(&self, facet: Facet) -> bool {
        self.labels[facet.index()]
    }

    pub fn labels(&self) -> &[bool; 10] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub documents: Vec<LabeledDocument>,
    thresholds: [f64; 10],
    degenerate: Vec<Facet>,
}

impl LabeledCorpus {
    pub fn threshold(&self, facet: Facet) -> f64 {
        self.thresholds[facet.index()]
    }

    pub fn thresholds(&self) -> &[f64; 10] {
        &self.thresholds
    }

    /// Facets with a single class across the corpus; excluded from evaluation.
    pub fn degenerate_facets(&self) -> &[Facet] {
        &self.degenerate
    }

    pub fn active_facets(&self) -> Vec<Facet> {
        Facet::ALL
            .into_iter()
            .filter(|f| !self.degenerate.contains(f))
            .collect()
    }

    pub fn labels_for(&self, facet: Facet) -> Vec<bool> {
        self.documents.iter().map(|d| d.label(facet)).collect()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn positive_rate(&self, facet: Facet) -> f64 {
        let pos = self.documents.iter().filter(|d| d.label(facet)).count();
        pos as f64 / self.documents.len() as f64
    }
}

/// Labels every document positive for a facet iff its score is strictly above
/// the corpus mean for that facet.
pub fn assign_labels(
    docs: Vec<Document>,
    scores: &HashMap<String, FacetScores>,
) -> Result<LabeledCorpus> {
    let missing: Vec<&str> = docs
        .iter()
        .filter(|d| !scores.contains_key(&d.author_id))
        .map(|d| d.author_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "no facet scores for authors: {}",
            missing.join(", ")
        )));
    }
    if docs.is_empty() {
        return Err(Error::Data("cannot label an empty corpus".into()));
    }

    let mut thresholds = [0.0; 10];
    for facet in Facet::ALL {
        let total: f64 = docs.iter().map(|d| scores[&d.author_id].facet(facet)).sum();
        thresholds[facet.index()] = total / docs.len() as f64;
    }

    let documents: Vec<LabeledDocument> = docs
        .into_iter()
        .map(|d| {
            let s = scores[&d.author_id];
            let labels = std::array::from_fn(|i| s.facets[i] > thresholds[i]);
            LabeledDocument {
                author_id: d.author_id,
                tokens: d.tokens,
                scores: s,
                labels,
            }
        })
        .collect();

    let mut degenerate = Vec::new();
    for facet in Facet::ALL {
        let positives = documents.iter().filter(|d| d.label(facet)).count();
        if positives == 0 || positives == documents.len() {
            warn!("facet {facet} has a single class across the corpus; excluded");
            degenerate.push(facet);
        }
    }

    Ok(LabeledCorpus {
        documents,
        thresholds,
        degenerate,
    })
}

/// Scores every inventory with `key`, builds documents with `table` and
/// labels them. Authors whose posts normalize to nothing are dropped.
pub fn label_records(
    records: &[AuthorRecord],
    key: &crate::inventory::ScoringKey,
    table: &NormalizationTable,
) -> Result<LabeledCorpus> {
    let scores = records
        .iter()
        .map(|r| {
            crate::inventory::score_inventory(&r.inventory, key)
                .map(|s| (r.author_id.clone(), s))
                .map_err(|e| e.context(format!("author {}", r.author_id)))
        })
        .collect::<Result<HashMap<_, _>>>()?;
    assign_labels(build_documents(records, table), &scores)
}

/// Parses one corpus line, checking the non-empty id.
pub fn parse_record(line: &str) -> std::result::Result<AuthorRecord, String> {
    let record: AuthorRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if record.author_id.is_empty() {
        return Err("empty author_id".into());
    }
    Ok(record)
}

/// Parses every line, collecting all schema problems instead of stopping at the first.
pub fn scan_corpus(text: &str) -> (Vec<AuthorRecord>, Vec<Error>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("line {}", i + 1);
        match parse_record(line) {
            Ok(record) => {
                if !seen.insert(record.author_id.clone()) {
                    errors.push(Error::Data(format!(
                        "{location}: duplicate author_id `{}`",
                        record.author_id
                    )));
                } else {
                    records.push(record);
                }
            }
            Err(message) => errors.push(Error::parse(location, message)),
        }
    }
    (records, errors)
}

/// Reads a JSON-lines corpus file, failing on the first malformed line.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<AuthorRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), i + 1);
        let record = parse_record(&line).map_err(|m| Error::parse(&location, m))?;
        if !seen.insert(record.author_id.clone()) {
            return Err(Error::Data(format!(
                "{location}: duplicate author_id `{}`",
                record.author_id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_corpus(path: impl AsRef<Path>, records: &[AuthorRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
