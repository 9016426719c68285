//! Synthetic corpora with planted lexical signal, for desk-scale experiments.
//!
//! Each author gets a BFI-44 inventory, from which facet labels follow by
//! the usual above-mean rule. Posts are filler words plus, at rate `signal`,
//! facet marker words chosen by the author's label on that facet. The
//! matching embeddings place each (facet, label) marker group around its own
//! random centroid, so averaged vectors carry the same signal.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::AuthorRecord;
use crate::error::{Error, Result};
use crate::features::{random_unit_vector, EmbeddingStore, Flavor};
use crate::inventory::{score_inventory, Facet, InventoryResponse, ScoringKey, ITEM_COUNT};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub authors: usize,
    /// Fraction of tokens drawn from facet marker words, in `[0, 1]`.
    pub signal: f64,
    pub embedding_dim: usize,
    /// Exact 50/50 labels on every facet.
    pub balanced: bool,
    pub posts_per_author: (usize, usize),
    pub words_per_post: (usize, usize),
    pub filler_words: usize,
    /// Marker words per (facet, label) group.
    pub markers_per_group: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            authors: 500,
            signal: MODERATE_SIGNAL,
            embedding_dim: 64,
            balanced: false,
            posts_per_author: (6, 12),
            words_per_post: (6, 16),
            filler_words: 400,
            markers_per_group: 10,
        }
    }
}

/// The signal strength called "moderate" in the docs and CLI help.
pub const MODERATE_SIGNAL: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<AuthorRecord>,
    pub skip: EmbeddingStore,
    pub cbow: EmbeddingStore,
    /// Marker words, indexed `[facet][label as usize]`.
    pub markers: Vec<[Vec<String>; 2]>,
}

const FILLER_SYLLABLES: [&str; 16] = [
    "ba", "ca", "da", "fe", "go", "la", "me", "no", "pa", "ri", "sa", "to", "vu", "di", "ze", "lu",
];
const MARKER_SYLLABLES: [&str; 8] = ["qui", "gue", "lha", "nhe", "cho", "tra", "pro", "bre"];

fn word_from(index: usize, syllables: &[&str], len: usize) -> String {
    let mut i = index;
    let mut w = String::new();
    for _ in 0..len {
        w.push_str(syllables[i % syllables.len()]);
        i /= syllables.len();
    }
    w
}

fn filler_vocabulary(n: usize) -> Vec<String> {
    let base = FILLER_SYLLABLES.len();
    (0..n)
        .map(|i| {
            if i < base * base {
                word_from(i, &FILLER_SYLLABLES, 2)
            } else {
                word_from(i - base * base, &FILLER_SYLLABLES, 3)
            }
        })
        .collect()
}

fn sample_inventories(cfg: &SynthConfig, key: &ScoringKey) -> Vec<Vec<i32>> {
    let (lo, hi) = (key.scale_min(), key.scale_max());
    let mid = f64::from(lo + hi) / 2.0;
    let spread = f64::from(hi - lo) / 4.0;
    let mut r = rng::stream(cfg.seed, "synth/inventory");
    let mut inventories: Vec<Vec<i32>> = (0..cfg.authors)
        .map(|_| (0..ITEM_COUNT).map(|_| r.random_range(lo..=hi)).collect())
        .collect();

    // Keyed value to raw response.
    let raw = |value: i32, reversed: bool| if reversed { lo + hi - value } else { value };
    let mut assigned = [false; ITEM_COUNT];
    for facet in Facet::ALL {
        let items: Vec<_> = key
            .facet_items(facet)
            .iter()
            .filter(|i| !std::mem::replace(&mut assigned[i.index], true))
            .copied()
            .collect();
        if cfg.balanced {
            let (high, low) = if hi - lo >= 2 {
                (hi - 1, lo + 1)
            } else {
                (hi, lo)
            };
            let mut order: Vec<usize> = (0..cfg.authors).collect();
            order.shuffle(&mut r);
            for (rank, &a) in order.iter().enumerate() {
                let value = if rank < cfg.authors / 2 { high } else { low };
                for item in &items {
                    inventories[a][item.index] = raw(value, item.reversed);
                }
            }
        } else {
            let noise = Normal::new(0.0, 0.6 * spread).expect("valid normal");
            for inv in inventories.iter_mut() {
                let trait_level: f64 = Normal::new(0.0, spread)
                    .expect("valid normal")
                    .sample(&mut r);
                for item in &items {
                    let v = (mid + trait_level + noise.sample(&mut r)).round() as i32;
                    inv[item.index] = raw(v.clamp(lo, hi), item.reversed);
                }
            }
        }
    }
    inventories
}

pub fn generate(cfg: &SynthConfig, key: &ScoringKey) -> Result<SynthCorpus> {
    if cfg.authors < 2 {
        return Err(Error::config("authors", "need at least 2 authors"));
    }
    if !(0.0..=1.0).contains(&cfg.signal) {
        return Err(Error::config("signal", "must lie in [0, 1]"));
    }
    if cfg.filler_words == 0 || cfg.markers_per_group == 0 {
        return Err(Error::config("synth", "vocabulary sizes must be positive"));
    }
    let (pmin, pmax) = cfg.posts_per_author;
    let (wmin, wmax) = cfg.words_per_post;
    if pmin == 0 || pmin > pmax || wmin == 0 || wmin > wmax {
        return Err(Error::config(
            "synth",
            "post and word ranges must be non-empty and start at 1",
        ));
    }

    let inventories = sample_inventories(cfg, key);
    let scores = inventories
        .iter()
        .map(|inv| score_inventory(&InventoryResponse::new(inv.clone())?, key))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<[bool; 10]> = {
        let n = scores.len() as f64;
        let means: [f64; 10] =
            std::array::from_fn(|f| scores.iter().map(|s| s.facets[f]).sum::<f64>() / n);
        scores
            .iter()
            .map(|s| std::array::from_fn(|f| s.facets[f] > means[f]))
            .collect()
    };

    let filler = filler_vocabulary(cfg.filler_words);
    let markers: Vec<[Vec<String>; 2]> = (0..Facet::ALL.len())
        .map(|f| {
            std::array::from_fn(|polarity| {
                (0..cfg.markers_per_group)
                    .map(|m| {
                        let id = (f * 2 + polarity) * cfg.markers_per_group + m;
                        word_from(id, &MARKER_SYLLABLES, 4)
                    })
                    .collect()
            })
        })
        .collect();

    // Zipf-like filler frequencies.
    let cumulative: Vec<f64> = filler
        .iter()
        .enumerate()
        .scan(0.0, |acc, (i, _)| {
            *acc += 1.0 / (i as f64 + 1.0);
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().expect("filler vocabulary is non-empty");

    let mut r = rng::stream(cfg.seed, "synth/text");
    let laughs = ["hahaha", "kkkk", "Hehe", "rsrs"];
    let records = labels
        .iter()
        .zip(inventories)
        .enumerate()
        .map(|(a, (author_labels, inventory))| {
            let posts = (0..r.random_range(pmin..=pmax))
                .map(|_| {
                    let words: Vec<String> = (0..r.random_range(wmin..=wmax))
                        .map(|_| {
                            if r.random_bool(cfg.signal) {
                                let f = r.random_range(0..Facet::ALL.len());
                                let group = &markers[f][usize::from(author_labels[f])];
                                group.choose(&mut r).expect("non-empty group").clone()
                            } else if r.random_bool(0.02) {
                                laughs.choose(&mut r).expect("non-empty").to_string()
                            } else {
                                let u = r.random::<f64>() * total;
                                let i =
                                    cumulative.partition_point(|&c| c < u).min(filler.len() - 1);
                                filler[i].clone()
                            }
                        })
                        .collect();
                    let mut post = words.join(" ");
                    if r.random_bool(0.3) {
                        post = capitalize(&post);
                    }
                    if r.random_bool(0.4) {
                        post.push_str([".", "!", "?", "!!"].choose(&mut r).expect("non-empty"));
                    }
                    post
                })
                .collect();
            Ok(AuthorRecord {
                author_id: format!("author{a:05}"),
                posts,
                inventory: InventoryResponse::new(inventory)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let skip = clustered_embeddings(cfg, &filler, &markers, Flavor::Skip, 0.5)?;
    let cbow = clustered_embeddings(cfg, &filler, &markers, Flavor::Cbow, 0.4)?;
    Ok(SynthCorpus {
        records,
        skip,
        cbow,
        markers,
    })
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Filler words (except every 20th, left out of the store) get random unit
/// vectors; marker words sit at `centroid + noise * N(0, I/d)`, renormalized.
fn clustered_embeddings(
    cfg: &SynthConfig,
    filler: &[String],
    markers: &[[Vec<String>; 2]],
    flavor: Flavor,
    noise: f64,
) -> Result<EmbeddingStore> {
    let dim = cfg.embedding_dim;
    let mut store = EmbeddingStore::new(
        dim,
        flavor,
        format!("synthetic {flavor} (seed={}, dim={dim})", cfg.seed),
    )?;
    let mut r = rng::stream(cfg.seed, &format!("synth/embeddings/{flavor}"));
    let mut seen = HashSet::new();
    for (i, word) in filler.iter().enumerate() {
        let v = random_unit_vector(dim, &mut r);
        if i % 20 != 19 && seen.insert(word.clone()) {
            store.insert(word.clone(), &v)?;
        }
    }
    store.insert("$LAUGH$", &random_unit_vector(dim, &mut r))?;
    let scale = 1.0 / (dim as f64).sqrt();
    let gauss = Normal::new(0.0, noise * scale).expect("valid normal");
    for groups in markers {
        for group in groups {
            let centroid = random_unit_vector(dim, &mut r);
            for word in group {
                let v: Vec<f64> = centroid
                    .iter()
                    .map(|&c| f64::from(c) + gauss.sample(&mut r))
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let v: Vec<f32> = v.iter().map(|x| (x / norm) as f32).collect();
                store.insert(word.clone(), &v)?;
            }
        }
    }
    Ok(store)
}
