//! BFI-44 inventory scoring.
//!
//! A [`ScoringKey`] maps each of the five Big Five domains and the ten
//! facets onto sets of inventory items, some of them reverse-keyed. Scores
//! are unweighted means of the reverse-corrected item responses, so they
//! stay on the Likert scale regardless of how many items a facet uses.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of items in the BFI-44 inventory.
pub const ITEM_COUNT: usize = 44;

const DEFAULT_KEY: &str = include_str!("../data/bfi44_key.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Extraversion,
    Agreeableness,
    Conscientiousness,
    Neuroticism,
    Openness,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Extraversion,
        Domain::Agreeableness,
        Domain::Conscientiousness,
        Domain::Neuroticism,
        Domain::Openness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Extraversion => "Extraversion",
            Domain::Agreeableness => "Agreeableness",
            Domain::Conscientiousness => "Conscientiousness",
            Domain::Neuroticism => "Neuroticism",
            Domain::Openness => "Openness",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// The two facets scored under this domain.
    pub fn facets(self) -> [Facet; 2] {
        let i = self.index() * 2;
        [Facet::ALL[i], Facet::ALL[i + 1]]
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::config("domains", format!("unknown domain `{s}`")))
    }
}

/// The ten facets inferable from the BFI-44, two per domain, in domain order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Facet {
    Assertiveness,
    Activity,
    Altruism,
    Compliance,
    Order,
    SelfDiscipline,
    Anxiety,
    Depression,
    Aesthetics,
    Ideas,
}

impl Facet {
    pub const ALL: [Facet; 10] = [
        Facet::Assertiveness,
        Facet::Activity,
        Facet::Altruism,
        Facet::Compliance,
        Facet::Order,
        Facet::SelfDiscipline,
        Facet::Anxiety,
        Facet::Depression,
        Facet::Aesthetics,
        Facet::Ideas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Facet::Assertiveness => "Assertiveness",
            Facet::Activity => "Activity",
            Facet::Altruism => "Altruism",
            Facet::Compliance => "Compliance",
            Facet::Order => "Order",
            Facet::SelfDiscipline => "SelfDiscipline",
            Facet::Anxiety => "Anxiety",
            Facet::Depression => "Depression",
            Facet::Aesthetics => "Aesthetics",
            Facet::Ideas => "Ideas",
        }
    }

    /// Abbreviated column header used in rendered tables.
    pub fn short_name(self) -> &'static str {
        match self {
            Facet::Assertiveness => "assert.",
            Facet::Activity => "activ.",
            Facet::Altruism => "altr.",
            Facet::Compliance => "compl.",
            Facet::Order => "order",
            Facet::SelfDiscipline => "selfd.",
            Facet::Anxiety => "anx.",
            Facet::Depression => "depr.",
            Facet::Aesthetics => "aesth.",
            Facet::Ideas => "ideas",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn domain(self) -> Domain {
        Domain::ALL[self.index() / 2]
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Facet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Facet::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config("facets", format!("unknown facet `{s}`")))
    }
}

/// One keyed inventory item: zero-based index plus reverse flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyItem {
    pub index: usize,
    pub reversed: bool,
}

impl KeyItem {
    pub fn new(index: usize, reversed: bool) -> Self {
        KeyItem { index, reversed }
    }

    /// Parses the signed one-based notation of the key file (`-21` is item 21 reversed).
    fn from_signed(value: i64, field: &str) -> Result<Self> {
        let number = value.unsigned_abs() as usize;
        if value == 0 || number > ITEM_COUNT {
            return Err(Error::config(
                field,
                format!("item {value} outside 1..={ITEM_COUNT} (use a negative sign for reversed items)"),
            ));
        }
        Ok(KeyItem {
            index: number - 1,
            reversed: value < 0,
        })
    }

    fn to_signed(self) -> i64 {
        let number = self.index as i64 + 1;
        if self.reversed {
            -number
        } else {
            number
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringKey {
    scale_min: i32,
    scale_max: i32,
    domains: [Vec<KeyItem>; 5],
    facets: [Vec<KeyItem>; 10],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    scale_min: i32,
    scale_max: i32,
    domains: BTreeMap<String, Vec<i64>>,
    facets: BTreeMap<String, Vec<i64>>,
}

impl ScoringKey {
    /// Builds and validates a key from in-memory item sets.
    pub fn new(
        scale_min: i32,
        scale_max: i32,
        domains: [Vec<KeyItem>; 5],
        facets: [Vec<KeyItem>; 10],
    ) -> Result<Self> {
        let key = ScoringKey {
            scale_min,
            scale_max,
            domains,
            facets,
        };
        key.validate()?;
        Ok(key)
    }

    /// The key shipped with the crate (`data/bfi44_key.toml`).
    pub fn bfi44_default() -> Self {
        Self::from_toml_str(DEFAULT_KEY).expect("bundled scoring key is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: KeyFile =
            toml::from_str(text).map_err(|e| Error::config("scoring key", e.to_string()))?;

        let mut domains: [Vec<KeyItem>; 5] = Default::default();
        let mut seen = HashSet::new();
        for (name, items) in &file.domains {
            let domain: Domain = name.parse()?;
            seen.insert(name.as_str());
            domains[domain.index()] = parse_items(items, &format!("domains.{name}"))?;
        }
        for domain in Domain::ALL {
            if !seen.contains(domain.name()) {
                return Err(Error::config(
                    "domains",
                    format!("missing domain `{domain}`"),
                ));
            }
        }

        let mut facets: [Vec<KeyItem>; 10] = Default::default();
        seen.clear();
        for (name, items) in &file.facets {
            let facet: Facet = name.parse()?;
            seen.insert(name.as_str());
            facets[facet.index()] = parse_items(items, &format!("facets.{name}"))?;
        }
        for facet in Facet::ALL {
            if !seen.contains(facet.name()) {
                return Err(Error::config("facets", format!("missing facet `{facet}`")));
            }
        }

        Self::new(file.scale_min, file.scale_max, domains, facets)
    }

    pub fn to_toml_string(&self) -> String {
        let signed = |items: &[KeyItem]| items.iter().map(|i| i.to_signed()).collect::<Vec<_>>();
        let file = KeyFile {
            scale_min: self.scale_min,
            scale_max: self.scale_max,
            domains: Domain::ALL
                .iter()
                .map(|d| (d.name().to_string(), signed(&self.domains[d.index()])))
                .collect(),
            facets: Facet::ALL
                .iter()
                .map(|f| (f.name().to_string(), signed(&self.facets[f.index()])))
                .collect(),
        };
        toml::to_string(&file).expect("scoring key serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.scale_min >= self.scale_max {
            return Err(Error::config(
                "scale_min",
                format!(
                    "scale_min ({}) must be below scale_max ({})",
                    self.scale_min, self.scale_max
                ),
            ));
        }
        for domain in Domain::ALL {
            check_entry(&self.domains[domain.index()], &format!("domains.{domain}"))?;
        }
        for facet in Facet::ALL {
            let field = format!("facets.{facet}");
            let items = &self.facets[facet.index()];
            check_entry(items, &field)?;
            let parent = &self.domains[facet.domain().index()];
            for item in items {
                if !parent.contains(item) {
                    return Err(Error::config(
                        field,
                        format!(
                            "item {} is not keyed the same way under parent domain {}",
                            item.to_signed(),
                            facet.domain()
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn scale_min(&self) -> i32 {
        self.scale_min
    }

    pub fn scale_max(&self) -> i32 {
        self.scale_max
    }

    pub fn domain_items(&self, domain: Domain) -> &[KeyItem] {
        &self.domains[domain.index()]
    }

    pub fn facet_items(&self, facet: Facet) -> &[KeyItem] {
        &self.facets[facet.index()]
    }

    pub fn contains(&self, response: i32) -> bool {
        (self.scale_min..=self.scale_max).contains(&response)
    }
}

fn parse_items(values: &[i64], field: &str) -> Result<Vec<KeyItem>> {
    values
        .iter()
        .map(|&v| KeyItem::from_signed(v, field))
        .collect()
}

fn check_entry(items: &[KeyItem], field: &str) -> Result<()> {
    if items.is_empty() {
        return Err(Error::config(field, "entry has no items"));
    }
    let mut seen = HashSet::new();
    for item in items {
        if item.index >= ITEM_COUNT {
            return Err(Error::config(
                field,
                format!("item index {} out of range", item.index),
            ));
        }
        if !seen.insert(item.index) {
            return Err(Error::config(
                field,
                format!("item {} listed twice", item.index + 1),
            ));
        }
    }
    Ok(())
}

/// Reads and validates a scoring key file.
pub fn load_scoring_key(path: impl AsRef<Path>) -> Result<ScoringKey> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScoringKey::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
}

/// The 44 raw responses of one inventory, in item order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct InventoryResponse(Vec<i32>);

impl InventoryResponse {
    pub fn new(items: Vec<i32>) -> Result<Self> {
        if items.len() != ITEM_COUNT {
            return Err(Error::Validation(format!(
                "inventory has {} responses, expected {ITEM_COUNT}",
                items.len()
            )));
        }
        Ok(InventoryResponse(items))
    }

    pub fn items(&self) -> &[i32] {
        &self.0
    }

    /// Checks every response against the key's scale bounds.
    pub fn validate(&self, key: &ScoringKey) -> Result<()> {
        for (i, &r) in self.0.iter().enumerate() {
            if !key.contains(r) {
                return Err(out_of_scale(i, r, key));
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<i32>> for InventoryResponse {
    type Error = Error;

    fn try_from(items: Vec<i32>) -> Result<Self> {
        InventoryResponse::new(items)
    }
}

impl From<InventoryResponse> for Vec<i32> {
    fn from(r: InventoryResponse) -> Self {
        r.0
    }
}

fn out_of_scale(index: usize, response: i32, key: &ScoringKey) -> Error {
    Error::Validation(format!(
        "item {} response {response} outside scale {}..={}",
        index + 1,
        key.scale_min,
        key.scale_max
    ))
}

/// Domain and facet scores of one respondent, in Likert-scale points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetScores {
    pub domains: [f64; 5],
    pub facets: [f64; 10],
}

impl FacetScores {
    pub fn domain(&self, domain: Domain) -> f64 {
        self.domains[domain.index()]
    }

    pub fn facet(&self, facet: Facet) -> f64 {
        self.facets[facet.index()]
    }
}

/// Reflects a response about the scale midpoint.
pub fn reverse_item(response: i32, key: &ScoringKey) -> Result<i32> {
    if !key.contains(response) {
        return Err(Error::Validation(format!(
            "response {response} outside scale {}..={}",
            key.scale_min, key.scale_max
        )));
    }
    Ok(key.scale_min + key.scale_max - response)
}

fn keyed_mean(resp: &InventoryResponse, items: &[KeyItem], key: &ScoringKey) -> Result<f64> {
    let mut total = 0i64;
    for item in items {
        let raw = resp.0[item.index];
        let value = if item.reversed {
            reverse_item(raw, key).map_err(|_| out_of_scale(item.index, raw, key))?
        } else if key.contains(raw) {
            raw
        } else {
            return Err(out_of_scale(item.index, raw, key));
        };
        total += i64::from(value);
    }
    Ok(total as f64 / items.len() as f64)
}

pub fn score_inventory(resp: &InventoryResponse, key: &ScoringKey) -> Result<FacetScores> {
    resp.validate(key)?;
    let mut scores = FacetScores {
        domains: [0.0; 5],
        facets: [0.0; 10],
    };
    for domain in Domain::ALL {
        scores.domains[domain.index()] = keyed_mean(resp, key.domain_items(domain), key)?;
    }
    for facet in Facet::ALL {
        scores.facets[facet.index()] = keyed_mean(resp, key.facet_items(facet), key)?;
    }
    Ok(scores)
}
