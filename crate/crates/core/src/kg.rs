//! Commonsense knowledge graph: concepts joined by weighted, typed, directed
//! assertions.
//!
//! The graph is a directed multigraph of binary assertions. Between any two
//! concepts there may be several assertions with different relations; the
//! pairwise strength used for bond energies is the weight of largest magnitude
//! with its sign kept, so a single strong negative assertion dominates.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::FEATURE_BOND;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("empty concept identifier")]
    EmptyConcept,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("no assertions in input")]
    NoAssertions,
    #[error("unknown knowledge-graph format `{0}`")]
    UnknownFormat(String),
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Canonical concept identifier: lowercase, trimmed, internal whitespace
/// collapsed to single underscores.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(raw: &str) -> Result<Self, KgError> {
        let normalized = normalize_concept(raw);
        if normalized.is_empty() {
            return Err(KgError::EmptyConcept);
        }
        Ok(ConceptId(normalized))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The concept as running text (underscores become spaces).
    pub fn to_words(&self) -> String {
        self.0.replace('_', " ")
    }
}

pub fn normalize_concept(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ConceptId {
    type Err = KgError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConceptId::new(s)
    }
}

impl TryFrom<String> for ConceptId {
    type Error = KgError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        ConceptId::new(&s)
    }
}

impl From<ConceptId> for String {
    fn from(c: ConceptId) -> String {
        c.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub relation: String,
    pub start: ConceptId,
    pub end: ConceptId,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KgFormat {
    /// `relation<TAB>start<TAB>end<TAB>weight`, `#` comments.
    Tsv,
}

impl FromStr for KgFormat {
    type Err = KgError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(KgFormat::Tsv),
            other => Err(KgError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

/// Which direct assertions disqualify a pair from having contextualization
/// cues.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueScope {
    /// Only a direct `g_i -> g_j` assertion blocks cues.
    #[default]
    Forward,
    /// An assertion in either direction blocks cues.
    EitherDirection,
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Relations whose reverse edge is inserted at load time.
    pub symmetrize: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub assertions: usize,
    pub duplicates_merged: usize,
    pub comments: usize,
}

type Idx = u32;

#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    concepts: Vec<ConceptId>,
    index: HashMap<ConceptId, Idx>,
    assertions: Vec<Assertion>,
    triples: HashMap<(String, Idx, Idx), usize>,
    // assertion indices, kept sorted by (relation, other concept)
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    // signed max-|weight| over all relations, keyed by (start, end)
    strength: HashMap<(Idx, Idx), f64>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from assertions in order, merging duplicate triples.
    /// Returns the number of merged duplicates alongside the graph.
    pub fn from_assertions<I>(assertions: I) -> (Self, usize)
    where
        I: IntoIterator<Item = Assertion>,
    {
        let mut kg = KnowledgeGraph::new();
        let mut merged = 0;
        for a in assertions {
            if !kg.insert(a) {
                merged += 1;
            }
        }
        kg.finish();
        (kg, merged)
    }

    fn intern(&mut self, c: &ConceptId) -> Idx {
        if let Some(&i) = self.index.get(c) {
            return i;
        }
        let i = self.concepts.len() as Idx;
        self.concepts.push(c.clone());
        self.index.insert(c.clone(), i);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        i
    }

    /// Returns false when the triple already existed (the entry keeps the
    /// weight of larger magnitude; equal magnitudes keep the first seen).
    fn insert(&mut self, a: Assertion) -> bool {
        let s = self.intern(&a.start);
        let e = self.intern(&a.end);
        let key = (a.relation.clone(), s, e);
        if let Some(&existing) = self.triples.get(&key) {
            let slot = &mut self.assertions[existing];
            if a.weight.abs() > slot.weight.abs() {
                slot.weight = a.weight;
            }
            return false;
        }
        let id = self.assertions.len();
        self.assertions.push(a);
        self.triples.insert(key, id);
        self.out_adj[s as usize].push(id);
        self.in_adj[e as usize].push(id);
        true
    }

    fn finish(&mut self) {
        let assertions = &self.assertions;
        for list in &mut self.out_adj {
            list.sort_by(|&x, &y| {
                let (a, b) = (&assertions[x], &assertions[y]);
                a.relation.cmp(&b.relation).then_with(|| a.end.cmp(&b.end))
            });
        }
        for list in &mut self.in_adj {
            list.sort_by(|&x, &y| {
                let (a, b) = (&assertions[x], &assertions[y]);
                a.relation.cmp(&b.relation).then_with(|| a.start.cmp(&b.start))
            });
        }
        self.strength.clear();
        for (&(_, s, e), &id) in &self.triples {
            let w = self.assertions[id].weight;
            let entry = self.strength.entry((s, e)).or_insert(0.0);
            if w.abs() > entry.abs() || (w.abs() == entry.abs() && w < *entry) {
                *entry = w;
            }
        }
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn concepts(&self) -> &[ConceptId] {
        &self.concepts
    }

    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    pub fn contains(&self, c: &ConceptId) -> bool {
        self.index.contains_key(c)
    }

    /// Weight of one specific `(relation, start, end)` assertion.
    pub fn assertion_weight(&self, relation: &str, start: &ConceptId, end: &ConceptId) -> Option<f64> {
        let s = *self.index.get(start)?;
        let e = *self.index.get(end)?;
        self.triples
            .get(&(relation.to_string(), s, e))
            .map(|&id| self.assertions[id].weight)
    }

    /// Pairwise strength: the signed weight of largest magnitude among all
    /// assertions from `from` to `to`, or 0.0 when there are none.
    pub fn assertion_strength(&self, from: &ConceptId, to: &ConceptId) -> f64 {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&s), Some(&e)) => self.strength.get(&(s, e)).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    pub fn semantic_bond_energy(&self, from: &ConceptId, to: &ConceptId) -> f64 {
        self.assertion_strength(from, to).tanh()
    }

    pub fn has_direct(&self, from: &ConceptId, to: &ConceptId) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&s), Some(&e)) => self.strength.contains_key(&(s, e)),
            _ => false,
        }
    }

    /// Assertions from `from` to `to`, strongest magnitude first, ties by
    /// relation name.
    pub fn direct_assertions(&self, from: &ConceptId, to: &ConceptId) -> Vec<&Assertion> {
        let Some(&s) = self.index.get(from) else {
            return Vec::new();
        };
        let mut found: Vec<&Assertion> = self.out_adj[s as usize]
            .iter()
            .map(|&id| &self.assertions[id])
            .filter(|a| &a.end == to)
            .collect();
        found.sort_by(|a, b| {
            b.weight
                .abs()
                .total_cmp(&a.weight.abs())
                .then_with(|| a.relation.cmp(&b.relation))
        });
        found
    }

    /// Neighbors of `concept` as `(relation, other, weight)`, ordered by
    /// relation then other concept.
    pub fn neighbors(&self, concept: &ConceptId, direction: Direction) -> Vec<(&str, &ConceptId, f64)> {
        let Some(&i) = self.index.get(concept) else {
            return Vec::new();
        };
        match direction {
            Direction::Out => self.out_adj[i as usize]
                .iter()
                .map(|&id| {
                    let a = &self.assertions[id];
                    (a.relation.as_str(), &a.end, a.weight)
                })
                .collect(),
            Direction::In => self.in_adj[i as usize]
                .iter()
                .map(|&id| {
                    let a = &self.assertions[id];
                    (a.relation.as_str(), &a.start, a.weight)
                })
                .collect(),
        }
    }

    /// Contextualization cues bridging `from` and `to`: concepts `k` with
    /// assertions `from -> k` and `k -> to` while `from -> to` is absent.
    ///
    /// Ranked by `tanh(phi(from, k)) + tanh(phi(k, to))` descending, ties by
    /// cue id. Returns at most `limit` entries.
    pub fn find_cues(&self, from: &ConceptId, to: &ConceptId, limit: usize, scope: CueScope) -> Vec<(ConceptId, f64)> {
        let (Some(&s), Some(&e)) = (self.index.get(from), self.index.get(to)) else {
            return Vec::new();
        };
        if self.strength.contains_key(&(s, e)) {
            return Vec::new();
        }
        if scope == CueScope::EitherDirection && self.strength.contains_key(&(e, s)) {
            return Vec::new();
        }
        let mut seen = BTreeSet::new();
        let mut cues = Vec::new();
        for &id in &self.out_adj[s as usize] {
            let mid = self.index[&self.assertions[id].end];
            if mid == s || mid == e || !seen.insert(mid) {
                continue;
            }
            if let Some(second) = self.strength.get(&(mid, e)) {
                let first = self.strength[&(s, mid)];
                cues.push((self.concepts[mid as usize].clone(), first.tanh() + second.tanh()));
            }
        }
        cues.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        cues.truncate(limit);
        cues
    }
}

/// Reads a knowledge graph in the given format.
pub fn load_kg<R: BufRead>(
    source: R,
    format: KgFormat,
    options: &LoadOptions,
) -> Result<(KnowledgeGraph, LoadReport), KgError> {
    match format {
        KgFormat::Tsv => load_tsv(source, options),
    }
}

fn load_tsv<R: BufRead>(source: R, options: &LoadOptions) -> Result<(KnowledgeGraph, LoadReport), KgError> {
    let mut parsed = Vec::new();
    let mut report = LoadReport::default();
    for (n, line) in source.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => KgError::Parse {
                line: line_no,
                reason: "invalid UTF-8".into(),
            },
            _ => KgError::Io(e),
        })?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            continue;
        }
        if trimmed.trim_start().starts_with('#') {
            report.comments += 1;
            continue;
        }
        let assertion = parse_tsv_line(trimmed).map_err(|reason| KgError::Parse { line: line_no, reason })?;
        if options.symmetrize.contains(&assertion.relation) && assertion.start != assertion.end {
            let reverse = Assertion {
                relation: assertion.relation.clone(),
                start: assertion.end.clone(),
                end: assertion.start.clone(),
                weight: assertion.weight,
            };
            parsed.push(assertion);
            parsed.push(reverse);
        } else {
            parsed.push(assertion);
        }
    }
    if parsed.is_empty() {
        return Err(KgError::NoAssertions);
    }
    let (kg, merged) = KnowledgeGraph::from_assertions(parsed);
    report.assertions = kg.assertions.len();
    report.duplicates_merged = merged;
    Ok((kg, report))
}

fn parse_tsv_line(line: &str) -> Result<Assertion, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    }
    let relation = fields[0].trim();
    if relation.is_empty() {
        return Err("empty relation".into());
    }
    if relation == FEATURE_BOND {
        return Err(format!("relation name `{FEATURE_BOND}` is reserved"));
    }
    let start = ConceptId::new(fields[1]).map_err(|_| "empty start concept".to_string())?;
    let end = ConceptId::new(fields[2]).map_err(|_| "empty end concept".to_string())?;
    let weight: f64 = fields[3]
        .trim()
        .parse()
        .map_err(|_| format!("weight `{}` is not a number", fields[3].trim()))?;
    if !weight.is_finite() {
        return Err(format!("weight `{}` is not finite", fields[3].trim()));
    }
    Ok(Assertion {
        relation: relation.to_string(),
        start,
        end,
        weight,
    })
}

/// Writes assertions in the TSV format accepted by [`load_kg`].
pub fn write_tsv<W: std::io::Write>(mut out: W, assertions: &[Assertion]) -> std::io::Result<()> {
    for a in assertions {
        writeln!(out, "{}\t{}\t{}\t{}", a.relation, a.start, a.end, a.weight)?;
    }
    Ok(())
}
