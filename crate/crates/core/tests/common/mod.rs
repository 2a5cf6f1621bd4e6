#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use ptvi_core::configuration::Endpoint;
use ptvi_core::generator::{make_feature, make_grounded, make_ungrounded, BondDirection, Grounding};
use ptvi_core::inference::{Candidate, Slot};
use ptvi_core::kg::{Assertion, ConceptId, CueScope, KgFormat, KnowledgeGraph, LoadOptions};
use ptvi_core::load_kg;
use ptvi_core::{ClosureRule, Configuration, CostModel, HypothesisSet, Role};
use rand::Rng;

pub const RELATIONS: [&str; 5] = ["IsA", "HasProperty", "AtLocation", "RelatedTo", "UsedFor"];

pub fn c(s: &str) -> ConceptId {
    ConceptId::new(s).unwrap()
}

pub fn kg(text: &str) -> KnowledgeGraph {
    load_kg(text.as_bytes(), KgFormat::Tsv, &LoadOptions::default())
        .unwrap()
        .0
}

/// One raw TSV line per tuple `(relation, start, end, weight)`.
pub fn tsv(lines: &[(usize, usize, usize, f64)]) -> String {
    lines
        .iter()
        .map(|&(r, s, e, w)| format!("{}\tn{s}\tn{e}\t{w}\n", RELATIONS[r]))
        .collect()
}

/// Random edge lists over `concepts` nodes with weights in [-5, 5],
/// rounded to two decimals so ties occur.
pub fn edge_lists(concepts: usize, max_edges: usize) -> impl Strategy<Value = Vec<(usize, usize, usize, f64)>> {
    prop::collection::vec(
        (0..RELATIONS.len(), 0..concepts, 0..concepts, -500i32..=500)
            .prop_map(|(r, s, e, w)| (r, s, e, w as f64 / 100.0)),
        1..=max_edges,
    )
}

/// Independent reading of a raw edge list: duplicate triples keep the
/// weight of larger magnitude (first seen on ties); a pair's strength is
/// the signed weight of largest magnitude, negative on ties.
pub struct Naive {
    pub triples: BTreeMap<(String, ConceptId, ConceptId), f64>,
}

impl Naive {
    pub fn new(lines: &[(usize, usize, usize, f64)]) -> Self {
        let mut triples: BTreeMap<(String, ConceptId, ConceptId), f64> = BTreeMap::new();
        for &(r, s, e, w) in lines {
            let key = (RELATIONS[r].to_string(), c(&format!("n{s}")), c(&format!("n{e}")));
            match triples.get(&key) {
                Some(old) if old.abs() >= w.abs() => {}
                _ => {
                    triples.insert(key, w);
                }
            }
        }
        Naive { triples }
    }

    pub fn has_edge(&self, a: &ConceptId, b: &ConceptId) -> bool {
        self.triples.keys().any(|(_, s, e)| s == a && e == b)
    }

    pub fn strength(&self, a: &ConceptId, b: &ConceptId) -> f64 {
        let mut best: f64 = 0.0;
        for ((_, s, e), &w) in &self.triples {
            if s == a && e == b && (w.abs() > best.abs() || (w.abs() == best.abs() && w < best)) {
                best = w;
            }
        }
        best
    }

    pub fn concepts(&self) -> BTreeSet<ConceptId> {
        self.triples
            .keys()
            .flat_map(|(_, s, e)| [s.clone(), e.clone()])
            .collect()
    }

    /// Every two-hop bridge under the cue predicate, ranked.
    pub fn cues(&self, i: &ConceptId, j: &ConceptId, scope: CueScope) -> Vec<(ConceptId, f64)> {
        if self.has_edge(i, j) || (scope == CueScope::EitherDirection && self.has_edge(j, i)) {
            return Vec::new();
        }
        let mut out: Vec<(ConceptId, f64)> = self
            .concepts()
            .into_iter()
            .filter(|k| k != i && k != j && self.has_edge(i, k) && self.has_edge(k, j))
            .map(|k| {
                let score = self.strength(i, &k).tanh() + self.strength(&k, j).tanh();
                (k, score)
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn assertions(&self) -> Vec<Assertion> {
        self.triples
            .iter()
            .map(|((r, s, e), &w)| Assertion {
                relation: r.clone(),
                start: s.clone(),
                end: e.clone(),
                weight: w,
            })
            .collect()
    }
}

pub fn grounding(slot_index: usize, role: Role, confidence: f64) -> Grounding {
    Grounding {
        slot: format!("slot{slot_index}"),
        slot_index,
        role,
        confidence,
    }
}

/// A configuration with random grounded, ungrounded and feature generators
/// drawn from concepts `n0..n{concepts}`, and no edges yet.
pub fn random_configuration<R: Rng>(rng: &mut R, kg: &KnowledgeGraph, concepts: usize) -> Configuration {
    let cost = CostModel {
        k: rng.gen_range(0.0..2.0),
        count_in_bonds: rng.gen_bool(0.5),
    };
    let closure = if rng.gen_bool(0.5) {
        ClosureRule::Exact
    } else {
        ClosureRule::RelatedToWildcard
    };
    let mut conf = Configuration::new(cost, closure);
    let roles = [Role::Action, Role::Object, Role::Subject, Role::Other];
    for i in 0..rng.gen_range(1..5) {
        let concept = c(&format!("n{}", rng.gen_range(0..concepts)));
        let g = make_grounded(
            &concept,
            kg,
            grounding(i, roles[rng.gen_range(0..roles.len())], rng.gen_range(-1.0..3.0)),
            rng.gen_range(1..6),
        )
        .unwrap();
        conf.add_generator(g).unwrap();
    }
    for _ in 0..rng.gen_range(0..5) {
        let concept = c(&format!("n{}", rng.gen_range(0..concepts)));
        // degenerate cues are refused; that is fine here
        let _ = conf.add_generator(make_ungrounded(&concept, kg, rng.gen_range(1..6), None));
    }
    for i in 0..rng.gen_range(0..4) {
        conf.add_generator(make_feature(&format!("feat{i}")).unwrap()).unwrap();
    }
    conf
}

/// One random connect or disconnect. Returns true if the configuration
/// changed.
pub fn random_step<R: Rng>(rng: &mut R, conf: &mut Configuration, kg: &KnowledgeGraph) -> bool {
    let edges: Vec<Endpoint> = conf.edges().map(|e| e.from).collect();
    if !edges.is_empty() && rng.gen_bool(0.4) {
        let from = edges[rng.gen_range(0..edges.len())];
        conf.disconnect(from).unwrap();
        return true;
    }
    let mut outs = Vec::new();
    let mut ins = Vec::new();
    for (site, g) in conf.generators() {
        for b in g.bonds().iter().filter(|b| b.is_open()) {
            let ep = (Endpoint::new(site, b.coordinate), b.value.clone());
            match b.direction {
                BondDirection::Out => outs.push(ep),
                BondDirection::In => ins.push(ep),
            }
        }
    }
    if outs.is_empty() {
        return false;
    }
    let (from, value) = outs[rng.gen_range(0..outs.len())].clone();
    let closure = conf.closure_rule();
    let targets: Vec<Endpoint> = ins
        .iter()
        .filter(|(ep, v)| ep.site != from.site && closure.matches(&value, v))
        .map(|(ep, _)| *ep)
        .collect();
    if targets.is_empty() {
        return false;
    }
    let to = targets[rng.gen_range(0..targets.len())];
    conf.connect(kg, from, to).is_ok()
}

/// Hypotheses from `(role, [(concept, confidence)])` per slot; slot ids are
/// the role names.
pub fn hyp(slots: &[(Role, &[(&str, f64)])]) -> HypothesisSet {
    let slots = slots
        .iter()
        .map(|(role, cands)| Slot {
            id: role.as_str().to_string(),
            role: *role,
            candidates: cands
                .iter()
                .map(|&(concept, confidence)| Candidate {
                    concept: c(concept),
                    confidence,
                })
                .collect(),
        })
        .collect();
    HypothesisSet::new("seg", slots, 10).unwrap()
}
