//! Canonical construction of configurations from label assignments.
//!
//! The sampler and the oracle both search over [`Assignment`]s: one candidate
//! per slot plus, for each ordered pair of slots, the cue concepts bridging
//! them. Every assignment is turned into a configuration by the same
//! procedure, so a given assignment always has one energy:
//!
//! 1. per slot, a grounded generator and a feature generator joined by a
//!    support bond;
//! 2. per ordered pair with a direct assertion, the strongest assertion whose
//!    bonds are both still open is closed;
//! 3. per ordered pair, each listed cue becomes an ungrounded generator whose
//!    two legs are closed; cues whose legs cannot both close are skipped.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::configuration::{ConfigError, Configuration, Endpoint, SiteId};
use crate::generator::{make_feature, make_grounded, make_ungrounded, BondDirection, GeneratorKind, Grounding};
use crate::inference::{HypothesisSet, InferenceError, InferenceParams};
use crate::kg::{ConceptId, KnowledgeGraph};

/// Ordered pair of slot indices `(from, to)`.
pub type SlotPair = (usize, usize);

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    /// Candidate index per slot.
    pub labels: Vec<usize>,
    /// Cue concepts per ordered slot pair, in cue-rank order. Pairs without
    /// cues are absent.
    pub cues: BTreeMap<SlotPair, Vec<ConceptId>>,
}

impl Assignment {
    pub fn cue_count(&self) -> usize {
        self.cues.values().map(Vec::len).sum()
    }

    fn normalize(&mut self) {
        self.cues.retain(|_, v| !v.is_empty());
    }
}

/// Identity of an interpretation for de-duplication: grounded concepts per
/// slot and the multiset of cue concepts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InterpretationKey {
    pub labels: Vec<ConceptId>,
    pub cues: Vec<ConceptId>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    /// The assignment as actually realized (skipped cues removed).
    pub realized: Assignment,
    pub energy: f64,
    pub connected: bool,
}

pub struct Assembler<'a> {
    pub(crate) hypotheses: &'a HypothesisSet,
    pub(crate) kg: &'a KnowledgeGraph,
    pub(crate) params: &'a InferenceParams,
    pools: HashMap<(ConceptId, ConceptId), Rc<Vec<ConceptId>>>,
    memo: HashMap<Assignment, Rc<Evaluation>>,
}

impl<'a> Assembler<'a> {
    pub fn new(hypotheses: &'a HypothesisSet, kg: &'a KnowledgeGraph, params: &'a InferenceParams) -> Self {
        Assembler {
            hypotheses,
            kg,
            params,
            pools: HashMap::new(),
            memo: HashMap::new(),
        }
    }

    pub fn slot_count(&self) -> usize {
        self.hypotheses.slots.len()
    }

    pub fn concept(&self, slot: usize, label: usize) -> &'a ConceptId {
        &self.hypotheses.slots[slot].candidates[label].concept
    }

    /// Ranked cue candidates for a pair of concepts (at most `cue_pool`).
    pub fn cue_pool(&mut self, from: &ConceptId, to: &ConceptId) -> Rc<Vec<ConceptId>> {
        if self.params.cues_per_pair == 0 {
            return Rc::new(Vec::new());
        }
        let key = (from.clone(), to.clone());
        if let Some(pool) = self.pools.get(&key) {
            return pool.clone();
        }
        let pool: Vec<ConceptId> = self
            .kg
            .find_cues(from, to, self.params.cue_pool, self.params.cue_scope)
            .into_iter()
            .map(|(c, _)| c)
            .collect();
        let pool = Rc::new(pool);
        self.pools.insert(key, pool.clone());
        pool
    }

    pub fn pair_pool(&mut self, labels: &[usize], pair: SlotPair) -> Rc<Vec<ConceptId>> {
        let from = self.concept(pair.0, labels[pair.0]);
        let to = self.concept(pair.1, labels[pair.1]);
        self.cue_pool(from, to)
    }

    pub fn ordered_pairs(&self) -> impl Iterator<Item = SlotPair> {
        let n = self.slot_count();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    /// The default cue choice for a pair: the top `cues_per_pair` of its pool.
    pub fn default_cues(&mut self, labels: &[usize], pair: SlotPair) -> Vec<ConceptId> {
        let pool = self.pair_pool(labels, pair);
        pool.iter().take(self.params.cues_per_pair).cloned().collect()
    }

    /// Top candidate in every slot with default cues on every pair.
    pub fn initial_assignment(&mut self) -> Assignment {
        let labels = vec![0; self.slot_count()];
        self.with_default_cues(labels, None)
    }

    /// Assignment for `labels` whose cue lists are reset to their defaults on
    /// every pair touching `slot` (all pairs when `slot` is `None`) and copied
    /// from `base` elsewhere.
    pub fn with_default_cues(&mut self, labels: Vec<usize>, slot: Option<(usize, &Assignment)>) -> Assignment {
        let pairs: Vec<SlotPair> = self.ordered_pairs().collect();
        let mut cues = BTreeMap::new();
        for pair in pairs {
            let list = match slot {
                Some((s, base)) if pair.0 != s && pair.1 != s => base.cues.get(&pair).cloned().unwrap_or_default(),
                _ => self.default_cues(&labels, pair),
            };
            cues.insert(pair, list);
        }
        let mut a = Assignment { labels, cues };
        a.normalize();
        a
    }

    pub fn key(&self, a: &Assignment) -> InterpretationKey {
        let labels = a
            .labels
            .iter()
            .enumerate()
            .map(|(s, &l)| self.concept(s, l).clone())
            .collect();
        let mut cues: Vec<ConceptId> = a.cues.values().flatten().cloned().collect();
        cues.sort();
        InterpretationKey { labels, cues }
    }

    /// Energy of an assignment, memoized.
    pub fn evaluate(&mut self, a: &Assignment) -> Result<Rc<Evaluation>, InferenceError> {
        if let Some(e) = self.memo.get(a) {
            return Ok(e.clone());
        }
        let (conf, realized) = self.build(a)?;
        let eval = Rc::new(Evaluation {
            realized,
            energy: conf.energy().total,
            connected: conf.grounded_connected(),
        });
        self.memo.insert(a.clone(), eval.clone());
        Ok(eval)
    }

    /// Builds the configuration for an assignment.
    pub fn build(&self, a: &Assignment) -> Result<(Configuration, Assignment), InferenceError> {
        let kg = self.kg;
        let params = self.params;
        let mut conf = Configuration::new(params.cost_model(), params.closure);
        let mut grounded = Vec::with_capacity(a.labels.len());
        for (index, (slot, &label)) in self.hypotheses.slots.iter().zip(&a.labels).enumerate() {
            let cand = &slot.candidates[label];
            let g = make_grounded(
                &cand.concept,
                kg,
                Grounding {
                    slot: slot.id.clone(),
                    slot_index: index,
                    role: slot.role,
                    confidence: cand.confidence,
                },
                params.max_semantic_bonds,
            )?;
            let g_site = conf.add_generator(g)?;
            let f_site = conf.add_generator(make_feature(&format!("{}-features", slot.id))?)?;
            conf.connect(kg, Endpoint::new(f_site, 0), Endpoint::new(g_site, 0))?;
            grounded.push(g_site);
        }

        let pairs: Vec<SlotPair> = self.ordered_pairs().collect();
        for &(i, j) in &pairs {
            let (ci, cj) = (self.concept(i, a.labels[i]), self.concept(j, a.labels[j]));
            for assertion in kg.direct_assertions(ci, cj) {
                if let Some((from, to)) = closable(&conf, grounded[i], grounded[j], &assertion.relation) {
                    conf.connect(kg, from, to)?;
                    break;
                }
            }
        }

        let mut realized = Assignment {
            labels: a.labels.clone(),
            cues: BTreeMap::new(),
        };
        for (&(i, j), list) in &a.cues {
            let (ci, cj) = (self.concept(i, a.labels[i]), self.concept(j, a.labels[j]));
            for cue in list {
                if self.try_insert_cue(&mut conf, (grounded[i], ci), (grounded[j], cj), cue)? {
                    realized.cues.entry((i, j)).or_default().push(cue.clone());
                }
            }
        }
        realized.normalize();
        debug_assert!(
            conf.validate().is_empty(),
            "assembled configuration invalid: {:?}",
            conf.validate()
        );
        Ok((conf, realized))
    }

    fn try_insert_cue(
        &self,
        conf: &mut Configuration,
        from: (SiteId, &ConceptId),
        to: (SiteId, &ConceptId),
        cue: &ConceptId,
    ) -> Result<bool, ConfigError> {
        let kg = self.kg;
        let g = make_ungrounded(
            cue,
            kg,
            self.params.max_semantic_bonds,
            Some((from.1.clone(), to.1.clone())),
        );
        if g.is_degenerate() {
            return Ok(false);
        }
        // Both legs must close, otherwise the cue is withdrawn.
        let site = conf.add_generator(g)?;
        let first = kg
            .direct_assertions(from.1, cue)
            .into_iter()
            .find_map(|a| closable(conf, from.0, site, &a.relation));
        let second = kg
            .direct_assertions(cue, to.1)
            .into_iter()
            .find_map(|a| closable(conf, site, to.0, &a.relation));
        match (first, second) {
            (Some(a), Some(b)) => {
                conf.connect(kg, a.0, a.1)?;
                conf.connect(kg, b.0, b.1)?;
                Ok(true)
            }
            _ => {
                conf.remove_generator(site)?;
                Ok(false)
            }
        }
    }

    /// Recovers the assignment a configuration encodes: labels from its
    /// grounded generators, cue pairs from each cue's legs.
    pub fn assignment_of(&mut self, conf: &Configuration) -> Result<Assignment, InferenceError> {
        let n = self.slot_count();
        let mut labels = vec![usize::MAX; n];
        let mut site_slot = BTreeMap::new();
        for (site, g) in conf.grounded() {
            let slot = g
                .slot_index()
                .filter(|&s| s < n)
                .ok_or(InferenceError::ForeignConfiguration)?;
            let label = self.hypotheses.slots[slot]
                .candidates
                .iter()
                .position(|c| &c.concept == g.concept())
                .ok_or(InferenceError::ForeignConfiguration)?;
            labels[slot] = label;
            site_slot.insert(site, slot);
        }
        if labels.contains(&usize::MAX) {
            return Err(InferenceError::ForeignConfiguration);
        }
        let mut cues: BTreeMap<SlotPair, Vec<ConceptId>> = BTreeMap::new();
        for (site, g) in conf.generators().filter(|(_, g)| g.kind() == GeneratorKind::Ungrounded) {
            let mut from = None;
            let mut to = None;
            for b in g.bonds().iter().filter(|b| !b.is_open()) {
                let edge = conf
                    .edge_at(Endpoint::new(site, b.coordinate))
                    .expect("closed bond has an edge");
                match b.direction {
                    BondDirection::In => from = site_slot.get(&edge.from.site).copied(),
                    BondDirection::Out => to = site_slot.get(&edge.to.site).copied(),
                }
            }
            if let (Some(i), Some(j)) = (from, to) {
                cues.entry((i, j)).or_default().push(g.concept().clone());
            }
        }
        for (&pair, list) in cues.iter_mut() {
            let pool = self.pair_pool(&labels, pair);
            list.sort_by_key(|c| pool.iter().position(|p| p == c).unwrap_or(usize::MAX));
        }
        let mut a = Assignment { labels, cues };
        a.normalize();
        Ok(a)
    }
}

/// Open out-bond on `out_site` and open in-bond on `in_site` that can close
/// for the given relation.
fn closable(conf: &Configuration, out_site: SiteId, in_site: SiteId, relation: &str) -> Option<(Endpoint, Endpoint)> {
    let rule = conf.closure_rule();
    let out_gen = conf.generator(out_site)?;
    let in_gen = conf.generator(in_site)?;
    let outs = out_gen.open_bonds(crate::generator::DirectionFilter::Out);
    let ins = in_gen.open_bonds(crate::generator::DirectionFilter::In);
    // exact matches first, then wildcard matches
    for exact in [true, false] {
        for ob in &outs {
            for ib in &ins {
                let hit = if exact {
                    ob.value == relation && ib.value == relation
                } else {
                    (ob.value == relation || ib.value == relation) && rule.matches(&ob.value, &ib.value)
                };
                if hit {
                    return Some((
                        Endpoint::new(out_site, ob.coordinate),
                        Endpoint::new(in_site, ib.coordinate),
                    ));
                }
            }
        }
    }
    None
}
