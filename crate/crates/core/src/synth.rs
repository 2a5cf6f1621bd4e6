//! Synthetic benchmark instances with a planted answer.
//!
//! Each instance has its own concept namespace. In every slot the planted
//! label has a moderate confidence and sits below a distractor with a
//! higher one. Planted labels are tied by strong assertions, either
//! directly or through a cue concept whose only out-edge completes the
//! path. Distractors get weak or negative semantics, and noise assertions
//! fill out the graph.
//!
//! Instance `i` draws from `sub_seed(seed, i)`. If the oracle finds a
//! lower-energy interpretation than the planted one, the instance is redrawn
//! from `sub_seed(sub_seed(seed, i), attempt)` up to `max_attempts` times.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::Role;
use crate::inference::{oracle_search, Candidate, HypothesisSet, InferenceError, InferenceParams, Slot};
use crate::kg::{write_tsv, Assertion, ConceptId, KnowledgeGraph};
use crate::seed::{rng_from_seed, sub_seed};

const RELATIONS: [&str; 8] = [
    "UsedFor",
    "AtLocation",
    "HasProperty",
    "CapableOf",
    "ReceivesAction",
    "RelatedTo",
    "PartOf",
    "HasA",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth parameter `{name}`: {reason}")]
    Params { name: &'static str, reason: String },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("answers line {line}: {reason}")]
    Answers { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub instances: usize,
    /// Slots per instance: action, object, then subject, then extra slots.
    pub slots: usize,
    pub candidates: usize,
    /// Noise assertions per instance.
    pub kg_size: usize,
    /// Probability that a planted pair is joined through a cue rather than
    /// directly.
    pub cue_density: f64,
    pub seed: u64,
    pub max_attempts: usize,
    /// Instances whose oracle search space exceeds this are left unverified.
    pub oracle_budget: u128,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            instances: 100,
            slots: 2,
            candidates: 5,
            kg_size: 20,
            cue_density: 0.3,
            seed: 0,
            max_attempts: 25,
            oracle_budget: 1_000_000,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |name, reason: &str| {
            Err(SynthError::Params {
                name,
                reason: reason.to_string(),
            })
        };
        if self.instances == 0 {
            return bad("instances", "must be positive");
        }
        if self.slots < 2 {
            return bad("slots", "need at least an action and an object slot");
        }
        if self.candidates < 2 {
            return bad("candidates", "need a distractor and a planted label per slot");
        }
        if !(0.0..=1.0).contains(&self.cue_density) {
            return bad("cue_density", "must lie in [0, 1]");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts", "must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedAnswer {
    pub segment: String,
    /// `"verb object"` of the planted labels.
    pub label: String,
    /// Planted concept per slot.
    pub concepts: Vec<ConceptId>,
    /// Whether the oracle confirmed the planted labels as the minimum;
    /// absent when the instance was too large to check.
    pub planted_is_minimum: Option<bool>,
    pub attempts: usize,
}

#[derive(Clone, Debug)]
pub struct SynthInstance {
    pub assertions: Vec<Assertion>,
    pub hypotheses: HypothesisSet,
    pub answer: PlantedAnswer,
    /// Planted pairs joined directly, as `(from slot, to slot)`.
    pub direct_pairs: Vec<(usize, usize)>,
    /// Planted pairs joined through a cue, with the cue concept.
    pub cue_pairs: Vec<(usize, usize, ConceptId)>,
}

#[derive(Clone, Debug, Default)]
pub struct SynthSuite {
    pub instances: Vec<SynthInstance>,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn concept(s: String) -> ConceptId {
    ConceptId::new(&s).expect("generated names are non-empty")
}

fn slot_role(slot: usize) -> Role {
    match slot {
        0 => Role::Action,
        1 => Role::Object,
        2 => Role::Subject,
        _ => Role::Other,
    }
}

fn slot_stem(slot: usize) -> String {
    match slot {
        0 => "act".into(),
        1 => "obj".into(),
        2 => "sub".into(),
        n => format!("s{n}x"),
    }
}

struct Draft {
    assertions: BTreeMap<(String, ConceptId, ConceptId), f64>,
}

impl Draft {
    fn add<R: Rng>(&mut self, rng: &mut R, start: &ConceptId, end: &ConceptId, weights: Range<f64>) {
        if start == end {
            return;
        }
        let relation = RELATIONS.choose(rng).expect("relation pool is non-empty").to_string();
        let weight = rng.gen_range(weights);
        self.assertions
            .entry((relation, start.clone(), end.clone()))
            .or_insert(round3(weight));
    }
}

fn draw_instance(p: &SynthParams, index: usize, seed: u64) -> SynthInstance {
    let mut rng = rng_from_seed(seed);
    let segment = format!("inst{index:04}");
    let prefix = format!("i{index}");
    let mut draft = Draft {
        assertions: BTreeMap::new(),
    };

    let mut slots = Vec::with_capacity(p.slots);
    let mut planted = Vec::with_capacity(p.slots);
    let mut distractors: Vec<Vec<ConceptId>> = Vec::with_capacity(p.slots);
    for s in 0..p.slots {
        let names: Vec<ConceptId> = (0..p.candidates)
            .map(|j| concept(format!("{prefix}_{}{j}", slot_stem(s))))
            .collect();
        // index 0 is the strong distractor, planted sits at 1..k
        let planted_idx = rng.gen_range(1..p.candidates);
        let mut candidates = Vec::with_capacity(p.candidates);
        for (j, name) in names.iter().enumerate() {
            let confidence = if j == 0 {
                rng.gen_range(0.80..0.95)
            } else if j == planted_idx {
                rng.gen_range(0.45..0.60)
            } else {
                rng.gen_range(0.05..0.40)
            };
            candidates.push(Candidate {
                concept: name.clone(),
                confidence: round3(confidence),
            });
        }
        planted.push(names[planted_idx].clone());
        distractors.push(
            names
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != planted_idx)
                .map(|(_, c)| c.clone())
                .collect(),
        );
        slots.push(Slot {
            id: slot_stem(s).trim_end_matches('x').to_string(),
            role: slot_role(s),
            candidates,
        });
    }

    let mut direct_pairs = Vec::new();
    let mut cue_pairs = Vec::new();
    let mut cue_count = 0;
    for a in 0..p.slots {
        for b in a + 1..p.slots {
            let (from, to) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            if rng.gen_bool(p.cue_density) {
                let cue = concept(format!("{prefix}_cue{cue_count}"));
                cue_count += 1;
                draft.add(&mut rng, &planted[from], &cue, 1.5..3.0);
                draft.add(&mut rng, &cue, &planted[to], 1.5..3.0);
                cue_pairs.push((from, to, cue));
            } else {
                draft.add(&mut rng, &planted[from], &planted[to], 1.5..3.0);
                direct_pairs.push((from, to));
            }
        }
    }

    // weak or negative ties among distractors of different slots
    for a in 0..p.slots {
        for b in 0..p.slots {
            if a == b {
                continue;
            }
            for x in &distractors[a] {
                for y in &distractors[b] {
                    if rng.gen_bool(0.3) {
                        draft.add(&mut rng, x, y, -2.0..0.2);
                    }
                }
            }
        }
    }

    // noise among distractors and filler concepts, kept away from cues
    let fillers: Vec<ConceptId> = (0..p.kg_size.max(1).div_ceil(2))
        .map(|n| concept(format!("{prefix}_n{n}")))
        .collect();
    let mut pool: Vec<&ConceptId> = fillers.iter().collect();
    pool.extend(distractors.iter().flatten());
    for _ in 0..p.kg_size {
        let x = pool.choose(&mut rng).expect("pool is non-empty");
        let y = pool.choose(&mut rng).expect("pool is non-empty");
        draft.add(&mut rng, x, y, -1.5..0.8);
    }

    let assertions = draft
        .assertions
        .into_iter()
        .map(|((relation, start, end), weight)| Assertion {
            relation,
            start,
            end,
            weight,
        })
        .collect();
    let hypotheses = HypothesisSet::new(segment.clone(), slots, p.candidates).expect("generated slots are valid");
    let label = format!("{} {}", planted[0].to_words(), planted[1].to_words());
    SynthInstance {
        assertions,
        hypotheses,
        answer: PlantedAnswer {
            segment,
            label,
            concepts: planted,
            planted_is_minimum: None,
            attempts: 0,
        },
        direct_pairs,
        cue_pairs,
    }
}

/// True, false, or unknown (space over budget).
fn planted_is_minimum(
    inst: &SynthInstance,
    params: &InferenceParams,
    budget: u128,
) -> Result<Option<bool>, InferenceError> {
    let (kg, _) = KnowledgeGraph::from_assertions(inst.assertions.iter().cloned());
    match oracle_search(&inst.hypotheses, &kg, params, budget) {
        Ok(outcome) => {
            let best = outcome.ranked.first().map(|r| &r.key.labels);
            let min = outcome.min_energy();
            // the planted labels must reach the minimum energy, and no other
            // label combination may tie it
            let planted_min = outcome
                .ranked
                .iter()
                .find(|r| r.key.labels == inst.answer.concepts)
                .map(|r| r.energy);
            let unique = outcome
                .ranked
                .iter()
                .filter(|r| Some(r.energy) == min)
                .all(|r| r.key.labels == inst.answer.concepts);
            Ok(Some(
                best == Some(&inst.answer.concepts) && planted_min == min && unique,
            ))
        }
        Err(InferenceError::BudgetExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Generates `p.instances` instances, validating each planted answer with
/// the oracle under `validation` parameters.
pub fn synthesize(p: &SynthParams, validation: &InferenceParams) -> Result<SynthSuite, SynthError> {
    p.validate()?;
    validation.validate().map_err(InferenceError::from)?;
    let mut instances = Vec::with_capacity(p.instances);
    for i in 0..p.instances {
        let root = sub_seed(p.seed, i as u64);
        let mut chosen = None;
        for attempt in 0..p.max_attempts {
            let seed = if attempt == 0 {
                root
            } else {
                sub_seed(root, attempt as u64)
            };
            let mut inst = draw_instance(p, i, seed);
            let verdict = planted_is_minimum(&inst, validation, p.oracle_budget)?;
            inst.answer.planted_is_minimum = verdict;
            inst.answer.attempts = attempt + 1;
            let done = verdict != Some(false);
            chosen = Some(inst);
            if done {
                break;
            }
        }
        instances.push(chosen.expect("max_attempts is positive"));
    }
    Ok(SynthSuite { instances })
}

impl SynthSuite {
    pub fn assertions(&self) -> Vec<Assertion> {
        self.instances
            .iter()
            .flat_map(|i| i.assertions.iter().cloned())
            .collect()
    }

    pub fn write_kg<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_tsv(out, &self.assertions())
    }

    pub fn write_hypotheses<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for inst in &self.instances {
            writeln!(out, "{}", inst.hypotheses.to_json())?;
        }
        Ok(())
    }

    pub fn write_answers<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for inst in &self.instances {
            writeln!(
                out,
                "{}",
                serde_json::to_string(&inst.answer).expect("answers serialize")
            )?;
        }
        Ok(())
    }
}

pub fn parse_answers<R: BufRead>(source: R) -> Result<Vec<PlantedAnswer>, SynthError> {
    let mut out = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SynthError::Answers {
            line: n + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}
