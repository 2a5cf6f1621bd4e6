//! Per-segment classifier hypotheses: ordered slots of top-k candidates.

use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::Role;
use crate::kg::ConceptId;

/// Candidates kept per slot unless configured otherwise.
pub const DEFAULT_K_MAX: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum HypothesisError {
    #[error("segment `{0}` has no slots")]
    NoSlots(String),
    #[error("slot `{0}` has no candidates")]
    EmptySlot(String),
    #[error("slot `{slot}` has {count} candidates, more than the limit of {limit}")]
    TooManyCandidates { slot: String, count: usize, limit: usize },
    #[error("slot `{slot}` lists concept `{concept}` twice")]
    DuplicateCandidate { slot: String, concept: String },
    #[error("slot `{slot}`: score for `{concept}` is not finite")]
    NonFiniteScore { slot: String, concept: String },
    #[error("duplicate slot id `{0}`")]
    DuplicateSlot(String),
    #[error("empty concept in slot `{0}`")]
    EmptyConcept(String),
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("read failed: {0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub concept: ConceptId,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub id: String,
    pub role: Role,
    /// Sorted by confidence, highest first.
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSet {
    pub segment: String,
    pub slots: Vec<Slot>,
}

#[derive(Serialize, Deserialize)]
struct CandidateRecord {
    concept: String,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct SlotRecord {
    id: String,
    role: Role,
    candidates: Vec<CandidateRecord>,
}

#[derive(Serialize, Deserialize)]
struct SegmentRecord {
    segment: String,
    slots: Vec<SlotRecord>,
}

impl HypothesisSet {
    /// Validates the slots and orders each slot's candidates by confidence
    /// (stable, so equal scores keep their input order).
    pub fn new(segment: impl Into<String>, slots: Vec<Slot>, k_max: usize) -> Result<Self, HypothesisError> {
        let segment = segment.into();
        if slots.is_empty() {
            return Err(HypothesisError::NoSlots(segment));
        }
        let mut ids = BTreeSet::new();
        let mut slots = slots;
        for slot in &mut slots {
            if !ids.insert(slot.id.clone()) {
                return Err(HypothesisError::DuplicateSlot(slot.id.clone()));
            }
            if slot.candidates.is_empty() {
                return Err(HypothesisError::EmptySlot(slot.id.clone()));
            }
            if slot.candidates.len() > k_max {
                return Err(HypothesisError::TooManyCandidates {
                    slot: slot.id.clone(),
                    count: slot.candidates.len(),
                    limit: k_max,
                });
            }
            let mut seen = BTreeSet::new();
            for cand in &slot.candidates {
                if !cand.confidence.is_finite() {
                    return Err(HypothesisError::NonFiniteScore {
                        slot: slot.id.clone(),
                        concept: cand.concept.to_string(),
                    });
                }
                if !seen.insert(cand.concept.clone()) {
                    return Err(HypothesisError::DuplicateCandidate {
                        slot: slot.id.clone(),
                        concept: cand.concept.to_string(),
                    });
                }
            }
            slot.candidates.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        }
        Ok(HypothesisSet { segment, slots })
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Number of grounded label assignments.
    pub fn assignment_count(&self) -> u128 {
        self.slots
            .iter()
            .map(|s| s.candidates.len() as u128)
            .fold(1u128, |acc, n| acc.saturating_mul(n))
    }

    pub fn candidate(&self, slot: usize, index: usize) -> &Candidate {
        &self.slots[slot].candidates[index]
    }

    pub fn from_json(line: &str, k_max: usize) -> Result<Self, HypothesisError> {
        let record: SegmentRecord = serde_json::from_str(line).map_err(|e| HypothesisError::Line {
            line: 1,
            reason: e.to_string(),
        })?;
        let slots = record
            .slots
            .into_iter()
            .map(|s| {
                let candidates = s
                    .candidates
                    .into_iter()
                    .map(|c| {
                        Ok(Candidate {
                            concept: ConceptId::new(&c.concept)
                                .map_err(|_| HypothesisError::EmptyConcept(s.id.clone()))?,
                            confidence: c.score,
                        })
                    })
                    .collect::<Result<Vec<_>, HypothesisError>>()?;
                Ok(Slot {
                    id: s.id,
                    role: s.role,
                    candidates,
                })
            })
            .collect::<Result<Vec<_>, HypothesisError>>()?;
        HypothesisSet::new(record.segment, slots, k_max)
    }

    pub fn to_json(&self) -> String {
        let record = SegmentRecord {
            segment: self.segment.clone(),
            slots: self
                .slots
                .iter()
                .map(|s| SlotRecord {
                    id: s.id.clone(),
                    role: s.role,
                    candidates: s
                        .candidates
                        .iter()
                        .map(|c| CandidateRecord {
                            concept: c.concept.to_string(),
                            score: c.confidence,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string(&record).expect("hypothesis records serialize")
    }
}

/// Reads one segment per non-blank line. Errors carry the 1-based line.
pub fn parse_hypotheses<R: BufRead>(source: R, k_max: usize) -> Result<Vec<HypothesisSet>, HypothesisError> {
    let mut segments = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line.map_err(|e| HypothesisError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let set = HypothesisSet::from_json(&line, k_max).map_err(|e| match e {
            HypothesisError::Line { reason, .. } => HypothesisError::Line { line: n + 1, reason },
            other => HypothesisError::Line {
                line: n + 1,
                reason: other.to_string(),
            },
        })?;
        segments.push(set);
    }
    Ok(segments)
}
