//! Generators: the atomic units of an interpretation, each carrying a fixed
//! set of directed bonds.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::configuration::SiteId;
use crate::kg::{ConceptId, Direction, KnowledgeGraph};

/// Bond value shared by every support bond.
pub const FEATURE_BOND: &str = "feature";

/// Relation treated as a wildcard under [`ClosureRule::RelatedToWildcard`].
pub const WILDCARD_RELATION: &str = "RelatedTo";

pub const DEFAULT_MAX_SEMANTIC_BONDS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("feature tag must not be empty")]
    EmptyTag,
    #[error("confidence {0} is not finite")]
    NonFiniteConfidence(f64),
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GeneratorId(pub u64);

impl GeneratorId {
    fn fresh() -> Self {
        GeneratorId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Feature,
    Grounded,
    Ungrounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondDirection {
    In,
    Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionFilter {
    In,
    Out,
    Any,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondState {
    Open,
    Closed { peer: SiteId, peer_coordinate: u16 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub coordinate: u16,
    pub direction: BondDirection,
    pub value: String,
    pub state: BondState,
}

impl Bond {
    pub fn is_open(&self) -> bool {
        self.state == BondState::Open
    }

    pub fn is_feature(&self) -> bool {
        self.value == FEATURE_BOND
    }
}

/// How out-bond and in-bond values must relate for the bonds to close.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureRule {
    #[default]
    Exact,
    /// Exact match, or either side is `RelatedTo`.
    RelatedToWildcard,
}

impl ClosureRule {
    pub fn matches(self, out_value: &str, in_value: &str) -> bool {
        if out_value == in_value {
            return true;
        }
        match self {
            ClosureRule::Exact => false,
            ClosureRule::RelatedToWildcard => {
                out_value != FEATURE_BOND
                    && in_value != FEATURE_BOND
                    && (out_value == WILDCARD_RELATION || in_value == WILDCARD_RELATION)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Action,
    Object,
    Subject,
    Other,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Action => "action",
            Role::Object => "object",
            Role::Subject => "subject",
            Role::Other => "other",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Feature {
        tag: String,
    },
    Grounded {
        slot: String,
        slot_index: usize,
        role: Role,
        confidence: f64,
    },
    Ungrounded {
        /// The `(from, to)` concept pair whose cue query produced this
        /// generator, when it was created as a cue.
        cue_for: Option<(ConceptId, ConceptId)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    id: GeneratorId,
    kind: GeneratorKind,
    concept: ConceptId,
    bonds: Vec<Bond>,
    provenance: Provenance,
}

impl Generator {
    pub(crate) fn from_parts(
        kind: GeneratorKind,
        concept: ConceptId,
        bonds: Vec<Bond>,
        provenance: Provenance,
    ) -> Self {
        Generator {
            id: GeneratorId::fresh(),
            kind,
            concept,
            bonds,
            provenance,
        }
    }

    pub fn id(&self) -> GeneratorId {
        self.id
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn concept(&self) -> &ConceptId {
        &self.concept
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn arity(&self) -> usize {
        self.bonds.len()
    }

    pub fn bond(&self, coordinate: u16) -> Option<&Bond> {
        self.bonds.iter().find(|b| b.coordinate == coordinate)
    }

    pub(crate) fn bond_mut(&mut self, coordinate: u16) -> Option<&mut Bond> {
        self.bonds.iter_mut().find(|b| b.coordinate == coordinate)
    }

    /// Confidence of a grounded generator's classifier hypothesis.
    pub fn confidence(&self) -> Option<f64> {
        match self.provenance {
            Provenance::Grounded { confidence, .. } => Some(confidence),
            _ => None,
        }
    }

    pub fn role(&self) -> Option<Role> {
        match self.provenance {
            Provenance::Grounded { role, .. } => Some(role),
            _ => None,
        }
    }

    pub fn slot_index(&self) -> Option<usize> {
        match self.provenance {
            Provenance::Grounded { slot_index, .. } => Some(slot_index),
            _ => None,
        }
    }

    /// An ungrounded generator without bonds can never join a configuration.
    pub fn is_degenerate(&self) -> bool {
        self.kind == GeneratorKind::Ungrounded && self.bonds.is_empty()
    }

    pub fn open_bonds(&self, filter: DirectionFilter) -> Vec<&Bond> {
        let mut open: Vec<&Bond> = self
            .bonds
            .iter()
            .filter(|b| b.is_open())
            .filter(|b| match filter {
                DirectionFilter::Any => true,
                DirectionFilter::In => b.direction == BondDirection::In,
                DirectionFilter::Out => b.direction == BondDirection::Out,
            })
            .collect();
        open.sort_by_key(|b| b.coordinate);
        open
    }

    /// First open bond with the given direction and value.
    pub fn find_open(&self, direction: BondDirection, value: &str) -> Option<&Bond> {
        self.bonds
            .iter()
            .find(|b| b.direction == direction && b.value == value && b.is_open())
    }

    /// Checks the per-kind bond layout.
    pub fn kind_violations(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let feature_in = self
            .bonds
            .iter()
            .filter(|b| b.is_feature() && b.direction == BondDirection::In)
            .count();
        let feature_out = self
            .bonds
            .iter()
            .filter(|b| b.is_feature() && b.direction == BondDirection::Out)
            .count();
        match self.kind {
            GeneratorKind::Feature => {
                if self.bonds.len() != 1 || feature_out != 1 {
                    problems.push("feature generator must have exactly one `feature` out-bond".to_string());
                }
            }
            GeneratorKind::Grounded => {
                if feature_in != 1 || feature_out != 0 {
                    problems.push("grounded generator must have exactly one `feature` in-bond".to_string());
                }
            }
            GeneratorKind::Ungrounded => {
                if feature_in + feature_out != 0 {
                    problems.push("ungrounded generator must not carry `feature` bonds".to_string());
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.bonds {
            if !seen.insert(b.coordinate) {
                problems.push(format!("duplicate bond coordinate {}", b.coordinate));
            }
        }
        problems
    }
}

pub fn make_feature(tag: &str) -> Result<Generator, GeneratorError> {
    let tag = tag.trim();
    if tag.is_empty() {
        return Err(GeneratorError::EmptyTag);
    }
    let concept = ConceptId::new(tag).map_err(|_| GeneratorError::EmptyTag)?;
    let bonds = vec![Bond {
        coordinate: 0,
        direction: BondDirection::Out,
        value: FEATURE_BOND.to_string(),
        state: BondState::Open,
    }];
    Ok(Generator::from_parts(
        GeneratorKind::Feature,
        concept,
        bonds,
        Provenance::Feature { tag: tag.to_string() },
    ))
}

/// Where a grounded generator's hypothesis came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Grounding {
    pub slot: String,
    pub slot_index: usize,
    pub role: Role,
    pub confidence: f64,
}

pub fn make_grounded(
    concept: &ConceptId,
    kg: &KnowledgeGraph,
    grounding: Grounding,
    max_semantic_bonds: usize,
) -> Result<Generator, GeneratorError> {
    if !grounding.confidence.is_finite() {
        return Err(GeneratorError::NonFiniteConfidence(grounding.confidence));
    }
    let mut bonds = vec![Bond {
        coordinate: 0,
        direction: BondDirection::In,
        value: FEATURE_BOND.to_string(),
        state: BondState::Open,
    }];
    append_semantic_bonds(&mut bonds, concept, kg, max_semantic_bonds);
    Ok(Generator::from_parts(
        GeneratorKind::Grounded,
        concept.clone(),
        bonds,
        Provenance::Grounded {
            slot: grounding.slot,
            slot_index: grounding.slot_index,
            role: grounding.role,
            confidence: grounding.confidence,
        },
    ))
}

pub fn make_ungrounded(
    concept: &ConceptId,
    kg: &KnowledgeGraph,
    max_semantic_bonds: usize,
    cue_for: Option<(ConceptId, ConceptId)>,
) -> Generator {
    let mut bonds = Vec::new();
    append_semantic_bonds(&mut bonds, concept, kg, max_semantic_bonds);
    Generator::from_parts(
        GeneratorKind::Ungrounded,
        concept.clone(),
        bonds,
        Provenance::Ungrounded { cue_for },
    )
}

/// One bond per distinct neighbor relation and direction, keeping the
/// `cap` relations of largest weight magnitude. Coordinates run in-bonds
/// first, each direction in relation-name order.
fn append_semantic_bonds(bonds: &mut Vec<Bond>, concept: &ConceptId, kg: &KnowledgeGraph, cap: usize) {
    for (direction, bond_dir) in [(Direction::In, BondDirection::In), (Direction::Out, BondDirection::Out)] {
        let mut strongest: BTreeMap<&str, f64> = BTreeMap::new();
        for (relation, _, weight) in kg.neighbors(concept, direction) {
            let entry = strongest.entry(relation).or_insert(0.0);
            *entry = entry.max(weight.abs());
        }
        let mut ranked: Vec<(&str, f64)> = strongest.into_iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(cap);
        ranked.sort_by(|a, b| a.0.cmp(b.0));
        for (relation, _) in ranked {
            bonds.push(Bond {
                coordinate: bonds.len() as u16,
                direction: bond_dir,
                value: relation.to_string(),
                state: BondState::Open,
            });
        }
    }
}

/// Energy of a support bond for a classifier confidence.
pub fn support_bond_energy(confidence: f64) -> f64 {
    confidence.tanh()
}
