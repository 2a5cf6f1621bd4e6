//! Video activity interpretation with pattern-theory generators and a
//! commonsense knowledge graph.
//!
//! Classifier hypotheses become grounded generators, the knowledge graph
//! supplies semantic bonds and contextualization cues, and simulated
//! annealing searches for low-energy configurations, which render as
//! captions, activity labels, JSON or DOT.

pub mod configuration;
pub mod eval;
pub mod generator;
pub mod inference;
pub mod kg;
pub mod render;
pub mod seed;
pub mod synth;

pub use configuration::{BondKind, Configuration, CostModel, Edge, Endpoint, EnergyBreakdown, SiteId};
pub use generator::{ClosureRule, Generator, GeneratorKind, Role};
pub use inference::{anneal, oracle_search, HypothesisSet, InferenceError, InferenceParams, Interpretation};
pub use kg::{load_kg, ConceptId, CueScope, KgFormat, KnowledgeGraph, LoadOptions};
pub use render::{to_caption, to_dot, to_json, to_label, RenderError, SentenceScorer};
pub use synth::{synthesize, PlantedAnswer, SynthParams};
