//! Turning configurations into captions, labels, JSON and DOT.

mod caption;
mod dot;
mod json;
mod scorer;

use thiserror::Error;

pub use caption::{
    caption_templates, to_caption, to_caption_with, to_label, Caption, CaptionTemplate, Inflector, Tense, DETERMINERS,
    PREPOSITIONS,
};
pub use dot::to_dot;
pub use json::{from_json, to_json, to_json_pretty, BondDoc, ConfigurationDoc, InterpretationDoc, SegmentDoc, SiteDoc};
pub use scorer::{NgramScorer, SentenceScorer, UniformScorer};

use crate::configuration::ConfigError;
use crate::generator::Role;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("configuration has no grounded {} concept", .0.as_str())]
    MissingRole(Role),
    #[error("counts file line {line}: {reason}")]
    Counts { line: usize, reason: String },
    #[error("verb overrides line {line}: {reason}")]
    Overrides { line: usize, reason: String },
    #[error("malformed configuration JSON: {0}")]
    Json(String),
    #[error("inconsistent configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
