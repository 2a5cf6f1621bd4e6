//! Canonical JSON form of a configuration.

use serde::{Deserialize, Serialize};

use super::{to_label, RenderError};
use crate::configuration::{Configuration, CostModel, Edge, Endpoint, EnergyBreakdown, SiteId};
use crate::generator::{Bond, BondDirection, BondState, ClosureRule, Generator, GeneratorKind, Provenance};
use crate::inference::Interpretation;
use crate::kg::ConceptId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondDoc {
    pub coordinate: u16,
    pub direction: BondDirection,
    pub value: String,
    /// The endpoint this bond is closed against, if any.
    pub peer: Option<Endpoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteDoc {
    pub site: SiteId,
    pub kind: GeneratorKind,
    pub concept: ConceptId,
    pub provenance: Provenance,
    pub bonds: Vec<BondDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationDoc {
    pub cost: CostModel,
    pub closure: ClosureRule,
    pub energy: EnergyBreakdown,
    pub sites: Vec<SiteDoc>,
    pub edges: Vec<Edge>,
}

impl ConfigurationDoc {
    pub fn from_configuration(c: &Configuration) -> Self {
        let sites = c
            .generators()
            .map(|(site, g)| SiteDoc {
                site,
                kind: g.kind(),
                concept: g.concept().clone(),
                provenance: g.provenance().clone(),
                bonds: g
                    .bonds()
                    .iter()
                    .map(|b| BondDoc {
                        coordinate: b.coordinate,
                        direction: b.direction,
                        value: b.value.clone(),
                        peer: match b.state {
                            BondState::Open => None,
                            BondState::Closed { peer, peer_coordinate } => Some(Endpoint::new(peer, peer_coordinate)),
                        },
                    })
                    .collect(),
            })
            .collect();
        ConfigurationDoc {
            cost: c.cost_model(),
            closure: c.closure_rule(),
            energy: c.energy(),
            sites,
            edges: c.edges().cloned().collect(),
        }
    }

    pub fn into_configuration(self) -> Result<Configuration, RenderError> {
        let generators = self
            .sites
            .iter()
            .map(|s| {
                let bonds = s
                    .bonds
                    .iter()
                    .map(|b| Bond {
                        coordinate: b.coordinate,
                        direction: b.direction,
                        value: b.value.clone(),
                        state: BondState::Open,
                    })
                    .collect();
                let g = Generator::from_parts(s.kind, s.concept.clone(), bonds, s.provenance.clone());
                let problems = g.kind_violations();
                if !problems.is_empty() {
                    return Err(RenderError::Invalid(format!(
                        "site {}: {}",
                        s.site,
                        problems.join("; ")
                    )));
                }
                Ok((s.site, g))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let c = Configuration::restore(self.cost, self.closure, generators, self.edges)?;
        for s in &self.sites {
            let g = c.generator(s.site).expect("restored site");
            for b in &s.bonds {
                let state = g.bond(b.coordinate).map(|x| x.state);
                let expected = b.peer.map(|p| BondState::Closed {
                    peer: p.site,
                    peer_coordinate: p.coordinate,
                });
                if state != Some(expected.unwrap_or(BondState::Open)) {
                    return Err(RenderError::Invalid(format!(
                        "bond {} disagrees with the edge list",
                        Endpoint::new(s.site, b.coordinate)
                    )));
                }
            }
        }
        if let Some(v) = c.validate().first() {
            return Err(RenderError::Invalid(v.to_string()));
        }
        let recorded = self.energy;
        let actual = c.energy();
        if recorded.max_abs_diff(&actual) > 1e-9 {
            return Err(RenderError::Invalid(format!(
                "recorded energy {} disagrees with edge sum {}",
                recorded.total, actual.total
            )));
        }
        Ok(c)
    }
}

pub fn to_json(c: &Configuration) -> String {
    serde_json::to_string(&ConfigurationDoc::from_configuration(c)).expect("configuration serializes")
}

pub fn to_json_pretty(c: &Configuration) -> String {
    serde_json::to_string_pretty(&ConfigurationDoc::from_configuration(c)).expect("configuration serializes")
}

pub fn from_json(text: &str) -> Result<Configuration, RenderError> {
    let doc: ConfigurationDoc = serde_json::from_str(text).map_err(|e| RenderError::Json(e.to_string()))?;
    doc.into_configuration()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpretationDoc {
    pub rank: usize,
    pub energy: EnergyBreakdown,
    pub connected: bool,
    /// `"verb object"`, when the interpretation has both roles.
    pub label: Option<String>,
    pub content: String,
    pub labels: Vec<ConceptId>,
    pub cues: Vec<ConceptId>,
    pub configuration: ConfigurationDoc,
}

/// One output record: a segment and its ranked interpretations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub segment: String,
    pub interpretations: Vec<InterpretationDoc>,
}

impl SegmentDoc {
    pub fn new(segment: &str, interpretations: &[Interpretation]) -> Self {
        SegmentDoc {
            segment: segment.to_string(),
            interpretations: interpretations
                .iter()
                .map(|i| InterpretationDoc {
                    rank: i.rank,
                    energy: i.energy,
                    connected: i.connected,
                    label: to_label(&i.configuration).ok(),
                    content: i.configuration.content_string(),
                    labels: i.key.labels.clone(),
                    cues: i.key.cues.clone(),
                    configuration: ConfigurationDoc::from_configuration(&i.configuration),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("segment records serialize")
    }
}
