//! Configurations: a connector graph whose sites hold generators, the closed
//! bond couplings between them, and the energy of the whole.
//!
//! The total energy is
//!
//! ```text
//! E(c) = -( sum over support edges of tanh(f) + sum over semantic edges of tanh(phi) ) + Q(c)
//! Q(c) = k * (open out-bonds over all ungrounded generators)
//! ```
//!
//! Only closed bonds contribute to the sums. The cache is maintained
//! incrementally by [`Configuration::connect`] and
//! [`Configuration::disconnect`]; debug builds cross-check it after every
//! mutation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{
    support_bond_energy, BondDirection, BondState, ClosureRule, Generator, GeneratorKind, Role, FEATURE_BOND,
};
use crate::kg::{ConceptId, KnowledgeGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// One bond of one site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub site: SiteId,
    pub coordinate: u16,
}

impl Endpoint {
    pub fn new(site: SiteId, coordinate: u16) -> Self {
        Endpoint { site, coordinate }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.site, self.coordinate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondKind {
    Support,
    Semantic,
}

/// A closed coupling from an out-bond to an in-bond.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
    pub kind: BondKind,
    pub value: String,
    pub energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Penalty per open out-bond of an ungrounded generator.
    pub k: f64,
    /// Also charge open in-bonds of ungrounded generators.
    pub count_in_bonds: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            k: 1.0,
            count_in_bonds: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub support_sum: f64,
    pub semantic_sum: f64,
    pub q_cost: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(support_sum: f64, semantic_sum: f64, q_cost: f64) -> Self {
        EnergyBreakdown {
            support_sum,
            semantic_sum,
            q_cost,
            total: -(support_sum + semantic_sum) + q_cost,
        }
    }

    pub fn max_abs_diff(&self, other: &EnergyBreakdown) -> f64 {
        [
            self.support_sum - other.support_sum,
            self.semantic_sum - other.semantic_sum,
            self.q_cost - other.q_cost,
            self.total - other.total,
        ]
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("no generator at site {0}")]
    DanglingSite(SiteId),
    #[error("no bond at {0}")]
    UnknownBond(Endpoint),
    #[error("bond {0} is not open")]
    BondNotOpen(Endpoint),
    #[error("bond {0} has the wrong direction for this end of the coupling")]
    DirectionMismatch(Endpoint),
    #[error("bond values `{out_value}` and `{in_value}` do not match")]
    ValueMismatch { out_value: String, in_value: String },
    #[error("kind violation: {0}")]
    KindViolation(String),
    #[error("no edge at {0}")]
    UnknownEdge(Endpoint),
    #[error("ungrounded generator `{0}` has no bonds")]
    Degenerate(ConceptId),
    #[error("generator `{0}` must be inserted with all bonds open")]
    NotFresh(ConceptId),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Kind { site: SiteId, message: String },
    DanglingSite { edge: Endpoint, site: SiteId },
    MissingBond(Endpoint),
    Direction { edge: Endpoint, message: String },
    ValueMismatch { edge: Endpoint },
    KindCoupling { edge: Endpoint, message: String },
    MutualClosure { endpoint: Endpoint, message: String },
    SharedEndpoint(Endpoint),
    EnergyCache { expected: f64, cached: f64 },
    OpenCount { expected: usize, cached: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Kind { site, message } => write!(f, "{site}: {message}"),
            Violation::DanglingSite { edge, site } => write!(f, "edge {edge} references missing site {site}"),
            Violation::MissingBond(e) => write!(f, "edge references missing bond {e}"),
            Violation::Direction { edge, message } => write!(f, "edge {edge}: {message}"),
            Violation::ValueMismatch { edge } => write!(f, "edge {edge}: bond values do not match"),
            Violation::KindCoupling { edge, message } => write!(f, "edge {edge}: {message}"),
            Violation::MutualClosure { endpoint, message } => write!(f, "bond {endpoint}: {message}"),
            Violation::SharedEndpoint(e) => write!(f, "bond {e} appears in more than one edge"),
            Violation::EnergyCache { expected, cached } => {
                write!(f, "energy cache {cached} disagrees with edge sum {expected}")
            }
            Violation::OpenCount { expected, cached } => {
                write!(f, "open-bond cache {cached} disagrees with recount {expected}")
            }
        }
    }
}

/// Role of one entry of a configuration's semantic content.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentKind {
    Grounded(Role),
    Cue,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentItem {
    pub concept: ConceptId,
    pub kind: ContentKind,
}

#[derive(Clone, Debug)]
pub struct Configuration {
    sites: BTreeMap<SiteId, Generator>,
    // keyed by the out-bond endpoint
    edges: BTreeMap<Endpoint, Edge>,
    // in-bond endpoint -> out-bond endpoint
    incoming: BTreeMap<Endpoint, Endpoint>,
    next_site: u32,
    cost: CostModel,
    closure: ClosureRule,
    support_sum: f64,
    semantic_sum: f64,
    open_cue_out: usize,
    open_cue_in: usize,
}

impl Default for Configuration {
    fn default() -> Self {
        Configuration::new(CostModel::default(), ClosureRule::default())
    }
}

impl Configuration {
    pub fn new(cost: CostModel, closure: ClosureRule) -> Self {
        Configuration {
            sites: BTreeMap::new(),
            edges: BTreeMap::new(),
            incoming: BTreeMap::new(),
            next_site: 0,
            cost,
            closure,
            support_sum: 0.0,
            semantic_sum: 0.0,
            open_cue_out: 0,
            open_cue_in: 0,
        }
    }

    pub fn cost_model(&self) -> CostModel {
        self.cost
    }

    pub fn set_cost_model(&mut self, cost: CostModel) {
        self.cost = cost;
    }

    pub fn closure_rule(&self) -> ClosureRule {
        self.closure
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn generator(&self, site: SiteId) -> Option<&Generator> {
        self.sites.get(&site)
    }

    pub fn generators(&self) -> impl Iterator<Item = (SiteId, &Generator)> {
        self.sites.iter().map(|(&s, g)| (s, g))
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The edge touching `endpoint`, from either side.
    pub fn edge_at(&self, endpoint: Endpoint) -> Option<&Edge> {
        self.edges
            .get(&endpoint)
            .or_else(|| self.incoming.get(&endpoint).and_then(|out| self.edges.get(out)))
    }

    pub fn add_generator(&mut self, generator: Generator) -> Result<SiteId, ConfigError> {
        if generator.is_degenerate() {
            return Err(ConfigError::Degenerate(generator.concept().clone()));
        }
        if generator.bonds().iter().any(|b| !b.is_open()) {
            return Err(ConfigError::NotFresh(generator.concept().clone()));
        }
        let site = SiteId(self.next_site);
        self.next_site += 1;
        self.adjust_open_counts(&generator, true);
        self.sites.insert(site, generator);
        Ok(site)
    }

    /// Removes a generator, reopening every bond it had closed on its peers.
    pub fn remove_generator(&mut self, site: SiteId) -> Result<Generator, ConfigError> {
        let closed: Vec<Endpoint> = {
            let g = self.sites.get(&site).ok_or(ConfigError::DanglingSite(site))?;
            g.bonds()
                .iter()
                .filter(|b| !b.is_open())
                .map(|b| Endpoint::new(site, b.coordinate))
                .collect()
        };
        for endpoint in closed {
            let out = match self.edges.contains_key(&endpoint) {
                true => endpoint,
                false => *self.incoming.get(&endpoint).ok_or(ConfigError::UnknownEdge(endpoint))?,
            };
            self.disconnect(out)?;
        }
        let g = self.sites.remove(&site).expect("site checked above");
        self.adjust_open_counts(&g, false);
        Ok(g)
    }

    fn adjust_open_counts(&mut self, g: &Generator, add: bool) {
        if g.kind() != GeneratorKind::Ungrounded {
            return;
        }
        let outs = g
            .bonds()
            .iter()
            .filter(|b| b.is_open() && b.direction == BondDirection::Out)
            .count();
        let ins = g
            .bonds()
            .iter()
            .filter(|b| b.is_open() && b.direction == BondDirection::In)
            .count();
        if add {
            self.open_cue_out += outs;
            self.open_cue_in += ins;
        } else {
            self.open_cue_out -= outs;
            self.open_cue_in -= ins;
        }
    }

    fn bond_at(&self, endpoint: Endpoint) -> Result<(&Generator, &crate::generator::Bond), ConfigError> {
        let g = self
            .sites
            .get(&endpoint.site)
            .ok_or(ConfigError::DanglingSite(endpoint.site))?;
        let b = g.bond(endpoint.coordinate).ok_or(ConfigError::UnknownBond(endpoint))?;
        Ok((g, b))
    }

    /// Closes the out-bond `from` with the in-bond `to`.
    pub fn connect(&mut self, kg: &KnowledgeGraph, from: Endpoint, to: Endpoint) -> Result<&Edge, ConfigError> {
        let (out_gen, out_bond) = self.bond_at(from)?;
        let (in_gen, in_bond) = self.bond_at(to)?;
        if out_bond.direction != BondDirection::Out {
            return Err(ConfigError::DirectionMismatch(from));
        }
        if in_bond.direction != BondDirection::In {
            return Err(ConfigError::DirectionMismatch(to));
        }
        if !out_bond.is_open() {
            return Err(ConfigError::BondNotOpen(from));
        }
        if !in_bond.is_open() {
            return Err(ConfigError::BondNotOpen(to));
        }
        if from.site == to.site {
            return Err(ConfigError::KindViolation("a generator cannot bond with itself".into()));
        }
        if !self.closure.matches(&out_bond.value, &in_bond.value) {
            return Err(ConfigError::ValueMismatch {
                out_value: out_bond.value.clone(),
                in_value: in_bond.value.clone(),
            });
        }
        let kind = coupling_kind(out_gen.kind(), in_gen.kind(), &out_bond.value, &in_bond.value)
            .map_err(ConfigError::KindViolation)?;
        let energy = edge_energy(kg, kind, out_gen, in_gen, &out_bond.value, &in_bond.value);
        let value = out_bond.value.clone();
        let (out_kind, in_kind) = (out_gen.kind(), in_gen.kind());

        self.set_state(
            from,
            BondState::Closed {
                peer: to.site,
                peer_coordinate: to.coordinate,
            },
        );
        self.set_state(
            to,
            BondState::Closed {
                peer: from.site,
                peer_coordinate: from.coordinate,
            },
        );
        if out_kind == GeneratorKind::Ungrounded {
            self.open_cue_out -= 1;
        }
        if in_kind == GeneratorKind::Ungrounded {
            self.open_cue_in -= 1;
        }
        match kind {
            BondKind::Support => self.support_sum += energy,
            BondKind::Semantic => self.semantic_sum += energy,
        }
        self.incoming.insert(to, from);
        self.edges.insert(
            from,
            Edge {
                from,
                to,
                kind,
                value,
                energy,
            },
        );
        self.debug_check(Some(kg));
        Ok(&self.edges[&from])
    }

    /// Removes the edge whose out-bond is `from`, reopening both bonds.
    pub fn disconnect(&mut self, from: Endpoint) -> Result<Edge, ConfigError> {
        let edge = self.edges.remove(&from).ok_or(ConfigError::UnknownEdge(from))?;
        self.incoming.remove(&edge.to);
        self.set_state(edge.from, BondState::Open);
        self.set_state(edge.to, BondState::Open);
        if self.sites[&edge.from.site].kind() == GeneratorKind::Ungrounded {
            self.open_cue_out += 1;
        }
        if self.sites[&edge.to.site].kind() == GeneratorKind::Ungrounded {
            self.open_cue_in += 1;
        }
        match edge.kind {
            BondKind::Support => self.support_sum -= edge.energy,
            BondKind::Semantic => self.semantic_sum -= edge.energy,
        }
        self.debug_check(None);
        Ok(edge)
    }

    fn set_state(&mut self, endpoint: Endpoint, state: BondState) {
        let bond = self
            .sites
            .get_mut(&endpoint.site)
            .and_then(|g| g.bond_mut(endpoint.coordinate))
            .expect("endpoint validated before mutation");
        bond.state = state;
    }

    fn q_from_counts(&self, cost: CostModel, open_out: usize, open_in: usize) -> f64 {
        let counted = if cost.count_in_bonds {
            open_out + open_in
        } else {
            open_out
        };
        cost.k * counted as f64
    }

    /// The incrementally maintained energy.
    pub fn energy(&self) -> EnergyBreakdown {
        EnergyBreakdown::new(
            self.support_sum,
            self.semantic_sum,
            self.q_from_counts(self.cost, self.open_cue_out, self.open_cue_in),
        )
    }

    /// Full recomputation from generators, bond states and the knowledge
    /// graph, under an arbitrary cost model.
    pub fn energy_with(&self, kg: &KnowledgeGraph, cost: CostModel) -> EnergyBreakdown {
        let mut support = 0.0;
        let mut semantic = 0.0;
        for edge in self.edges.values() {
            let out_gen = &self.sites[&edge.from.site];
            let in_gen = &self.sites[&edge.to.site];
            let out_value = &out_gen.bond(edge.from.coordinate).expect("edge bond").value;
            let in_value = &in_gen.bond(edge.to.coordinate).expect("edge bond").value;
            let e = edge_energy(kg, edge.kind, out_gen, in_gen, out_value, in_value);
            match edge.kind {
                BondKind::Support => support += e,
                BondKind::Semantic => semantic += e,
            }
        }
        let (open_out, open_in) = self.count_open_cue_bonds();
        EnergyBreakdown::new(support, semantic, self.q_from_counts(cost, open_out, open_in))
    }

    pub fn recompute_energy(&self, kg: &KnowledgeGraph) -> EnergyBreakdown {
        self.energy_with(kg, self.cost)
    }

    fn count_open_cue_bonds(&self) -> (usize, usize) {
        let mut open_out = 0;
        let mut open_in = 0;
        for g in self.sites.values().filter(|g| g.kind() == GeneratorKind::Ungrounded) {
            for b in g.bonds().iter().filter(|b| b.is_open()) {
                match b.direction {
                    BondDirection::Out => open_out += 1,
                    BondDirection::In => open_in += 1,
                }
            }
        }
        (open_out, open_in)
    }

    /// `k` times the number of open out-bonds over all ungrounded generators.
    pub fn cost_q(&self, k: f64) -> f64 {
        let (open_out, _) = self.count_open_cue_bonds();
        k * open_out as f64
    }

    /// Number of open in-bonds over all ungrounded generators.
    pub fn open_cue_in_bonds(&self) -> usize {
        self.count_open_cue_bonds().1
    }

    /// Unnormalized probability `exp(-E)`.
    pub fn probability_weight(&self) -> f64 {
        (-self.energy().total).exp()
    }

    /// Grounded generators ordered by slot position.
    pub fn grounded(&self) -> Vec<(SiteId, &Generator)> {
        let mut grounded: Vec<_> = self
            .generators()
            .filter(|(_, g)| g.kind() == GeneratorKind::Grounded)
            .collect();
        grounded.sort_by(|a, b| (a.1.slot_index(), a.1.concept(), a.0).cmp(&(b.1.slot_index(), b.1.concept(), b.0)));
        grounded
    }

    /// Peers reached through closed semantic bonds.
    pub fn semantic_peers(&self, site: SiteId) -> Vec<SiteId> {
        let Some(g) = self.sites.get(&site) else {
            return Vec::new();
        };
        let mut peers: Vec<SiteId> = g
            .bonds()
            .iter()
            .filter(|b| !b.is_feature())
            .filter_map(|b| match b.state {
                BondState::Closed { peer, .. } => Some(peer),
                BondState::Open => None,
            })
            .collect();
        peers.sort();
        peers.dedup();
        peers
    }

    fn closed_energy(&self, site: SiteId) -> f64 {
        self.sites[&site]
            .bonds()
            .iter()
            .filter(|b| !b.is_open())
            .filter_map(|b| self.edge_at(Endpoint::new(site, b.coordinate)))
            .map(|e| e.energy)
            .sum()
    }

    /// Grounded concepts in slot order, each followed by the cue concepts it
    /// anchors. A cue is anchored at the latest-slot grounded generator it
    /// bonds with; cues under one anchor are ordered by closed-bond energy
    /// (strongest first), then concept.
    pub fn semantic_content(&self) -> Vec<ContentItem> {
        let grounded = self.grounded();
        let rank: BTreeMap<SiteId, usize> = grounded.iter().enumerate().map(|(i, (s, _))| (*s, i)).collect();
        let mut anchored: Vec<Vec<(f64, &ConceptId)>> = vec![Vec::new(); grounded.len()];
        let mut floating: Vec<(f64, &ConceptId)> = Vec::new();
        for (site, g) in self.generators().filter(|(_, g)| g.kind() == GeneratorKind::Ungrounded) {
            let anchor = self
                .semantic_peers(site)
                .into_iter()
                .filter_map(|p| rank.get(&p).copied())
                .max();
            let entry = (self.closed_energy(site), g.concept());
            match anchor {
                Some(i) => anchored[i].push(entry),
                None => floating.push(entry),
            }
        }
        let order = |list: &mut Vec<(f64, &ConceptId)>| {
            list.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        };
        let mut content = Vec::new();
        for ((_, g), cues) in grounded.iter().zip(anchored.iter_mut()) {
            content.push(ContentItem {
                concept: g.concept().clone(),
                kind: ContentKind::Grounded(g.role().unwrap_or(Role::Other)),
            });
            order(cues);
            content.extend(cues.iter().map(|(_, c)| ContentItem {
                concept: (*c).clone(),
                kind: ContentKind::Cue,
            }));
        }
        order(&mut floating);
        content.extend(floating.iter().map(|(_, c)| ContentItem {
            concept: (*c).clone(),
            kind: ContentKind::Cue,
        }));
        content
    }

    /// Semantic content as text, cue concepts parenthesized.
    pub fn content_string(&self) -> String {
        let grounded: Vec<String> = self.grounded().iter().map(|(_, g)| g.concept().to_words()).collect();
        let cues: Vec<String> = self
            .semantic_content()
            .into_iter()
            .filter(|item| item.kind == ContentKind::Cue)
            .map(|item| format!("({})", item.concept.to_words()))
            .collect();
        grounded.into_iter().chain(cues).collect::<Vec<_>>().join(" ")
    }

    /// Whether all grounded generators lie in one component of the graph of
    /// closed semantic bonds.
    pub fn grounded_connected(&self) -> bool {
        let grounded = self.grounded();
        let Some(&(start, _)) = grounded.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(site) = stack.pop() {
            for peer in self.semantic_peers(site) {
                if seen.insert(peer) {
                    stack.push(peer);
                }
            }
        }
        grounded.iter().all(|(s, _)| seen.contains(s))
    }

    /// Returns every structural violation; empty iff the configuration is
    /// well formed and its cache agrees with its edges.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for (&site, g) in &self.sites {
            for message in g.kind_violations() {
                violations.push(Violation::Kind { site, message });
            }
        }
        let mut in_endpoints = BTreeSet::new();
        for (key, edge) in &self.edges {
            let id = *key;
            if edge.from != *key {
                violations.push(Violation::Direction {
                    edge: id,
                    message: "edge stored under the wrong key".into(),
                });
            }
            if !in_endpoints.insert(edge.to) || self.edges.contains_key(&edge.to) {
                violations.push(Violation::SharedEndpoint(edge.to));
            }
            let mut ends = Vec::new();
            for (endpoint, peer, dir) in [
                (edge.from, edge.to, BondDirection::Out),
                (edge.to, edge.from, BondDirection::In),
            ] {
                let Some(g) = self.sites.get(&endpoint.site) else {
                    violations.push(Violation::DanglingSite {
                        edge: id,
                        site: endpoint.site,
                    });
                    continue;
                };
                let Some(b) = g.bond(endpoint.coordinate) else {
                    violations.push(Violation::MissingBond(endpoint));
                    continue;
                };
                if b.direction != dir {
                    violations.push(Violation::Direction {
                        edge: id,
                        message: format!("{endpoint} should be an {dir:?} bond"),
                    });
                }
                let expected = BondState::Closed {
                    peer: peer.site,
                    peer_coordinate: peer.coordinate,
                };
                if b.state != expected {
                    violations.push(Violation::MutualClosure {
                        endpoint,
                        message: format!("expected closure with {peer}, found {:?}", b.state),
                    });
                }
                ends.push((g, b));
            }
            if let [(out_gen, out_bond), (in_gen, in_bond)] = ends[..] {
                if !self.closure.matches(&out_bond.value, &in_bond.value) {
                    violations.push(Violation::ValueMismatch { edge: id });
                }
                match coupling_kind(out_gen.kind(), in_gen.kind(), &out_bond.value, &in_bond.value) {
                    Ok(kind) if kind != edge.kind => violations.push(Violation::KindCoupling {
                        edge: id,
                        message: format!("edge recorded as {:?} but couples as {kind:?}", edge.kind),
                    }),
                    Ok(_) => {}
                    Err(message) => violations.push(Violation::KindCoupling { edge: id, message }),
                }
            }
        }
        for (&site, g) in &self.sites {
            for b in g.bonds() {
                if let BondState::Closed { .. } = b.state {
                    let endpoint = Endpoint::new(site, b.coordinate);
                    let recorded = match b.direction {
                        BondDirection::Out => self.edges.contains_key(&endpoint),
                        BondDirection::In => in_endpoints.contains(&endpoint),
                    };
                    if !recorded {
                        violations.push(Violation::MutualClosure {
                            endpoint,
                            message: "closed bond without an edge".into(),
                        });
                    }
                }
            }
        }
        let edge_sum: f64 = self.edges.values().map(|e| e.energy).sum();
        let cached = self.support_sum + self.semantic_sum;
        if (edge_sum - cached).abs() > 1e-9 {
            violations.push(Violation::EnergyCache {
                expected: edge_sum,
                cached,
            });
        }
        let (open_out, open_in) = self.count_open_cue_bonds();
        if open_out != self.open_cue_out {
            violations.push(Violation::OpenCount {
                expected: open_out,
                cached: self.open_cue_out,
            });
        }
        if open_in != self.open_cue_in {
            violations.push(Violation::OpenCount {
                expected: open_in,
                cached: self.open_cue_in,
            });
        }
        violations
    }

    #[cfg(debug_assertions)]
    fn debug_check(&self, kg: Option<&KnowledgeGraph>) {
        let violations = self.validate();
        debug_assert!(violations.is_empty(), "invalid configuration: {violations:?}");
        if let Some(kg) = kg {
            let full = self.recompute_energy(kg);
            let diff = full.max_abs_diff(&self.energy());
            debug_assert!(diff <= 1e-9, "energy cache drifted by {diff}");
        }
    }

    #[cfg(not(debug_assertions))]
    fn debug_check(&self, _kg: Option<&KnowledgeGraph>) {}

    /// Rebuilds a configuration from stored generators (site id and
    /// generator with its bond layout) and edges carrying their energies.
    pub(crate) fn restore(
        cost: CostModel,
        closure: ClosureRule,
        generators: Vec<(SiteId, Generator)>,
        edges: Vec<Edge>,
    ) -> Result<Configuration, ConfigError> {
        let mut c = Configuration::new(cost, closure);
        for (site, mut g) in generators {
            for b in g.bonds().iter().map(|b| b.coordinate).collect::<Vec<_>>() {
                g.bond_mut(b).expect("coordinate from bond list").state = BondState::Open;
            }
            if c.sites.contains_key(&site) {
                return Err(ConfigError::KindViolation(format!("duplicate site {site}")));
            }
            c.adjust_open_counts(&g, true);
            c.next_site = c.next_site.max(site.0 + 1);
            c.sites.insert(site, g);
        }
        for edge in edges {
            let (out_gen, out_bond) = c.bond_at(edge.from)?;
            let (in_gen, in_bond) = c.bond_at(edge.to)?;
            if out_bond.direction != BondDirection::Out {
                return Err(ConfigError::DirectionMismatch(edge.from));
            }
            if in_bond.direction != BondDirection::In {
                return Err(ConfigError::DirectionMismatch(edge.to));
            }
            if !out_bond.is_open() {
                return Err(ConfigError::BondNotOpen(edge.from));
            }
            if !in_bond.is_open() {
                return Err(ConfigError::BondNotOpen(edge.to));
            }
            if edge.from.site == edge.to.site {
                return Err(ConfigError::KindViolation("a generator cannot bond with itself".into()));
            }
            let kind = coupling_kind(out_gen.kind(), in_gen.kind(), &out_bond.value, &in_bond.value)
                .map_err(ConfigError::KindViolation)?;
            if kind != edge.kind {
                return Err(ConfigError::KindViolation(format!(
                    "edge {} is recorded as {:?}",
                    edge.from, edge.kind
                )));
            }
            if !c.closure.matches(&out_bond.value, &in_bond.value) || edge.value != out_bond.value {
                return Err(ConfigError::ValueMismatch {
                    out_value: out_bond.value.clone(),
                    in_value: in_bond.value.clone(),
                });
            }
            if !edge.energy.is_finite() {
                return Err(ConfigError::KindViolation(format!(
                    "edge {} has a non-finite energy",
                    edge.from
                )));
            }
            let (out_kind, in_kind) = (out_gen.kind(), in_gen.kind());
            c.set_state(
                edge.from,
                BondState::Closed {
                    peer: edge.to.site,
                    peer_coordinate: edge.to.coordinate,
                },
            );
            c.set_state(
                edge.to,
                BondState::Closed {
                    peer: edge.from.site,
                    peer_coordinate: edge.from.coordinate,
                },
            );
            if out_kind == GeneratorKind::Ungrounded {
                c.open_cue_out -= 1;
            }
            if in_kind == GeneratorKind::Ungrounded {
                c.open_cue_in -= 1;
            }
            match edge.kind {
                BondKind::Support => c.support_sum += edge.energy,
                BondKind::Semantic => c.semantic_sum += edge.energy,
            }
            c.incoming.insert(edge.to, edge.from);
            c.edges.insert(edge.from, edge);
        }
        Ok(c)
    }
}

/// Legal couplings: feature -> grounded over `feature` bonds, and concept
/// generators among themselves over semantic bonds.
fn coupling_kind(
    out_kind: GeneratorKind,
    in_kind: GeneratorKind,
    out_value: &str,
    in_value: &str,
) -> Result<BondKind, String> {
    let is_concept = |k: GeneratorKind| matches!(k, GeneratorKind::Grounded | GeneratorKind::Ungrounded);
    if out_value == FEATURE_BOND || in_value == FEATURE_BOND {
        if out_kind == GeneratorKind::Feature && in_kind == GeneratorKind::Grounded && out_value == in_value {
            Ok(BondKind::Support)
        } else {
            Err(format!(
                "support bond must couple feature -> grounded, found {out_kind:?} -> {in_kind:?}"
            ))
        }
    } else if is_concept(out_kind) && is_concept(in_kind) {
        Ok(BondKind::Semantic)
    } else {
        Err(format!(
            "semantic bond must couple concept generators, found {out_kind:?} -> {in_kind:?}"
        ))
    }
}

fn edge_energy(
    kg: &KnowledgeGraph,
    kind: BondKind,
    out_gen: &Generator,
    in_gen: &Generator,
    out_value: &str,
    in_value: &str,
) -> f64 {
    match kind {
        BondKind::Support => support_bond_energy(in_gen.confidence().unwrap_or(0.0)),
        BondKind::Semantic => {
            let (start, end) = (out_gen.concept(), in_gen.concept());
            kg.assertion_weight(out_value, start, end)
                .or_else(|| {
                    (in_value != out_value)
                        .then(|| kg.assertion_weight(in_value, start, end))
                        .flatten()
                })
                .unwrap_or(0.0)
                .tanh()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{make_feature, make_grounded, make_ungrounded, DirectionFilter, Grounding};
    use crate::kg::{load_kg, KgFormat, LoadOptions};

    fn c(s: &str) -> ConceptId {
        ConceptId::new(s).unwrap()
    }

    fn kg(text: &str) -> KnowledgeGraph {
        load_kg(text.as_bytes(), KgFormat::Tsv, &LoadOptions::default())
            .unwrap()
            .0
    }

    fn grounding(slot_index: usize, role: Role, confidence: f64) -> Grounding {
        Grounding {
            slot: role.as_str().into(),
            slot_index,
            role,
            confidence,
        }
    }

    fn bond_coord(conf: &Configuration, site: SiteId, dir: BondDirection, value: &str) -> Endpoint {
        let g = conf.generator(site).unwrap();
        let b = g
            .bonds()
            .iter()
            .find(|b| b.direction == dir && b.value == value)
            .unwrap();
        Endpoint::new(site, b.coordinate)
    }

    #[test]
    fn egg_food_semantic_bond() {
        let kg = kg("IsA\tegg\tfood\t2.0\nHasProperty\tegg\twhite\t1\n");
        let mut conf = Configuration::default();
        let egg = conf
            .add_generator(make_grounded(&c("egg"), &kg, grounding(0, Role::Object, 1.0), 10).unwrap())
            .unwrap();
        let food = conf.add_generator(make_ungrounded(&c("food"), &kg, 10, None)).unwrap();
        let from = bond_coord(&conf, egg, BondDirection::Out, "IsA");
        let to = bond_coord(&conf, food, BondDirection::In, "IsA");
        let edge = conf.connect(&kg, from, to).unwrap();
        assert_eq!(edge.kind, BondKind::Semantic);
        assert!((edge.energy - 2.0f64.tanh()).abs() < 1e-15);
        assert!(conf.validate().is_empty());
        // egg's remaining open bonds
        let open: Vec<_> = conf
            .generator(egg)
            .unwrap()
            .open_bonds(DirectionFilter::Any)
            .iter()
            .map(|b| b.value.clone())
            .collect();
        assert_eq!(open, ["feature", "HasProperty"]);
    }

    #[test]
    fn connect_rejects_bad_couplings() {
        let kg = kg("IsA\tegg\tfood\t2.0\nIsA\tfood\tthing\t1\n");
        let mut conf = Configuration::default();
        let egg = conf
            .add_generator(make_grounded(&c("egg"), &kg, grounding(0, Role::Object, 1.0), 10).unwrap())
            .unwrap();
        let food = conf.add_generator(make_ungrounded(&c("food"), &kg, 10, None)).unwrap();
        let hog = conf.add_generator(make_feature("HOG").unwrap()).unwrap();
        let egg_out = bond_coord(&conf, egg, BondDirection::Out, "IsA");
        let food_out = bond_coord(&conf, food, BondDirection::Out, "IsA");
        assert_eq!(
            conf.connect(&kg, egg_out, food_out).unwrap_err(),
            ConfigError::DirectionMismatch(food_out)
        );
        let food_in = bond_coord(&conf, food, BondDirection::In, "IsA");
        let hog_out = Endpoint::new(hog, 0);
        assert!(matches!(
            conf.connect(&kg, hog_out, food_in),
            Err(ConfigError::ValueMismatch { .. })
        ));
        assert_eq!(
            conf.connect(&kg, Endpoint::new(SiteId(99), 0), food_in).unwrap_err(),
            ConfigError::DanglingSite(SiteId(99))
        );
        conf.connect(&kg, egg_out, food_in).unwrap();
        assert_eq!(
            conf.connect(&kg, egg_out, food_in).unwrap_err(),
            ConfigError::BondNotOpen(egg_out)
        );
        assert!(conf.validate().is_empty());
    }

    #[test]
    fn support_bond_lowers_energy() {
        let kg = kg("IsA\ta\tb\t1\n");
        let mut conf = Configuration::default();
        let g = conf
            .add_generator(make_grounded(&c("a"), &kg, grounding(0, Role::Action, 1.5), 10).unwrap())
            .unwrap();
        let f = conf.add_generator(make_feature("hof").unwrap()).unwrap();
        let before = conf.energy().total;
        conf.connect(&kg, Endpoint::new(f, 0), Endpoint::new(g, 0)).unwrap();
        let after = conf.energy().total;
        assert!((before - after - 0.905_148_253_644_866_4).abs() < 1e-12);
        assert!((conf.recompute_energy(&kg).total - after).abs() < 1e-12);
    }

    #[test]
    fn disconnect_reconnect_is_an_involution() {
        let kg = kg("IsA\ta\tb\t0.7\n");
        let mut conf = Configuration::default();
        let a = conf
            .add_generator(make_grounded(&c("a"), &kg, grounding(0, Role::Action, 1.2), 10).unwrap())
            .unwrap();
        let b = conf
            .add_generator(make_grounded(&c("b"), &kg, grounding(1, Role::Object, 0.4), 10).unwrap())
            .unwrap();
        let f = conf.add_generator(make_feature("x").unwrap()).unwrap();
        conf.connect(&kg, Endpoint::new(f, 0), Endpoint::new(a, 0)).unwrap();
        let from = bond_coord(&conf, a, BondDirection::Out, "IsA");
        let to = bond_coord(&conf, b, BondDirection::In, "IsA");
        conf.connect(&kg, from, to).unwrap();
        let original = conf.energy();
        let removed = conf.disconnect(from).unwrap();
        assert!((conf.energy().semantic_sum - (original.semantic_sum - removed.energy)).abs() < 1e-12);
        conf.connect(&kg, from, to).unwrap();
        assert!(conf.energy().max_abs_diff(&original) <= 1e-12);
        // support edge
        let support_before = conf.energy().support_sum;
        let e = conf.disconnect(Endpoint::new(f, 0)).unwrap();
        assert!((conf.energy().support_sum - (support_before - 1.2f64.tanh())).abs() < 1e-12);
        assert_eq!(e.kind, BondKind::Support);
        assert_eq!(
            conf.disconnect(Endpoint::new(f, 0)).unwrap_err(),
            ConfigError::UnknownEdge(Endpoint::new(f, 0))
        );
    }

    #[test]
    fn cost_q_counts_open_cue_out_bonds() {
        // cue with three out-relations and one in-relation
        let kg = kg("A\tcue\tx\t1\nB\tcue\ty\t1\nC\tcue\tg\t1\nD\tg\tcue\t1\n");
        let mut conf = Configuration::default();
        assert_eq!(conf.cost_q(0.5), 0.0);
        let g = conf
            .add_generator(make_grounded(&c("g"), &kg, grounding(0, Role::Object, 1.0), 10).unwrap())
            .unwrap();
        assert_eq!(conf.cost_q(0.5), 0.0);
        let cue = conf.add_generator(make_ungrounded(&c("cue"), &kg, 10, None)).unwrap();
        assert_eq!(conf.cost_q(0.5), 1.5);
        let from = bond_coord(&conf, cue, BondDirection::Out, "C");
        let to = bond_coord(&conf, g, BondDirection::In, "C");
        conf.connect(&kg, from, to).unwrap();
        assert_eq!(conf.cost_q(0.5), 1.0);
        assert_eq!(conf.energy().q_cost, 2.0);

        // disconnecting the cue's only closed bond raises Q by k
        let k = conf.cost_model().k;
        let q_before = conf.energy().q_cost;
        conf.disconnect(from).unwrap();
        assert_eq!(conf.energy().q_cost - q_before, k);

        // toggling in-bond counting adds k per open cue in-bond
        let mut with_in = conf.clone();
        with_in.set_cost_model(CostModel {
            k: 0.5,
            count_in_bonds: true,
        });
        conf.set_cost_model(CostModel {
            k: 0.5,
            count_in_bonds: false,
        });
        let diff = with_in.energy().q_cost - conf.energy().q_cost;
        assert_eq!(diff, 0.5 * conf.open_cue_in_bonds() as f64);
        assert_eq!(conf.open_cue_in_bonds(), 1);
    }

    #[test]
    fn fully_closed_cue_costs_nothing() {
        let kg = kg("A\tg\tcue\t1\nB\tcue\th\t1\n");
        let mut conf = Configuration::default();
        let g = conf
            .add_generator(make_grounded(&c("g"), &kg, grounding(0, Role::Action, 1.0), 10).unwrap())
            .unwrap();
        let h = conf
            .add_generator(make_grounded(&c("h"), &kg, grounding(1, Role::Object, 1.0), 10).unwrap())
            .unwrap();
        let cue = conf.add_generator(make_ungrounded(&c("cue"), &kg, 10, None)).unwrap();
        let a = (
            bond_coord(&conf, g, BondDirection::Out, "A"),
            bond_coord(&conf, cue, BondDirection::In, "A"),
        );
        let b = (
            bond_coord(&conf, cue, BondDirection::Out, "B"),
            bond_coord(&conf, h, BondDirection::In, "B"),
        );
        conf.connect(&kg, a.0, a.1).unwrap();
        conf.connect(&kg, b.0, b.1).unwrap();
        assert_eq!(conf.cost_q(1.0), 0.0);
        assert!(conf.grounded_connected());

        // removing the cue gives back both leg energies and charges nothing
        let before = conf.energy().total;
        conf.remove_generator(cue).unwrap();
        assert!((conf.energy().total - (before + 2.0 * 1f64.tanh())).abs() < 1e-12);
        assert!(!conf.grounded_connected());
        assert!(conf.validate().is_empty());
    }

    #[test]
    fn probability_weight_is_monotone() {
        let conf = Configuration::default();
        assert_eq!(conf.energy().total, 0.0);
        assert_eq!(conf.probability_weight(), 1.0);
    }

    #[test]
    fn validate_detects_corruption() {
        let kg = kg("IsA\ta\tb\t1\n");
        let mut conf = Configuration::default();
        let a = conf
            .add_generator(make_grounded(&c("a"), &kg, grounding(0, Role::Action, 1.0), 10).unwrap())
            .unwrap();
        let b = conf
            .add_generator(make_grounded(&c("b"), &kg, grounding(1, Role::Object, 1.0), 10).unwrap())
            .unwrap();
        let from = bond_coord(&conf, a, BondDirection::Out, "IsA");
        let to = bond_coord(&conf, b, BondDirection::In, "IsA");
        conf.connect(&kg, from, to).unwrap();
        assert!(conf.validate().is_empty());

        let mut broken = conf.clone();
        broken.set_state(
            to,
            BondState::Closed {
                peer: b,
                peer_coordinate: 0,
            },
        );
        let v = broken.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0], Violation::MutualClosure { .. }));

        let mut out_out = conf.clone();
        out_out.edges.get_mut(&from).unwrap().to = from;
        assert!(out_out
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::Direction { .. })));
    }

    #[test]
    fn content_is_stable_under_site_order() {
        let kg = kg("A\tpour\tliquid\t1\nB\tliquid\toil\t1\nA\tpour\tfuel\t0.5\nC\tfuel\toil\t0.5\n");
        let build = |reverse: bool| {
            let mut conf = Configuration::default();
            let mut gens = vec![
                make_grounded(&c("pour"), &kg, grounding(0, Role::Action, 1.0), 10).unwrap(),
                make_grounded(&c("oil"), &kg, grounding(1, Role::Object, 1.0), 10).unwrap(),
                make_ungrounded(&c("liquid"), &kg, 10, None),
                make_ungrounded(&c("fuel"), &kg, 10, None),
            ];
            if reverse {
                gens.reverse();
            }
            let mut sites = BTreeMap::new();
            for g in gens {
                let name = g.concept().to_string();
                sites.insert(name, conf.add_generator(g).unwrap());
            }
            for (x, y, v) in [
                ("pour", "liquid", "A"),
                ("liquid", "oil", "B"),
                ("pour", "fuel", "A"),
                ("fuel", "oil", "C"),
            ] {
                let from = bond_coord(&conf, sites[x], BondDirection::Out, v);
                let to = bond_coord(&conf, sites[y], BondDirection::In, v);
                if conf
                    .generator(sites[x])
                    .unwrap()
                    .bond(from.coordinate)
                    .unwrap()
                    .is_open()
                {
                    conf.connect(&kg, from, to).unwrap();
                }
            }
            conf
        };
        let forward = build(false);
        let backward = build(true);
        assert_eq!(forward.semantic_content(), backward.semantic_content());
        assert!((forward.energy().total - backward.energy().total).abs() < 1e-12);
    }
}
