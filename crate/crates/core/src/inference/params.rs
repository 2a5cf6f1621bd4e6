use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::configuration::CostModel;
use crate::generator::{ClosureRule, DEFAULT_MAX_SEMANTIC_BONDS};
use crate::kg::CueScope;

#[derive(Debug, Error, PartialEq)]
#[error("invalid parameter `{name}`: {reason}")]
pub struct ParamError {
    pub name: &'static str,
    pub reason: String,
}

/// Annealing schedule, proposal sizes and energy constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceParams {
    pub iterations: usize,
    pub initial_temperature: f64,
    /// Geometric cooling: `T_{t+1} = cooling_ratio * T_t`.
    pub cooling_ratio: f64,
    /// Cost per open out-bond of an ungrounded generator.
    pub k_cost: f64,
    /// Alternatives examined by one local (swap) proposal.
    pub m_swap: usize,
    /// Most cues bridging one ordered pair of grounded generators.
    pub cues_per_pair: usize,
    /// Ranked cues per pair that proposals and the oracle may draw from.
    pub cue_pool: usize,
    pub top_n: usize,
    pub rng_seed: u64,
    /// Probability that a step uses the local proposal.
    pub local_probability: f64,
    pub max_semantic_bonds: usize,
    /// Independent seeded chains whose best interpretations are merged.
    pub chains: usize,
    pub q_count_in_bonds: bool,
    pub closure: ClosureRule,
    pub cue_scope: CueScope,
    /// Only keep interpretations whose grounded generators are connected.
    pub require_connected: bool,
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams {
            iterations: 2000,
            initial_temperature: 2.0,
            cooling_ratio: 0.995,
            k_cost: 1.0,
            m_swap: 4,
            cues_per_pair: 3,
            cue_pool: 5,
            top_n: 10,
            rng_seed: 0,
            local_probability: 0.8,
            max_semantic_bonds: DEFAULT_MAX_SEMANTIC_BONDS,
            chains: 1,
            q_count_in_bonds: false,
            closure: ClosureRule::Exact,
            cue_scope: CueScope::Forward,
            require_connected: false,
        }
    }
}

impl InferenceParams {
    pub fn cost_model(&self) -> CostModel {
        CostModel {
            k: self.k_cost,
            count_in_bonds: self.q_count_in_bonds,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let fail = |name, reason: &str| {
            Err(ParamError {
                name,
                reason: reason.to_string(),
            })
        };
        if self.iterations == 0 {
            return fail("iterations", "must be positive");
        }
        if !(self.initial_temperature.is_finite() && self.initial_temperature > 0.0) {
            return fail("initial_temperature", "must be a positive real");
        }
        if !(self.cooling_ratio > 0.0 && self.cooling_ratio < 1.0) {
            return fail("cooling_ratio", "must lie in (0, 1)");
        }
        if !(self.k_cost.is_finite() && self.k_cost >= 0.0) {
            return fail("k_cost", "must be a nonnegative real");
        }
        if self.m_swap == 0 {
            return fail("m_swap", "must be positive");
        }
        if self.top_n == 0 {
            return fail("top_n", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.local_probability) {
            return fail("local_probability", "must lie in [0, 1]");
        }
        if self.max_semantic_bonds == 0 {
            return fail("max_semantic_bonds", "must be positive");
        }
        if self.chains == 0 {
            return fail("chains", "must be positive");
        }
        if self.cues_per_pair > 0 && self.cue_pool == 0 {
            return fail("cue_pool", "must be positive when cues are enabled");
        }
        Ok(())
    }
}
