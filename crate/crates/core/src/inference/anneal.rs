//! Simulated annealing over assignments with best-N collection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assemble::{Assembler, Assignment, InterpretationKey};
use super::proposal::{metropolis_accept, propose_global, propose_local, MoveKind};
use super::{HypothesisSet, InferenceError, InferenceParams, Interpretation};
use crate::kg::KnowledgeGraph;
use crate::seed::{rng_from_seed, sub_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub chain: usize,
    pub iteration: usize,
    pub kind: MoveKind,
    pub delta_e: f64,
    pub accepted: bool,
    pub temperature: f64,
}

/// Lowest-energy distinct interpretations seen so far, ascending.
#[derive(Clone, Debug)]
pub struct BestSet {
    capacity: usize,
    require_connected: bool,
    entries: Vec<(f64, InterpretationKey, Assignment)>,
}

impl BestSet {
    pub fn new(capacity: usize, require_connected: bool) -> Self {
        BestSet {
            capacity,
            require_connected,
            entries: Vec::new(),
        }
    }

    pub fn offer(&mut self, energy: f64, key: InterpretationKey, assignment: &Assignment, connected: bool) {
        if self.require_connected && !connected {
            return;
        }
        if let Some(pos) = self.entries.iter().position(|(_, k, _)| *k == key) {
            if energy >= self.entries[pos].0 {
                return;
            }
            self.entries.remove(pos);
        }
        let full = self.entries.len() >= self.capacity;
        if full {
            let (worst_e, worst_k, _) = self.entries.last().expect("capacity is positive");
            if energy.total_cmp(worst_e).then_with(|| key.cmp(worst_k)).is_ge() {
                return;
            }
        }
        let at = self
            .entries
            .partition_point(|(e, k, _)| e.total_cmp(&energy).then_with(|| k.cmp(&key)).is_lt());
        self.entries.insert(at, (energy, key, assignment.clone()));
        self.entries.truncate(self.capacity);
    }

    pub fn merge(&mut self, other: &BestSet) {
        for (e, k, a) in &other.entries {
            self.offer(*e, k.clone(), a, true);
        }
    }

    pub fn entries(&self) -> &[(f64, InterpretationKey, Assignment)] {
        &self.entries
    }

    pub fn best_energy(&self) -> Option<f64> {
        self.entries.first().map(|e| e.0)
    }
}

/// One Markov chain over assignments.
pub struct Chain<'a> {
    asm: Assembler<'a>,
    current: Assignment,
    energy: f64,
    rng: ChaCha8Rng,
    best: BestSet,
    index: usize,
    iteration: usize,
}

impl<'a> Chain<'a> {
    pub fn new(
        hypotheses: &'a HypothesisSet,
        kg: &'a KnowledgeGraph,
        params: &'a InferenceParams,
        seed: u64,
        index: usize,
    ) -> Result<Self, InferenceError> {
        let mut asm = Assembler::new(hypotheses, kg, params);
        let start = asm.initial_assignment();
        let eval = asm.evaluate(&start)?;
        let mut best = BestSet::new(params.top_n, params.require_connected);
        best.offer(eval.energy, asm.key(&eval.realized), &eval.realized, eval.connected);
        Ok(Chain {
            current: eval.realized.clone(),
            energy: eval.energy,
            asm,
            rng: rng_from_seed(seed),
            best,
            index,
            iteration: 0,
        })
    }

    pub fn current(&self) -> &Assignment {
        &self.current
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn best(&self) -> &BestSet {
        &self.best
    }

    pub fn assembler(&mut self) -> &mut Assembler<'a> {
        &mut self.asm
    }

    /// Draws a proposal: local with probability `local_probability`,
    /// otherwise global.
    pub fn propose(&mut self) -> Result<(MoveKind, Assignment), InferenceError> {
        let params = self.asm.params;
        let local = self.rng.gen::<f64>() < params.local_probability;
        if local {
            propose_local(&mut self.asm, &self.current, params.m_swap, &mut self.rng)
        } else {
            propose_global(&mut self.asm, &self.current, &mut self.rng)
        }
    }

    /// One Metropolis step at the given temperature.
    pub fn step(&mut self, temperature: f64) -> Result<StepRecord, InferenceError> {
        let (kind, proposal) = self.propose()?;
        let eval = self.asm.evaluate(&proposal)?;
        let key = self.asm.key(&eval.realized);
        self.best.offer(eval.energy, key, &eval.realized, eval.connected);
        let delta = eval.energy - self.energy;
        let accepted = metropolis_accept(delta, temperature, &mut self.rng);
        if accepted {
            self.current = eval.realized.clone();
            self.energy = eval.energy;
        }
        let record = StepRecord {
            chain: self.index,
            iteration: self.iteration,
            kind,
            delta_e: delta,
            accepted,
            temperature,
        };
        self.iteration += 1;
        Ok(record)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SearchTrace {
    pub steps: Vec<StepRecord>,
    /// Energies and keys of the best distinct interpretations, ascending.
    pub best: Vec<(f64, InterpretationKey)>,
}

#[derive(Clone, Debug)]
pub struct AnnealOutcome {
    pub trace: SearchTrace,
    pub interpretations: Vec<Interpretation>,
}

/// Runs `params.chains` seeded chains with geometric cooling and returns
/// the best `top_n` distinct interpretations seen anywhere in their traces.
pub fn anneal(
    hypotheses: &HypothesisSet,
    kg: &KnowledgeGraph,
    params: &InferenceParams,
) -> Result<AnnealOutcome, InferenceError> {
    params.validate()?;
    let mut merged = BestSet::new(params.top_n, params.require_connected);
    let mut steps = Vec::with_capacity(params.iterations * params.chains);
    for c in 0..params.chains {
        let seed = if params.chains == 1 {
            params.rng_seed
        } else {
            sub_seed(params.rng_seed, c as u64)
        };
        let mut chain = Chain::new(hypotheses, kg, params, seed, c)?;
        let mut temperature = params.initial_temperature;
        for _ in 0..params.iterations {
            steps.push(chain.step(temperature)?);
            temperature *= params.cooling_ratio;
        }
        merged.merge(chain.best());
    }
    let asm = Assembler::new(hypotheses, kg, params);
    let interpretations = super::materialize(&asm, merged.entries())?;
    Ok(AnnealOutcome {
        trace: SearchTrace {
            steps,
            best: merged.entries().iter().map(|(e, k, _)| (*e, k.clone())).collect(),
        },
        interpretations,
    })
}
