//! Interpretation search: initialization, swap and structural proposals,
//! simulated annealing, and an exhaustive oracle for small instances.

mod anneal;
mod assemble;
mod hypothesis;
mod oracle;
mod params;
mod proposal;

use rand::Rng;
use thiserror::Error;

pub use anneal::{anneal, AnnealOutcome, BestSet, Chain, SearchTrace, StepRecord};
pub use assemble::{Assembler, Assignment, Evaluation, InterpretationKey, SlotPair};
pub use hypothesis::{parse_hypotheses, Candidate, HypothesisError, HypothesisSet, Slot, DEFAULT_K_MAX};
pub use oracle::{oracle_search, search_space_size, OracleOutcome, RankedAssignment};
pub use params::{InferenceParams, ParamError};
pub use proposal::{metropolis_accept, propose_global, propose_local, MoveKind};

use crate::configuration::{ConfigError, Configuration, EnergyBreakdown};
use crate::generator::GeneratorError;
use crate::kg::KnowledgeGraph;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("search space of {}{size} assignments exceeds the budget of {budget}", if *.exact { "" } else { "at least " })]
    BudgetExceeded { size: u128, budget: u128, exact: bool },
    #[error("configuration does not correspond to the hypothesis set")]
    ForeignConfiguration,
}

/// One ranked interpretation with its materialized configuration.
#[derive(Clone, Debug)]
pub struct Interpretation {
    /// 1-based rank.
    pub rank: usize,
    pub energy: EnergyBreakdown,
    pub key: InterpretationKey,
    pub assignment: Assignment,
    pub configuration: Configuration,
    pub connected: bool,
}

pub(crate) fn materialize(
    asm: &Assembler<'_>,
    entries: &[(f64, InterpretationKey, Assignment)],
) -> Result<Vec<Interpretation>, InferenceError> {
    entries
        .iter()
        .enumerate()
        .map(|(i, (_, key, assignment))| {
            let (configuration, _) = asm.build(assignment)?;
            Ok(Interpretation {
                rank: i + 1,
                energy: configuration.energy(),
                key: key.clone(),
                assignment: assignment.clone(),
                connected: configuration.grounded_connected(),
                configuration,
            })
        })
        .collect()
}

/// Materializes the first `n` oracle results.
pub fn oracle_interpretations(
    h: &HypothesisSet,
    kg: &KnowledgeGraph,
    params: &InferenceParams,
    outcome: &OracleOutcome,
    n: usize,
) -> Result<Vec<Interpretation>, InferenceError> {
    let asm = Assembler::new(h, kg, params);
    let entries: Vec<_> = outcome
        .ranked
        .iter()
        .take(n)
        .map(|r| (r.energy, r.key.clone(), r.assignment.clone()))
        .collect();
    materialize(&asm, &entries)
}

/// Initial configuration: top candidate per slot with its support bond,
/// direct semantic bonds between grounded pairs, and default cues for pairs
/// without a direct assertion.
pub fn initialize(
    h: &HypothesisSet,
    kg: &KnowledgeGraph,
    params: &InferenceParams,
) -> Result<Configuration, InferenceError> {
    params.validate()?;
    let mut asm = Assembler::new(h, kg, params);
    let start = asm.initial_assignment();
    Ok(asm.build(&start)?.0)
}

/// Applies one swap proposal to a configuration built from `h`.
pub fn local_proposal<R: Rng + ?Sized>(
    c: &Configuration,
    h: &HypothesisSet,
    kg: &KnowledgeGraph,
    params: &InferenceParams,
    rng: &mut R,
) -> Result<Configuration, InferenceError> {
    let mut asm = Assembler::new(h, kg, params);
    let current = asm.assignment_of(c)?;
    let (_, next) = propose_local(&mut asm, &current, params.m_swap, rng)?;
    Ok(asm.build(&next)?.0)
}

/// Applies one structural (cue) proposal to a configuration built from `h`.
pub fn global_proposal<R: Rng + ?Sized>(
    c: &Configuration,
    h: &HypothesisSet,
    kg: &KnowledgeGraph,
    params: &InferenceParams,
    rng: &mut R,
) -> Result<Configuration, InferenceError> {
    let mut asm = Assembler::new(h, kg, params);
    let current = asm.assignment_of(c)?;
    let (_, next) = propose_global(&mut asm, &current, rng)?;
    Ok(asm.build(&next)?.0)
}
