use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ptvi_core::kg::CueScope;
use ptvi_core::{ClosureRule, InferenceParams};

#[derive(Debug, Parser)]
#[command(
    name = "ptvi",
    version,
    about = "Interpret video segments from classifier hypotheses and a commonsense knowledge graph"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Anneal every segment and write its top interpretations.
    Interpret(InterpretArgs),
    /// Generate synthetic instances with planted answers.
    Synth(SynthArgs),
    /// Compare annealing with the oracle and planted answers.
    Eval(EvalArgs),
    /// Exhaustively rank interpretations of small segments.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Caption,
    Label,
    Dot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClosureArg {
    Exact,
    RelatedToWildcard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CueScopeArg {
    Forward,
    Either,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Knowledge graph TSV: relation, start, end, weight.
    #[arg(long)]
    pub kg: PathBuf,
    /// Relations to treat as symmetric (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub symmetrize: Vec<String>,
    /// Hypotheses, one JSON segment per line.
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Most candidates accepted per slot.
    #[arg(long, default_value_t = ptvi_core::inference::DEFAULT_K_MAX)]
    pub k_max: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Root seed; segment i anneals with a seed derived from (seed, i).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Segments processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

/// Overrides for the inference parameters; unset flags keep defaults.
#[derive(Debug, Default, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub initial_temperature: Option<f64>,
    #[arg(long)]
    pub cooling_ratio: Option<f64>,
    /// Cost per open out-bond of an ungrounded generator.
    #[arg(long)]
    pub k_cost: Option<f64>,
    #[arg(long)]
    pub m_swap: Option<usize>,
    #[arg(long)]
    pub cues_per_pair: Option<usize>,
    #[arg(long)]
    pub cue_pool: Option<usize>,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long)]
    pub local_probability: Option<f64>,
    #[arg(long)]
    pub max_semantic_bonds: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Also charge open in-bonds of ungrounded generators.
    #[arg(long)]
    pub q_count_in_bonds: bool,
    #[arg(long, value_enum)]
    pub closure: Option<ClosureArg>,
    #[arg(long, value_enum)]
    pub cue_scope: Option<CueScopeArg>,
    /// Drop interpretations whose grounded generators are disconnected.
    #[arg(long)]
    pub require_connected: bool,
}

impl ParamArgs {
    pub fn to_params(&self) -> InferenceParams {
        let d = InferenceParams::default();
        InferenceParams {
            iterations: self.iterations.unwrap_or(d.iterations),
            initial_temperature: self.initial_temperature.unwrap_or(d.initial_temperature),
            cooling_ratio: self.cooling_ratio.unwrap_or(d.cooling_ratio),
            k_cost: self.k_cost.unwrap_or(d.k_cost),
            m_swap: self.m_swap.unwrap_or(d.m_swap),
            cues_per_pair: self.cues_per_pair.unwrap_or(d.cues_per_pair),
            cue_pool: self.cue_pool.unwrap_or(d.cue_pool),
            top_n: self.top_n.unwrap_or(d.top_n),
            rng_seed: d.rng_seed,
            local_probability: self.local_probability.unwrap_or(d.local_probability),
            max_semantic_bonds: self.max_semantic_bonds.unwrap_or(d.max_semantic_bonds),
            chains: self.chains.unwrap_or(d.chains),
            q_count_in_bonds: self.q_count_in_bonds || d.q_count_in_bonds,
            closure: match self.closure {
                Some(ClosureArg::Exact) => ClosureRule::Exact,
                Some(ClosureArg::RelatedToWildcard) => ClosureRule::RelatedToWildcard,
                None => d.closure,
            },
            cue_scope: match self.cue_scope {
                Some(CueScopeArg::Forward) => CueScope::Forward,
                Some(CueScopeArg::Either) => CueScope::EitherDirection,
                None => d.cue_scope,
            },
            require_connected: self.require_connected || d.require_connected,
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output_format: OutputFormat,
    /// N-gram counts (`token[ token]<TAB>count`) for caption scoring.
    #[arg(long)]
    pub scorer_counts: Option<PathBuf>,
    /// Verb forms (`base<TAB>third-person<TAB>participle`).
    #[arg(long)]
    pub verb_overrides: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpretArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub render: RenderArgs,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub render: RenderArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Largest search space the oracle will enumerate.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u128,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory receiving kg.tsv, hypotheses.jsonl and answers.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = 2)]
    pub slots: usize,
    #[arg(long, default_value_t = 5)]
    pub candidates: usize,
    /// Noise assertions per instance.
    #[arg(long, default_value_t = 20)]
    pub kg_size: usize,
    #[arg(long, default_value_t = 0.3)]
    pub cue_density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 25)]
    pub max_attempts: usize,
    /// Largest oracle search space used to verify a planted answer.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u128,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Planted answers, one JSON object per line.
    #[arg(long)]
    pub answers: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
    /// TSV report path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u128,
    #[command(flatten)]
    pub params: ParamArgs,
}
