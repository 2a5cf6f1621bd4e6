use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use rayon::prelude::*;

use ptvi_core::eval::{evaluate_instance, write_report, EvalRow};
use ptvi_core::inference::{oracle_interpretations, parse_hypotheses, Interpretation};
use ptvi_core::render::{
    to_caption_with, to_dot, to_label, Inflector, NgramScorer, SegmentDoc, SentenceScorer, UniformScorer,
};
use ptvi_core::seed::sub_seed;
use ptvi_core::synth::{parse_answers, synthesize, PlantedAnswer, SynthParams};
use ptvi_core::{
    anneal, load_kg, oracle_search, HypothesisSet, InferenceParams, KgFormat, KnowledgeGraph, LoadOptions, Role,
};

use crate::args::{EvalArgs, InputArgs, InterpretArgs, OracleArgs, OutputFormat, ParamArgs, RenderArgs, SynthArgs};
use crate::Failure;

type Outcome<T> = Result<T, Failure>;

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::Ingestion)
}

fn params(p: &ParamArgs) -> Outcome<InferenceParams> {
    let params = p.to_params();
    params.validate().map_err(|e| Failure::Usage(e.into()))?;
    Ok(params)
}

fn load_inputs(input: &InputArgs) -> Outcome<(KnowledgeGraph, Vec<HypothesisSet>)> {
    let options = LoadOptions {
        symmetrize: input
            .symmetrize
            .iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect::<BTreeSet<_>>(),
    };
    let (kg, report) = load_kg(open(&input.kg)?, KgFormat::Tsv, &options)
        .with_context(|| format!("knowledge graph {}", input.kg.display()))
        .map_err(Failure::Ingestion)?;
    if report.duplicates_merged > 0 {
        eprintln!(
            "warning: {} duplicate assertions in {} were merged",
            report.duplicates_merged,
            input.kg.display()
        );
    }
    let segments = parse_hypotheses(open(&input.hypotheses)?, input.k_max)
        .with_context(|| format!("hypotheses {}", input.hypotheses.display()))
        .map_err(Failure::Ingestion)?;
    Ok((kg, segments))
}

fn pool(workers: usize) -> Outcome<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Failure::Usage(anyhow!("--workers must be at least 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))
}

fn sink(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p)
                .with_context(|| format!("cannot create {}", p.display()))
                .map_err(Failure::Runtime)?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn write_all(out: &mut dyn Write, chunks: &[String]) -> Outcome<()> {
    for c in chunks {
        out.write_all(c.as_bytes())
            .context("write failed")
            .map_err(Failure::Runtime)?;
    }
    out.flush().context("write failed").map_err(Failure::Runtime)
}

struct Renderer {
    format: OutputFormat,
    scorer: Box<dyn SentenceScorer + Send + Sync>,
    inflector: Inflector,
}

impl Renderer {
    fn new(args: &RenderArgs) -> Outcome<Self> {
        let scorer: Box<dyn SentenceScorer + Send + Sync> = match &args.scorer_counts {
            Some(p) => Box::new(
                NgramScorer::from_counts(open(p)?)
                    .with_context(|| format!("scorer counts {}", p.display()))
                    .map_err(Failure::Ingestion)?,
            ),
            None => Box::new(UniformScorer),
        };
        let inflector = match &args.verb_overrides {
            Some(p) => Inflector::with_overrides(open(p)?)
                .with_context(|| format!("verb overrides {}", p.display()))
                .map_err(Failure::Ingestion)?,
            None => Inflector::default(),
        };
        Ok(Renderer {
            format: args.output_format,
            scorer,
            inflector,
        })
    }

    /// Captions need subject, action and object slots in every segment.
    fn check(&self, segments: &[HypothesisSet]) -> Outcome<()> {
        if self.format != OutputFormat::Caption && self.format != OutputFormat::Label {
            return Ok(());
        }
        let needed: &[Role] = if self.format == OutputFormat::Caption {
            &[Role::Subject, Role::Action, Role::Object]
        } else {
            &[Role::Action, Role::Object]
        };
        for h in segments {
            for role in needed {
                if !h.slots.iter().any(|s| s.role == *role) {
                    return Err(Failure::Ingestion(anyhow!(
                        "segment `{}` has no {} slot, required for {:?} output",
                        h.segment,
                        role.as_str(),
                        format!("{:?}", self.format).to_lowercase()
                    )));
                }
            }
        }
        Ok(())
    }

    fn render(&self, segment: &str, interps: &[Interpretation]) -> anyhow::Result<String> {
        let mut out = String::new();
        match self.format {
            OutputFormat::Json => {
                out.push_str(&SegmentDoc::new(segment, interps).to_json());
                out.push('\n');
            }
            OutputFormat::Caption => {
                for i in interps {
                    let caption = to_caption_with(&i.configuration, self.scorer.as_ref(), &self.inflector)?;
                    out.push_str(&format!(
                        "{segment}\t{}\t{:.6}\t{}\n",
                        i.rank, i.energy.total, caption.sentence
                    ));
                }
            }
            OutputFormat::Label => {
                for i in interps {
                    let label = to_label(&i.configuration)?;
                    out.push_str(&format!("{segment}\t{}\t{:.6}\t{label}\n", i.rank, i.energy.total));
                }
            }
            OutputFormat::Dot => {
                for i in interps {
                    out.push_str(&to_dot(&i.configuration, &format!("{segment}#{}", i.rank)));
                }
            }
        }
        Ok(out)
    }
}

pub fn interpret(a: &InterpretArgs) -> Outcome<()> {
    let base = params(&a.params)?;
    let renderer = Renderer::new(&a.render)?;
    let (kg, segments) = load_inputs(&a.input)?;
    renderer.check(&segments)?;
    let chunks: Vec<anyhow::Result<String>> = pool(a.run.workers)?.install(|| {
        segments
            .par_iter()
            .enumerate()
            .map(|(idx, h)| {
                let params = InferenceParams {
                    rng_seed: sub_seed(a.run.seed, idx as u64),
                    ..base.clone()
                };
                let outcome = anneal(h, &kg, &params).with_context(|| format!("segment `{}`", h.segment))?;
                renderer
                    .render(&h.segment, &outcome.interpretations)
                    .with_context(|| format!("segment `{}`", h.segment))
            })
            .collect()
    });
    let chunks = chunks
        .into_iter()
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(Failure::Runtime)?;
    write_all(&mut *sink(a.render.out.as_deref())?, &chunks)
}

pub fn oracle(a: &OracleArgs) -> Outcome<()> {
    let params = params(&a.params)?;
    let renderer = Renderer::new(&a.render)?;
    let (kg, segments) = load_inputs(&a.input)?;
    renderer.check(&segments)?;
    let chunks: Vec<anyhow::Result<String>> = pool(a.workers)?.install(|| {
        segments
            .par_iter()
            .map(|h| {
                let ctx = || format!("segment `{}`", h.segment);
                let outcome = oracle_search(h, &kg, &params, a.budget).with_context(ctx)?;
                let interps = oracle_interpretations(h, &kg, &params, &outcome, params.top_n).with_context(ctx)?;
                renderer.render(&h.segment, &interps).with_context(ctx)
            })
            .collect()
    });
    let chunks = chunks
        .into_iter()
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(Failure::Runtime)?;
    write_all(&mut *sink(a.render.out.as_deref())?, &chunks)
}

pub fn synth(a: &SynthArgs) -> Outcome<()> {
    let validation = params(&a.params)?;
    let p = SynthParams {
        instances: a.instances,
        slots: a.slots,
        candidates: a.candidates,
        kg_size: a.kg_size,
        cue_density: a.cue_density,
        seed: a.seed,
        max_attempts: a.max_attempts,
        oracle_budget: a.budget,
    };
    p.validate().map_err(|e| Failure::Usage(e.into()))?;
    let suite = synthesize(&p, &validation).map_err(|e| Failure::Runtime(e.into()))?;
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cannot create {}", a.out_dir.display()))
        .map_err(Failure::Runtime)?;
    let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| -> Outcome<()> {
        let path = a.out_dir.join(name);
        let mut w = BufWriter::new(
            File::create(&path)
                .with_context(|| format!("cannot create {}", path.display()))
                .map_err(Failure::Runtime)?,
        );
        f(&mut w)
            .and_then(|_| w.flush())
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::Runtime)
    };
    write("kg.tsv", &|w| suite.write_kg(w))?;
    write("hypotheses.jsonl", &|w| suite.write_hypotheses(w))?;
    write("answers.jsonl", &|w| suite.write_answers(w))?;
    let confirmed = suite
        .instances
        .iter()
        .filter(|i| i.answer.planted_is_minimum == Some(true))
        .count();
    eprintln!(
        "wrote {} instances to {} ({confirmed} with the planted answer confirmed as the minimum)",
        suite.instances.len(),
        a.out_dir.display()
    );
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Outcome<()> {
    let base = params(&a.params)?;
    let (kg, segments) = load_inputs(&a.input)?;
    let answers: HashMap<String, PlantedAnswer> = match &a.answers {
        Some(p) => parse_answers(open(p)?)
            .with_context(|| format!("answers {}", p.display()))
            .map_err(Failure::Ingestion)?
            .into_iter()
            .map(|ans| (ans.segment.clone(), ans))
            .collect(),
        None => HashMap::new(),
    };
    let rows: Vec<EvalRow> = pool(a.run.workers)?.install(|| {
        segments
            .par_iter()
            .enumerate()
            .map(|(idx, h)| {
                let params = InferenceParams {
                    rng_seed: sub_seed(a.run.seed, idx as u64),
                    ..base.clone()
                };
                evaluate_instance(h, &kg, answers.get(&h.segment), &params, a.budget)
            })
            .collect()
    });
    let mut out = sink(a.report.as_deref())?;
    write_report(&mut out, &rows)
        .and_then(|_| out.flush())
        .context("cannot write report")
        .map_err(Failure::Runtime)
}
