//! Anneal-versus-oracle evaluation and its TSV report.

use std::io::Write;
use std::time::Instant;

use crate::inference::{anneal, oracle_search, HypothesisSet, InferenceError, InferenceParams};
use crate::kg::KnowledgeGraph;
use crate::render::to_label;
use crate::synth::PlantedAnswer;

/// Energies within this distance count as equal.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

pub const REPORT_COLUMNS: [&str; 11] = [
    "segment",
    "status",
    "oracle_energy",
    "anneal_energy",
    "energy_gap",
    "hit_optimum",
    "planted_label",
    "anneal_label",
    "label_match",
    "planted_is_minimum",
    "millis",
];

#[derive(Clone, Debug, PartialEq)]
pub enum EvalStatus {
    Ok,
    /// The oracle refused; anneal results are still reported.
    BudgetExceeded,
    Failed(String),
}

impl EvalStatus {
    fn as_str(&self) -> &str {
        match self {
            EvalStatus::Ok => "ok",
            EvalStatus::BudgetExceeded => "budget_exceeded",
            EvalStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub segment: String,
    pub status: EvalStatus,
    pub oracle_energy: Option<f64>,
    pub anneal_energy: Option<f64>,
    pub anneal_label: Option<String>,
    pub planted_label: Option<String>,
    pub planted_is_minimum: Option<bool>,
    pub millis: f64,
}

impl EvalRow {
    pub fn energy_gap(&self) -> Option<f64> {
        Some(self.anneal_energy? - self.oracle_energy?)
    }

    pub fn hit_optimum(&self) -> Option<bool> {
        self.energy_gap().map(|g| g <= ENERGY_TOLERANCE)
    }

    pub fn label_match(&self) -> Option<bool> {
        Some(self.anneal_label.as_ref()? == self.planted_label.as_ref()?)
    }
}

/// Anneals one segment (timed) and compares it with the oracle.
pub fn evaluate_instance(
    h: &HypothesisSet,
    kg: &KnowledgeGraph,
    answer: Option<&PlantedAnswer>,
    params: &InferenceParams,
    budget: u128,
) -> EvalRow {
    let mut row = EvalRow {
        segment: h.segment.clone(),
        status: EvalStatus::Ok,
        oracle_energy: None,
        anneal_energy: None,
        anneal_label: None,
        planted_label: answer.map(|a| a.label.clone()),
        planted_is_minimum: answer.and_then(|a| a.planted_is_minimum),
        millis: 0.0,
    };
    let start = Instant::now();
    let annealed = anneal(h, kg, params);
    row.millis = start.elapsed().as_secs_f64() * 1000.0;
    match annealed {
        Ok(outcome) => {
            if let Some(top) = outcome.interpretations.first() {
                row.anneal_energy = Some(top.energy.total);
                row.anneal_label = to_label(&top.configuration).ok();
            }
        }
        Err(e) => {
            row.status = EvalStatus::Failed(e.to_string());
            return row;
        }
    }
    match oracle_search(h, kg, params, budget) {
        Ok(outcome) => row.oracle_energy = outcome.min_energy(),
        Err(InferenceError::BudgetExceeded { .. }) => row.status = EvalStatus::BudgetExceeded,
        Err(e) => row.status = EvalStatus::Failed(e.to_string()),
    }
    row
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub instances: usize,
    pub oracle_solved: usize,
    pub hit_optimum: usize,
    /// Mean gap over oracle-solved instances.
    pub mean_gap: Option<f64>,
    pub labeled: usize,
    pub label_matches: usize,
    /// Instances whose planted answer the oracle confirmed as the minimum.
    pub confirmed: usize,
    pub confirmed_matches: usize,
    pub median_millis: Option<f64>,
}

impl EvalSummary {
    pub fn label_agreement(&self) -> Option<f64> {
        (self.labeled > 0).then(|| self.label_matches as f64 / self.labeled as f64)
    }

    pub fn confirmed_agreement(&self) -> Option<f64> {
        (self.confirmed > 0).then(|| self.confirmed_matches as f64 / self.confirmed as f64)
    }
}

pub fn summarize(rows: &[EvalRow]) -> EvalSummary {
    let gaps: Vec<f64> = rows.iter().filter_map(EvalRow::energy_gap).collect();
    let mut millis: Vec<f64> = rows.iter().map(|r| r.millis).collect();
    millis.sort_by(f64::total_cmp);
    let median_millis = match millis.len() {
        0 => None,
        n if n % 2 == 1 => Some(millis[n / 2]),
        n => Some((millis[n / 2 - 1] + millis[n / 2]) / 2.0),
    };
    let labeled: Vec<bool> = rows.iter().filter_map(EvalRow::label_match).collect();
    let confirmed: Vec<bool> = rows
        .iter()
        .filter(|r| r.planted_is_minimum == Some(true))
        .map(|r| r.label_match() == Some(true))
        .collect();
    EvalSummary {
        instances: rows.len(),
        oracle_solved: gaps.len(),
        hit_optimum: rows.iter().filter(|r| r.hit_optimum() == Some(true)).count(),
        mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        labeled: labeled.len(),
        label_matches: labeled.iter().filter(|m| **m).count(),
        confirmed: confirmed.len(),
        confirmed_matches: confirmed.iter().filter(|m| **m).count(),
        median_millis,
    }
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_else(|| "-".to_string())
}

fn energy(x: f64) -> String {
    format!("{x:.6}")
}

fn rate(n: usize, d: usize) -> String {
    if d == 0 {
        format!("{n}/{d}")
    } else {
        format!("{n}/{d} ({:.4})", n as f64 / d as f64)
    }
}

/// Header row, one row per instance, then `#`-prefixed aggregate lines.
/// Missing values are written as `-`.
pub fn write_report<W: Write>(mut out: W, rows: &[EvalRow]) -> std::io::Result<EvalSummary> {
    writeln!(out, "{}", REPORT_COLUMNS.join("\t"))?;
    for r in rows {
        let fields = [
            r.segment.clone(),
            r.status.as_str().to_string(),
            opt(r.oracle_energy, energy),
            opt(r.anneal_energy, energy),
            opt(r.energy_gap(), energy),
            opt(r.hit_optimum(), |b| b.to_string()),
            opt(r.planted_label.clone(), |s| s),
            opt(r.anneal_label.clone(), |s| s),
            opt(r.label_match(), |b| b.to_string()),
            opt(r.planted_is_minimum, |b| b.to_string()),
            format!("{:.3}", r.millis),
        ];
        writeln!(out, "{}", fields.join("\t"))?;
    }
    let s = summarize(rows);
    writeln!(out, "# instances\t{}", s.instances)?;
    writeln!(out, "# oracle_solved\t{}", s.oracle_solved)?;
    writeln!(out, "# hit_optimum\t{}", rate(s.hit_optimum, s.oracle_solved))?;
    writeln!(out, "# mean_gap\t{}", opt(s.mean_gap, energy))?;
    writeln!(out, "# label_agreement\t{}", rate(s.label_matches, s.labeled))?;
    writeln!(
        out,
        "# label_agreement_confirmed\t{}",
        rate(s.confirmed_matches, s.confirmed)
    )?;
    writeln!(out, "# median_millis\t{}", opt(s.median_millis, |m| format!("{m:.3}")))?;
    for r in rows {
        if let EvalStatus::Failed(reason) = &r.status {
            writeln!(out, "# failed\t{}\t{}", r.segment, reason.replace(['\t', '\n'], " "))?;
        }
    }
    Ok(s)
}
