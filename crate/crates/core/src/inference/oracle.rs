//! Exhaustive enumeration of the assignment space, for verifying the sampler
//! on small instances.

use std::collections::HashMap;

use super::assemble::{Assembler, Assignment, InterpretationKey, SlotPair};
use super::{HypothesisSet, InferenceError, InferenceParams};
use crate::kg::{ConceptId, KnowledgeGraph};

/// Label assignments beyond which the space is not sized exactly.
const EXACT_SIZING_LIMIT: u128 = 1_000_000;

#[derive(Clone, Debug)]
pub struct RankedAssignment {
    pub energy: f64,
    pub key: InterpretationKey,
    pub assignment: Assignment,
    pub connected: bool,
}

#[derive(Clone, Debug)]
pub struct OracleOutcome {
    pub space_size: u128,
    /// Distinct interpretations by ascending energy (ties by key).
    pub ranked: Vec<RankedAssignment>,
}

impl OracleOutcome {
    pub fn min_energy(&self) -> Option<f64> {
        self.ranked.first().map(|r| r.energy)
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

fn subsets_up_to(n: usize, max: usize) -> u128 {
    (0..=max.min(n)).map(|s| binomial(n, s)).sum()
}

/// All index subsets of `0..n` with at most `max` elements, each ascending.
fn index_subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    fn extend(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            return;
        }
        for i in start..n {
            cur.push(i);
            out.push(cur.clone());
            extend(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    extend(0, n, max, &mut Vec::new(), &mut out);
    out
}

fn label_vectors(h: &HypothesisSet) -> impl Iterator<Item = Vec<usize>> + '_ {
    let sizes: Vec<usize> = h.slots.iter().map(|s| s.candidates.len()).collect();
    let mut next = Some(vec![0usize; sizes.len()]);
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < sizes[i] {
                next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    })
}

/// Number of assignments the oracle would evaluate. The second value is
/// false when only a lower bound was computed.
pub fn search_space_size(h: &HypothesisSet, kg: &KnowledgeGraph, params: &InferenceParams) -> (u128, bool) {
    let labels = h.assignment_count();
    if labels > EXACT_SIZING_LIMIT {
        return (labels, false);
    }
    let mut asm = Assembler::new(h, kg, params);
    let pairs: Vec<SlotPair> = asm.ordered_pairs().collect();
    let mut total = 0u128;
    for labels in label_vectors(h) {
        let mut product = 1u128;
        for &pair in &pairs {
            let pool = asm.pair_pool(&labels, pair);
            product = product.saturating_mul(subsets_up_to(pool.len(), params.cues_per_pair));
        }
        total = total.saturating_add(product);
    }
    (total, true)
}

/// Evaluates every label assignment with every cue subset (at most
/// `cues_per_pair` per pair, drawn from the pair's cue pool) and ranks the
/// distinct interpretations by energy.
pub fn oracle_search(
    h: &HypothesisSet,
    kg: &KnowledgeGraph,
    params: &InferenceParams,
    budget: u128,
) -> Result<OracleOutcome, InferenceError> {
    params.validate()?;
    let (size, exact) = search_space_size(h, kg, params);
    if size > budget {
        return Err(InferenceError::BudgetExceeded { size, budget, exact });
    }
    let mut asm = Assembler::new(h, kg, params);
    let pairs: Vec<SlotPair> = asm.ordered_pairs().collect();
    let mut best: HashMap<InterpretationKey, RankedAssignment> = HashMap::new();

    for labels in label_vectors(h) {
        let options: Vec<(SlotPair, Vec<Vec<ConceptId>>)> = pairs
            .iter()
            .map(|&pair| {
                let pool = asm.pair_pool(&labels, pair);
                let subsets = index_subsets(pool.len(), params.cues_per_pair)
                    .into_iter()
                    .map(|idx| idx.into_iter().map(|i| pool[i].clone()).collect())
                    .collect();
                (pair, subsets)
            })
            .collect();
        let mut choice = vec![0usize; options.len()];
        loop {
            let mut assignment = Assignment {
                labels: labels.clone(),
                ..Default::default()
            };
            for ((pair, subsets), &c) in options.iter().zip(&choice) {
                if !subsets[c].is_empty() {
                    assignment.cues.insert(*pair, subsets[c].clone());
                }
            }
            let eval = asm.evaluate(&assignment)?;
            if !params.require_connected || eval.connected {
                let key = asm.key(&eval.realized);
                let entry = RankedAssignment {
                    energy: eval.energy,
                    key: key.clone(),
                    assignment: eval.realized.clone(),
                    connected: eval.connected,
                };
                match best.get(&key) {
                    Some(existing) if existing.energy <= entry.energy => {}
                    _ => {
                        best.insert(key, entry);
                    }
                }
            }
            // odometer over per-pair subset choices
            let mut carry = true;
            for i in (0..choice.len()).rev() {
                choice[i] += 1;
                if choice[i] < options[i].1.len() {
                    carry = false;
                    break;
                }
                choice[i] = 0;
            }
            if carry {
                break;
            }
        }
    }
    let mut ranked: Vec<RankedAssignment> = best.into_values().collect();
    ranked.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.key.cmp(&b.key)));
    Ok(OracleOutcome {
        space_size: size,
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_counts() {
        assert_eq!(subsets_up_to(0, 3), 1);
        assert_eq!(subsets_up_to(5, 3), 26);
        assert_eq!(subsets_up_to(4, 2), 11);
        assert_eq!(index_subsets(4, 2).len(), 11);
        assert_eq!(index_subsets(5, 3).len(), 26);
        assert_eq!(index_subsets(3, 0), vec![Vec::<usize>::new()]);
    }
}
