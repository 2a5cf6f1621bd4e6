//! Local (swap) and global (cue-structural) proposals over assignments.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::assemble::{Assembler, Assignment, SlotPair};
use super::InferenceError;
use crate::kg::ConceptId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    /// Swap one grounded label for the best of up to `m` alternatives.
    Local,
    /// Add one cue to an ordered pair.
    Insert,
    /// Drop one cue.
    Delete,
    /// Replace one cue with the next-ranked unused cue of its pair.
    Rewire,
    /// No applicable move.
    Identity,
}

/// Swap proposal. Picks a slot uniformly, samples up to `m` of its other
/// candidates without replacement, rebuilds each with default cues on the
/// pairs touching that slot and returns the lowest-energy one (ties: higher
/// confidence, then concept id).
pub fn propose_local<R: Rng + ?Sized>(
    asm: &mut Assembler<'_>,
    current: &Assignment,
    m: usize,
    rng: &mut R,
) -> Result<(MoveKind, Assignment), InferenceError> {
    let slot = rng.gen_range(0..asm.slot_count());
    let size = asm.hypotheses.slots[slot].candidates.len();
    let alternatives: Vec<usize> = (0..size).filter(|&l| l != current.labels[slot]).collect();
    if alternatives.is_empty() {
        return Ok((MoveKind::Identity, current.clone()));
    }
    let picked = sample(rng, alternatives.len(), m.min(alternatives.len()));
    let mut best: Option<(f64, f64, ConceptId, Assignment)> = None;
    for idx in picked.iter() {
        let label = alternatives[idx];
        let mut labels = current.labels.clone();
        labels[slot] = label;
        let candidate = asm.with_default_cues(labels, Some((slot, current)));
        let eval = asm.evaluate(&candidate)?;
        let cand = asm.hypotheses.candidate(slot, label);
        let better = match &best {
            None => true,
            Some((e, conf, concept, _)) => eval
                .energy
                .total_cmp(e)
                .then_with(|| conf.total_cmp(&cand.confidence))
                .then_with(|| cand.concept.cmp(concept))
                .is_lt(),
        };
        if better {
            best = Some((
                eval.energy,
                cand.confidence,
                cand.concept.clone(),
                eval.realized.clone(),
            ));
        }
    }
    let (_, _, _, assignment) = best.expect("at least one alternative sampled");
    Ok((MoveKind::Local, assignment))
}

/// Structural proposal: one of insert / delete / rewire, chosen uniformly
/// among the kinds that currently apply.
pub fn propose_global<R: Rng + ?Sized>(
    asm: &mut Assembler<'_>,
    current: &Assignment,
    rng: &mut R,
) -> Result<(MoveKind, Assignment), InferenceError> {
    let cpp = asm.params.cues_per_pair;
    let pairs: Vec<SlotPair> = asm.ordered_pairs().collect();
    let empty = Vec::new();

    let mut inserts: Vec<(SlotPair, Vec<ConceptId>)> = Vec::new();
    let mut deletes: Vec<(SlotPair, usize)> = Vec::new();
    let mut rewires: Vec<(SlotPair, usize, ConceptId)> = Vec::new();
    for pair in pairs {
        let pool = asm.pair_pool(&current.labels, pair);
        let have = current.cues.get(&pair).unwrap_or(&empty);
        let unused: Vec<ConceptId> = pool.iter().filter(|c| !have.contains(c)).cloned().collect();
        if have.len() < cpp && !unused.is_empty() {
            inserts.push((pair, unused));
        }
        for (i, cue) in have.iter().enumerate() {
            deletes.push((pair, i));
            if let Some(pos) = pool.iter().position(|p| p == cue) {
                if let Some(next) = pool[pos + 1..].iter().find(|c| !have.contains(c)) {
                    rewires.push((pair, i, next.clone()));
                }
            }
        }
    }

    let mut kinds = Vec::new();
    if !inserts.is_empty() {
        kinds.push(MoveKind::Insert);
    }
    if !deletes.is_empty() {
        kinds.push(MoveKind::Delete);
    }
    if !rewires.is_empty() {
        kinds.push(MoveKind::Rewire);
    }
    if kinds.is_empty() {
        return Ok((MoveKind::Identity, current.clone()));
    }
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let mut next = current.clone();
    match kind {
        MoveKind::Insert => {
            let (pair, unused) = &inserts[rng.gen_range(0..inserts.len())];
            let cue = unused[rng.gen_range(0..unused.len())].clone();
            next.cues.entry(*pair).or_default().push(cue);
        }
        MoveKind::Delete => {
            let (pair, i) = deletes[rng.gen_range(0..deletes.len())];
            let list = next.cues.get_mut(&pair).expect("pair listed");
            list.remove(i);
            if list.is_empty() {
                next.cues.remove(&pair);
            }
        }
        MoveKind::Rewire => {
            let (pair, i, ref replacement) = rewires[rng.gen_range(0..rewires.len())];
            next.cues.get_mut(&pair).expect("pair listed")[i] = replacement.clone();
        }
        MoveKind::Local | MoveKind::Identity => unreachable!("not a global move"),
    }
    for (&pair, list) in next.cues.iter_mut() {
        let pool = asm.pair_pool(&next.labels, pair);
        list.sort_by_key(|c| pool.iter().position(|p| p == c).unwrap_or(usize::MAX));
    }
    let eval = asm.evaluate(&next)?;
    Ok((kind, eval.realized.clone()))
}

/// Metropolis acceptance: always for `delta <= 0`, otherwise with
/// probability `exp(-delta / temperature)`.
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    if delta <= 0.0 {
        return true;
    }
    rng.gen::<f64>() < (-delta / temperature).exp()
}
