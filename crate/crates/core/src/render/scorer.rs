//! Sentence scoring for caption selection.

use std::collections::HashMap;
use std::io::BufRead;

use super::RenderError;

/// Scores candidate sentences; higher is preferred.
pub trait SentenceScorer {
    fn score(&self, sentence: &str) -> f64;
}

/// Scores every sentence 0, leaving the choice to the lexicographic
/// tie-break.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformScorer;

impl SentenceScorer for UniformScorer {
    fn score(&self, _sentence: &str) -> f64 {
        0.0
    }
}

impl<F: Fn(&str) -> f64> SentenceScorer for F {
    fn score(&self, sentence: &str) -> f64 {
        self(sentence)
    }
}

/// Mean log relative frequency over a sentence's unigrams and bigrams.
/// Unseen n-grams are floored at half a count.
#[derive(Clone, Debug, Default)]
pub struct NgramScorer {
    unigrams: HashMap<String, f64>,
    bigrams: HashMap<(String, String), f64>,
    unigram_total: f64,
    bigram_total: f64,
}

const UNSEEN_COUNT: f64 = 0.5;

impl NgramScorer {
    /// Reads `token[ token]<TAB>count` lines; `#` starts a comment.
    pub fn from_counts<R: BufRead>(source: R) -> Result<Self, RenderError> {
        let mut scorer = NgramScorer::default();
        for (n, line) in source.lines().enumerate() {
            let line = line.map_err(|e| RenderError::Counts {
                line: n + 1,
                reason: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let bad = |reason: String| RenderError::Counts { line: n + 1, reason };
            let (gram, count) = trimmed
                .rsplit_once('\t')
                .ok_or_else(|| bad("expected `ngram<TAB>count`".into()))?;
            let count: f64 = count
                .trim()
                .parse()
                .map_err(|_| bad(format!("count `{}` is not a number", count.trim())))?;
            if !(count.is_finite() && count >= 0.0) {
                return Err(bad("count must be a nonnegative number".into()));
            }
            let tokens: Vec<String> = gram.split_whitespace().map(str::to_lowercase).collect();
            match tokens.as_slice() {
                [w] => {
                    *scorer.unigrams.entry(w.clone()).or_insert(0.0) += count;
                    scorer.unigram_total += count;
                }
                [a, b] => {
                    *scorer.bigrams.entry((a.clone(), b.clone())).or_insert(0.0) += count;
                    scorer.bigram_total += count;
                }
                _ => return Err(bad(format!("`{gram}` is not a unigram or bigram"))),
            }
        }
        Ok(scorer)
    }
}

impl SentenceScorer for NgramScorer {
    fn score(&self, sentence: &str) -> f64 {
        let tokens: Vec<String> = sentence.split_whitespace().map(str::to_lowercase).collect();
        let mut sum = 0.0;
        let mut terms = 0usize;
        if self.unigram_total > 0.0 {
            for t in &tokens {
                let c = self.unigrams.get(t).copied().unwrap_or(0.0).max(UNSEEN_COUNT);
                sum += (c / self.unigram_total).ln();
                terms += 1;
            }
        }
        if self.bigram_total > 0.0 {
            for pair in tokens.windows(2) {
                let c = self
                    .bigrams
                    .get(&(pair[0].clone(), pair[1].clone()))
                    .copied()
                    .unwrap_or(0.0)
                    .max(UNSEEN_COUNT);
                sum += (c / self.bigram_total).ln();
                terms += 1;
            }
        }
        if terms == 0 {
            0.0
        } else {
            sum / terms as f64
        }
    }
}
