use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{percent, MetricsError, Tokenizer};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl Prf {
    fn from_matches(matches: usize, cand: usize, reference: usize) -> Self {
        if cand == 0 || reference == 0 {
            return Self::default();
        }
        let precision = matches as f64 / cand as f64;
        let recall = matches as f64 / reference as f64;
        let f = if matches == 0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f }
    }

    fn add(&mut self, o: &Prf) {
        self.precision += o.precision;
        self.recall += o.recall;
        self.f += o.f;
    }

    fn scale(&mut self, k: f64) {
        self.precision *= k;
        self.recall *= k;
        self.f *= k;
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n > 0 {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Matches between candidate n-grams and reference n-grams, each reference
/// n-gram usable as often as it occurs.
fn clipped_matches<T: Eq + Hash>(cand: &[T], reference: &[T], n: usize) -> usize {
    let r = ngram_counts(reference, n);
    ngram_counts(cand, n).into_iter().map(|(g, c)| c.min(r.get(g).copied().unwrap_or(0))).sum()
}

fn ngram_total(len: usize, n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (len + 1).saturating_sub(n)
    }
}

/// ROUGE-N over token sequences. Zero when either side has no n-grams.
pub fn rouge_n<T: Eq + Hash>(cand: &[T], reference: &[T], n: usize) -> Prf {
    Prf::from_matches(clipped_matches(cand, reference, n), ngram_total(cand.len(), n), ngram_total(reference.len(), n))
}

fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L over token sequences.
pub fn rouge_l<T: Eq>(cand: &[T], reference: &[T]) -> Prf {
    Prf::from_matches(lcs_len(cand, reference), cand.len(), reference.len())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub value: f64,
    /// Clipped 1- to 4-gram precisions.
    pub precisions: [f64; 4],
    pub brevity_penalty: f64,
}

/// Unsmoothed sentence BLEU-4 against one reference. Candidates shorter than
/// four tokens score 0.
pub fn bleu4<T: Eq + Hash>(cand: &[T], reference: &[T]) -> BleuScore {
    let c = cand.len();
    let r = reference.len();
    let mut precisions = [0.0; 4];
    for (i, p) in precisions.iter_mut().enumerate() {
        let total = ngram_total(c, i + 1);
        if total > 0 {
            *p = clipped_matches(cand, reference, i + 1) as f64 / total as f64;
        }
    }
    let brevity_penalty = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let value = if c < 4 || precisions.contains(&0.0) {
        0.0
    } else {
        brevity_penalty * (precisions.iter().map(|p| p.ln()).sum::<f64>() / 4.0).exp()
    };
    BleuScore { value, precisions, brevity_penalty }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub bleu4: BleuScore,
}

pub fn score_pair(candidate: &str, reference: &str, tokenizer: Tokenizer) -> PairScores {
    // Both sides must use the same tokenizer.
    let tokenizer = tokenizer.resolve(&format!("{reference}{candidate}"));
    let c = tokenizer.tokenize(candidate);
    let r = tokenizer.tokenize(reference);
    PairScores {
        rouge1: rouge_n(&c, &r, 1),
        rouge2: rouge_n(&c, &r, 2),
        rouge_l: rouge_l(&c, &r),
        bleu4: bleu4(&c, &r),
    }
}

/// Means of the per-pair scores, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryScores {
    pub pairs: usize,
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub bleu4: BleuScore,
}

pub fn evaluate_summaries<S: AsRef<str> + Sync>(
    pairs: &[(S, S)],
    tokenizer: Tokenizer,
) -> Result<SummaryScores, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let scores: Vec<PairScores> =
        pairs.par_iter().map(|(c, r)| score_pair(c.as_ref(), r.as_ref(), tokenizer)).collect();
    let mut sum = PairScores::default();
    for s in &scores {
        sum.rouge1.add(&s.rouge1);
        sum.rouge2.add(&s.rouge2);
        sum.rouge_l.add(&s.rouge_l);
        sum.bleu4.value += s.bleu4.value;
        sum.bleu4.brevity_penalty += s.bleu4.brevity_penalty;
        for (a, b) in sum.bleu4.precisions.iter_mut().zip(s.bleu4.precisions) {
            *a += b;
        }
    }
    let k = 1.0 / scores.len() as f64;
    sum.rouge1.scale(k);
    sum.rouge2.scale(k);
    sum.rouge_l.scale(k);
    sum.bleu4.value *= k;
    sum.bleu4.brevity_penalty *= k;
    sum.bleu4.precisions.iter_mut().for_each(|p| *p *= k);
    Ok(SummaryScores {
        pairs: scores.len(),
        rouge1: sum.rouge1,
        rouge2: sum.rouge2,
        rouge_l: sum.rouge_l,
        bleu4: sum.bleu4,
    })
}

impl SummaryScores {
    /// One-row table of F-measures and BLEU-4, ×100.
    pub fn render(&self, model: &str) -> String {
        let mut out = String::new();
        let w = model.len().max(5);
        let _ = writeln!(out, "{:<w$}  {:>7}  {:>7}  {:>7}  {:>7}", "Model", "Rouge-1", "Rouge-2", "Rouge-L", "BLEU-4");
        let _ = writeln!(
            out,
            "{model:<w$}  {:>7}  {:>7}  {:>7}  {:>7}",
            percent(self.rouge1.f),
            percent(self.rouge2.f),
            percent(self.rouge_l.f),
            percent(self.bleu4.value)
        );
        out
    }
}
