//! Slow, obviously-correct reference implementations used to check the
//! metric code.
#![allow(dead_code)]

use cogpath_core::{Category, ChildCategory, ParentCategory, SentenceLabel};

pub fn ngrams<T: Clone>(tokens: &[T], n: usize) -> Vec<Vec<T>> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

/// Size of the multiset intersection, by removing matched items one at a time.
pub fn multiset_overlap<T: PartialEq + Clone>(a: &[Vec<T>], b: &[Vec<T>]) -> usize {
    let mut pool = b.to_vec();
    let mut hits = 0;
    for g in a {
        if let Some(pos) = pool.iter().position(|x| x == g) {
            pool.remove(pos);
            hits += 1;
        }
    }
    hits
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn rouge_n(cand: &[String], reference: &[String], n: usize) -> (f64, f64, f64) {
    let c = ngrams(cand, n);
    let r = ngrams(reference, n);
    if c.is_empty() || r.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let m = multiset_overlap(&c, &r) as f64;
    let (p, rec) = (m / c.len() as f64, m / r.len() as f64);
    (p, rec, harmonic(p, rec))
}

fn is_subsequence<T: PartialEq>(needle: &[&T], hay: &[T]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|y| y == *x))
}

/// Longest common subsequence by trying every subsequence of `a`.
pub fn lcs_exhaustive<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    assert!(a.len() <= 16, "exhaustive LCS is exponential");
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let len = mask.count_ones() as usize;
        if len <= best {
            continue;
        }
        let sub: Vec<&T> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if is_subsequence(&sub, b) {
            best = len;
        }
    }
    best
}

pub fn rouge_l(cand: &[String], reference: &[String]) -> (f64, f64, f64) {
    if cand.is_empty() || reference.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let l = lcs_exhaustive(cand, reference) as f64;
    let (p, r) = (l / cand.len() as f64, l / reference.len() as f64);
    (p, r, harmonic(p, r))
}

/// Clipped precision: each candidate n-gram counts at most as often as it
/// occurs in the reference.
pub fn clipped_precision(cand: &[String], reference: &[String], n: usize) -> f64 {
    let c = ngrams(cand, n);
    if c.is_empty() {
        return 0.0;
    }
    let r = ngrams(reference, n);
    let mut distinct: Vec<&Vec<String>> = Vec::new();
    for g in &c {
        if !distinct.contains(&g) {
            distinct.push(g);
        }
    }
    let matched: usize = distinct
        .iter()
        .map(|g| {
            let in_c = c.iter().filter(|x| x == g).count();
            let in_r = r.iter().filter(|x| x == g).count();
            in_c.min(in_r)
        })
        .sum();
    matched as f64 / c.len() as f64
}

pub fn bleu4(cand: &[String], reference: &[String]) -> f64 {
    if cand.len() < 4 {
        return 0.0;
    }
    let p: Vec<f64> = (1..=4).map(|n| clipped_precision(cand, reference, n)).collect();
    if p.contains(&0.0) {
        return 0.0;
    }
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * p.iter().product::<f64>().powf(0.25)
}

/// Label-instance membership straight from the entries.
pub fn has_instance(label: &SentenceLabel, cat: Category) -> bool {
    label.entries().iter().any(|e| match cat {
        Category::Parent(p) => e.parent == p,
        Category::Child(c) => e.children.contains(&c),
    })
}

pub fn all_categories() -> Vec<Category> {
    ParentCategory::ALL
        .iter()
        .map(|p| Category::Parent(*p))
        .chain(ChildCategory::ALL.iter().map(|c| Category::Child(*c)))
        .collect()
}

/// (tp, fp, fn) for one category by scanning every sentence.
pub fn confusion(gold: &[SentenceLabel], pred: &[SentenceLabel], cat: Category) -> (usize, usize, usize) {
    let mut t = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        match (has_instance(g, cat), has_instance(p, cat)) {
            (true, true) => t.0 += 1,
            (false, true) => t.1 += 1,
            (true, false) => t.2 += 1,
            (false, false) => {}
        }
    }
    t
}

/// Micro P/R/F1 over the categories selected by `keep`.
pub fn micro(gold: &[SentenceLabel], pred: &[SentenceLabel], keep: impl Fn(&Category) -> bool) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fnn) = (0, 0, 0);
    for cat in all_categories().into_iter().filter(|c| keep(c)) {
        let (a, b, c) = confusion(gold, pred, cat);
        tp += a;
        fp += b;
        fnn += c;
    }
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
    (p, r, harmonic(p, r))
}
