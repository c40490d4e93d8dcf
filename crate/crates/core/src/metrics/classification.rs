use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{percent, MetricsError};
use crate::taxonomy::{Category, SentenceLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Parent,
    Child,
    /// Parent and child instances together.
    Pooled,
}

impl Level {
    /// Label instances of one sentence at this level.
    pub fn instances(self, label: &SentenceLabel) -> BTreeSet<Category> {
        let parents = || label.parents().into_iter().map(Category::Parent);
        let children = || label.children().into_iter().map(Category::Child);
        match self {
            Level::Parent => parents().collect(),
            Level::Child => children().collect(),
            Level::Pooled => parents().chain(children()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub level: Level,
    pub per_category: BTreeMap<Category, Counts>,
}

impl ConfusionCounts {
    pub fn totals(&self) -> Counts {
        let mut t = Counts::default();
        for c in self.per_category.values() {
            t += *c;
        }
        t
    }

    pub fn get(&self, cat: Category) -> Counts {
        self.per_category.get(&cat).copied().unwrap_or_default()
    }
}

/// Per sentence, gold and predicted instances at `level` are sets:
/// tp = |gold ∩ pred|, fp = |pred \ gold|, fn = |gold \ pred|, accumulated per category.
pub fn count_confusion(
    gold: &[SentenceLabel],
    pred: &[SentenceLabel],
    level: Level,
) -> Result<ConfusionCounts, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { gold: gold.len(), pred: pred.len() });
    }
    let mut per_category: BTreeMap<Category, Counts> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        let g = level.instances(g);
        let p = level.instances(p);
        for cat in g.intersection(&p) {
            per_category.entry(*cat).or_default().tp += 1;
        }
        for cat in p.difference(&g) {
            per_category.entry(*cat).or_default().fp += 1;
        }
        for cat in g.difference(&p) {
            per_category.entry(*cat).or_default().fn_ += 1;
        }
    }
    Ok(ConfusionCounts { level, per_category })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LevelReport {
    /// 0/0 is taken as 0 for precision and recall.
    pub fn from_counts(c: Counts) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f1 }
    }
}

/// Micro-averaged precision, recall and F1 over all categories of `counts`.
pub fn micro_prf(counts: &ConfusionCounts) -> LevelReport {
    LevelReport::from_counts(counts.totals())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub sentences: usize,
    pub parent: LevelReport,
    pub child: LevelReport,
    /// Micro over pooled parent and child instances.
    pub overall: LevelReport,
    pub per_node: BTreeMap<Category, LevelReport>,
    pub counts: ConfusionCounts,
    /// Sentences labelled with more than one parent (flagged, not rejected).
    pub multi_parent_gold: usize,
    pub multi_parent_pred: usize,
}

pub fn classification_report(
    gold: &[SentenceLabel],
    pred: &[SentenceLabel],
) -> Result<ClassificationReport, MetricsError> {
    let parent = count_confusion(gold, pred, Level::Parent)?;
    let child = count_confusion(gold, pred, Level::Child)?;
    let pooled = count_confusion(gold, pred, Level::Pooled)?;
    Ok(ClassificationReport {
        sentences: gold.len(),
        parent: micro_prf(&parent),
        child: micro_prf(&child),
        overall: micro_prf(&pooled),
        per_node: pooled.per_category.iter().map(|(cat, c)| (*cat, LevelReport::from_counts(*c))).collect(),
        counts: pooled,
        multi_parent_gold: gold.iter().filter(|l| l.is_multi_parent()).count(),
        multi_parent_pred: pred.iter().filter(|l| l.is_multi_parent()).count(),
    })
}

fn row(out: &mut String, name: &str, r: &LevelReport, width: usize) {
    let _ =
        writeln!(out, "{name:<width$}  {:>9}  {:>7}  {:>7}", percent(r.precision), percent(r.recall), percent(r.f1));
}

impl ClassificationReport {
    /// Level summary: parent nodes, child nodes, overall.
    pub fn render_levels(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12}  {:>9}  {:>7}  {:>7}", "Level", "Precision", "Recall", "F1");
        row(&mut out, "Parent nodes", &self.parent, 12);
        row(&mut out, "Child nodes", &self.child, 12);
        row(&mut out, "Overall", &self.overall, 12);
        out
    }

    /// Per-node table, parents each followed by their children. Nodes absent
    /// from both gold and predictions are omitted.
    pub fn render_nodes(&self) -> String {
        let width = 30;
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>7}  {:>7}", "Nodes", "Precision", "Recall", "F1");
        for cat in Category::all() {
            let Some(r) = self.per_node.get(&cat) else { continue };
            let name = match cat {
                Category::Parent(p) => p.table_label(),
                Category::Child(c) => format!("  {}", c.display_name()),
            };
            row(&mut out, &name, r, width);
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = format!("{} sentences\n\n", self.sentences);
        out.push_str(&self.render_levels());
        out.push('\n');
        out.push_str(&self.render_nodes());
        if self.multi_parent_gold + self.multi_parent_pred > 0 {
            let _ = writeln!(
                out,
                "\nmulti-parent sentences: {} gold, {} predicted",
                self.multi_parent_gold, self.multi_parent_pred
            );
        }
        out
    }
}
