//! Dataset manifests: per-child, per-split sentence counts plus the totals a
//! dataset description states, and the arithmetic that must tie them together.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{split_sizes, Corpus, Split, SplitAssignment, DEFAULT_RATIOS};
use crate::taxonomy::{ChildCategory, ParentCategory};

const BUNDLED_JSON: &str = include_str!("../../data/dataset_manifest.json");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn get_mut(&mut self, split: Split) -> &mut usize {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub parent: ParentCategory,
    pub child: ChildCategory,
    #[serde(flatten)]
    pub counts: SplitCounts,
    /// Stated row total, if the source gives one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatedSplits {
    #[serde(flatten)]
    pub counts: SplitCounts,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub name: String,
    pub rows: Vec<ManifestRow>,
    #[serde(default)]
    pub parent_sums: BTreeMap<ParentCategory, usize>,
    pub split_totals: SplitCounts,
    pub grand_total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posts: Option<StatedSplits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_pairs: Option<StatedSplits>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCheck {
    pub name: String,
    pub expected: usize,
    pub actual: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestReport {
    pub checks: Vec<ManifestCheck>,
}

impl ManifestReport {
    fn check(&mut self, name: impl Into<String>, expected: usize, actual: usize) {
        self.checks.push(ManifestCheck { name: name.into(), expected, actual, passed: expected == actual });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ManifestCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&ManifestCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  status", "check", "expected", "actual");
        for c in &self.checks {
            let status = if c.passed { "ok" } else { "FAIL" };
            let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {status}", c.name, c.expected, c.actual);
        }
        out
    }
}

/// The published class distribution of the ABCD sentence dataset.
pub fn bundled_manifest() -> DatasetManifest {
    serde_json::from_str(BUNDLED_JSON).expect("bundled manifest parses")
}

impl DatasetManifest {
    /// Sum of one parent's child counts in one split.
    pub fn parent_split_count(&self, parent: ParentCategory, split: Split) -> usize {
        self.rows.iter().filter(|r| r.parent == parent).map(|r| r.counts.get(split)).sum()
    }

    pub fn parent_total(&self, parent: ParentCategory) -> usize {
        self.rows.iter().filter(|r| r.parent == parent).map(|r| r.counts.total()).sum()
    }

    pub fn split_total(&self, split: Split) -> usize {
        self.rows.iter().map(|r| r.counts.get(split)).sum()
    }

    /// Counts child label instances of annotated sentences per split of their
    /// post. Sentences whose post is unassigned are skipped. All stated totals
    /// are derived, so the result validates by construction.
    pub fn from_corpus(corpus: &Corpus, assignment: &SplitAssignment) -> Self {
        let mut per_child: BTreeMap<ChildCategory, SplitCounts> = BTreeMap::new();
        for a in &corpus.annotations {
            let Some(split) = assignment.get(&a.sentence.post_id) else { continue };
            for child in a.gold.children() {
                *per_child.entry(child).or_default().get_mut(split) += 1;
            }
        }
        let rows: Vec<ManifestRow> = ChildCategory::ALL
            .into_iter()
            .map(|child| {
                let counts = per_child.get(&child).copied().unwrap_or_default();
                ManifestRow { parent: child.parent(), child, counts, sum: Some(counts.total()) }
            })
            .collect();
        let mut manifest = DatasetManifest {
            name: "corpus".into(),
            rows,
            parent_sums: BTreeMap::new(),
            split_totals: SplitCounts::default(),
            grand_total: 0,
            posts: None,
            summary_pairs: None,
        };
        manifest.parent_sums = ParentCategory::ALL.into_iter().map(|p| (p, manifest.parent_total(p))).collect();
        manifest.split_totals = SplitCounts {
            train: manifest.split_total(Split::Train),
            val: manifest.split_total(Split::Val),
            test: manifest.split_total(Split::Test),
        };
        manifest.grand_total = manifest.split_totals.total();
        let posts = assignment.counts();
        manifest.posts = Some(StatedSplits { counts: posts, total: posts.total() });
        if !corpus.summary_pairs.is_empty() {
            let mut pairs = SplitCounts::default();
            for p in &corpus.summary_pairs {
                if let Some(split) = assignment.get(&p.post_id) {
                    *pairs.get_mut(split) += 1;
                }
            }
            manifest.summary_pairs = Some(StatedSplits { counts: pairs, total: pairs.total() });
        }
        manifest
    }

    /// Runs every arithmetic check the manifest's stated numbers allow.
    pub fn validate(&self) -> ManifestReport {
        let mut report = ManifestReport::default();

        for row in &self.rows {
            report.check(format!("hierarchy {}", row.child), 1, usize::from(row.child.parent() == row.parent));
            if let Some(sum) = row.sum {
                report.check(format!("row sum {}", row.child), sum, row.counts.total());
            }
        }
        for (parent, &stated) in &self.parent_sums {
            report.check(format!("parent sum {parent}"), stated, self.parent_total(*parent));
        }
        for split in Split::ALL {
            report.check(
                format!("split total {}", split.name()),
                self.split_totals.get(split),
                self.split_total(split),
            );
        }
        let rows_total: usize = self.rows.iter().map(|r| r.counts.total()).sum();
        report.check("grand total", self.grand_total, rows_total);
        report.check("grand total = split totals", self.grand_total, self.split_totals.total());
        if !self.parent_sums.is_empty() {
            report.check("grand total = parent sums", self.grand_total, self.parent_sums.values().sum());
        }
        if let Some(posts) = &self.posts {
            report.check("posts total", posts.total, posts.counts.total());
            let expected = split_sizes(posts.total, DEFAULT_RATIOS).unwrap_or([0; 3]);
            for (split, want) in Split::ALL.into_iter().zip(expected) {
                report.check(format!("posts {} (6:2:2)", split.name()), want, posts.counts.get(split));
            }
        }
        if let Some(pairs) = &self.summary_pairs {
            report.check("summary pairs total", pairs.total, pairs.counts.total());
        }
        report
    }

    /// Dataset table: one row per child with split counts and sums.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:<32} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "Parent nodes", "Child nodes", "Train", "Val", "Test", "Sum", ""
        );
        for parent in ParentCategory::ALL {
            let mut first = true;
            for row in self.rows.iter().filter(|r| r.parent == parent) {
                let parent_cell = if first { parent.table_label() } else { String::new() };
                let parent_sum = if first { self.parent_total(parent).to_string() } else { String::new() };
                first = false;
                let _ = writeln!(
                    out,
                    "{:<22} {:<32} {:>7} {:>7} {:>7} {:>7} {:>7}",
                    parent_cell,
                    row.child.display_name(),
                    row.counts.train,
                    row.counts.val,
                    row.counts.test,
                    row.counts.total(),
                    parent_sum
                );
            }
        }
        let _ = writeln!(
            out,
            "{:<22} {:<32} {:>7} {:>7} {:>7} {:>7}",
            "Total",
            "",
            self.split_total(Split::Train),
            self.split_total(Split::Val),
            self.split_total(Split::Test),
            self.rows.iter().map(|r| r.counts.total()).sum::<usize>()
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_passes_every_check() {
        let report = bundled_manifest().validate();
        assert!(report.all_passed(), "{}", report.render());
        assert_eq!(report.find("parent sum A").unwrap().actual, 1590);
        assert_eq!(report.find("parent sum B").unwrap().actual, 1803);
        assert_eq!(report.find("parent sum C").unwrap().actual, 1071);
        assert_eq!(report.find("parent sum D").unwrap().actual, 278);
        assert_eq!(report.find("grand total").unwrap().actual, 4742);
    }

    #[test]
    fn bundled_train_column_by_parent() {
        let m = bundled_manifest();
        let by_parent: Vec<usize> =
            ParentCategory::ALL.iter().map(|p| m.parent_split_count(*p, Split::Train)).collect();
        assert_eq!(by_parent, vec![948, 1087, 637, 163]);
        assert_eq!(m.split_total(Split::Train), 2835);
        assert_eq!(m.split_total(Split::Val), 932);
        assert_eq!(m.split_total(Split::Test), 975);
    }

    #[test]
    fn tampered_cell_is_reported() {
        let mut m = bundled_manifest();
        m.rows[0].counts.train += 1;
        let report = m.validate();
        let failed: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"row sum disease_symptom"));
        assert!(failed.contains(&"parent sum A"));
        assert!(failed.contains(&"split total train"));
        assert!(failed.contains(&"grand total"));
    }

    #[test]
    fn manifest_json_round_trip() {
        let m = bundled_manifest();
        let json = serde_json::to_string(&m).unwrap();
        let back: DatasetManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
