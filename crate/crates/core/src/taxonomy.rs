//! The ABCD category scheme: four parent nodes and their nineteen child nodes.
//!
//! Parents are identified by their single-letter code (`A`..`D`), children by a
//! stable snake-case slug. Display names are kept verbatim because every report
//! prints them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Version string of the built-in scheme. Remote backends must echo it.
pub const SCHEME_VERSION: &str = "abcd-v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("unknown category: {0:?}")]
    UnknownCategory(String),
    #[error("scheme document rejected: {0}")]
    InvalidScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParentCategory {
    ActivatingEvent,
    Belief,
    Consequence,
    Disputation,
}

impl ParentCategory {
    pub const ALL: [ParentCategory; 4] = [
        ParentCategory::ActivatingEvent,
        ParentCategory::Belief,
        ParentCategory::Consequence,
        ParentCategory::Disputation,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ParentCategory::ActivatingEvent => "A",
            ParentCategory::Belief => "B",
            ParentCategory::Consequence => "C",
            ParentCategory::Disputation => "D",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ParentCategory::ActivatingEvent => "Activating Event",
            ParentCategory::Belief => "Belief",
            ParentCategory::Consequence => "Consequence",
            ParentCategory::Disputation => "Disputation",
        }
    }

    /// Row label used in report tables, e.g. `(B) Belief`.
    pub fn table_label(self) -> String {
        format!("({}) {}", self.code(), self.display_name())
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.code() == code)
    }

    pub fn children(self) -> impl Iterator<Item = ChildCategory> {
        ChildCategory::ALL.into_iter().filter(move |c| c.parent() == self)
    }
}

impl fmt::Display for ParentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ParentCategory {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_code(s).ok_or_else(|| TaxonomyError::UnknownCategory(s.to_string()))
    }
}

impl Serialize for ParentCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for ParentCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChildCategory {
    // A
    DiseaseSymptom,
    SocialRelation,
    Life,
    StudyAndWork,
    Emotional,
    // B
    AllOrNothingThinking,
    OverGeneralization,
    MentalFilter,
    DisqualifyingThePositive,
    JumpingToConclusions,
    MagnificationAndMinimization,
    EmotionalReasoning,
    ShouldStatements,
    LabelingAndMislabeling,
    BlamingOneselfOthers,
    // C
    EmotionalEffect,
    BehavioralEffect,
    // D
    HabitualDisputation,
    EffectiveDisputation,
}

impl ChildCategory {
    /// All children in report order (grouped by parent, in the canonical order within a parent).
    pub const ALL: [ChildCategory; 19] = [
        ChildCategory::DiseaseSymptom,
        ChildCategory::SocialRelation,
        ChildCategory::Life,
        ChildCategory::StudyAndWork,
        ChildCategory::Emotional,
        ChildCategory::AllOrNothingThinking,
        ChildCategory::OverGeneralization,
        ChildCategory::MentalFilter,
        ChildCategory::DisqualifyingThePositive,
        ChildCategory::JumpingToConclusions,
        ChildCategory::MagnificationAndMinimization,
        ChildCategory::EmotionalReasoning,
        ChildCategory::ShouldStatements,
        ChildCategory::LabelingAndMislabeling,
        ChildCategory::BlamingOneselfOthers,
        ChildCategory::EmotionalEffect,
        ChildCategory::BehavioralEffect,
        ChildCategory::HabitualDisputation,
        ChildCategory::EffectiveDisputation,
    ];

    pub fn parent(self) -> ParentCategory {
        use ChildCategory::*;
        match self {
            DiseaseSymptom | SocialRelation | Life | StudyAndWork | Emotional => ParentCategory::ActivatingEvent,
            AllOrNothingThinking
            | OverGeneralization
            | MentalFilter
            | DisqualifyingThePositive
            | JumpingToConclusions
            | MagnificationAndMinimization
            | EmotionalReasoning
            | ShouldStatements
            | LabelingAndMislabeling
            | BlamingOneselfOthers => ParentCategory::Belief,
            EmotionalEffect | BehavioralEffect => ParentCategory::Consequence,
            HabitualDisputation | EffectiveDisputation => ParentCategory::Disputation,
        }
    }

    pub fn id(self) -> &'static str {
        use ChildCategory::*;
        match self {
            DiseaseSymptom => "disease_symptom",
            SocialRelation => "social_relation",
            Life => "life",
            StudyAndWork => "study_and_work",
            Emotional => "emotional",
            AllOrNothingThinking => "all_or_nothing_thinking",
            OverGeneralization => "over_generalization",
            MentalFilter => "mental_filter",
            DisqualifyingThePositive => "disqualifying_the_positive",
            JumpingToConclusions => "jumping_to_conclusions",
            MagnificationAndMinimization => "magnification_and_minimization",
            EmotionalReasoning => "emotional_reasoning",
            ShouldStatements => "should_statements",
            LabelingAndMislabeling => "labeling_and_mislabeling",
            BlamingOneselfOthers => "blaming_oneself_others",
            EmotionalEffect => "emotional_effect",
            BehavioralEffect => "behavioral_effect",
            HabitualDisputation => "habitual_disputation",
            EffectiveDisputation => "effective_disputation",
        }
    }

    pub fn display_name(self) -> &'static str {
        use ChildCategory::*;
        match self {
            DiseaseSymptom => "Disease symptom",
            SocialRelation => "Social relation",
            Life => "Life",
            StudyAndWork => "Study and work",
            Emotional => "Emotional",
            AllOrNothingThinking => "All-or-nothing thinking",
            OverGeneralization => "Over-generalization",
            MentalFilter => "Mental filter",
            DisqualifyingThePositive => "Disqualifying the positive",
            JumpingToConclusions => "Jumping to conclusions",
            MagnificationAndMinimization => "Magnification and minimization",
            EmotionalReasoning => "Emotional reasoning",
            ShouldStatements => "Should statements",
            LabelingAndMislabeling => "Labeling and mislabeling",
            BlamingOneselfOthers => "Blaming oneself/others",
            EmotionalEffect => "Emotional effect",
            BehavioralEffect => "Behavioral effect",
            HabitualDisputation => "Habitual disputation",
            EffectiveDisputation => "Effective disputation",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == id)
    }
}

impl fmt::Display for ChildCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ChildCategory {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_id(s).ok_or_else(|| TaxonomyError::UnknownCategory(s.to_string()))
    }
}

impl Serialize for ChildCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for ChildCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Any node of the hierarchy. Ordering follows report order: each parent is
/// immediately followed by its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Parent(ParentCategory),
    Child(ChildCategory),
}

impl Category {
    /// All 23 nodes in report order.
    pub fn all() -> Vec<Category> {
        ParentCategory::ALL
            .into_iter()
            .flat_map(|p| std::iter::once(Category::Parent(p)).chain(p.children().map(Category::Child)))
            .collect()
    }

    pub fn id(self) -> &'static str {
        match self {
            Category::Parent(p) => p.code(),
            Category::Child(c) => c.id(),
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::Parent(p) => p.display_name(),
            Category::Child(c) => c.display_name(),
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        ParentCategory::from_code(id).map(Category::Parent).or_else(|| ChildCategory::from_id(id).map(Category::Child))
    }

    pub fn is_parent(self) -> bool {
        matches!(self, Category::Parent(_))
    }

    fn sort_key(self) -> (ParentCategory, usize) {
        match self {
            Category::Parent(p) => (p, 0),
            Category::Child(c) => (c.parent(), c as usize + 1),
        }
    }
}

impl PartialOrd for Category {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Category {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Category::from_id(&s).ok_or_else(|| serde::de::Error::custom(TaxonomyError::UnknownCategory(s)))
    }
}

/// One `(parent, children)` pair of a sentence label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub parent: ParentCategory,
    #[serde(default)]
    pub children: BTreeSet<ChildCategory>,
}

/// Wire form of a label entry before it has been checked against a scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLabelEntry {
    pub parent: String,
    #[serde(default)]
    pub children: Vec<String>,
}

/// Hierarchical multi-label assignment for one sentence. Empty means the
/// sentence is irrelevant to every ABCD node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentenceLabel {
    entries: Vec<LabelEntry>,
}

impl SentenceLabel {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a label from entries as given. No merging or checking happens
    /// here; see [`CategoryScheme::validate_label`].
    pub fn from_entries(entries: Vec<LabelEntry>) -> Self {
        Self { entries }
    }

    /// Adds children under `parent`, merging into an existing entry for that
    /// parent if there is one.
    pub fn with(mut self, parent: ParentCategory, children: impl IntoIterator<Item = ChildCategory>) -> Self {
        self.insert(parent, children);
        self
    }

    pub fn insert(&mut self, parent: ParentCategory, children: impl IntoIterator<Item = ChildCategory>) {
        let idx = match self.entries.iter().position(|e| e.parent == parent) {
            Some(i) => i,
            None => {
                self.entries.push(LabelEntry { parent, children: BTreeSet::new() });
                self.entries.len() - 1
            }
        };
        self.entries[idx].children.extend(children);
    }

    /// Label with one entry per distinct parent of `children`.
    pub fn from_children(children: impl IntoIterator<Item = ChildCategory>) -> Self {
        let mut label = Self::empty();
        for c in children {
            label.insert(c.parent(), [c]);
        }
        label
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parents(&self) -> BTreeSet<ParentCategory> {
        self.entries.iter().map(|e| e.parent).collect()
    }

    pub fn children(&self) -> BTreeSet<ChildCategory> {
        self.entries.iter().flat_map(|e| e.children.iter().copied()).collect()
    }

    pub fn has_parent(&self, parent: ParentCategory) -> bool {
        self.entries.iter().any(|e| e.parent == parent)
    }

    pub fn is_multi_parent(&self) -> bool {
        self.parents().len() > 1
    }

    /// Order-insensitive form used for equality between labels from different sources.
    pub fn canonical(&self) -> BTreeMap<ParentCategory, BTreeSet<ChildCategory>> {
        let mut out: BTreeMap<ParentCategory, BTreeSet<ChildCategory>> = BTreeMap::new();
        for e in &self.entries {
            out.entry(e.parent).or_default().extend(e.children.iter().copied());
        }
        out
    }

    /// Rebuilds the label sorted by parent with duplicate parents merged.
    pub fn normalized(&self) -> Self {
        Self {
            entries: self.canonical().into_iter().map(|(parent, children)| LabelEntry { parent, children }).collect(),
        }
    }

    pub fn same_as(&self, other: &SentenceLabel) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn to_raw(&self) -> Vec<RawLabelEntry> {
        self.entries
            .iter()
            .map(|e| RawLabelEntry {
                parent: e.parent.code().to_string(),
                children: e.children.iter().map(|c| c.id().to_string()).collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelViolation {
    UnknownParent { value: String },
    UnknownChild { value: String },
    ChildUnderWrongParent { child: ChildCategory, declared: ParentCategory, actual: ParentCategory },
    DuplicateParent { parent: ParentCategory },
}

impl fmt::Display for LabelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelViolation::UnknownParent { value } => write!(f, "unknown parent category {value:?}"),
            LabelViolation::UnknownChild { value } => write!(f, "unknown child category {value:?}"),
            LabelViolation::ChildUnderWrongParent { child, declared, actual } => {
                write!(f, "child {child} listed under {declared} but belongs to {actual}")
            }
            LabelViolation::DuplicateParent { parent } => write!(f, "parent {parent} listed more than once"),
        }
    }
}

/// How raw category strings are matched against the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// Only canonical ids (`B`, `jumping_to_conclusions`); duplicate parents are violations.
    Exact,
    /// Strings go through [`CategoryScheme::normalize`]; duplicate parents are merged.
    Normalize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryScheme {
    version: String,
    aliases: BTreeMap<String, Category>,
}

/// Surface variants accepted in addition to display names and ids.
const BUILTIN_ALIASES: &[(&str, &str)] = &[
    ("activating events", "A"),
    ("activating", "A"),
    ("event", "A"),
    ("beliefs", "B"),
    ("cognitive distortion", "B"),
    ("cognitive distortions", "B"),
    ("consequences", "C"),
    ("disputations", "D"),
    ("dispute", "D"),
    ("disease symptoms", "disease_symptom"),
    ("symptom", "disease_symptom"),
    ("social relations", "social_relation"),
    ("relationships", "social_relation"),
    ("study/work", "study_and_work"),
    ("study & work", "study_and_work"),
    ("study or work", "study_and_work"),
    ("work and study", "study_and_work"),
    ("black-and-white thinking", "all_or_nothing_thinking"),
    ("black and white thinking", "all_or_nothing_thinking"),
    ("all or nothing thinking", "all_or_nothing_thinking"),
    ("overgeneralization", "over_generalization"),
    ("over generalization", "over_generalization"),
    ("overgeneralisation", "over_generalization"),
    ("over-generalisation", "over_generalization"),
    ("disqualifying positives", "disqualifying_the_positive"),
    ("discounting the positive", "disqualifying_the_positive"),
    ("jumping to conclusion", "jumping_to_conclusions"),
    ("mind reading", "jumping_to_conclusions"),
    ("fortune telling", "jumping_to_conclusions"),
    ("magnification", "magnification_and_minimization"),
    ("minimization", "magnification_and_minimization"),
    ("magnification/minimization", "magnification_and_minimization"),
    ("should statement", "should_statements"),
    ("labeling", "labeling_and_mislabeling"),
    ("labelling", "labeling_and_mislabeling"),
    ("mislabeling", "labeling_and_mislabeling"),
    ("labelling and mislabelling", "labeling_and_mislabeling"),
    ("blaming others", "blaming_oneself_others"),
    ("blaming oneself", "blaming_oneself_others"),
    ("self-blame", "blaming_oneself_others"),
    ("blame", "blaming_oneself_others"),
    ("blaming oneself / others", "blaming_oneself_others"),
    ("blaming oneself or others", "blaming_oneself_others"),
    ("personalization", "blaming_oneself_others"),
    ("emotional consequence", "emotional_effect"),
    ("emotional effects", "emotional_effect"),
    ("behavioral consequence", "behavioral_effect"),
    ("behavioural effect", "behavioral_effect"),
    ("behavioral effects", "behavioral_effect"),
    ("habitual dispute", "habitual_disputation"),
    ("effective dispute", "effective_disputation"),
];

/// Case-folds, trims, collapses whitespace, removes quotes and a leading
/// parenthesized letter such as `(B)`.
pub fn fold_surface(surface: &str) -> String {
    let mut s = surface.trim().trim_matches(|c| matches!(c, '"' | '\'' | '`')).trim();
    let bytes = s.as_bytes();
    if bytes.len() >= 3 && bytes[0] == b'(' && bytes[1].is_ascii_alphabetic() && bytes[2] == b')' {
        s = s[3..].trim_start();
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl Default for CategoryScheme {
    fn default() -> Self {
        Self::canonical()
    }
}

impl CategoryScheme {
    /// The fixed 4-parent, 19-child scheme with the built-in alias table.
    pub fn canonical() -> Self {
        let mut aliases = BTreeMap::new();
        for cat in Category::all() {
            aliases.insert(fold_surface(cat.display_name()), cat);
            aliases.insert(fold_surface(cat.id()), cat);
            if let Category::Child(c) = cat {
                aliases.insert(c.id().replace('_', " "), cat);
            }
        }
        for (surface, id) in BUILTIN_ALIASES {
            let cat = Category::from_id(id).expect("builtin alias targets a known id");
            aliases.insert(fold_surface(surface), cat);
        }
        Self { version: SCHEME_VERSION.to_string(), aliases }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn parents(&self) -> &'static [ParentCategory] {
        &ParentCategory::ALL
    }

    pub fn children(&self) -> &'static [ChildCategory] {
        &ChildCategory::ALL
    }

    pub fn children_of(&self, parent: ParentCategory) -> Vec<ChildCategory> {
        parent.children().collect()
    }

    pub fn aliases(&self) -> &BTreeMap<String, Category> {
        &self.aliases
    }

    /// Adds extra surface forms. Later entries override earlier ones.
    pub fn with_aliases<S: AsRef<str>>(mut self, extra: impl IntoIterator<Item = (S, Category)>) -> Self {
        for (surface, cat) in extra {
            self.aliases.insert(fold_surface(surface.as_ref()), cat);
        }
        self
    }

    /// Parent of a child given by id.
    pub fn parent_of(&self, child_id: &str) -> Result<ParentCategory, TaxonomyError> {
        ChildCategory::from_id(child_id)
            .map(ChildCategory::parent)
            .ok_or_else(|| TaxonomyError::UnknownCategory(child_id.to_string()))
    }

    /// Maps a free-form category name (as produced by annotators or models)
    /// to a node of the scheme.
    pub fn normalize(&self, surface: &str) -> Result<Category, TaxonomyError> {
        self.aliases
            .get(&fold_surface(surface))
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownCategory(surface.to_string()))
    }

    /// All hierarchy violations of a typed label. Empty labels are valid.
    pub fn validate_label(&self, label: &SentenceLabel) -> Result<(), Vec<LabelViolation>> {
        let mut violations = Vec::new();
        let mut seen = BTreeSet::new();
        for entry in label.entries() {
            if !seen.insert(entry.parent) {
                violations.push(LabelViolation::DuplicateParent { parent: entry.parent });
            }
            for &child in &entry.children {
                if child.parent() != entry.parent {
                    violations.push(LabelViolation::ChildUnderWrongParent {
                        child,
                        declared: entry.parent,
                        actual: child.parent(),
                    });
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Resolves wire-form entries into a label, collecting every violation.
    pub fn resolve_label(&self, raw: &[RawLabelEntry], mode: Resolution) -> Result<SentenceLabel, Vec<LabelViolation>> {
        let mut violations = Vec::new();
        let mut entries: Vec<LabelEntry> = Vec::new();
        for r in raw {
            let parent = match self.resolve_one(&r.parent, mode) {
                Some(Category::Parent(p)) => p,
                _ => {
                    violations.push(LabelViolation::UnknownParent { value: r.parent.clone() });
                    continue;
                }
            };
            let mut children = BTreeSet::new();
            for c in &r.children {
                match self.resolve_one(c, mode) {
                    Some(Category::Child(child)) if child.parent() == parent => {
                        children.insert(child);
                    }
                    Some(Category::Child(child)) => violations.push(LabelViolation::ChildUnderWrongParent {
                        child,
                        declared: parent,
                        actual: child.parent(),
                    }),
                    _ => violations.push(LabelViolation::UnknownChild { value: c.clone() }),
                }
            }
            match entries.iter_mut().find(|e| e.parent == parent) {
                Some(existing) if mode == Resolution::Normalize => existing.children.extend(children),
                Some(_) => violations.push(LabelViolation::DuplicateParent { parent }),
                None => entries.push(LabelEntry { parent, children }),
            }
        }
        if violations.is_empty() {
            Ok(SentenceLabel::from_entries(entries))
        } else {
            Err(violations)
        }
    }

    fn resolve_one(&self, value: &str, mode: Resolution) -> Option<Category> {
        match mode {
            Resolution::Exact => Category::from_id(value),
            Resolution::Normalize => Category::from_id(value).or_else(|| self.normalize(value).ok()),
        }
    }

    pub fn to_document(&self) -> SchemeDocument {
        SchemeDocument {
            version: self.version.clone(),
            parents: ParentCategory::ALL
                .iter()
                .map(|p| ParentDoc { code: p.code().into(), display_name: p.display_name().into() })
                .collect(),
            children: ChildCategory::ALL
                .iter()
                .map(|c| ChildDoc {
                    id: c.id().into(),
                    display_name: c.display_name().into(),
                    parent: c.parent().code().into(),
                })
                .collect(),
            aliases: self.aliases.iter().map(|(k, v)| (k.clone(), v.id().to_string())).collect(),
        }
    }

    /// Imports a scheme document. Parent and child tables must match the
    /// built-in hierarchy exactly; aliases may extend it.
    pub fn from_document(doc: &SchemeDocument) -> Result<Self, TaxonomyError> {
        let canonical = Self::canonical().to_document();
        if doc.parents != canonical.parents {
            return Err(TaxonomyError::InvalidScheme("parent table differs from the ABCD scheme".into()));
        }
        if doc.children != canonical.children {
            return Err(TaxonomyError::InvalidScheme("child table differs from the ABCD scheme".into()));
        }
        let mut extra = Vec::with_capacity(doc.aliases.len());
        for (surface, id) in &doc.aliases {
            let cat = Category::from_id(id)
                .ok_or_else(|| TaxonomyError::InvalidScheme(format!("alias {surface:?} targets unknown id {id:?}")))?;
            extra.push((surface.as_str(), cat));
        }
        let mut scheme = Self::canonical().with_aliases(extra);
        scheme.version = doc.version.clone();
        Ok(scheme)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scheme document serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, TaxonomyError> {
        let doc: SchemeDocument =
            serde_json::from_str(json).map_err(|e| TaxonomyError::InvalidScheme(e.to_string()))?;
        Self::from_document(&doc)
    }
}

pub fn canonical_scheme() -> CategoryScheme {
    CategoryScheme::canonical()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentDoc {
    pub code: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildDoc {
    pub id: String,
    pub display_name: String,
    pub parent: String,
}

/// Versioned JSON exchange form of a [`CategoryScheme`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeDocument {
    pub version: String,
    pub parents: Vec<ParentDoc>,
    pub children: Vec<ChildDoc>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}
