//! Canonical domain types shared by every stage of the pipeline.
//!
//! A [`GoldRecord`] is the interchange form of one annotated instance. Scoring
//! never looks at records directly; it compares sets of [`ExtractionTuple`]s
//! obtained through [`project_tuples`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("view {view} cannot be projected from a {task} record")]
    IncompatibleView { task: TaskKind, view: TaskKind },
    #[error("records disagree on dataset/task: expected {expected}, found {found}")]
    MixedDataset { expected: String, found: String },
    #[error("cannot build a label universe from zero records without an explicit dataset")]
    EmptyInput,
    #[error("record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("unknown task kind `{0}`")]
    UnknownTask(String),
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
}

/// Extraction task, or the tuple view a record is scored under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "EE-trigger")]
    EeTrigger,
    #[serde(rename = "EE-argument")]
    EeArgument,
    #[serde(rename = "EE-joint")]
    EeJoint,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Ner,
        TaskKind::Re,
        TaskKind::EeTrigger,
        TaskKind::EeArgument,
        TaskKind::EeJoint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Ner => "NER",
            TaskKind::Re => "RE",
            TaskKind::EeTrigger => "EE-trigger",
            TaskKind::EeArgument => "EE-argument",
            TaskKind::EeJoint => "EE-joint",
        }
    }

    pub fn is_event(self) -> bool {
        matches!(
            self,
            TaskKind::EeTrigger | TaskKind::EeArgument | TaskKind::EeJoint
        )
    }

    /// Whether tuples of `view` can be projected from a record of this task.
    pub fn supports_view(self, view: TaskKind) -> bool {
        self == view
            || (self == TaskKind::EeJoint
                && matches!(view, TaskKind::EeTrigger | TaskKind::EeArgument))
    }

    /// Views a dataset of this task is scored under by default.
    pub fn scoring_views(self) -> &'static [TaskKind] {
        match self {
            TaskKind::Ner => &[TaskKind::Ner],
            TaskKind::Re => &[TaskKind::Re],
            TaskKind::EeTrigger => &[TaskKind::EeTrigger],
            TaskKind::EeArgument => &[TaskKind::EeArgument],
            TaskKind::EeJoint => &[TaskKind::EeTrigger, TaskKind::EeArgument],
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "ZH")]
    Zh,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::En, Language::Zh];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "EN",
            Language::Zh => "ZH",
        }
    }

    /// Guess the language of a text sample: ZH when at least 20% of its
    /// non-whitespace characters are CJK ideographs.
    pub fn guess(sample: &str) -> Language {
        let (mut total, mut cjk) = (0usize, 0usize);
        for c in sample.chars().filter(|c| !c.is_whitespace()) {
            total += 1;
            if is_cjk_ideograph(c) {
                cjk += 1;
            }
        }
        if total > 0 && cjk * 5 >= total {
            Language::Zh
        } else {
            Language::En
        }
    }
}

fn is_cjk_ideograph(c: char) -> bool {
    matches!(c as u32, 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Language::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownLanguage(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_type: String,
    pub mention: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub relation_type: String,
    pub head: String,
    pub tail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub event_type: String,
    pub trigger: String,
    #[serde(default)]
    pub arguments: BTreeMap<String, Vec<String>>,
}

/// One annotated instance in canonical interchange form.
///
/// Serialized as one JSON object per line with keys in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRecord {
    pub id: String,
    pub dataset: String,
    pub task: TaskKind,
    pub lang: Language,
    pub text: String,
    #[serde(default)]
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub relations: Vec<Relation>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub label_options: Vec<String>,
}

impl GoldRecord {
    pub fn new(
        id: impl Into<String>,
        dataset: impl Into<String>,
        task: TaskKind,
        lang: Language,
        text: impl Into<String>,
    ) -> Self {
        GoldRecord {
            id: id.into(),
            dataset: dataset.into(),
            task,
            lang,
            text: text.into(),
            entities: Vec::new(),
            relations: Vec::new(),
            events: Vec::new(),
            label_options: Vec::new(),
        }
    }

    /// Label types used by the annotations, in first-appearance order.
    pub fn gold_labels(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let labels: Box<dyn Iterator<Item = &String>> = match self.task {
            TaskKind::Ner => Box::new(self.entities.iter().map(|e| &e.entity_type)),
            TaskKind::Re => Box::new(self.relations.iter().map(|r| &r.relation_type)),
            _ => Box::new(self.events.iter().map(|e| &e.event_type)),
        };
        for label in labels {
            if seen.insert(label.as_str()) {
                out.push(label.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |reason: String| ModelError::InvalidRecord {
            id: self.id.clone(),
            reason,
        };
        if self.id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        let (ner, re, ee) = (
            !self.entities.is_empty(),
            !self.relations.is_empty(),
            !self.events.is_empty(),
        );
        let stray = match self.task {
            TaskKind::Ner => re || ee,
            TaskKind::Re => ner || ee,
            _ => ner || re,
        };
        if stray {
            return Err(invalid(format!(
                "annotation groups do not match task {}",
                self.task
            )));
        }
        for label in self.gold_labels() {
            if !self.label_options.contains(&label) {
                return Err(invalid(format!("label `{label}` missing from label_options")));
            }
        }
        let blank = |s: &str| normalize_mention(s).is_empty();
        if self.entities.iter().any(|e| blank(&e.mention))
            || self
                .relations
                .iter()
                .any(|r| blank(&r.head) || blank(&r.tail))
        {
            return Err(invalid("empty mention".into()));
        }
        Ok(())
    }
}

/// A strict-match unit. Components are normalized and compared exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractionTuple {
    Entity {
        entity_type: String,
        mention: String,
    },
    Relation {
        relation: String,
        head: String,
        tail: String,
    },
    Trigger {
        event_type: String,
        trigger: String,
    },
    Argument {
        event_type: String,
        role: String,
        value: String,
    },
}

impl ExtractionTuple {
    /// Build a tuple, normalizing components. Returns `None` when any
    /// component is empty after normalization.
    pub fn entity(entity_type: &str, mention: &str) -> Option<Self> {
        Some(ExtractionTuple::Entity {
            entity_type: non_empty(entity_type)?,
            mention: non_empty(mention)?,
        })
    }

    pub fn relation(relation: &str, head: &str, tail: &str) -> Option<Self> {
        Some(ExtractionTuple::Relation {
            relation: non_empty(relation)?,
            head: non_empty(head)?,
            tail: non_empty(tail)?,
        })
    }

    pub fn trigger(event_type: &str, trigger: &str) -> Option<Self> {
        Some(ExtractionTuple::Trigger {
            event_type: non_empty(event_type)?,
            trigger: non_empty(trigger)?,
        })
    }

    pub fn argument(event_type: &str, role: &str, value: &str) -> Option<Self> {
        Some(ExtractionTuple::Argument {
            event_type: non_empty(event_type)?,
            role: non_empty(role)?,
            value: non_empty(value)?,
        })
    }

    /// The label component checked against the instruction's option list.
    pub fn label(&self) -> &str {
        match self {
            ExtractionTuple::Entity { entity_type, .. } => entity_type,
            ExtractionTuple::Relation { relation, .. } => relation,
            ExtractionTuple::Trigger { event_type, .. }
            | ExtractionTuple::Argument { event_type, .. } => event_type,
        }
    }

    pub fn view(&self) -> TaskKind {
        match self {
            ExtractionTuple::Entity { .. } => TaskKind::Ner,
            ExtractionTuple::Relation { .. } => TaskKind::Re,
            ExtractionTuple::Trigger { .. } => TaskKind::EeTrigger,
            ExtractionTuple::Argument { .. } => TaskKind::EeArgument,
        }
    }

    /// Whether this tuple belongs to the given projection view.
    pub fn in_view(&self, view: TaskKind) -> bool {
        let own = self.view();
        own == view || (view == TaskKind::EeJoint && own.is_event())
    }
}

fn non_empty(raw: &str) -> Option<String> {
    let s = normalize_mention(raw);
    (!s.is_empty()).then_some(s)
}

pub type TupleSet = BTreeSet<ExtractionTuple>;

/// NFC-compose, trim, and collapse every whitespace run (including NBSP)
/// to a single ASCII space. Case is preserved.
pub fn normalize_mention(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split(char::is_whitespace).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Anything that can be projected into strict-match tuples.
pub trait TupleSource {
    fn source_task(&self) -> TaskKind;

    /// All tuples of the source; callers filter by view.
    fn all_tuples(&self) -> TupleSet;
}

impl TupleSource for GoldRecord {
    fn source_task(&self) -> TaskKind {
        self.task
    }

    fn all_tuples(&self) -> TupleSet {
        let mut out = TupleSet::new();
        match self.task {
            TaskKind::Ner => {
                out.extend(
                    self.entities
                        .iter()
                        .filter_map(|e| ExtractionTuple::entity(&e.entity_type, &e.mention)),
                );
            }
            TaskKind::Re => {
                out.extend(self.relations.iter().filter_map(|r| {
                    ExtractionTuple::relation(&r.relation_type, &r.head, &r.tail)
                }));
            }
            _ => {
                for ev in &self.events {
                    if self.task != TaskKind::EeArgument {
                        out.extend(ExtractionTuple::trigger(&ev.event_type, &ev.trigger));
                    }
                    if self.task != TaskKind::EeTrigger {
                        for (role, values) in &ev.arguments {
                            out.extend(values.iter().filter_map(|v| {
                                ExtractionTuple::argument(&ev.event_type, role, v)
                            }));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Deduplicated, normalized tuples of `source` under `view`.
pub fn project_tuples<S: TupleSource + ?Sized>(
    source: &S,
    view: TaskKind,
) -> Result<TupleSet, ModelError> {
    let task = source.source_task();
    if !task.supports_view(view) {
        return Err(ModelError::IncompatibleView { task, view });
    }
    Ok(source
        .all_tuples()
        .into_iter()
        .filter(|t| t.in_view(view))
        .collect())
}

/// The full label set of one dataset/task pair; the pool negatives are
/// drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelUniverse {
    pub dataset: String,
    pub task: TaskKind,
    pub labels: BTreeSet<String>,
}

impl LabelUniverse {
    pub fn empty(dataset: impl Into<String>, task: TaskKind) -> Self {
        LabelUniverse {
            dataset: dataset.into(),
            task,
            labels: BTreeSet::new(),
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains(label)
    }
}

/// Union of annotated and declared labels across `records`.
///
/// `scope` pins the expected dataset and task; it is required when
/// `records` is empty.
pub fn build_label_universe(
    records: &[GoldRecord],
    scope: Option<(&str, TaskKind)>,
) -> Result<LabelUniverse, ModelError> {
    let (dataset, task) = match (scope, records.first()) {
        (Some((d, t)), _) => (d.to_string(), t),
        (None, Some(r)) => (r.dataset.clone(), r.task),
        (None, None) => return Err(ModelError::EmptyInput),
    };
    let mut universe = LabelUniverse::empty(dataset, task);
    for r in records {
        if r.dataset != universe.dataset || r.task != universe.task {
            return Err(ModelError::MixedDataset {
                expected: format!("{}/{}", universe.dataset, universe.task),
                found: format!("{}/{} (record {})", r.dataset, r.task, r.id),
            });
        }
        universe.labels.extend(r.gold_labels());
        universe.labels.extend(r.label_options.iter().cloned());
    }
    Ok(universe)
}
