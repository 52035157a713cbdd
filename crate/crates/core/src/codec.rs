//! Canonical JSON answer shapes and tiered parsing of raw model text.
//!
//! Canonical shapes:
//!
//! * NER: `{"PER": ["张三"], "LOC": ["北京"]}`, types in option order
//! * RE: `[{"relation": "founder", "head": "A", "tail": "B"}]`
//! * EE: `[{"event_type": "质押", "trigger": "质押", "arguments": {"质押方": ["A公司"]}}]`
//!
//! Parsing tries, in order: the whole text as JSON (tier 0), the first fenced
//! code block (tier 1), and the first balanced `{...}`/`[...]` span that
//! decodes to an acceptable shape (tier 2). Anything else is tier 3 and
//! yields an empty prediction.

use std::collections::BTreeSet;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{normalize_mention, ExtractionTuple, GoldRecord, TaskKind, TupleSet, TupleSource};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("cannot encode invalid record: {0}")]
    Encode(String),
    #[error("output is not canonical JSON (needed tier {tier})")]
    UnparseableOutput { tier: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    Strict,
    #[default]
    Recover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ParseTier {
    Strict = 0,
    Fenced = 1,
    BalancedScan = 2,
    Failed = 3,
}

impl From<ParseTier> for u8 {
    fn from(t: ParseTier) -> u8 {
        t as u8
    }
}

impl TryFrom<u8> for ParseTier {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        Ok(match v {
            0 => ParseTier::Strict,
            1 => ParseTier::Fenced,
            2 => ParseTier::BalancedScan,
            3 => ParseTier::Failed,
            _ => return Err(format!("invalid parse tier {v}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub tier_used: ParseTier,
    pub warnings: Vec<String>,
    pub dropped_items: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: String,
    pub task: TaskKind,
    pub tuples: TupleSet,
    pub diagnostics: ParseDiagnostics,
}

impl TupleSource for Prediction {
    fn source_task(&self) -> TaskKind {
        self.task
    }

    fn all_tuples(&self) -> TupleSet {
        self.tuples.clone()
    }
}

impl Prediction {
    /// An empty prediction, used for records with no (or a failed) response.
    pub fn empty(record_id: impl Into<String>, task: TaskKind, warning: impl Into<String>) -> Self {
        Prediction {
            record_id: record_id.into(),
            task,
            tuples: TupleSet::new(),
            diagnostics: ParseDiagnostics {
                tier_used: ParseTier::Failed,
                warnings: vec![warning.into()],
                dropped_items: 0,
            },
        }
    }
}

/// Compact JSON with a single space after `,` and `:`.
struct SpacedFormatter;

impl serde_json::ser::Formatter for SpacedFormatter {
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }
}

/// Render a JSON value in the canonical spacing used for model outputs.
pub fn to_canonical_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SpacedFormatter);
    value.serialize(&mut ser).expect("in-memory JSON write");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn push_unique(list: &mut Vec<Value>, seen: &mut BTreeSet<String>, s: String) {
    if seen.insert(s.clone()) {
        list.push(Value::String(s));
    }
}

fn gold_value(record: &GoldRecord) -> Value {
    match record.task {
        TaskKind::Ner => {
            let mut map = Map::new();
            for label in &record.label_options {
                let mut mentions = Vec::new();
                let mut seen = BTreeSet::new();
                for e in record.entities.iter().filter(|e| &e.entity_type == label) {
                    push_unique(&mut mentions, &mut seen, normalize_mention(&e.mention));
                }
                if !mentions.is_empty() && !map.contains_key(label) {
                    map.insert(label.clone(), Value::Array(mentions));
                }
            }
            Value::Object(map)
        }
        TaskKind::Re => {
            let mut seen = BTreeSet::new();
            let mut items = Vec::new();
            for r in &record.relations {
                let key = (
                    normalize_mention(&r.relation_type),
                    normalize_mention(&r.head),
                    normalize_mention(&r.tail),
                );
                if seen.insert(key.clone()) {
                    let mut obj = Map::new();
                    obj.insert("relation".into(), Value::String(key.0));
                    obj.insert("head".into(), Value::String(key.1));
                    obj.insert("tail".into(), Value::String(key.2));
                    items.push(Value::Object(obj));
                }
            }
            Value::Array(items)
        }
        _ => {
            let mut items: Vec<Value> = Vec::new();
            for ev in &record.events {
                let mut args = Map::new();
                for (role, values) in &ev.arguments {
                    let mut list = Vec::new();
                    let mut seen = BTreeSet::new();
                    for v in values {
                        let v = normalize_mention(v);
                        if !v.is_empty() {
                            push_unique(&mut list, &mut seen, v);
                        }
                    }
                    if !list.is_empty() {
                        args.insert(normalize_mention(role), Value::Array(list));
                    }
                }
                let mut obj = Map::new();
                obj.insert("event_type".into(), Value::String(normalize_mention(&ev.event_type)));
                obj.insert("trigger".into(), Value::String(normalize_mention(&ev.trigger)));
                obj.insert("arguments".into(), Value::Object(args));
                let obj = Value::Object(obj);
                if !items.contains(&obj) {
                    items.push(obj);
                }
            }
            Value::Array(items)
        }
    }
}

/// Canonical JSON answer for a gold record.
pub fn encode_gold(record: &GoldRecord) -> Result<String, CodecError> {
    record
        .validate()
        .map_err(|e| CodecError::Encode(e.to_string()))?;
    Ok(to_canonical_string(&gold_value(record)))
}

/// Tuples recovered from one JSON value, plus bookkeeping.
#[derive(Default)]
struct Interpretation {
    tuples: TupleSet,
    dropped: usize,
    warnings: Vec<String>,
}

struct Interpreter<'a> {
    task: TaskKind,
    allowed: &'a BTreeSet<String>,
    out: Interpretation,
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// A bare scalar where a list is expected is treated as a one-element list.
fn as_list(v: &Value) -> Vec<&Value> {
    match v {
        Value::Array(items) => items.iter().collect(),
        Value::Null => Vec::new(),
        other => vec![other],
    }
}

fn first_key<'v>(obj: &'v Map<String, Value>, keys: &[&str]) -> Option<&'v Value> {
    keys.iter().find_map(|k| obj.get(*k))
}

const ENTITY_TYPE_KEYS: &[&str] = &["entity_type", "type", "label"];
const MENTION_KEYS: &[&str] = &["mention", "entity", "text", "span"];
const RELATION_KEYS: &[&str] = &["relation", "relation_type", "predicate"];
const HEAD_KEYS: &[&str] = &["head", "subject"];
const TAIL_KEYS: &[&str] = &["tail", "object"];

impl<'a> Interpreter<'a> {
    fn allowed(&mut self, label: &str, weight: usize) -> bool {
        if self.allowed.contains(&normalize_mention(label)) {
            true
        } else {
            self.out.dropped += weight.max(1);
            self.out
                .warnings
                .push(format!("dropped label `{label}` not among the options"));
            false
        }
    }

    fn add(&mut self, tuple: Option<ExtractionTuple>, what: &str) {
        match tuple {
            Some(t) => {
                self.out.tuples.insert(t);
            }
            None => self.drop_item(format!("{what} has an empty component")),
        }
    }

    fn drop_item(&mut self, why: String) {
        self.out.dropped += 1;
        self.out.warnings.push(why);
    }

    /// Returns false when the top-level shape does not fit the task.
    fn interpret(&mut self, value: &Value) -> bool {
        if let Value::Array(items) = value {
            // a list of bare scalars is not an answer in any task shape
            if !items.is_empty() && !items.iter().any(Value::is_object) {
                return false;
            }
        }
        match self.task {
            TaskKind::Ner => self.ner(value),
            TaskKind::Re => self.items(value, Self::relation),
            _ => self.items(value, Self::event),
        }
    }

    fn ner(&mut self, value: &Value) -> bool {
        match value {
            Value::Object(map) => {
                for (label, mentions) in map {
                    let mentions = as_list(mentions);
                    if !self.allowed(label, mentions.len()) {
                        continue;
                    }
                    for m in mentions {
                        match scalar_string(m) {
                            Some(m) => self.add(ExtractionTuple::entity(label, &m), "entity"),
                            None => self.drop_item(format!("non-string mention under `{label}`")),
                        }
                    }
                }
                true
            }
            Value::Array(items) => {
                for item in items {
                    let Some(obj) = item.as_object() else {
                        self.drop_item("entity item is not an object".into());
                        continue;
                    };
                    let label = first_key(obj, ENTITY_TYPE_KEYS).and_then(scalar_string);
                    let mention = first_key(obj, MENTION_KEYS);
                    match (label, mention) {
                        (Some(label), Some(mention)) => {
                            let mentions = as_list(mention);
                            if !self.allowed(&label, mentions.len()) {
                                continue;
                            }
                            for m in mentions {
                                match scalar_string(m) {
                                    Some(m) => self.add(ExtractionTuple::entity(&label, &m), "entity"),
                                    None => self.drop_item("non-string mention".into()),
                                }
                            }
                        }
                        _ => self.drop_item("entity item missing type or mention".into()),
                    }
                }
                true
            }
            _ => false,
        }
    }

    fn items(&mut self, value: &Value, each: fn(&mut Self, &Map<String, Value>)) -> bool {
        match value {
            Value::Array(items) => {
                for item in items {
                    match item.as_object() {
                        Some(obj) => each(self, obj),
                        None => self.drop_item("item is not an object".into()),
                    }
                }
                true
            }
            Value::Object(obj) => {
                each(self, obj);
                true
            }
            _ => false,
        }
    }

    fn relation(&mut self, obj: &Map<String, Value>) {
        let get = |keys| first_key(obj, keys).and_then(scalar_string);
        let (Some(rel), Some(head), Some(tail)) = (get(RELATION_KEYS), get(HEAD_KEYS), get(TAIL_KEYS)) else {
            self.drop_item("relation item missing relation, head or tail".into());
            return;
        };
        if self.allowed(&rel, 1) {
            self.add(ExtractionTuple::relation(&rel, &head, &tail), "relation");
        }
    }

    fn event(&mut self, obj: &Map<String, Value>) {
        let Some(event_type) = first_key(obj, &["event_type", "type"]).and_then(scalar_string) else {
            self.drop_item("event item missing event_type".into());
            return;
        };
        if !self.allowed(&event_type, 1) {
            return;
        }
        if self.task != TaskKind::EeArgument {
            match obj.get("trigger").and_then(scalar_string) {
                Some(trigger) => self.add(ExtractionTuple::trigger(&event_type, &trigger), "trigger"),
                None => self.drop_item(format!("event `{event_type}` has no trigger")),
            }
        }
        if self.task == TaskKind::EeTrigger {
            return;
        }
        match obj.get("arguments") {
            None | Some(Value::Null) => {}
            Some(Value::Object(roles)) => {
                for (role, values) in roles {
                    for v in as_list(values) {
                        match scalar_string(v) {
                            Some(v) => self.add(ExtractionTuple::argument(&event_type, role, &v), "argument"),
                            None => self.drop_item(format!("non-string value for role `{role}`")),
                        }
                    }
                }
            }
            Some(Value::Array(pairs)) => {
                for pair in pairs {
                    let role = pair.get("role").and_then(scalar_string);
                    let value = pair.get("argument").or_else(|| pair.get("value"));
                    match (role, value) {
                        (Some(role), Some(value)) => {
                            for v in as_list(value) {
                                match scalar_string(v) {
                                    Some(v) => self.add(ExtractionTuple::argument(&event_type, &role, &v), "argument"),
                                    None => self.drop_item(format!("non-string value for role `{role}`")),
                                }
                            }
                        }
                        _ => self.drop_item("argument entry missing role or value".into()),
                    }
                }
            }
            Some(_) => self.drop_item(format!("arguments of `{event_type}` are not a map")),
        }
    }
}

fn try_candidate(candidate: &str, task: TaskKind, allowed: &BTreeSet<String>) -> Option<Interpretation> {
    let value: Value = serde_json::from_str(candidate.trim()).ok()?;
    let mut interp = Interpreter {
        task,
        allowed,
        out: Interpretation::default(),
    };
    interp.interpret(&value).then_some(interp.out)
}

/// Body of the first ``` fenced block; an unterminated fence runs to the end.
pub fn first_fenced_block(raw: &str) -> Option<&str> {
    let start = raw.find("```")?;
    let after = &raw[start + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    Some(match body.find("```") {
        Some(end) => &body[..end],
        None => body,
    })
}

/// End index (exclusive) of the bracket span opening at `start`, honoring
/// JSON string literals.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut stack: Vec<u8> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => stack.push(b'}'),
            b'[' => stack.push(b']'),
            b'}' | b']' => {
                if stack.pop() != Some(b) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

const MAX_SCAN_STARTS: usize = 2048;

fn balanced_scan(raw: &str, task: TaskKind, allowed: &BTreeSet<String>) -> Option<Interpretation> {
    let bytes = raw.as_bytes();
    bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'{' || b == b'[')
        .take(MAX_SCAN_STARTS)
        .find_map(|(start, _)| {
            let end = balanced_end(bytes, start)?;
            try_candidate(&raw[start..end], task, allowed)
        })
}

/// Parse raw model text into a prediction.
///
/// Items whose label is not in `allowed_labels` are dropped and counted. In
/// [`Strictness::Strict`] mode anything other than a tier-0 parse is an error;
/// in recover mode this never fails.
pub fn parse_model_output(
    record_id: &str,
    raw: &str,
    task: TaskKind,
    allowed_labels: &[String],
    strictness: Strictness,
) -> Result<Prediction, CodecError> {
    let allowed: BTreeSet<String> = allowed_labels.iter().map(|l| normalize_mention(l)).collect();

    let mut found = try_candidate(raw, task, &allowed).map(|i| (ParseTier::Strict, i));
    if found.is_none() {
        found = first_fenced_block(raw)
            .and_then(|block| try_candidate(block, task, &allowed))
            .map(|i| (ParseTier::Fenced, i));
    }
    if found.is_none() {
        found = balanced_scan(raw, task, &allowed).map(|i| (ParseTier::BalancedScan, i));
    }

    let (tier, interp) = match found {
        Some((tier, interp)) => (tier, interp),
        None => (
            ParseTier::Failed,
            Interpretation {
                warnings: vec!["no parsable JSON of the expected shape".into()],
                ..Default::default()
            },
        ),
    };
    if strictness == Strictness::Strict && tier != ParseTier::Strict {
        return Err(CodecError::UnparseableOutput { tier: tier as u8 });
    }
    Ok(Prediction {
        record_id: record_id.to_string(),
        task,
        tuples: interp.tuples,
        diagnostics: ParseDiagnostics {
            tier_used: tier,
            warnings: interp.warnings,
            dropped_items: interp.dropped,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{project_tuples, Entity, Event, Language, Relation};

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn per(m: &str) -> ExtractionTuple {
        ExtractionTuple::entity("PER", m).unwrap()
    }

    fn parse(raw: &str, task: TaskKind, allowed: &[&str]) -> Prediction {
        parse_model_output("r", raw, task, &labels(allowed), Strictness::Recover).unwrap()
    }

    #[test]
    fn encode_ner() {
        let mut r = GoldRecord::new("1", "d", TaskKind::Ner, Language::Zh, "张三在北京");
        r.entities.push(Entity { entity_type: "PER".into(), mention: "张三".into() });
        r.label_options = labels(&["PER", "LOC"]);
        assert_eq!(encode_gold(&r).unwrap(), r#"{"PER": ["张三"]}"#);
        r.entities.push(Entity { entity_type: "LOC".into(), mention: "北京".into() });
        r.entities.push(Entity { entity_type: "PER".into(), mention: "李四".into() });
        r.label_options = labels(&["LOC", "PER"]);
        assert_eq!(encode_gold(&r).unwrap(), r#"{"LOC": ["北京"], "PER": ["张三", "李四"]}"#);
        r.entities.clear();
        assert_eq!(encode_gold(&r).unwrap(), "{}");
    }

    #[test]
    fn encode_re_and_ee() {
        let mut r = GoldRecord::new("1", "d", TaskKind::Re, Language::En, "A founded B");
        r.label_options = labels(&["founder"]);
        assert_eq!(encode_gold(&r).unwrap(), "[]");
        r.relations.push(Relation { relation_type: "founder".into(), head: "A".into(), tail: "B".into() });
        assert_eq!(
            encode_gold(&r).unwrap(),
            r#"[{"relation": "founder", "head": "A", "tail": "B"}]"#
        );

        let mut e = GoldRecord::new("2", "d", TaskKind::EeJoint, Language::Zh, "t");
        e.label_options = labels(&["质押"]);
        assert_eq!(encode_gold(&e).unwrap(), "[]");
        e.events.push(Event {
            event_type: "质押".into(),
            trigger: "质押".into(),
            arguments: [("质押方".to_string(), vec!["A公司".to_string()])].into_iter().collect(),
        });
        assert_eq!(
            encode_gold(&e).unwrap(),
            r#"[{"event_type": "质押", "trigger": "质押", "arguments": {"质押方": ["A公司"]}}]"#
        );
    }

    #[test]
    fn encode_rejects_invalid() {
        let mut r = GoldRecord::new("1", "d", TaskKind::Ner, Language::Zh, "x");
        r.entities.push(Entity { entity_type: "PER".into(), mention: "x".into() });
        assert!(matches!(encode_gold(&r), Err(CodecError::Encode(_))));
    }

    #[test]
    fn encode_escapes_quotes() {
        let mut r = GoldRecord::new("1", "d", TaskKind::Ner, Language::En, "x");
        r.entities.push(Entity { entity_type: "WORK".into(), mention: "\"Dune\" \\ part".into() });
        r.label_options = labels(&["WORK"]);
        let s = encode_gold(&r).unwrap();
        let p = parse(&s, TaskKind::Ner, &["WORK"]);
        assert_eq!(p.diagnostics.tier_used, ParseTier::Strict);
        assert_eq!(p.tuples, project_tuples(&r, TaskKind::Ner).unwrap());
    }

    #[test]
    fn tier0_exact() {
        let p = parse(r#"{"PER": ["张三"]}"#, TaskKind::Ner, &["PER"]);
        assert_eq!(p.diagnostics.tier_used, ParseTier::Strict);
        assert_eq!(p.tuples.into_iter().collect::<Vec<_>>(), vec![per("张三")]);
    }

    #[test]
    fn tier1_fenced() {
        let p = parse("Sure! ```json\n{\"PER\": [\"张三\"]}\n``` Hope this helps.", TaskKind::Ner, &["PER"]);
        assert_eq!(p.diagnostics.tier_used, ParseTier::Fenced);
        assert_eq!(p.tuples.into_iter().collect::<Vec<_>>(), vec![per("张三")]);
    }

    #[test]
    fn tier2_balanced_scan() {
        let p = parse(
            r#"The answer [see below] is {"PER": ["a}b"]} and more {"x": 1}"#,
            TaskKind::Ner,
            &["PER"],
        );
        assert_eq!(p.diagnostics.tier_used, ParseTier::BalancedScan);
        assert_eq!(p.tuples.into_iter().collect::<Vec<_>>(), vec![per("a}b")]);
    }

    #[test]
    fn tier3_failure() {
        let p = parse("no json at all", TaskKind::Ner, &["PER"]);
        assert_eq!(p.diagnostics.tier_used, ParseTier::Failed);
        assert!(p.tuples.is_empty());
    }

    #[test]
    fn wrap_and_filter() {
        let p = parse(r#"{"PER": "张三", "ALIEN": ["x"]}"#, TaskKind::Ner, &["PER"]);
        assert_eq!(p.tuples.into_iter().collect::<Vec<_>>(), vec![per("张三")]);
        assert_eq!(p.diagnostics.dropped_items, 1);
        assert_eq!(p.diagnostics.tier_used, ParseTier::Strict);
    }

    #[test]
    fn strict_mode_rejects_non_tier0() {
        let fenced = "```json\n{\"PER\": [\"a\"]}\n```";
        let err = parse_model_output("r", fenced, TaskKind::Ner, &labels(&["PER"]), Strictness::Strict).unwrap_err();
        assert!(matches!(err, CodecError::UnparseableOutput { tier: 1 }));
        assert!(parse_model_output("r", "{}", TaskKind::Ner, &labels(&["PER"]), Strictness::Strict).is_ok());
    }

    #[test]
    fn wrong_shape_falls_through() {
        // an array is not an NER answer; nothing else to try
        let p = parse(r#"["PER", "x"]"#, TaskKind::Ner, &["PER"]);
        assert_eq!(p.diagnostics.tier_used, ParseTier::Failed);
        // a single RE object is wrapped
        let p = parse(r#"{"relation": "founder", "head": "A", "tail": "B"}"#, TaskKind::Re, &["founder"]);
        assert_eq!(p.tuples.len(), 1);
    }

    #[test]
    fn event_views() {
        let raw = r#"[{"event_type": "Attack", "trigger": "hit", "arguments": {"Attacker": "John", "Target": ["Bob", "Ann"]}}]"#;
        let joint = parse(raw, TaskKind::EeJoint, &["Attack"]);
        assert_eq!(joint.tuples.len(), 4);
        let trig = parse(raw, TaskKind::EeTrigger, &["Attack"]);
        assert_eq!(trig.tuples.len(), 1);
        let args = parse(raw, TaskKind::EeArgument, &["Attack"]);
        assert_eq!(args.tuples.len(), 3);
        assert!(args.tuples.contains(&ExtractionTuple::argument("Attack", "Attacker", "John").unwrap()));
    }

    #[test]
    fn event_argument_pair_list() {
        let raw = r#"[{"event_type": "Attack", "trigger": "hit", "arguments": [{"role": "Attacker", "argument": "John"}]}]"#;
        let p = parse(raw, TaskKind::EeJoint, &["Attack"]);
        assert!(p.tuples.contains(&ExtractionTuple::argument("Attack", "Attacker", "John").unwrap()));
    }

    #[test]
    fn fenced_helper() {
        assert_eq!(first_fenced_block("a ```json\n[1]\n``` b"), Some("[1]\n"));
        assert_eq!(first_fenced_block("```\n[1]"), Some("[1]"));
        assert_eq!(first_fenced_block("none"), None);
    }

    #[test]
    fn tier_serializes_as_number() {
        assert_eq!(serde_json::to_string(&ParseTier::Fenced).unwrap(), "1");
        assert_eq!(serde_json::from_str::<ParseTier>("3").unwrap(), ParseTier::Failed);
    }
}
