//! Readers for the source dataset shapes: BIO/CoNLL token columns,
//! `spo_list` relation JSONL, `event_list` event JSONL, and the canonical
//! [`GoldRecord`] JSONL itself.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{Entity, Event, GoldRecord, Language, Relation, TaskKind};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {0}: expected `token tag` columns")]
    MalformedLine(usize),
    #[error("line {0}: invalid tag `{1}`")]
    InvalidTag(usize, String),
    #[error("line {0}: invalid JSON: {1}")]
    BadJson(usize, String),
    #[error("line {0}: missing key `{1}`")]
    MissingKey(usize, String),
    #[error("line {0}: not a valid canonical record: {1}")]
    BadRecord(usize, String),
    #[error("unrecognized dataset format")]
    UnknownFormat,
    #[error("unknown format name `{0}`")]
    UnknownFormatName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceFormat {
    #[serde(rename = "BIO-CoNLL")]
    BioConll,
    #[serde(rename = "RE-JSONL")]
    ReJsonl,
    #[serde(rename = "EE-JSONL")]
    EeJsonl,
    #[serde(rename = "CANONICAL")]
    Canonical,
}

impl SourceFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceFormat::BioConll => "BIO-CoNLL",
            SourceFormat::ReJsonl => "RE-JSONL",
            SourceFormat::EeJsonl => "EE-JSONL",
            SourceFormat::Canonical => "CANONICAL",
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Ok(match key.as_str() {
            "bio-conll" | "bio" | "conll" => SourceFormat::BioConll,
            "re-jsonl" | "re" => SourceFormat::ReJsonl,
            "ee-jsonl" | "ee" => SourceFormat::EeJsonl,
            "canonical" => SourceFormat::Canonical,
            _ => return Err(IngestError::UnknownFormatName(s.to_string())),
        })
    }
}

/// A recovered irregularity, reported instead of failing the parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestWarning {
    pub line: usize,
    pub kind: WarningKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    DanglingInsideTag,
    RoleWithoutValue,
    SkippedLine,
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {:?}: {}", self.line, self.kind, self.detail)
    }
}

#[derive(Debug, Default, Clone)]
pub struct ParseOutput {
    pub records: Vec<GoldRecord>,
    pub warnings: Vec<IngestWarning>,
}

/// Where parsed records are attributed and how they are numbered.
#[derive(Debug, Clone)]
pub struct SourceInfo {
    pub dataset: String,
    /// `None` guesses the language from the file contents.
    pub lang: Option<Language>,
}

impl SourceInfo {
    pub fn new(dataset: impl Into<String>, lang: Option<Language>) -> Self {
        SourceInfo {
            dataset: dataset.into(),
            lang,
        }
    }

    fn record_id(&self, index: usize) -> String {
        format!("{}-{:06}", self.dataset, index)
    }
}

fn push_label(options: &mut Vec<String>, label: &str) {
    if !options.iter().any(|l| l == label) {
        options.push(label.to_string());
    }
}

struct Span {
    label: String,
    tokens: Vec<String>,
}

/// Parse BIO-tagged token lines; blank lines separate sentences.
pub fn parse_bio(input: &str, source: &SourceInfo) -> Result<ParseOutput, IngestError> {
    let lang = source.lang.unwrap_or_else(|| {
        let tokens: String = input
            .lines()
            .filter_map(|l| l.split_whitespace().next())
            .take(500)
            .collect();
        Language::guess(&tokens)
    });
    let joiner = match lang {
        Language::En => " ",
        Language::Zh => "",
    };

    let mut out = ParseOutput::default();
    let mut tokens: Vec<String> = Vec::new();
    let mut spans: Vec<Span> = Vec::new();
    let mut open = false;

    let flush = |tokens: &mut Vec<String>, spans: &mut Vec<Span>, out: &mut ParseOutput| {
        if tokens.is_empty() {
            return;
        }
        let mut record = GoldRecord::new(
            source.record_id(out.records.len()),
            source.dataset.clone(),
            TaskKind::Ner,
            lang,
            tokens.join(joiner),
        );
        for span in spans.drain(..) {
            push_label(&mut record.label_options, &span.label);
            record.entities.push(Entity {
                entity_type: span.label,
                mention: span.tokens.join(joiner),
            });
        }
        tokens.clear();
        out.records.push(record);
    };

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            flush(&mut tokens, &mut spans, &mut out);
            open = false;
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            out.warnings.push(IngestWarning {
                line: line_no,
                kind: WarningKind::SkippedLine,
                detail: "document separator".into(),
            });
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        let [token, tag] = cols[..] else {
            return Err(IngestError::MalformedLine(line_no));
        };
        tokens.push(token.to_string());
        if tag == "O" {
            open = false;
            continue;
        }
        let (prefix, label) = tag
            .split_once('-')
            .filter(|(_, l)| !l.is_empty())
            .ok_or_else(|| IngestError::InvalidTag(line_no, tag.to_string()))?;
        match prefix {
            "B" => {
                spans.push(Span {
                    label: label.to_string(),
                    tokens: vec![token.to_string()],
                });
                open = true;
            }
            "I" => {
                let continues = open && spans.last().is_some_and(|s| s.label == label);
                if continues {
                    spans.last_mut().unwrap().tokens.push(token.to_string());
                } else {
                    out.warnings.push(IngestWarning {
                        line: line_no,
                        kind: WarningKind::DanglingInsideTag,
                        detail: format!("I-{label} without a preceding B-{label}; treated as B-{label}"),
                    });
                    spans.push(Span {
                        label: label.to_string(),
                        tokens: vec![token.to_string()],
                    });
                    open = true;
                }
            }
            _ => return Err(IngestError::InvalidTag(line_no, tag.to_string())),
        }
    }
    flush(&mut tokens, &mut spans, &mut out);
    Ok(out)
}

fn json_lines(input: &str) -> impl Iterator<Item = (usize, &str)> {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_object(line_no: usize, line: &str) -> Result<serde_json::Map<String, Value>, IngestError> {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(IngestError::BadJson(line_no, "expected a JSON object".into())),
        Err(e) => Err(IngestError::BadJson(line_no, e.to_string())),
    }
}

/// String value of a field; DuIE-style `{"@value": "..."}` objects are unwrapped.
fn string_field(obj: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Object(inner) => match inner.get("@value") {
            Some(Value::String(s)) => Some(s.clone()),
            _ => None,
        },
        _ => None,
    }
}

fn require_string(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    line_no: usize,
) -> Result<String, IngestError> {
    string_field(obj, key).ok_or_else(|| IngestError::MissingKey(line_no, key.to_string()))
}

fn require_array<'a>(
    obj: &'a serde_json::Map<String, Value>,
    key: &str,
    line_no: usize,
) -> Result<&'a Vec<Value>, IngestError> {
    obj.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::MissingKey(line_no, key.to_string()))
}

fn record_shell(
    obj: &serde_json::Map<String, Value>,
    line_no: usize,
    index: usize,
    source: &SourceInfo,
    task: TaskKind,
) -> Result<GoldRecord, IngestError> {
    let text = require_string(obj, "text", line_no)?;
    let id = match string_field(obj, "id") {
        Some(id) => format!("{}-{}", source.dataset, id),
        None => source.record_id(index),
    };
    let lang = source.lang.unwrap_or_else(|| Language::guess(&text));
    Ok(GoldRecord::new(id, source.dataset.clone(), task, lang, text))
}

/// Parse relation JSONL with `text` and a `spo_list` of subject/predicate/object.
pub fn parse_re_jsonl(input: &str, source: &SourceInfo) -> Result<ParseOutput, IngestError> {
    let mut out = ParseOutput::default();
    for (line_no, line) in json_lines(input) {
        let obj = parse_object(line_no, line)?;
        let mut record = record_shell(&obj, line_no, out.records.len(), source, TaskKind::Re)?;
        for spo in require_array(&obj, "spo_list", line_no)? {
            let spo = spo
                .as_object()
                .ok_or_else(|| IngestError::BadJson(line_no, "spo entry is not an object".into()))?;
            let relation = Relation {
                relation_type: require_string(spo, "predicate", line_no)?,
                head: require_string(spo, "subject", line_no)?,
                tail: require_string(spo, "object", line_no)?,
            };
            push_label(&mut record.label_options, &relation.relation_type);
            record.relations.push(relation);
        }
        out.records.push(record);
    }
    Ok(out)
}

/// Parse event JSONL with `text` and an `event_list` of typed, triggered events.
pub fn parse_ee_jsonl(input: &str, source: &SourceInfo) -> Result<ParseOutput, IngestError> {
    let mut out = ParseOutput::default();
    for (line_no, line) in json_lines(input) {
        let obj = parse_object(line_no, line)?;
        let mut record =
            record_shell(&obj, line_no, out.records.len(), source, TaskKind::EeJoint)?;
        for ev in require_array(&obj, "event_list", line_no)? {
            let ev = ev
                .as_object()
                .ok_or_else(|| IngestError::BadJson(line_no, "event is not an object".into()))?;
            let mut event = Event {
                event_type: require_string(ev, "event_type", line_no)?,
                trigger: require_string(ev, "trigger", line_no)?,
                arguments: Default::default(),
            };
            let args = ev.get("arguments").and_then(Value::as_array);
            for arg in args.into_iter().flatten() {
                let Some(arg) = arg.as_object() else {
                    return Err(IngestError::BadJson(line_no, "argument is not an object".into()));
                };
                let role = require_string(arg, "role", line_no)?;
                match string_field(arg, "argument").filter(|v| !v.trim().is_empty()) {
                    Some(value) => event.arguments.entry(role).or_default().push(value),
                    None => out.warnings.push(IngestWarning {
                        line: line_no,
                        kind: WarningKind::RoleWithoutValue,
                        detail: format!("role `{role}` has no value; argument dropped"),
                    }),
                }
            }
            push_label(&mut record.label_options, &event.event_type);
            record.events.push(event);
        }
        out.records.push(record);
    }
    Ok(out)
}

/// Parse canonical GoldRecord JSONL.
pub fn parse_canonical(input: &str) -> Result<ParseOutput, IngestError> {
    let mut out = ParseOutput::default();
    for (line_no, line) in json_lines(input) {
        let record: GoldRecord = serde_json::from_str(line)
            .map_err(|e| IngestError::BadRecord(line_no, e.to_string()))?;
        record
            .validate()
            .map_err(|e| IngestError::BadRecord(line_no, e.to_string()))?;
        out.records.push(record);
    }
    Ok(out)
}

/// Serialize records as canonical JSONL (one object per line, LF endings).
pub fn encode_canonical(records: &[GoldRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("GoldRecord serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_with_format(
    input: &str,
    format: SourceFormat,
    source: &SourceInfo,
) -> Result<ParseOutput, IngestError> {
    match format {
        SourceFormat::BioConll => parse_bio(input, source),
        SourceFormat::ReJsonl => parse_re_jsonl(input, source),
        SourceFormat::EeJsonl => parse_ee_jsonl(input, source),
        SourceFormat::Canonical => parse_canonical(input),
    }
}

const SNIFF_BYTES: usize = 4096;

/// Classify a file from its first 4 KiB.
pub fn detect_format(path: &Path) -> Result<SourceFormat, IngestError> {
    let mut buf = Vec::with_capacity(SNIFF_BYTES);
    File::open(path)?
        .take(SNIFF_BYTES as u64)
        .read_to_end(&mut buf)?;
    let truncated = buf.len() == SNIFF_BYTES;
    let text = String::from_utf8_lossy(&buf);
    detect_format_from_sniff(&text, truncated)
}

/// `truncated` marks a sniff cut at the byte limit, whose last line may be partial.
pub fn detect_format_from_sniff(sniff: &str, truncated: bool) -> Result<SourceFormat, IngestError> {
    let mut lines: Vec<&str> = sniff.lines().collect();
    if truncated && !sniff.ends_with('\n') && lines.len() > 1 {
        lines.pop();
    }
    let non_blank: Vec<&str> = lines
        .iter()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .collect();
    let Some(first) = non_blank.first() else {
        return Err(IngestError::UnknownFormat);
    };

    if first.starts_with('{') {
        if serde_json::from_str::<GoldRecord>(first).is_ok() {
            return Ok(SourceFormat::Canonical);
        }
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(first) {
            if obj.contains_key("spo_list") {
                return Ok(SourceFormat::ReJsonl);
            }
            if obj.contains_key("event_list") {
                return Ok(SourceFormat::EeJsonl);
            }
        }
        return Err(IngestError::UnknownFormat);
    }

    let two_col = non_blank
        .iter()
        .filter(|l| l.split_whitespace().count() == 2)
        .count();
    if two_col * 10 >= non_blank.len() * 9 {
        Ok(SourceFormat::BioConll)
    } else {
        Err(IngestError::UnknownFormat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{project_tuples, ExtractionTuple};

    fn zh() -> SourceInfo {
        SourceInfo::new("msra", Some(Language::Zh))
    }

    #[test]
    fn bio_merges_runs_zh() {
        let input = "张 B-PER\n三 I-PER\n在 O\n北 B-LOC\n京 I-LOC\n";
        let out = parse_bio(input, &zh()).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.text, "张三在北京");
        assert_eq!(r.task, TaskKind::Ner);
        assert_eq!(
            r.entities,
            vec![
                Entity { entity_type: "PER".into(), mention: "张三".into() },
                Entity { entity_type: "LOC".into(), mention: "北京".into() },
            ]
        );
        assert_eq!(r.label_options, vec!["PER", "LOC"]);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn bio_en_joins_with_space_and_tabs() {
        let input = "John\tB-PER\nSmith\tI-PER\nvisited\tO\nNew\tB-LOC\nYork\tI-LOC\n\nHi O\n";
        let out = parse_bio(input, &SourceInfo::new("conll", Some(Language::En))).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].text, "John Smith visited New York");
        assert_eq!(out.records[0].entities[1].mention, "New York");
        assert!(out.records[1].entities.is_empty());
        assert_eq!(out.records[1].id, "conll-000001");
    }

    #[test]
    fn bio_all_o() {
        let out = parse_bio("我 O\n们 O\n", &zh()).unwrap();
        assert!(out.records[0].entities.is_empty());
        assert!(out.records[0].label_options.is_empty());
    }

    #[test]
    fn bio_dangling_inside_recovered() {
        let input = "in O\nYork I-LOC\n";
        let out = parse_bio(input, &SourceInfo::new("x", Some(Language::En))).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.warnings[0].kind, WarningKind::DanglingInsideTag);
        assert_eq!(out.warnings[0].line, 2);
        assert_eq!(out.records[0].entities[0].entity_type, "LOC");
        assert_eq!(out.records[0].entities[0].mention, "York");

        // type switch mid-span starts a new span
        let out = parse_bio("a B-PER\nb I-LOC\n", &SourceInfo::new("x", Some(Language::En))).unwrap();
        assert_eq!(out.records[0].entities.len(), 2);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn bio_errors() {
        assert!(matches!(
            parse_bio("a b c\n", &zh()),
            Err(IngestError::MalformedLine(1))
        ));
        assert!(matches!(
            parse_bio("a O\nb\n", &zh()),
            Err(IngestError::MalformedLine(2))
        ));
        assert!(matches!(
            parse_bio("a S-PER\n", &zh()),
            Err(IngestError::InvalidTag(1, _))
        ));
    }

    #[test]
    fn re_field_mapping() {
        let input = r#"{"text":"A founded B","spo_list":[{"subject":"A","predicate":"founder","object":"B"},{"subject":"A","predicate":"founder","object":"B"}]}
{"text":"nothing","spo_list":[]}"#;
        let out = parse_re_jsonl(input, &SourceInfo::new("duie", None)).unwrap();
        assert_eq!(out.records.len(), 2);
        let r = &out.records[0];
        assert_eq!(
            r.relations[0],
            Relation { relation_type: "founder".into(), head: "A".into(), tail: "B".into() }
        );
        assert_eq!(project_tuples(r, TaskKind::Re).unwrap().len(), 1);
        assert!(out.records[1].relations.is_empty());
    }

    #[test]
    fn re_object_values_and_errors() {
        let input = r#"{"text":"t","id":"7","spo_list":[{"subject":"A","predicate":"p","object":{"@value":"B"}}]}"#;
        let out = parse_re_jsonl(input, &SourceInfo::new("duie", None)).unwrap();
        assert_eq!(out.records[0].relations[0].tail, "B");
        assert_eq!(out.records[0].id, "duie-7");
        assert!(matches!(
            parse_re_jsonl("{not json", &SourceInfo::new("d", None)),
            Err(IngestError::BadJson(1, _))
        ));
        assert!(matches!(
            parse_re_jsonl(r#"{"text":"t"}"#, &SourceInfo::new("d", None)),
            Err(IngestError::MissingKey(1, k)) if k == "spo_list"
        ));
    }

    #[test]
    fn ee_field_mapping() {
        let input = r#"{"text":"A公司质押给B银行","event_list":[{"event_type":"质押","trigger":"质押","arguments":[{"role":"质押方","argument":"A公司"},{"role":"质权方","argument":"B银行"},{"role":"质押物","argument":""}]}]}
{"text":"t","event_list":[{"event_type":"Attack","trigger":"hit"},{"event_type":"Attack","trigger":"struck","arguments":[]}]}"#;
        let out = parse_ee_jsonl(input, &SourceInfo::new("duee", None)).unwrap();
        let r = &out.records[0];
        assert_eq!(r.task, TaskKind::EeJoint);
        assert_eq!(r.lang, Language::Zh);
        assert_eq!(r.events[0].arguments.len(), 2);
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.warnings[0].kind, WarningKind::RoleWithoutValue);

        let r = &out.records[1];
        assert_eq!(r.events.len(), 2);
        assert!(project_tuples(r, TaskKind::EeArgument).unwrap().is_empty());
        assert_eq!(
            project_tuples(r, TaskKind::EeTrigger).unwrap().into_iter().next(),
            ExtractionTuple::trigger("Attack", "hit")
        );
    }

    #[test]
    fn detection() {
        let canonical = encode_canonical(&parse_bio("张 B-PER\n", &zh()).unwrap().records);
        assert_eq!(detect_format_from_sniff(&canonical, false).unwrap(), SourceFormat::Canonical);
        assert_eq!(
            detect_format_from_sniff("张 B-PER\n三 I-PER\n\n在 O\n", false).unwrap(),
            SourceFormat::BioConll
        );
        assert_eq!(
            detect_format_from_sniff(r#"{"text":"a","spo_list":[]}"#, false).unwrap(),
            SourceFormat::ReJsonl
        );
        assert_eq!(
            detect_format_from_sniff(r#"{"text":"a","event_list":[]}"#, false).unwrap(),
            SourceFormat::EeJsonl
        );
        assert!(matches!(
            detect_format_from_sniff("id,text,label\n1,hello,PER\n2,bye,LOC\n", false),
            Err(IngestError::UnknownFormat)
        ));
        assert!(matches!(detect_format_from_sniff("", false), Err(IngestError::UnknownFormat)));
    }

    #[test]
    fn canonical_identity() {
        let recs = parse_bio("张 B-PER\n三 I-PER\n\n北 B-LOC\n", &zh()).unwrap().records;
        let text = encode_canonical(&recs);
        assert_eq!(parse_canonical(&text).unwrap().records, recs);
        assert_eq!(encode_canonical(&parse_canonical(&text).unwrap().records), text);
    }
}
