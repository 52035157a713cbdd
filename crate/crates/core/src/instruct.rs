//! Instruction rendering and SFT record assembly.
//!
//! An instruction is the task description, followed by the option prefix,
//! the joined label options and the output-format directive. Templates are
//! plain data and can be loaded from a JSON file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{encode_gold, CodecError};
use crate::model::{GoldRecord, Language, TaskKind};

#[derive(Debug, Error)]
pub enum InstructError {
    #[error("cannot render an instruction without label options")]
    EmptyLabels,
    #[error("no template for ({0}, {1})")]
    MissingTemplate(TaskKind, Language),
    #[error("record {id}: {source}")]
    Record {
        id: String,
        #[source]
        source: Box<InstructError>,
    },
    #[error(transparent)]
    Encode(#[from] CodecError),
    #[error("invalid template file: {0}")]
    BadTemplateFile(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub task_description: String,
    pub option_prefix: String,
    pub format_directive: String,
    #[serde(default = "default_joiner")]
    pub option_joiner: String,
}

fn default_joiner() -> String {
    ", ".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateEntry {
    task: TaskKind,
    lang: Language,
    #[serde(flatten)]
    template: Template,
}

/// Templates for every (task, language) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<(TaskKind, Language), Template>,
}

impl TemplateSet {
    pub fn get(&self, task: TaskKind, lang: Language) -> Result<&Template, InstructError> {
        self.templates
            .get(&(task, lang))
            .ok_or(InstructError::MissingTemplate(task, lang))
    }

    pub fn insert(&mut self, task: TaskKind, lang: Language, template: Template) {
        self.templates.insert((task, lang), template);
    }

    /// Load a JSON array of `{task, lang, task_description, option_prefix,
    /// format_directive, option_joiner?}` entries. Every pair must be present.
    pub fn from_json(text: &str) -> Result<Self, InstructError> {
        let entries: Vec<TemplateEntry> =
            serde_json::from_str(text).map_err(|e| InstructError::BadTemplateFile(e.to_string()))?;
        let set = TemplateSet {
            templates: entries
                .into_iter()
                .map(|e| ((e.task, e.lang), e.template))
                .collect(),
        };
        set.check_complete()?;
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<TemplateEntry> = self
            .templates
            .iter()
            .map(|(&(task, lang), t)| TemplateEntry {
                task,
                lang,
                template: t.clone(),
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("templates serialize")
    }

    pub fn check_complete(&self) -> Result<(), InstructError> {
        for task in TaskKind::ALL {
            for lang in Language::ALL {
                self.get(task, lang)?;
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, recorded in build manifests.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_json().as_bytes());
        hex_digest(&hasher.finalize())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn en(desc: &str, prefix: &str, directive: &str) -> Template {
    Template {
        task_description: desc.into(),
        option_prefix: prefix.into(),
        format_directive: directive.into(),
        option_joiner: ", ".into(),
    }
}

fn zh(desc: &str, prefix: &str, directive: &str) -> Template {
    Template {
        task_description: desc.into(),
        option_prefix: prefix.into(),
        format_directive: directive.into(),
        option_joiner: "，".into(),
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        use Language::{En, Zh};
        use TaskKind::*;
        let mut set = TemplateSet {
            templates: BTreeMap::new(),
        };
        set.insert(Ner, En, en(
            "Extract the entities from the given text.",
            " Entity types: ",
            ". Answer in JSON, mapping each entity type to a list of mentions.",
        ));
        set.insert(Ner, Zh, zh(
            "从给定文本中抽取实体。",
            "实体类型：",
            "。请以JSON格式回答，将每个实体类型映射到其提及列表。",
        ));
        set.insert(Re, En, en(
            "Extract the relation triples from the given text.",
            " Relation types: ",
            ". Answer in JSON, as a list of objects with keys relation, head and tail.",
        ));
        set.insert(Re, Zh, zh(
            "从给定文本中抽取关系三元组。",
            "关系类型：",
            "。请以JSON格式回答，输出包含relation、head、tail键的对象列表。",
        ));
        set.insert(EeTrigger, En, en(
            "Extract the event triggers from the given text.",
            " Event types: ",
            ". Answer in JSON, as a list of objects with keys event_type, trigger and arguments.",
        ));
        set.insert(EeTrigger, Zh, zh(
            "从给定文本中抽取事件触发词。",
            "事件类型：",
            "。请以JSON格式回答，输出包含event_type、trigger、arguments键的对象列表。",
        ));
        set.insert(EeArgument, En, en(
            "Extract the event arguments from the given text.",
            " Event types: ",
            ". Answer in JSON, as a list of objects with keys event_type, trigger and arguments, where arguments maps each role to a list of values.",
        ));
        set.insert(EeArgument, Zh, zh(
            "从给定文本中抽取事件论元。",
            "事件类型：",
            "。请以JSON格式回答，输出包含event_type、trigger、arguments键的对象列表，arguments将每个角色映射到取值列表。",
        ));
        set.insert(EeJoint, En, en(
            "Extract the events from the given text.",
            " Event types: ",
            ". Answer in JSON, as a list of objects with keys event_type, trigger and arguments, where arguments maps each role to a list of values.",
        ));
        set.insert(EeJoint, Zh, zh(
            "从给定文本中抽取事件。",
            "事件类型：",
            "。请以JSON格式回答，输出包含event_type、trigger、arguments键的对象列表，arguments将每个角色映射到取值列表。",
        ));
        set
    }
}

pub fn render_instruction(
    task: TaskKind,
    labels: &[String],
    lang: Language,
    templates: &TemplateSet,
) -> Result<String, InstructError> {
    if labels.is_empty() {
        return Err(InstructError::EmptyLabels);
    }
    let t = templates.get(task, lang)?;
    let mut out = String::new();
    out.push_str(&t.task_description);
    out.push_str(&t.option_prefix);
    out.push_str(&labels.join(&t.option_joiner));
    out.push_str(&t.format_directive);
    Ok(out)
}

/// One supervised fine-tuning example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

pub fn build_sft_record(record: &GoldRecord, templates: &TemplateSet) -> Result<SftRecord, InstructError> {
    let wrap = |e: InstructError| InstructError::Record {
        id: record.id.clone(),
        source: Box::new(e),
    };
    let instruction =
        render_instruction(record.task, &record.label_options, record.lang, templates).map_err(wrap)?;
    let output = encode_gold(record).map_err(|e| wrap(e.into()))?;
    Ok(SftRecord {
        instruction,
        input: record.text.clone(),
        output,
    })
}

pub fn build_sft_corpus(
    records: &[GoldRecord],
    templates: &TemplateSet,
) -> Result<Vec<SftRecord>, InstructError> {
    records.iter().map(|r| build_sft_record(r, templates)).collect()
}

/// SFT JSONL with keys `instruction`, `input`, `output`, LF line endings.
pub fn encode_sft_jsonl(records: &[SftRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("SftRecord serializes"));
        out.push('\n');
    }
    out
}
