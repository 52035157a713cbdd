//! Subcommand implementations, callable without the argument parser.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use uie_core::codec::{parse_model_output, ParseTier, Prediction, Strictness};
use uie_core::dialogue::{run_pipeline, DialogueSample, FilterReport, KeywordList, PipelineConfig};
use uie_core::eval::{comparison_markdown, score_run, ScoreReport};
use uie_core::ingest::{detect_format, encode_canonical, parse_canonical, parse_with_format, SourceFormat, SourceInfo};
use uie_core::instruct::{build_sft_corpus, encode_sft_jsonl, TemplateSet};
use uie_core::model::{build_label_universe, GoldRecord, Language, TaskKind};
use uie_core::sampler::{augment_corpus, SamplingPolicy};
use uie_infer::{read_journal, resume_run, run_inference, EndpointConfig, EntryStatus, InferRequest, RunJournal};

use crate::config::{file_stem, DatasetManifest, RunConfig};

pub const SFT_FILE: &str = "sft.jsonl";
pub const GOLD_FILE: &str = "gold.jsonl";
pub const BUILD_MANIFEST_FILE: &str = "build_manifest.json";

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some records failed; artifacts were still written.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 2,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.strip_prefix('\u{feff}').map(str::to_string).unwrap_or(text))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Result of ingesting one dataset file.
#[derive(Debug)]
pub struct Loaded {
    pub format: SourceFormat,
    pub records: Vec<GoldRecord>,
    pub warnings: usize,
    pub text: String,
}

pub fn load_dataset(manifest: &DatasetManifest) -> Result<Loaded> {
    let format = match manifest.format {
        Some(f) => f,
        None => detect_format(&manifest.path).with_context(|| format!("{}", manifest.path.display()))?,
    };
    let text = read_text(&manifest.path)?;
    let source = SourceInfo::new(manifest.dataset_name(), manifest.lang);
    let out = parse_with_format(&text, format, &source).with_context(|| format!("{}", manifest.path.display()))?;
    for w in &out.warnings {
        log::warn!("{}: {w}", manifest.path.display());
    }
    if let Some(task) = manifest.task {
        if let Some(r) = out.records.iter().find(|r| r.task != task) {
            bail!(
                "{}: record {} has task {}, manifest says {task}",
                manifest.path.display(),
                r.id,
                r.task
            );
        }
    }
    Ok(Loaded {
        format,
        warnings: out.warnings.len(),
        records: out.records,
        text,
    })
}

fn check_unique_ids(records: &[GoldRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            bail!("duplicate record id {}", r.id);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct ConvertOptions {
    pub format: Option<SourceFormat>,
    pub dataset: Option<String>,
    pub lang: Option<Language>,
    pub task: Option<TaskKind>,
}

/// Convert source files to canonical JSONL. Canonical input passes through
/// byte-for-byte. Returns the record and warning counts.
pub fn cmd_convert(inputs: &[PathBuf], opts: &ConvertOptions, out: &Path) -> Result<(usize, usize)> {
    if inputs.is_empty() {
        bail!("no input files");
    }
    let mut output = String::new();
    let mut all = Vec::new();
    let mut warnings = 0;
    for path in inputs {
        let manifest = DatasetManifest {
            path: path.clone(),
            format: opts.format,
            dataset: opts.dataset.clone(),
            task: opts.task,
            lang: opts.lang,
        };
        let loaded = load_dataset(&manifest)?;
        warnings += loaded.warnings;
        if loaded.format == SourceFormat::Canonical {
            output.push_str(&loaded.text);
            if !loaded.text.is_empty() && !loaded.text.ends_with('\n') {
                output.push('\n');
            }
        } else {
            output.push_str(&encode_canonical(&loaded.records));
        }
        all.extend(loaded.records);
    }
    check_unique_ids(&all)?;
    write_file(out, &output)?;
    Ok((all.len(), warnings))
}

/// Group records by dataset, in first-appearance order.
fn by_dataset(records: Vec<GoldRecord>) -> Vec<(String, Vec<GoldRecord>)> {
    let mut groups: Vec<(String, Vec<GoldRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(d, _)| *d == r.dataset) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.dataset.clone(), vec![r])),
        }
    }
    groups
}

/// Replace label options with gold labels plus sampled negatives, per dataset.
pub fn sample_negatives(records: Vec<GoldRecord>, policy: &SamplingPolicy) -> Result<Vec<GoldRecord>> {
    let mut out = Vec::with_capacity(records.len());
    for (dataset, group) in by_dataset(records) {
        let universe = build_label_universe(&group, None).with_context(|| format!("dataset {dataset}"))?;
        out.extend(augment_corpus(&group, &universe, policy)?);
    }
    Ok(out)
}

pub fn cmd_sample_negatives(input: &Path, policy: &SamplingPolicy, out: &Path) -> Result<usize> {
    let parsed = parse_canonical(&read_text(input)?)?;
    check_unique_ids(&parsed.records)?;
    let augmented = sample_negatives(parsed.records, policy)?;
    write_file(out, &encode_canonical(&augmented))?;
    Ok(augmented.len())
}

pub fn load_templates(path: Option<&Path>) -> Result<TemplateSet> {
    match path {
        Some(p) => TemplateSet::from_json(&read_text(p)?).with_context(|| format!("{}", p.display())),
        None => Ok(TemplateSet::default()),
    }
}

#[derive(Debug, Serialize)]
struct SourceEntry {
    path: String,
    dataset: String,
    format: SourceFormat,
    task: Option<TaskKind>,
    lang: Option<Language>,
    records: usize,
    warnings: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct BuildManifest {
    seed: u64,
    policy: SamplingPolicy,
    template_sha256: String,
    sources: Vec<SourceEntry>,
    records: usize,
    sft_sha256: String,
    gold_sha256: String,
}

/// Paths written by [`cmd_build_sft`].
#[derive(Debug, Clone)]
pub struct BuildOutputs {
    pub sft: PathBuf,
    pub gold: PathBuf,
    pub manifest: PathBuf,
}

/// convert → sample negatives → render → encode. Writes `sft.jsonl`,
/// `gold.jsonl` (with sampled label options) and `build_manifest.json`.
pub fn cmd_build_sft(config: &RunConfig, out_dir: &Path) -> Result<BuildOutputs> {
    if config.datasets.is_empty() {
        bail!("config lists no datasets");
    }
    let templates = load_templates(config.templates.as_deref())?;
    let mut records = Vec::new();
    let mut sources = Vec::new();
    for manifest in &config.datasets {
        let loaded = load_dataset(manifest)?;
        let first = loaded.records.first();
        sources.push(SourceEntry {
            path: manifest
                .path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            dataset: manifest.dataset_name(),
            format: loaded.format,
            task: first.map(|r| r.task),
            lang: first.map(|r| r.lang),
            records: loaded.records.len(),
            warnings: loaded.warnings,
            sha256: sha256_hex(loaded.text.replace("\r\n", "\n").as_bytes()),
        });
        records.extend(loaded.records);
    }
    check_unique_ids(&records)?;
    let augmented = sample_negatives(records, &config.sampling)?;
    let sft = build_sft_corpus(&augmented, &templates)?;
    let sft_text = encode_sft_jsonl(&sft);
    let gold_text = encode_canonical(&augmented);

    let manifest = BuildManifest {
        seed: config.sampling.run_seed,
        policy: config.sampling.clone(),
        template_sha256: templates.digest(),
        sources,
        records: augmented.len(),
        sft_sha256: sha256_hex(sft_text.as_bytes()),
        gold_sha256: sha256_hex(gold_text.as_bytes()),
    };
    let outputs = BuildOutputs {
        sft: out_dir.join(SFT_FILE),
        gold: out_dir.join(GOLD_FILE),
        manifest: out_dir.join(BUILD_MANIFEST_FILE),
    };
    write_file(&outputs.sft, &sft_text)?;
    write_file(&outputs.gold, &gold_text)?;
    write_file(&outputs.manifest, &to_pretty_json(&manifest))?;
    Ok(outputs)
}

pub fn load_gold(path: &Path) -> Result<Vec<GoldRecord>> {
    if !path.exists() {
        bail!("gold file {} does not exist", path.display());
    }
    let parsed = parse_canonical(&read_text(path)?).with_context(|| format!("{}", path.display()))?;
    Ok(parsed.records)
}

/// Pair SFT lines with the gold ids they were built from.
pub fn build_requests(sft_path: &Path, gold_path: &Path) -> Result<Vec<InferRequest>> {
    let gold = load_gold(gold_path)?;
    let text = read_text(sft_path)?;
    let sft: Vec<uie_core::instruct::SftRecord> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", sft_path.display(), i + 1)))
        .collect::<Result<_>>()?;
    if sft.len() != gold.len() {
        bail!(
            "{} has {} records but {} has {}",
            sft_path.display(),
            sft.len(),
            gold_path.display(),
            gold.len()
        );
    }
    Ok(gold
        .into_iter()
        .zip(sft)
        .map(|(g, s)| InferRequest {
            record_id: g.id,
            instruction: s.instruction,
            input: s.input,
        })
        .collect())
}

fn report_run(run: &RunJournal) -> Outcome {
    let m = &run.manifest;
    eprintln!(
        "run {}: {} ok, {} failed, {} pending of {} ({} issued)",
        m.run_id, m.ok, m.failed, m.pending, m.total, run.issued
    );
    if m.failed > 0 {
        eprintln!("failed records: {}", m.failed_ids.join(", "));
    }
    if run.is_complete() {
        Outcome::Success
    } else {
        Outcome::Partial
    }
}

pub async fn cmd_infer(requests: Vec<InferRequest>, endpoint: &EndpointConfig, run_dir: &Path) -> Result<Outcome> {
    let run = run_inference(requests, endpoint, run_dir).await?;
    Ok(report_run(&run))
}

pub async fn cmd_resume(run_dir: &Path, endpoint: &EndpointConfig) -> Result<Outcome> {
    let run = resume_run(run_dir, endpoint).await?;
    Ok(report_run(&run))
}

/// Parse every journaled output. Records without an ok entry, and outputs
/// rejected under strict parsing, become empty predictions.
pub fn parse_run(run_dir: &Path, golds: &[GoldRecord], strictness: Strictness) -> Result<Vec<Prediction>> {
    let state = read_journal(&run_dir.join(uie_infer::run::JOURNAL_FILE))?;
    let mut preds = Vec::with_capacity(golds.len());
    for g in golds {
        let entry = state.entries.get(&g.id).filter(|e| e.status == EntryStatus::Ok);
        let pred = match entry.and_then(|e| e.raw_output.as_deref()) {
            Some(raw) => match parse_model_output(&g.id, raw, g.task, &g.label_options, strictness) {
                Ok(p) => p,
                Err(e) => Prediction::empty(&g.id, g.task, e.to_string()),
            },
            None => Prediction::empty(&g.id, g.task, "no completed output"),
        };
        preds.push(pred);
    }
    Ok(preds)
}

pub fn encode_predictions(preds: &[Prediction]) -> String {
    let mut out = String::new();
    for p in preds {
        out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        out.push('\n');
    }
    out
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

/// Returns the prediction count and how many of them were unparseable.
pub fn cmd_parse(run_dir: &Path, gold: &Path, strictness: Strictness, out: &Path) -> Result<(usize, usize)> {
    let golds = load_gold(gold)?;
    let preds = parse_run(run_dir, &golds, strictness)?;
    let failed = preds.iter().filter(|p| p.diagnostics.tier_used == ParseTier::Failed).count();
    write_file(out, &encode_predictions(&preds))?;
    Ok((preds.len(), failed))
}

/// Where predictions for an evaluation come from.
#[derive(Debug, Clone)]
pub enum PredictionSource {
    RunDir(PathBuf),
    File(PathBuf),
}

impl PredictionSource {
    fn label(&self) -> String {
        match self {
            PredictionSource::RunDir(p) | PredictionSource::File(p) => file_stem(p),
        }
    }

    fn load(&self, golds: &[GoldRecord], strictness: Strictness) -> Result<Vec<Prediction>> {
        match self {
            PredictionSource::RunDir(d) => parse_run(d, golds, strictness),
            PredictionSource::File(f) => load_predictions(f),
        }
    }
}

/// Score one or more runs. The first source's report is written as
/// `report.{json,md,csv}`; with several sources `comparison.md` is added.
pub fn cmd_eval(
    sources: &[(Option<String>, PredictionSource)],
    gold: &Path,
    strictness: Strictness,
    out_dir: &Path,
) -> Result<Vec<ScoreReport>> {
    let golds = load_gold(gold)?;
    let mut reports = Vec::new();
    let mut labels = Vec::new();
    for (label, source) in sources {
        let preds = source.load(&golds, strictness)?;
        reports.push(score_run(&golds, &preds, &[])?);
        labels.push(label.clone().unwrap_or_else(|| source.label()));
    }
    let Some(primary) = reports.first() else {
        bail!("no predictions to evaluate");
    };
    write_file(&out_dir.join("report.json"), &to_pretty_json(primary))?;
    write_file(&out_dir.join("report.md"), &primary.to_markdown())?;
    write_file(&out_dir.join("report.csv"), &primary.to_csv()?)?;
    if reports.len() > 1 {
        let pairs: Vec<(&str, &ScoreReport)> = labels.iter().map(String::as_str).zip(&reports).collect();
        write_file(&out_dir.join("comparison.md"), &comparison_markdown(&pairs))?;
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

/// Re-render saved reports; several inputs give a comparison table.
pub fn cmd_report(inputs: &[PathBuf], format: ReportFormat) -> Result<String> {
    let mut reports = Vec::new();
    for p in inputs {
        let r: ScoreReport = serde_json::from_str(&read_text(p)?).with_context(|| format!("{}", p.display()))?;
        let label = p
            .parent()
            .map(file_stem)
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| file_stem(p));
        reports.push((label, r));
    }
    match (reports.as_slice(), format) {
        ([], _) => bail!("no report files"),
        ([(_, r)], ReportFormat::Markdown) => Ok(r.to_markdown()),
        ([(_, r)], ReportFormat::Csv) => Ok(r.to_csv()?),
        ([(_, r)], ReportFormat::Json) => Ok(to_pretty_json(r)),
        (many, ReportFormat::Markdown) => {
            let pairs: Vec<(&str, &ScoreReport)> = many.iter().map(|(l, r)| (l.as_str(), r)).collect();
            Ok(comparison_markdown(&pairs))
        }
        (_, _) => bail!("several reports can only be compared as markdown"),
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilterOptions {
    pub keywords: Option<PathBuf>,
    pub check_sensitive: bool,
    pub jaccard_threshold: Option<f64>,
    pub shingle_n: Option<usize>,
    pub min_output_chars: Option<usize>,
}

pub fn load_dialogue(path: &Path) -> Result<Vec<DialogueSample>> {
    read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

pub fn encode_dialogue(samples: &[DialogueSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

pub fn cmd_filter_dialogue(input: &Path, opts: &FilterOptions, out: &Path) -> Result<FilterReport> {
    let samples = load_dialogue(input)?;
    let mut config = PipelineConfig::default();
    config.quality.check_sensitive = opts.check_sensitive;
    if let Some(k) = &opts.keywords {
        config.quality.keywords = Some(KeywordList::load(k)?);
    }
    if let Some(t) = opts.jaccard_threshold {
        config.near.jaccard_threshold = t;
    }
    if let Some(n) = opts.shingle_n {
        config.near.shingle_n = n;
    }
    if let Some(m) = opts.min_output_chars {
        config.quality.min_output_chars = m;
    }
    let (kept, report) = run_pipeline(samples, &config)?;
    write_file(out, &encode_dialogue(&kept))?;
    Ok(report)
}

pub fn filter_report_json(report: &FilterReport) -> String {
    to_pretty_json(report)
}

/// Human-readable summary of a score report for the terminal.
pub fn summary_lines(report: &ScoreReport) -> String {
    let mut out = String::new();
    for d in &report.per_dataset {
        let _ = writeln!(out, "{} {} ({}): F1 {:.4}", d.dataset, d.view, d.lang, d.f1);
    }
    let groups: BTreeMap<(TaskKind, Language), f64> = report
        .per_task_language_macro
        .iter()
        .map(|g| ((g.task, g.lang), g.avg_f1))
        .collect();
    for ((t, l), avg) in groups {
        let _ = writeln!(out, "Avg {t} ({l}): {avg:.2}");
    }
    out
}

/// Canonical output per gold record, for echo-mode mock endpoints.
pub fn gold_index(golds: &[GoldRecord]) -> Result<HashMap<String, String>> {
    golds
        .iter()
        .map(|g| Ok((g.id.clone(), uie_core::codec::encode_gold(g)?)))
        .collect()
}
