//! Curation of generated dialogue samples: format normalization, quality
//! rejection (incomplete, meaningless, sensitive), and exact plus
//! near-duplicate removal.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::normalize_mention;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("sensitive-term check enabled but no keyword list was provided")]
    KeywordListMissing,
    #[error("jaccard threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("shingle size must be at least 1")]
    InvalidShingleSize,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueSample {
    pub id: String,
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    pub output: String,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    DuplicateExact,
    DuplicateNear,
    Incomplete,
    Meaningless,
    Sensitive,
    FormatUnfixable,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
}

impl FilterReport {
    fn new(input: usize) -> Self {
        FilterReport { input, kept: input, ..Default::default() }
    }

    fn reject(&mut self, reason: RejectReason) {
        self.kept -= 1;
        *self.rejected.entry(reason).or_default() += 1;
    }

    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }

    /// Fold a later stage (whose input is this stage's kept set) into this one.
    pub fn chain(mut self, next: &FilterReport) -> Self {
        debug_assert_eq!(self.kept, next.input);
        self.kept = next.kept;
        for (&reason, &n) in &next.rejected {
            *self.rejected.entry(reason).or_default() += n;
        }
        self
    }
}

fn dedup_key(s: &DialogueSample) -> (String, String, String) {
    (
        normalize_mention(&s.instruction),
        normalize_mention(&s.input),
        normalize_mention(&s.output),
    )
}

/// Keep the first sample of every whitespace-normalized (instruction, input, output).
pub fn exact_dedup(samples: Vec<DialogueSample>) -> (Vec<DialogueSample>, FilterReport) {
    let mut report = FilterReport::new(samples.len());
    let mut seen = HashSet::with_capacity(samples.len());
    let kept = samples
        .into_iter()
        .filter(|s| {
            let fresh = seen.insert(dedup_key(s));
            if !fresh {
                report.reject(RejectReason::DuplicateExact);
            }
            fresh
        })
        .collect();
    (kept, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NearDedupConfig {
    pub shingle_n: usize,
    pub jaccard_threshold: f64,
}

impl Default for NearDedupConfig {
    fn default() -> Self {
        NearDedupConfig { shingle_n: 3, jaccard_threshold: 0.8 }
    }
}

/// Text compared by near-duplicate detection.
pub fn near_dedup_text(s: &DialogueSample) -> String {
    format!("{}\n{}\n{}", s.instruction, s.input, s.output)
}

/// Character n-gram set. Strings shorter than `n` yield themselves as the
/// only shingle.
pub fn shingles(text: &str, n: usize) -> HashSet<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < n {
        return if chars.is_empty() {
            HashSet::new()
        } else {
            std::iter::once(text.to_string()).collect()
        };
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Jaccard similarity of character n-gram sets; two empty sets are identical.
pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Reject every sample whose shingle Jaccard similarity to any earlier
/// sample reaches the threshold.
///
/// Earlier samples are compared whether or not they were kept, which makes
/// the rejected set monotone in the threshold. Candidates come from an
/// inverted shingle index; the similarity computed for each candidate is exact.
pub fn near_dedup(
    samples: Vec<DialogueSample>,
    config: &NearDedupConfig,
) -> Result<(Vec<DialogueSample>, FilterReport), FilterError> {
    let t = config.jaccard_threshold;
    if !(t > 0.0 && t <= 1.0) {
        return Err(FilterError::InvalidThreshold(t));
    }
    if config.shingle_n == 0 {
        return Err(FilterError::InvalidShingleSize);
    }

    let mut report = FilterReport::new(samples.len());
    let mut index: HashMap<String, Vec<u32>> = HashMap::new();
    let mut sizes: Vec<usize> = Vec::with_capacity(samples.len());
    let mut empty_seen = false;
    let mut kept = Vec::new();

    for sample in samples {
        let sh = shingles(&near_dedup_text(&sample), config.shingle_n);
        let doc = sizes.len() as u32;
        let duplicate = if sh.is_empty() {
            empty_seen
        } else {
            let mut shared: HashMap<u32, usize> = HashMap::new();
            for s in &sh {
                if let Some(posting) = index.get(s) {
                    for &d in posting {
                        *shared.entry(d).or_default() += 1;
                    }
                }
            }
            shared.into_iter().any(|(d, inter)| {
                let union = sizes[d as usize] + sh.len() - inter;
                inter as f64 / union as f64 >= t
            })
        };

        empty_seen |= sh.is_empty();
        sizes.push(sh.len());
        for s in sh {
            index.entry(s).or_default().push(doc);
        }
        if duplicate {
            report.reject(RejectReason::DuplicateNear);
        } else {
            kept.push(sample);
        }
    }
    Ok((kept, report))
}

/// Case-folded literal terms; `#` starts a comment line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordList {
    terms: Vec<String>,
}

impl KeywordList {
    pub fn parse(text: &str) -> Self {
        let terms = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        KeywordList { terms }
    }

    pub fn load(path: &Path) -> Result<Self, FilterError> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn matches(&self, text: &str) -> bool {
        if self.terms.is_empty() {
            return false;
        }
        let folded = text.to_lowercase();
        self.terms.iter().any(|t| folded.contains(t.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityConfig {
    pub min_output_chars: usize,
    pub min_distinct_ratio: f64,
    pub check_sensitive: bool,
    pub keywords: Option<KeywordList>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            min_output_chars: 2,
            min_distinct_ratio: 0.05,
            check_sensitive: false,
            keywords: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject(RejectReason),
}

/// Output ends inside a string literal or with an unclosed bracket.
fn ends_mid_structure(text: &str) -> bool {
    let mut stack: Vec<char> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for c in text.chars() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '(' | '[' | '{' | '（' | '【' | '「' | '《' => stack.push(c),
            ')' | ']' | '}' | '）' | '】' | '」' | '》' => {
                let opener = match c {
                    ')' => '(',
                    ']' => '[',
                    '}' => '{',
                    '）' => '（',
                    '】' => '【',
                    '」' => '「',
                    _ => '《',
                };
                if stack.last() == Some(&opener) {
                    stack.pop();
                }
            }
            _ => {}
        }
    }
    in_string || !stack.is_empty()
}

/// Whole text is one unit of at most a third of its length repeated.
fn is_repeated_unit(chars: &[char]) -> bool {
    let n = chars.len();
    (1..=n / 3).any(|unit| n.is_multiple_of(unit) && chars.chunks(unit).all(|c| c == &chars[..unit]))
}

pub fn filter_quality(sample: &DialogueSample, config: &QualityConfig) -> Result<Verdict, FilterError> {
    if config.check_sensitive && config.keywords.is_none() {
        return Err(FilterError::KeywordListMissing);
    }
    let output = sample.output.trim();
    let dense: Vec<char> = output.chars().filter(|c| !c.is_whitespace()).collect();

    if dense.len() < config.min_output_chars || ends_mid_structure(output) {
        return Ok(Verdict::Reject(RejectReason::Incomplete));
    }
    let distinct = dense.iter().collect::<HashSet<_>>().len();
    if (distinct as f64) / (dense.len() as f64) < config.min_distinct_ratio || is_repeated_unit(&dense) {
        return Ok(Verdict::Reject(RejectReason::Meaningless));
    }
    if config.check_sensitive {
        let kw = config.keywords.as_ref().expect("checked above");
        let all = near_dedup_text(sample);
        if kw.matches(&all) {
            return Ok(Verdict::Reject(RejectReason::Sensitive));
        }
    }
    Ok(Verdict::Keep)
}

fn collapsible_punct(c: char) -> bool {
    matches!(c, '!' | '?' | '.' | ',' | ';' | ':')
        || matches!(c as u32,
            0x3001..=0x3003      // 、。〃
            | 0x3008..=0x3011    // 〈〉《》「」『』【】
            | 0xFF01..=0xFF0F    // fullwidth ！＂＃…／
            | 0xFF1A..=0xFF20    // ：；＜＝＞？＠
            | 0x2010..=0x2027    // dashes, quotes, …
        )
}

/// CRLF to LF, drop control characters other than LF and TAB, squash runs of
/// three or more identical punctuation marks, squash three or more blank
/// lines into one.
pub fn normalize_format(text: &str) -> String {
    let unix = text.replace("\r\n", "\n").replace('\r', "\n");
    let cleaned: String = unix
        .chars()
        .filter(|&c| c == '\n' || c == '\t' || !c.is_control())
        .collect();

    let chars: Vec<char> = cleaned.chars().collect();
    let mut squashed = String::with_capacity(cleaned.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let mut j = i;
        while j < chars.len() && chars[j] == c {
            j += 1;
        }
        let run = j - i;
        if collapsible_punct(c) && run >= 3 {
            squashed.push(c);
        } else {
            squashed.extend(&chars[i..j]);
        }
        i = j;
    }

    let mut out: Vec<&str> = Vec::new();
    let mut blank_run: Vec<&str> = Vec::new();
    for line in squashed.split('\n') {
        if line.trim_matches([' ', '\t']).is_empty() {
            blank_run.push(line);
            continue;
        }
        flush_blank(&mut out, &mut blank_run);
        out.push(line);
    }
    flush_blank(&mut out, &mut blank_run);
    out.join("\n")
}

fn flush_blank<'a>(out: &mut Vec<&'a str>, run: &mut Vec<&'a str>) {
    if run.len() >= 3 {
        out.push("");
    } else {
        out.extend(run.iter());
    }
    run.clear();
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub quality: QualityConfig,
    pub near: NearDedupConfig,
}

/// normalize → quality → exact dedup → near dedup.
pub fn run_pipeline(
    samples: Vec<DialogueSample>,
    config: &PipelineConfig,
) -> Result<(Vec<DialogueSample>, FilterReport), FilterError> {
    let mut report = FilterReport::new(samples.len());
    let mut passed = Vec::with_capacity(samples.len());
    for mut s in samples {
        s.instruction = normalize_format(&s.instruction);
        s.input = normalize_format(&s.input);
        s.output = normalize_format(&s.output);
        if s.instruction.trim().is_empty() || s.output.trim().is_empty() {
            report.reject(RejectReason::FormatUnfixable);
            continue;
        }
        match filter_quality(&s, &config.quality)? {
            Verdict::Keep => passed.push(s),
            Verdict::Reject(reason) => report.reject(reason),
        }
    }
    let (exact, r1) = exact_dedup(passed);
    let (near, r2) = near_dedup(exact, &config.near)?;
    Ok((near, report.chain(&r1).chain(&r2)))
}
