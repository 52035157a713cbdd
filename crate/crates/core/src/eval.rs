//! Strict-match scoring: micro P/R/F1 within a dataset, unweighted macro
//! averages across the datasets of a (task, language) group.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Prediction;
use crate::model::{project_tuples, GoldRecord, Language, ModelError, TaskKind, TupleSet};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot average an empty list")]
    EmptyList,
    #[error("more than one prediction for record {0}")]
    DuplicatePrediction(String),
    #[error("gold record id {0} appears more than once")]
    DuplicateGold(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl MatchCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        MatchCounts { tp, fp, fn_ }
    }
}

impl Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, o: MatchCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for MatchCounts {
    fn sum<I: Iterator<Item = MatchCounts>>(iter: I) -> MatchCounts {
        iter.fold(MatchCounts::default(), Add::add)
    }
}

pub fn match_strict(gold: &TupleSet, pred: &TupleSet) -> MatchCounts {
    let tp = gold.intersection(pred).count() as u64;
    MatchCounts::new(tp, pred.len() as u64 - tp, gold.len() as u64 - tp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when there was nothing to find and nothing was predicted.
    pub vacuous: bool,
}

pub fn micro_f1(c: MatchCounts) -> Prf {
    if c.tp == 0 && c.fp == 0 && c.fn_ == 0 {
        return Prf { precision: 1.0, recall: 1.0, f1: 1.0, vacuous: true };
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1, vacuous: false }
}

// Values are accumulated in millionths of a percentage point so the
// half-up rounding to hundredths is exact for inputs with <= 6 decimals.
const MICROS: f64 = 1_000_000.0;
const MICROS_PER_HUNDREDTH: i128 = 10_000;

/// Arithmetic mean of F1 percentages, rounded half-up to 2 decimals.
pub fn macro_average(f1s: &[f64]) -> Result<f64, EvalError> {
    if f1s.is_empty() {
        return Err(EvalError::EmptyList);
    }
    let sum: i128 = f1s.iter().map(|v| (v * MICROS).round() as i128).sum();
    let den = f1s.len() as i128 * MICROS_PER_HUNDREDTH;
    // floor((2*sum + den) / (2*den)) == round-half-up(sum / den)
    let hundredths = (2 * sum + den).div_euclid(2 * den);
    Ok(hundredths as f64 / 100.0)
}

/// Render a fraction in [0, 1] as a percentage with 2 decimals.
pub fn percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    pub dataset: String,
    pub view: TaskKind,
    pub lang: Language,
    pub instances: usize,
    pub counts: MatchCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAverage {
    pub task: TaskKind,
    pub lang: Language,
    pub datasets: usize,
    /// Mean of the member datasets' F1, as a percentage.
    pub avg_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_dataset: Vec<DatasetScore>,
    pub per_task_language_macro: Vec<GroupAverage>,
    pub flags: Vec<String>,
}

#[derive(Default)]
struct Accumulator {
    lang: Option<Language>,
    instances: usize,
    counts: MatchCounts,
}

/// Score predictions against gold records.
///
/// `views` restricts which tuple views are scored; empty means each
/// dataset's default views (EE-joint datasets yield a trigger row and an
/// argument row). A missing prediction scores as empty.
pub fn score_run(
    golds: &[GoldRecord],
    preds: &[Prediction],
    views: &[TaskKind],
) -> Result<ScoreReport, EvalError> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.record_id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.record_id.clone()));
        }
    }

    let mut flags = Vec::new();
    let mut seen_gold = HashSet::with_capacity(golds.len());
    // keyed by name so rows never depend on instance order
    let mut acc: BTreeMap<(String, TaskKind), Accumulator> = BTreeMap::new();
    let mut langs_mixed = Vec::new();

    for gold in golds {
        if !seen_gold.insert(gold.id.as_str()) {
            return Err(EvalError::DuplicateGold(gold.id.clone()));
        }
        let pred = by_id.get(gold.id.as_str());
        for &view in gold.task.scoring_views() {
            if !views.is_empty() && !views.contains(&view) {
                continue;
            }
            let gold_tuples = project_tuples(gold, view)?;
            let pred_tuples = match pred {
                Some(p) if p.task.supports_view(view) => project_tuples(*p, view)?,
                Some(p) => {
                    flags.push(format!(
                        "prediction for {} has task {} which cannot be scored as {view}",
                        gold.id, p.task
                    ));
                    TupleSet::new()
                }
                None => TupleSet::new(),
            };
            let entry = acc.entry((gold.dataset.clone(), view)).or_default();
            match entry.lang {
                None => entry.lang = Some(gold.lang),
                Some(l) if l != gold.lang => langs_mixed.push(gold.dataset.clone()),
                Some(_) => {}
            }
            entry.instances += 1;
            entry.counts += match_strict(&gold_tuples, &pred_tuples);
        }
    }

    let orphans = preds.iter().filter(|p| !seen_gold.contains(p.record_id.as_str())).count();
    if orphans > 0 {
        flags.push(format!("{orphans} prediction(s) have no matching gold record"));
    }
    langs_mixed.sort();
    langs_mixed.dedup();
    for d in langs_mixed {
        flags.push(format!("dataset {d} mixes languages; scored under its first language"));
    }

    let mut per_dataset = Vec::with_capacity(acc.len());
    for ((dataset, view), a) in acc {
        let prf = micro_f1(a.counts);
        if prf.vacuous {
            flags.push(format!("dataset {dataset} ({view}) is vacuous: no gold and no predicted tuples"));
        }
        per_dataset.push(DatasetScore {
            dataset,
            view,
            lang: a.lang.expect("accumulator has at least one instance"),
            instances: a.instances,
            counts: a.counts,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            vacuous: prf.vacuous,
        });
    }

    let mut groups: BTreeMap<(TaskKind, Language), Vec<f64>> = BTreeMap::new();
    for d in &per_dataset {
        groups.entry((d.view, d.lang)).or_default().push(d.f1 * 100.0);
    }
    let per_task_language_macro = groups
        .into_iter()
        .map(|((task, lang), f1s)| {
            Ok(GroupAverage {
                task,
                lang,
                datasets: f1s.len(),
                avg_f1: macro_average(&f1s)?,
            })
        })
        .collect::<Result<_, EvalError>>()?;

    Ok(ScoreReport { per_dataset, per_task_language_macro, flags })
}

impl ScoreReport {
    pub fn group(&self, task: TaskKind, lang: Language) -> impl Iterator<Item = &DatasetScore> {
        self.per_dataset
            .iter()
            .filter(move |d| d.view == task && d.lang == lang)
    }

    pub fn average(&self, task: TaskKind, lang: Language) -> Option<f64> {
        self.per_task_language_macro
            .iter()
            .find(|g| g.task == task && g.lang == lang)
            .map(|g| g.avg_f1)
    }

    /// One table per (task, language) group: dataset rows then an Avg row.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for g in &self.per_task_language_macro {
            let _ = writeln!(out, "### {} ({})\n", g.task, g.lang);
            out.push_str("| Dataset | P | R | F1 |\n|---|---:|---:|---:|\n");
            for d in self.group(g.task, g.lang) {
                let _ = writeln!(
                    out,
                    "| {} | {:.2} | {:.2} | {:.2} |",
                    d.dataset,
                    percent(d.precision),
                    percent(d.recall),
                    percent(d.f1)
                );
            }
            let _ = writeln!(out, "| Avg | | | {:.2} |\n", g.avg_f1);
        }
        if !self.flags.is_empty() {
            out.push_str("Notes:\n\n");
            for f in &self.flags {
                let _ = writeln!(out, "- {f}");
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "task", "lang", "instances", "tp", "fp", "fn", "precision", "recall", "f1"])?;
        for d in &self.per_dataset {
            w.write_record([
                d.dataset.clone(),
                d.view.to_string(),
                d.lang.to_string(),
                d.instances.to_string(),
                d.counts.tp.to_string(),
                d.counts.fp.to_string(),
                d.counts.fn_.to_string(),
                format!("{:.2}", percent(d.precision)),
                format!("{:.2}", percent(d.recall)),
                format!("{:.2}", percent(d.f1)),
            ])?;
        }
        for g in &self.per_task_language_macro {
            w.write_record([
                "Avg".to_string(),
                g.task.to_string(),
                g.lang.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("{:.2}", g.avg_f1),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv of UTF-8 strings"))
    }
}

/// Side-by-side F1 table of several labelled reports (e.g. two endpoints).
pub fn comparison_markdown(reports: &[(&str, &ScoreReport)]) -> String {
    let mut keys: Vec<(TaskKind, Language)> = Vec::new();
    for (_, r) in reports {
        for g in &r.per_task_language_macro {
            if !keys.contains(&(g.task, g.lang)) {
                keys.push((g.task, g.lang));
            }
        }
    }
    keys.sort();
    let mut out = String::new();
    for (task, lang) in keys {
        let _ = writeln!(out, "### {task} ({lang})\n");
        out.push_str("| Dataset |");
        for (name, _) in reports {
            let _ = write!(out, " {name} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(reports.len()));
        out.push('\n');
        let mut datasets: Vec<&str> = Vec::new();
        for (_, r) in reports {
            for d in r.group(task, lang) {
                if !datasets.contains(&d.dataset.as_str()) {
                    datasets.push(&d.dataset);
                }
            }
        }
        for ds in datasets {
            let _ = write!(out, "| {ds} |");
            for (_, r) in reports {
                match r.group(task, lang).find(|d| d.dataset == ds) {
                    Some(d) => {
                        let _ = write!(out, " {:.2} |", percent(d.f1));
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out.push_str("| Avg |");
        for (_, r) in reports {
            match r.average(task, lang) {
                Some(a) => {
                    let _ = write!(out, " {a:.2} |");
                }
                None => out.push_str(" - |"),
            }
        }
        out.push_str("\n\n");
    }
    out
}
