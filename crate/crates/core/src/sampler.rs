//! Label-option augmentation: every instance's option list gets a few labels
//! the instance does not contain, then the order is shuffled.
//!
//! Randomness is derived from `(run_seed, instance_id)` alone, so a record's
//! options do not depend on where it sits in the corpus.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{GoldRecord, LabelUniverse};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplingError {
    #[error("label `{label}` is not in the {dataset} label universe{}", record.as_ref().map(|r| format!(" (record {r})")).unwrap_or_default())]
    LabelNotInUniverse {
        label: String,
        dataset: String,
        record: Option<String>,
    },
    #[error("invalid sampling policy: min_negatives {min} > max_negatives {max}")]
    InvalidPolicy { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingPolicy {
    pub max_negatives: usize,
    pub min_negatives: usize,
    pub shuffle: bool,
    pub run_seed: u64,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            max_negatives: 5,
            min_negatives: 1,
            shuffle: true,
            run_seed: 0,
        }
    }
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.min_negatives > self.max_negatives || self.max_negatives == 0 {
            return Err(SamplingError::InvalidPolicy {
                min: self.min_negatives,
                max: self.max_negatives,
            });
        }
        Ok(())
    }
}

fn instance_rng(run_seed: u64, instance_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(run_seed.to_le_bytes());
    hasher.update(instance_id.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Add `k` labels from `universe \ labels` to `labels`, with `k` uniform in
/// the policy bounds clipped to the pool size.
///
/// Without shuffling the gold labels keep their order and negatives are
/// appended. With shuffling the result also does not depend on the input
/// order of `labels`.
pub fn augment_labels(
    labels: &[String],
    universe: &LabelUniverse,
    policy: &SamplingPolicy,
    instance_id: &str,
) -> Result<Vec<String>, SamplingError> {
    policy.validate()?;
    let mut gold: Vec<String> = Vec::with_capacity(labels.len());
    for label in labels {
        if !universe.contains(label) {
            return Err(SamplingError::LabelNotInUniverse {
                label: label.clone(),
                dataset: universe.dataset.clone(),
                record: None,
            });
        }
        if !gold.contains(label) {
            gold.push(label.clone());
        }
    }
    let pool: Vec<&String> = universe
        .labels
        .iter()
        .filter(|l| !gold.contains(l))
        .collect();

    let mut rng = instance_rng(policy.run_seed, instance_id);
    let lo = policy.min_negatives.min(pool.len());
    let hi = policy.max_negatives.min(pool.len());
    let k = rng.random_range(lo..=hi);

    let mut out = gold;
    out.extend(pool.choose_multiple(&mut rng, k).map(|l| (*l).clone()));
    if policy.shuffle {
        out.sort();
        out.shuffle(&mut rng);
    }
    Ok(out)
}

/// Rewrite `label_options` of every record; annotations are not touched.
pub fn augment_corpus(
    records: &[GoldRecord],
    universe: &LabelUniverse,
    policy: &SamplingPolicy,
) -> Result<Vec<GoldRecord>, SamplingError> {
    records
        .iter()
        .map(|r| {
            let options = augment_labels(&r.gold_labels(), universe, policy, &r.id).map_err(
                |e| match e {
                    SamplingError::LabelNotInUniverse { label, dataset, .. } => {
                        SamplingError::LabelNotInUniverse {
                            label,
                            dataset,
                            record: Some(r.id.clone()),
                        }
                    }
                    other => other,
                },
            )?;
            let mut out = r.clone();
            out.label_options = options;
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Entity, Language, TaskKind};

    fn universe(labels: &[&str]) -> LabelUniverse {
        LabelUniverse {
            dataset: "toy".into(),
            task: TaskKind::Ner,
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exhausted_pool_is_permutation() {
        let u = universe(&["PER", "LOC", "ORG"]);
        let mut out = augment_labels(&strings(&["PER", "LOC", "ORG"]), &u, &SamplingPolicy::default(), "x").unwrap();
        out.sort();
        assert_eq!(out, strings(&["LOC", "ORG", "PER"]));
    }

    #[test]
    fn exactly_one_negative() {
        let u = universe(&["PER", "LOC", "ORG"]);
        let policy = SamplingPolicy { max_negatives: 1, min_negatives: 1, ..Default::default() };
        let admissible = [strings(&["LOC", "PER"]), strings(&["ORG", "PER"])];
        for id in 0..50 {
            let mut out = augment_labels(&strings(&["PER"]), &u, &policy, &id.to_string()).unwrap();
            out.sort();
            assert!(admissible.contains(&out), "{out:?}");
        }
    }

    #[test]
    fn deterministic_per_instance() {
        let u = universe(&["A", "B", "C", "D", "E", "F", "G"]);
        let p = SamplingPolicy { run_seed: 9, ..Default::default() };
        let a = augment_labels(&strings(&["A"]), &u, &p, "rec-1").unwrap();
        let b = augment_labels(&strings(&["A"]), &u, &p, "rec-1").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shuffled_output_ignores_input_order() {
        let u = universe(&["A", "B", "C", "D", "E", "F", "G"]);
        let p = SamplingPolicy::default();
        let a = augment_labels(&strings(&["A", "C"]), &u, &p, "r").unwrap();
        let b = augment_labels(&strings(&["C", "A"]), &u, &p, "r").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_shuffle_keeps_gold_first() {
        let u = universe(&["A", "B", "C", "D", "E"]);
        let p = SamplingPolicy { shuffle: false, min_negatives: 2, max_negatives: 2, ..Default::default() };
        let out = augment_labels(&strings(&["D", "B"]), &u, &p, "r").unwrap();
        assert_eq!(&out[..2], &strings(&["D", "B"])[..]);
        assert_eq!(out.len(), 4);
        assert!(out[2..].iter().all(|l| ["A", "C", "E"].contains(&l.as_str())));
    }

    #[test]
    fn label_not_in_universe() {
        let u = universe(&["PER"]);
        assert!(matches!(
            augment_labels(&strings(&["LOC"]), &u, &SamplingPolicy::default(), "r"),
            Err(SamplingError::LabelNotInUniverse { .. })
        ));
    }

    #[test]
    fn invalid_policy() {
        let u = universe(&["PER"]);
        let p = SamplingPolicy { min_negatives: 3, max_negatives: 2, ..Default::default() };
        assert!(matches!(augment_labels(&[], &u, &p, "r"), Err(SamplingError::InvalidPolicy { .. })));
    }

    fn rec(id: &str, ty: &str) -> GoldRecord {
        let mut r = GoldRecord::new(id, "toy", TaskKind::Ner, Language::En, "text");
        r.entities.push(Entity { entity_type: ty.into(), mention: "m".into() });
        r.label_options = vec![ty.into()];
        r
    }

    #[test]
    fn corpus_annotations_untouched() {
        let u = universe(&["PER", "LOC", "ORG", "MISC"]);
        let recs = vec![rec("a", "PER"), rec("b", "LOC"), rec("c", "ORG")];
        let out = augment_corpus(&recs, &u, &SamplingPolicy::default()).unwrap();
        assert_eq!(out.len(), 3);
        for (before, after) in recs.iter().zip(&out) {
            assert_eq!(before.entities, after.entities);
            assert_eq!(before.text, after.text);
            assert_eq!(before.id, after.id);
            assert!(after.label_options.len() >= 2);
        }
        assert!(augment_corpus(&[], &u, &SamplingPolicy::default()).unwrap().is_empty());
    }

    #[test]
    fn corpus_error_carries_record_id() {
        let u = universe(&["PER"]);
        let err = augment_corpus(&[rec("bad", "LOC")], &u, &SamplingPolicy::default()).unwrap_err();
        assert!(err.to_string().contains("record bad"));
    }
}
