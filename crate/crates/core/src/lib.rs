//! Corpus construction and evaluation for instruction-tuned universal
//! information extraction (NER, RE, EE) in Chinese and English.
//!
//! The pipeline: [`ingest`] source datasets into [`model::GoldRecord`]s,
//! augment label options with [`sampler`], render (instruction, input,
//! output) triples with [`instruct`] and [`codec`], parse model answers back
//! with [`codec::parse_model_output`], and score them with [`eval`].
//! [`dialogue`] curates general instruction data.

pub mod codec;
pub mod dialogue;
pub mod eval;
pub mod ingest;
pub mod instruct;
pub mod model;
pub mod sampler;

pub use codec::{encode_gold, parse_model_output, ParseTier, Prediction, Strictness};
pub use eval::{macro_average, match_strict, micro_f1, score_run, MatchCounts, ScoreReport};
pub use model::{
    build_label_universe, normalize_mention, project_tuples, ExtractionTuple, GoldRecord, Language,
    LabelUniverse, TaskKind, TupleSet,
};
pub use instruct::{build_sft_corpus, render_instruction, SftRecord, TemplateSet};
pub use sampler::{augment_corpus, augment_labels, SamplingPolicy};
