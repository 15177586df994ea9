//! A compact trigram language-model toolkit for predictive text input.
//!
//! The pipeline runs left to right:
//!
//! 1. [`textprep`] — raw text to tagged, tokenized sentences;
//! 2. [`counts`] — n-gram counting and vocabulary selection;
//! 3. [`prune`] — importance-ranked trigram and bigram pruning under caps;
//! 4. [`arpa`] — relative-frequency scoring and ARPA text serialization;
//! 5. [`class`] — the class companion model from a tag lexicon;
//! 6. [`binfmt`] — the three-file quantized binary model format;
//! 7. [`engine`] — word completion and next-word prediction queries;
//! 8. [`evalkit`] — keystroke-saving and prediction-rate evaluation.
//!
//! [`pipeline`] wires steps 1–6 into a single build call, [`synth`] makes
//! deterministic synthetic corpora for tests and benchmarks, and [`topk`]
//! holds the bounded top-K selector the query side is built on.
//!
//! The `parallel` feature (on by default) runs counting, pruning, file
//! loading, and evaluation on a thread pool; every parallel entry point has
//! a sequential twin that produces identical results.

pub mod arpa;
pub mod binfmt;
pub mod class;
pub mod counts;
pub mod engine;
pub mod evalkit;
pub mod pipeline;
pub mod prune;
pub mod synth;
pub mod textprep;
pub mod topk;

pub use counts::{ModelCaps, NgramCounts, Vocabulary};
pub use engine::{Engine, EngineConfig, Predictor, ScoreBranch, Suggestion};
pub use textprep::{PrepConfig, Sentence, TagToken};
