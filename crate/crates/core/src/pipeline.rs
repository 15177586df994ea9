//! One-call model build: raw corpus in, the three model files out.
//!
//! Stages: preprocess → count → select vocabulary → prune → score →
//! quantize/serialize → class statistics → write. Output files are staged
//! with a `.tmp` suffix and renamed together, so a failed build never
//! leaves a partial file set behind.

use std::io::{BufRead, Read};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::arpa::{assign_scores, DEFAULT_LAMBDA};
use crate::binfmt::{
    build_fwo, serialize_data_file, write_class_file, BinfmtError, QuantParams, VocabTrie,
};
use crate::class::{
    build_class_model, ClassError, ClassLexicon, DEFAULT_CLASS_K, DEFAULT_MAX_CLASSES,
};
use crate::counts::{count_ngrams, coverage, select_vocabulary, ModelCaps};
use crate::engine::ModelPaths;
use crate::prune::{prune, PruneParams, DEFAULT_ALPHA};
use crate::textprep::{preprocess, PrepConfig};

pub const DEFAULT_R: f64 = 0.5;
pub const DEFAULT_SUGGESTIONS: u16 = 5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("could not read the corpus: {0}")]
    Corpus(std::io::Error),
    #[error("invalid build options: {0}")]
    Config(String),
    #[error("class lexicon problem: {0}")]
    Lexicon(#[from] ClassError),
    #[error("could not serialize the model: {0}")]
    Serialize(#[from] BinfmtError),
    #[error("could not write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Everything the build pipeline is allowed to vary.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub prep: PrepConfig,
    pub caps: ModelCaps,
    /// Backoff factor in the trigram pruning score, (0, 1].
    pub alpha: f64,
    /// Per-backoff-step penalty stored in the model, (0, 1].
    pub lambda: f64,
    /// Class-interpolation weight stored in the model, [0, 1].
    pub r: f64,
    /// Suggestion-list length baked into the precomputed tables, 1..=9.
    pub k: u16,
    /// Class inventory cap, 1..=256 (one slot is the catch-all).
    pub max_classes: usize,
    /// Stored members per class, ≥ 1.
    pub class_k: usize,
}

impl Default for BuildOptions {
    fn default() -> BuildOptions {
        BuildOptions {
            prep: PrepConfig::default(),
            caps: ModelCaps::default(),
            alpha: DEFAULT_ALPHA,
            lambda: DEFAULT_LAMBDA,
            r: DEFAULT_R,
            k: DEFAULT_SUGGESTIONS,
            max_classes: DEFAULT_MAX_CLASSES,
            class_k: DEFAULT_CLASS_K,
        }
    }
}

impl BuildOptions {
    pub fn validate(&self) -> Result<(), String> {
        self.caps.validate()?;
        if !(1..=9).contains(&self.k) {
            return Err(format!("suggestion list length must be 1..=9, got {}", self.k));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(format!("lambda must lie in (0, 1], got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(format!("r must lie in [0, 1], got {}", self.r));
        }
        if !(1..=256).contains(&self.max_classes) {
            return Err(format!("max_classes must be 1..=256, got {}", self.max_classes));
        }
        if self.class_k == 0 {
            return Err("class_k must be at least 1".into());
        }
        Ok(())
    }
}

/// What the build saw and produced, for logs and sanity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub sentences: usize,
    pub tokens: u64,
    pub invalid_sequences: usize,
    /// Distinct uni/bi/trigrams counted (before any cap or pruning).
    pub distinct: [usize; 3],
    /// Vocabulary size and kept bi/trigram entries in the model.
    pub kept: [usize; 3],
    /// Share of corpus tokens covered by the selected vocabulary.
    pub coverage_percent: f64,
    pub n_classes: usize,
    /// Bytes written: vocabulary, n-gram data, class data.
    pub file_bytes: [u64; 3],
}

impl std::fmt::Display for BuildReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "corpus     {} sentences, {} tokens", self.sentences, self.tokens)?;
        if self.invalid_sequences > 0 {
            writeln!(f, "           {} invalid byte sequences replaced", self.invalid_sequences)?;
        }
        writeln!(
            f,
            "counted    {} words, {} bigrams, {} trigrams",
            self.distinct[0], self.distinct[1], self.distinct[2]
        )?;
        writeln!(
            f,
            "kept       {} words, {} bigrams, {} trigrams",
            self.kept[0], self.kept[1], self.kept[2]
        )?;
        writeln!(f, "coverage   {:.2} %", self.coverage_percent)?;
        writeln!(f, "classes    {}", self.n_classes)?;
        write!(
            f,
            "files      {} B vocab, {} B ngram, {} B class",
            self.file_bytes[0], self.file_bytes[1], self.file_bytes[2]
        )
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Stages every file under a `.tmp` name, then renames them all. On any
/// failure every staged or renamed file is removed again.
fn write_file_set(files: &[(PathBuf, Vec<u8>)]) -> Result<(), PipelineError> {
    let mut temps: Vec<PathBuf> = Vec::new();
    let mut committed: Vec<&PathBuf> = Vec::new();
    let mut result: Result<(), PipelineError> = Ok(());

    for (path, bytes) in files {
        let tmp = tmp_path(path);
        if let Err(source) = std::fs::write(&tmp, bytes) {
            result = Err(PipelineError::Write { path: tmp, source });
            break;
        }
        temps.push(tmp);
    }
    if result.is_ok() {
        for ((path, _), tmp) in files.iter().zip(&temps) {
            if let Err(source) = std::fs::rename(tmp, path) {
                result = Err(PipelineError::Write { path: path.clone(), source });
                break;
            }
            committed.push(path);
        }
    }
    if result.is_err() {
        for tmp in &temps {
            let _ = std::fs::remove_file(tmp);
        }
        for path in committed {
            let _ = std::fs::remove_file(path);
        }
    }
    result
}

/// Builds `<out_base>.vocab`, `<out_base>.ngram` and `<out_base>.class`
/// from a raw corpus and an optional word→label lexicon. Without a lexicon
/// the class file degenerates to a single catch-all class.
pub fn build_model<R: Read, L: BufRead>(
    corpus: R,
    lexicon: Option<L>,
    options: &BuildOptions,
    out_base: impl AsRef<Path>,
) -> Result<(ModelPaths, BuildReport), PipelineError> {
    options.validate().map_err(PipelineError::Config)?;

    let (sentences, summary) =
        preprocess(corpus, &options.prep).map_err(PipelineError::Corpus)?;
    let counts = count_ngrams(&sentences);
    let vocab = select_vocabulary(&counts, &options.caps);
    let coverage_percent = coverage(&counts, &vocab) * 100.0;

    let params = PruneParams::new(options.alpha, options.caps)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let (pruned, _) = prune(&counts, &vocab, &params);
    let arpa = assign_scores(&pruned, &counts, &vocab, options.lambda);
    let fwo = build_fwo(&counts, &vocab, options.k as usize);
    let ngram_bytes = serialize_data_file(
        &arpa,
        &fwo,
        &QuantParams::default(),
        options.k,
        options.lambda,
        options.r,
    )?;

    let lexicon = match lexicon {
        Some(source) => ClassLexicon::read_from(source)?,
        None => ClassLexicon::from_entries(Vec::<(String, String)>::new()),
    };
    let class_model =
        build_class_model(&lexicon, &counts, &vocab, options.max_classes, options.class_k)?;
    let class_bytes = write_class_file(&class_model.to_file_data())?;

    let vocab_bytes = VocabTrie::from_vocab(&vocab)?.to_bytes();

    let report = BuildReport {
        sentences: summary.sentences,
        tokens: counts.total_tokens,
        invalid_sequences: summary.invalid_sequences,
        distinct: [counts.uni.len(), counts.bi.len(), counts.tri.len()],
        kept: [vocab.len(), pruned.kept_bi.len(), pruned.kept_tri.len()],
        coverage_percent,
        n_classes: class_model.n_classes(),
        file_bytes: [
            vocab_bytes.len() as u64,
            ngram_bytes.len() as u64,
            class_bytes.len() as u64,
        ],
    };

    let paths = ModelPaths::for_base(out_base);
    let files = [
        (paths.vocab.clone(), vocab_bytes),
        (paths.ngram.clone(), ngram_bytes),
        (
            paths.class.clone().expect("for_base always names a class file"),
            class_bytes,
        ),
    ];
    write_file_set(&files)?;
    Ok((paths, report))
}
