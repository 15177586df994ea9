//! The query engine: loads the three model files and serves ranked
//! next-word-prediction (NWP) and word-completion (WC) suggestions.
//!
//! Scoring is a three-way backoff cascade over stored conditionals. For a
//! candidate `w` after context `(c1, c2)`:
//!
//! 1. the trigram `(c1, c2, w)` is stored → its conditional;
//! 2. else the bigram `(c2, w)` is stored → λ · its conditional;
//! 3. else → λ² · ( r · P(w | expected class) + (1−r) · P(w) ),
//!    where the class term applies only when both context words are known
//!    and `w`'s class is the most likely one after the context's classes.
//!
//! Scores are relative ranks, not normalized probabilities; they are only
//! comparable within a single query. Candidate generation never scans the
//! whole vocabulary: candidates come from the stored successor rows, the
//! expected class's member list, the frequent-word lists, and the first K
//! most frequent words without a stored row (whose cascade score is exactly
//! their scaled unigram probability, making the bounded pool provably
//! equivalent to scoring every word).

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::binfmt::{
    read_class_file, read_data_file, BinfmtError, ClassFileData, DataModel, QuantParams,
    VocabTrie,
};
use crate::counts::NUM_TAGS;
use crate::topk::TopK;

/// Query-side parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Suggestion-list length, 1–9.
    pub k: usize,
    /// Backoff factor override; `None` uses the value stored in the model.
    pub lambda: Option<f64>,
    /// Class-interpolation ratio override; `None` uses the stored value.
    pub r: Option<f64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { k: 3, lambda: None, r: None }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(1..=9).contains(&self.k) {
            return Err(EngineError::BadConfig(format!(
                "suggestion count must be 1..=9, got {}",
                self.k
            )));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l <= 1.0) {
                return Err(EngineError::BadConfig(format!(
                    "lambda must lie in (0, 1], got {l}"
                )));
            }
        }
        if let Some(r) = self.r {
            if !(0.0..=1.0).contains(&r) {
                return Err(EngineError::BadConfig(format!(
                    "ratio must lie in [0, 1], got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Which cascade case produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreBranch {
    Tri,
    Bi,
    ClassUni,
}

/// One ranked suggestion. Scores are comparable within one query only.
#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub word: String,
    pub score: f64,
    pub branch: ScoreBranch,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("bad engine config: {0}")]
    BadConfig(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: BinfmtError },
    #[error("model files disagree: {0}")]
    Mismatch(String),
}

/// Locations of the three model files. The class file is optional: without
/// it the engine runs with the class term disabled (ratio forced to 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelPaths {
    pub vocab: PathBuf,
    pub ngram: PathBuf,
    pub class: Option<PathBuf>,
}

impl ModelPaths {
    /// `<base>.vocab`, `<base>.ngram`, `<base>.class`.
    pub fn for_base(base: impl AsRef<Path>) -> ModelPaths {
        let base = base.as_ref();
        let with = |ext: &str| {
            let mut name = base.file_name().unwrap_or_default().to_os_string();
            name.push(".");
            name.push(ext);
            base.with_file_name(name)
        };
        ModelPaths { vocab: with("vocab"), ngram: with("ngram"), class: Some(with("class")) }
    }

    /// Like [`ModelPaths::for_base`], but drops the class file when it does
    /// not exist on disk.
    pub fn for_base_lenient(base: impl AsRef<Path>) -> ModelPaths {
        let mut paths = Self::for_base(base);
        if !paths.class.as_ref().is_some_and(|p| p.exists()) {
            paths.class = None;
        }
        paths
    }
}

/// Class-side lookup tables, dequantized at load.
#[derive(Debug, Clone, PartialEq)]
struct ClassTables {
    n_classes: usize,
    word_class: Vec<u8>,
    /// Per class, best-first `(word ID, emission probability)`.
    class_topk: Vec<Vec<(u32, f64)>>,
    /// Word → its emission within its own class, for stored members only.
    emission: HashMap<u32, f64>,
    pair_argmax: Vec<u8>,
}

impl ClassTables {
    fn from_file(data: &ClassFileData) -> ClassTables {
        let quant = QuantParams::default();
        let class_topk: Vec<Vec<(u32, f64)>> = data
            .class_topk
            .iter()
            .map(|list| {
                list.iter()
                    .map(|&(id, q)| {
                        (id, quant.dequantize(q).expect("stored scores are in range"))
                    })
                    .collect()
            })
            .collect();
        let mut emission = HashMap::new();
        for (class, list) in class_topk.iter().enumerate() {
            for &(id, p) in list {
                if data.word_class[id as usize] as usize == class {
                    emission.insert(id, p);
                }
            }
        }
        ClassTables {
            n_classes: data.n_classes as usize,
            word_class: data.word_class.clone(),
            class_topk,
            emission,
            pair_argmax: data.pair_argmax.clone(),
        }
    }

    fn class_of(&self, id: u32) -> u8 {
        self.word_class[id as usize]
    }

    fn argmax(&self, c1: u8, c2: u8) -> u8 {
        self.pair_argmax[c1 as usize * self.n_classes + c2 as usize]
    }
}

/// An immutable, loaded model ready for queries. Cheap shared reads; no
/// query mutates engine state.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    trie: VocabTrie,
    /// Dequantized probability per quantizer value, indexed by score.
    deq: Vec<f64>,
    uni_q: Vec<u16>,
    /// Context word → best-first successor list.
    bi_rows: HashMap<u32, Vec<(u32, u16)>>,
    bi_member: HashMap<(u32, u32), u16>,
    /// Context pair → best-first successor list.
    tri_rows: HashMap<(u32, u32), Vec<(u32, u16)>>,
    tri_member: HashMap<(u32, u32, u32), u16>,
    fwo_pred: Vec<u32>,
    fwo_comp: HashMap<char, Vec<u32>>,
    class: Option<ClassTables>,
    k: usize,
    lambda: f64,
    r: f64,
}

fn read_file(path: &Path) -> Result<Vec<u8>, EngineError> {
    fs::read(path).map_err(|source| EngineError::Io { path: path.to_path_buf(), source })
}

fn load_vocab(path: &Path) -> Result<VocabTrie, EngineError> {
    let bytes = read_file(path)?;
    VocabTrie::read_from(bytes.as_slice())
        .map_err(|source| EngineError::Format { path: path.to_path_buf(), source })
}

fn load_data(path: &Path) -> Result<DataModel, EngineError> {
    let bytes = read_file(path)?;
    read_data_file(&bytes)
        .map_err(|source| EngineError::Format { path: path.to_path_buf(), source })
}

fn load_class(path: &Path) -> Result<ClassFileData, EngineError> {
    let bytes = read_file(path)?;
    read_class_file(&bytes)
        .map_err(|source| EngineError::Format { path: path.to_path_buf(), source })
}

/// Loads and indexes the model files one after another.
pub fn load_model_seq(paths: &ModelPaths, config: &EngineConfig) -> Result<Engine, EngineError> {
    let trie = load_vocab(&paths.vocab)?;
    let data = load_data(&paths.ngram)?;
    let class = paths.class.as_deref().map(load_class).transpose()?;
    Engine::from_parts(trie, &data, class.as_ref(), config)
}

/// Loads the three files concurrently. The result is structurally identical
/// to [`load_model_seq`]; only wall-clock time differs.
#[cfg(feature = "parallel")]
pub fn load_model_par(paths: &ModelPaths, config: &EngineConfig) -> Result<Engine, EngineError> {
    let ((trie, data), class) = rayon::join(
        || rayon::join(|| load_vocab(&paths.vocab), || load_data(&paths.ngram)),
        || paths.class.as_deref().map(load_class).transpose(),
    );
    Engine::from_parts(trie?, &data?, class?.as_ref(), config)
}

/// Loads a model, using the parallel loader when the feature is enabled.
pub fn load_model(paths: &ModelPaths, config: &EngineConfig) -> Result<Engine, EngineError> {
    #[cfg(feature = "parallel")]
    {
        load_model_par(paths, config)
    }
    #[cfg(not(feature = "parallel"))]
    {
        load_model_seq(paths, config)
    }
}

impl Engine {
    /// Builds an engine from parsed model structures, re-checking every
    /// cross-file reference. No partially-built engine escapes: any
    /// inconsistency returns an error instead.
    pub fn from_parts(
        trie: VocabTrie,
        data: &DataModel,
        class: Option<&ClassFileData>,
        config: &EngineConfig,
    ) -> Result<Engine, EngineError> {
        config.validate()?;
        let n_uni = data.uni.len();
        if trie.len() != n_uni {
            return Err(EngineError::Mismatch(format!(
                "vocabulary holds {} words but the data file scores {n_uni}",
                trie.len()
            )));
        }
        if let Some(c) = class {
            if c.word_class.len() != n_uni {
                return Err(EngineError::Mismatch(format!(
                    "class file maps {} words but the data file scores {n_uni}",
                    c.word_class.len()
                )));
            }
        }

        let quant = QuantParams::default();
        let deq: Vec<f64> = (0..=quant.c2)
            .map(|q| quant.dequantize(q).expect("every value up to the cap is valid"))
            .collect();

        let mut bi_rows = HashMap::with_capacity(data.bi_groups.len());
        let mut bi_member = HashMap::with_capacity(data.n_bi_entries());
        let mut flat: Vec<(u32, u32)> = Vec::with_capacity(data.n_bi_entries());
        for g in &data.bi_groups {
            for &(b, q) in &g.successors {
                bi_member.insert((g.ctx, b), q);
                flat.push((g.ctx, b));
            }
            bi_rows.insert(g.ctx, g.successors.clone());
        }

        let mut tri_rows = HashMap::with_capacity(data.tri_groups.len());
        let mut tri_member = HashMap::with_capacity(data.n_tri_entries());
        for g in &data.tri_groups {
            // Parsing already bounds the reference below the entry count.
            let (a, b) = flat[g.ctx as usize];
            for &(w, q) in &g.successors {
                tri_member.insert((a, b, w), q);
            }
            tri_rows.insert((a, b), g.successors.clone());
        }

        let mut fwo_comp = HashMap::with_capacity(data.fwo.completion.len());
        for (c, ids) in &data.fwo.completion {
            fwo_comp.insert(*c, ids.clone());
        }

        let class_tables = class.map(ClassTables::from_file);
        let lambda = config.lambda.unwrap_or_else(|| data.params.lambda());
        let r = match &class_tables {
            Some(_) => config.r.unwrap_or_else(|| data.params.r()),
            None => 0.0,
        };

        Ok(Engine {
            trie,
            deq,
            uni_q: data.uni.clone(),
            bi_rows,
            bi_member,
            tri_rows,
            tri_member,
            fwo_pred: data.fwo.prediction.clone(),
            fwo_comp,
            class: class_tables,
            k: config.k,
            lambda,
            r,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The effective class-interpolation ratio (0 when no class file was
    /// loaded).
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n_words(&self) -> usize {
        self.uni_q.len()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.trie.word(id)
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.trie.id(word)
    }

    /// The ID a context word resolves to: its own, or `<unk>`.
    pub fn resolve(&self, word: &str) -> u32 {
        self.trie.id(word).unwrap_or(crate::textprep::TagToken::Unknown.id())
    }

    pub fn fwo_prediction(&self) -> &[u32] {
        &self.fwo_pred
    }

    pub fn fwo_completion(&self, first: char) -> Option<&[u32]> {
        self.fwo_comp.get(&first).map(|v| v.as_slice())
    }

    pub fn bigram_row(&self, ctx: u32) -> Option<&[(u32, u16)]> {
        self.bi_rows.get(&ctx).map(|v| v.as_slice())
    }

    pub fn trigram_row(&self, c1: u32, c2: u32) -> Option<&[(u32, u16)]> {
        self.tri_rows.get(&(c1, c2)).map(|v| v.as_slice())
    }

    /// Dequantized unigram probability.
    pub fn unigram_p(&self, w: u32) -> f64 {
        self.deq[self.uni_q[w as usize] as usize]
    }

    /// Dequantized stored conditional P(w | c2), if the bigram is stored.
    pub fn bigram_p(&self, c2: u32, w: u32) -> Option<f64> {
        self.bi_member.get(&(c2, w)).map(|&q| self.deq[q as usize])
    }

    /// Dequantized stored conditional P(w | c1, c2), if the trigram is
    /// stored.
    pub fn trigram_p(&self, c1: u32, c2: u32, w: u32) -> Option<f64> {
        self.tri_member.get(&(c1, c2, w)).map(|&q| self.deq[q as usize])
    }

    /// The class-model probability of `w` after the context: its stored
    /// emission when both context words are present and `w`'s class is the
    /// expected one, 0 otherwise.
    pub fn class_p(&self, w: u32, c1: Option<u32>, c2: Option<u32>) -> f64 {
        let (Some(tables), Some(c1), Some(c2)) = (&self.class, c1, c2) else {
            return 0.0;
        };
        let expected = tables.argmax(tables.class_of(c1), tables.class_of(c2));
        if tables.class_of(w) != expected {
            return 0.0;
        }
        tables.emission.get(&w).copied().unwrap_or(0.0)
    }

    /// The backoff cascade for one candidate, with optional context slots.
    pub fn score_opt(&self, w: u32, c1: Option<u32>, c2: Option<u32>) -> (f64, ScoreBranch) {
        if let (Some(a), Some(b)) = (c1, c2) {
            if let Some(p) = self.trigram_p(a, b, w) {
                return (p, ScoreBranch::Tri);
            }
        }
        if let Some(b) = c2 {
            if let Some(p) = self.bigram_p(b, w) {
                return (self.lambda * p, ScoreBranch::Bi);
            }
        }
        let class_term = self.r * self.class_p(w, c1, c2);
        let uni_term = (1.0 - self.r) * self.unigram_p(w);
        (self.lambda * self.lambda * (class_term + uni_term), ScoreBranch::ClassUni)
    }

    /// The backoff cascade for one candidate with a full context pair.
    pub fn score_candidate(&self, w: u32, c1: u32, c2: u32) -> (f64, ScoreBranch) {
        self.score_opt(w, Some(c1), Some(c2))
    }

    /// Resolves query context words to the trailing ID pair. `prepend_start`
    /// is the NWP rule ("the sentence starts here"); completion queries rank
    /// within the sentence as typed, without the start marker.
    fn context_ids<S: AsRef<str>>(
        &self,
        ctx: &[S],
        prepend_start: bool,
    ) -> (Option<u32>, Option<u32>) {
        let mut ids: Vec<u32> = Vec::with_capacity(ctx.len() + 1);
        if prepend_start {
            ids.push(crate::textprep::TagToken::SentenceStart.id());
        }
        ids.extend(ctx.iter().map(|w| self.resolve(w.as_ref())));
        match ids.as_slice() {
            [] => (None, None),
            [only] => (None, Some(*only)),
            [.., a, b] => (Some(*a), Some(*b)),
        }
    }

    /// Ranks a candidate pool by cascade score (descending, ID-ascending
    /// ties), excluding tags, deduplicated, truncated to `k`.
    fn rank_pool(
        &self,
        pool: impl IntoIterator<Item = u32>,
        c1: Option<u32>,
        c2: Option<u32>,
        k: usize,
    ) -> Vec<Suggestion> {
        let mut top = TopK::new(k);
        let mut seen = HashSet::new();
        for id in pool {
            if id < NUM_TAGS || !seen.insert(id) {
                continue;
            }
            let (score, branch) = self.score_opt(id, c1, c2);
            top.push(id, score, branch);
        }
        top.into_ranked()
            .into_iter()
            .map(|(id, score, branch)| Suggestion {
                word: self.trie.word(id).expect("pool IDs come from the model").to_string(),
                score,
                branch,
            })
            .collect()
    }

    /// Next-word prediction with an explicit suggestion count.
    ///
    /// The candidate pool is the trigram row of the context pair, the bigram
    /// row of the last word, the expected class's member list, the frequent-
    /// word prediction list, and the first `k` most frequent words that have
    /// no stored row after this context. The last group pins the pool to
    /// full-vocabulary semantics: every word outside the pool backs off to
    /// the scaled-unigram case and is dominated by those `k` words, so the
    /// pool's top-`k` equals the whole vocabulary's top-`k`.
    pub fn next_word_prediction_k<S: AsRef<str>>(
        &self,
        ctx: &[S],
        k: usize,
    ) -> Vec<Suggestion> {
        let (c1, c2) = self.context_ids(ctx, true);
        let mut pool: Vec<u32> = Vec::new();

        let tri_row = match (c1, c2) {
            (Some(a), Some(b)) => self.tri_rows.get(&(a, b)).map(|v| v.as_slice()),
            _ => None,
        };
        let bi_row = c2.and_then(|b| self.bi_rows.get(&b)).map(|v| v.as_slice());
        pool.extend(tri_row.into_iter().flatten().map(|&(id, _)| id));
        pool.extend(bi_row.into_iter().flatten().map(|&(id, _)| id));

        if let (Some(tables), Some(a), Some(b)) = (&self.class, c1, c2) {
            let expected = tables.argmax(tables.class_of(a), tables.class_of(b));
            pool.extend(
                tables.class_topk[expected as usize].iter().map(|&(id, _)| id),
            );
        }
        // Frequency-order fallbacks, covering the completely unseen context.
        pool.extend(self.fwo_pred.iter().copied());
        let in_rows = |id: u32| -> bool {
            let in_tri = match (c1, c2) {
                (Some(a), Some(b)) => self.tri_member.contains_key(&(a, b, id)),
                _ => false,
            };
            in_tri || c2.is_some_and(|b| self.bi_member.contains_key(&(b, id)))
        };
        let mut collected = 0usize;
        for id in NUM_TAGS..self.n_words() as u32 {
            if collected == k {
                break;
            }
            if in_rows(id) {
                continue;
            }
            collected += 1;
            pool.push(id);
        }
        self.rank_pool(pool, c1, c2, k)
    }

    /// Next-word prediction at the configured suggestion count.
    pub fn next_word_prediction<S: AsRef<str>>(&self, ctx: &[S]) -> Vec<Suggestion> {
        self.next_word_prediction_k(ctx, self.k)
    }

    /// Word completion with an explicit suggestion count.
    ///
    /// Single-character prefixes take the precomputed per-character list
    /// when one exists; everything else enumerates the vocabulary trie.
    /// Either pool is then ranked by cascade score in the given context.
    pub fn word_completion_k<S: AsRef<str>>(
        &self,
        ctx: &[S],
        prefix: &str,
        k: usize,
    ) -> Vec<Suggestion> {
        if prefix.is_empty() {
            return Vec::new();
        }
        let (c1, c2) = self.context_ids(ctx, false);
        let mut chars = prefix.chars();
        let first = chars.next().expect("prefix is non-empty");
        let pool: Vec<u32> = if chars.next().is_none() {
            match self.fwo_comp.get(&first) {
                Some(ids) => ids.clone(),
                None => self.trie.prefix_ids(prefix),
            }
        } else {
            self.trie.prefix_ids(prefix)
        };
        self.rank_pool(pool, c1, c2, k)
    }

    /// Word completion at the configured suggestion count.
    pub fn word_completion<S: AsRef<str>>(&self, ctx: &[S], prefix: &str) -> Vec<Suggestion> {
        self.word_completion_k(ctx, prefix, self.k)
    }

    /// Rough resident-size estimate of the loaded tables, in bytes.
    pub fn resident_bytes_estimate(&self) -> usize {
        use std::mem::size_of;
        let trie = self.trie.len() * 8
            + self.trie.iter_words().map(|w| w.len() + size_of::<usize>()).sum::<usize>();
        let rows: usize = self
            .bi_rows
            .values()
            .chain(self.tri_rows.values())
            .map(|v| v.len() * size_of::<(u32, u16)>() + 24)
            .sum();
        let members = (self.bi_member.len() + self.tri_member.len())
            * (size_of::<(u32, u32, u32)>() + size_of::<u16>() + 8);
        let class = self.class.as_ref().map_or(0, |t| {
            t.word_class.len()
                + t.pair_argmax.len()
                + t.emission.len() * 24
                + t.class_topk.iter().map(|l| l.len() * 12).sum::<usize>()
        });
        self.deq.len() * size_of::<f64>()
            + self.uni_q.len() * size_of::<u16>()
            + trie
            + rows
            + members
            + class
            + self.fwo_pred.len() * 4
            + self.fwo_comp.len() * 32
    }
}

/// Anything that can produce ranked word suggestions — the real engine, or
/// stand-ins used by the evaluation harness (stub baselines, timing shims).
pub trait Predictor {
    /// Top-k next words for the context, best first.
    fn predict_next(&self, ctx: &[&str], k: usize) -> Vec<String>;
    /// Top-k completions of `prefix` in the context, best first.
    fn complete(&self, ctx: &[&str], prefix: &str, k: usize) -> Vec<String>;
}

impl Predictor for Engine {
    fn predict_next(&self, ctx: &[&str], k: usize) -> Vec<String> {
        self.next_word_prediction_k(ctx, k).into_iter().map(|s| s.word).collect()
    }

    fn complete(&self, ctx: &[&str], prefix: &str, k: usize) -> Vec<String> {
        self.word_completion_k(ctx, prefix, k).into_iter().map(|s| s.word).collect()
    }
}
