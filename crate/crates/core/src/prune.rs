//! Cap-based pruning of bigrams and trigrams with referential closure.
//!
//! Bigrams are ranked by raw count; trigrams by an importance score that
//! weighs how much the trigram's conditional probability adds over backing
//! off to the bigram. Pruning proceeds unigrams → bigrams → trigrams, so
//! every kept trigram's context bigram is itself kept (closure by
//! construction rather than post-filtering).

use thiserror::Error;

use crate::counts::{ModelCaps, NgramCounts, Vocabulary};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default backoff factor used inside the trigram importance score — the
/// same constant the scoring cascade uses at query time.
pub const DEFAULT_ALPHA: f64 = 0.4;

/// Pruning settings.
#[derive(Debug, Clone, Copy)]
pub struct PruneParams {
    /// Backoff factor inside the trigram score, in (0, 1].
    pub alpha: f64,
    pub caps: ModelCaps,
}

impl PruneParams {
    pub fn new(alpha: f64, caps: ModelCaps) -> Result<Self, PruneError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(PruneError::BadAlpha(alpha));
        }
        Ok(PruneParams { alpha, caps })
    }

    /// Default score factor with explicit size caps.
    pub fn with_caps(caps: ModelCaps) -> Self {
        PruneParams { alpha: DEFAULT_ALPHA, caps }
    }
}

impl Default for PruneParams {
    fn default() -> Self {
        PruneParams { alpha: DEFAULT_ALPHA, caps: ModelCaps::default() }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PruneError {
    #[error("alpha must be in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("missing lower-order count for trigram ({0}, {1}, {2})")]
    MissingLowerOrder(String, String, String),
}

/// Capped, closure-consistent n-gram sets, keyed by vocabulary IDs and
/// carrying raw counts. Entries are stored sorted by ID tuple ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedNgrams {
    pub kept_bi: Vec<((u32, u32), u64)>,
    pub kept_tri: Vec<((u32, u32, u32), u64)>,
}

/// Trigram importance: `c123 · (c123/c12 − α · c12/c1)` — the trigram's
/// occurrence count times how much its conditional probability beats the
/// α-discounted backoff estimate. May be negative.
pub fn trigram_score(
    tri: (&str, &str, &str),
    counts: &NgramCounts,
    alpha: f64,
) -> Result<f64, PruneError> {
    let c123 = counts.tri_count(tri.0, tri.1, tri.2);
    let c12 = counts.bi_count(tri.0, tri.1);
    let c1 = counts.uni_count(tri.0);
    if c123 == 0 || c12 == 0 || c1 == 0 {
        return Err(PruneError::MissingLowerOrder(
            tri.0.to_string(),
            tri.1.to_string(),
            tri.2.to_string(),
        ));
    }
    Ok(score_from_counts(c123, c12, c1, alpha))
}

fn score_from_counts(c123: u64, c12: u64, c1: u64, alpha: f64) -> f64 {
    c123 as f64 * (c123 as f64 / c12 as f64 - alpha * c12 as f64 / c1 as f64)
}

/// Report of what pruning examined and kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneReport {
    pub bi_candidates: usize,
    pub bi_kept: usize,
    pub tri_candidates: usize,
    pub tri_kept: usize,
    /// Importance score of the worst kept trigram, if any were kept.
    pub min_kept_tri_score: Option<f64>,
}

impl std::fmt::Display for PruneReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "bigrams:  {} of {} kept", self.bi_kept, self.bi_candidates)?;
        write!(f, "trigrams: {} of {} kept", self.tri_kept, self.tri_candidates)?;
        if let Some(s) = self.min_kept_tri_score {
            write!(f, " (min kept score {s:.6})")?;
        }
        Ok(())
    }
}

struct TriCandidate {
    ids: (u32, u32, u32),
    count: u64,
    score: f64,
}

fn collect_bi_candidates(
    counts: &NgramCounts,
    vocab: &Vocabulary,
) -> Vec<((u32, u32), u64)> {
    counts
        .bi
        .iter()
        .filter_map(|((w1, w2), &c)| {
            let id1 = vocab.id(w1)?;
            let id2 = vocab.id(w2)?;
            Some(((id1, id2), c))
        })
        .collect()
}

fn collect_tri_candidates(
    counts: &NgramCounts,
    vocab: &Vocabulary,
    kept_bi: &std::collections::HashSet<(u32, u32)>,
    alpha: f64,
) -> Vec<TriCandidate> {
    counts
        .tri
        .iter()
        .filter_map(|((w1, w2, w3), &c123)| {
            let ids = (vocab.id(w1)?, vocab.id(w2)?, vocab.id(w3)?);
            if !kept_bi.contains(&(ids.0, ids.1)) {
                return None;
            }
            let c12 = counts.bi_count(w1, w2);
            let c1 = counts.uni_count(w1);
            Some(TriCandidate {
                ids,
                count: c123,
                score: score_from_counts(c123, c12, c1, alpha),
            })
        })
        .collect()
}

fn select(
    mut bi: Vec<((u32, u32), u64)>,
    mut tri_fn: impl FnMut(&std::collections::HashSet<(u32, u32)>) -> Vec<TriCandidate>,
    params: &PruneParams,
    report: &mut PruneReport,
) -> PrunedNgrams {
    report.bi_candidates = bi.len();
    // Bigrams: count descending, ID tuple ascending.
    bi.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    bi.truncate(params.caps.n_bi);
    report.bi_kept = bi.len();
    let kept_set: std::collections::HashSet<(u32, u32)> =
        bi.iter().map(|&(ids, _)| ids).collect();

    let mut tri = tri_fn(&kept_set);
    report.tri_candidates = tri.len();
    // Trigrams: importance descending, ID tuple ascending.
    tri.sort_unstable_by(|a, b| {
        b.score.total_cmp(&a.score).then_with(|| a.ids.cmp(&b.ids))
    });
    tri.truncate(params.caps.n_tri);
    report.tri_kept = tri.len();
    report.min_kept_tri_score = tri.last().map(|t| t.score);

    bi.sort_unstable_by_key(|&(ids, _)| ids);
    let mut kept_tri: Vec<((u32, u32, u32), u64)> =
        tri.into_iter().map(|t| (t.ids, t.count)).collect();
    kept_tri.sort_unstable_by_key(|&(ids, _)| ids);
    PrunedNgrams { kept_bi: bi, kept_tri }
}

/// Prunes to the caps (sequential), returning the kept sets and a report.
pub fn prune_seq(
    counts: &NgramCounts,
    vocab: &Vocabulary,
    params: &PruneParams,
) -> (PrunedNgrams, PruneReport) {
    let mut report = PruneReport::default();
    let pruned = select(
        collect_bi_candidates(counts, vocab),
        |kept| collect_tri_candidates(counts, vocab, kept, params.alpha),
        params,
        &mut report,
    );
    (pruned, report)
}

/// Prunes to the caps with candidate collection and scoring parallelized.
/// Sorting uses a total order, so results are identical to `prune_seq`.
#[cfg(feature = "parallel")]
pub fn prune_par(
    counts: &NgramCounts,
    vocab: &Vocabulary,
    params: &PruneParams,
) -> (PrunedNgrams, PruneReport) {
    let bi: Vec<((u32, u32), u64)> = counts
        .bi
        .par_iter()
        .filter_map(|((w1, w2), &c)| {
            let id1 = vocab.id(w1)?;
            let id2 = vocab.id(w2)?;
            Some(((id1, id2), c))
        })
        .collect();
    let alpha = params.alpha;
    let mut report = PruneReport::default();
    let pruned = select(
        bi,
        |kept| {
            counts
                .tri
                .par_iter()
                .filter_map(|((w1, w2, w3), &c123)| {
                    let ids = (vocab.id(w1)?, vocab.id(w2)?, vocab.id(w3)?);
                    if !kept.contains(&(ids.0, ids.1)) {
                        return None;
                    }
                    Some(TriCandidate {
                        ids,
                        count: c123,
                        score: score_from_counts(
                            c123,
                            counts.bi_count(w1, w2),
                            counts.uni_count(w1),
                            alpha,
                        ),
                    })
                })
                .collect()
        },
        params,
        &mut report,
    );
    (pruned, report)
}

/// Prunes to the caps, returning the kept sets and a report.
pub fn prune(
    counts: &NgramCounts,
    vocab: &Vocabulary,
    params: &PruneParams,
) -> (PrunedNgrams, PruneReport) {
    #[cfg(feature = "parallel")]
    {
        prune_par(counts, vocab, params)
    }
    #[cfg(not(feature = "parallel"))]
    {
        prune_seq(counts, vocab, params)
    }
}

/// Verifies referential closure by scanning the output: every bigram word
/// resolves in the vocabulary, every trigram's context bigram is kept, and
/// every trigram's final word resolves.
pub fn check_closure(pruned: &PrunedNgrams, vocab: &Vocabulary) -> Result<(), String> {
    let n = vocab.len() as u32;
    for &((a, b), _) in &pruned.kept_bi {
        if a >= n || b >= n {
            return Err(format!("bigram ({a}, {b}) references a word outside the vocabulary"));
        }
    }
    let bi_set: std::collections::HashSet<(u32, u32)> =
        pruned.kept_bi.iter().map(|&(ids, _)| ids).collect();
    for &((a, b, c), _) in &pruned.kept_tri {
        if !bi_set.contains(&(a, b)) {
            return Err(format!("trigram ({a}, {b}, {c}) has an unkept context bigram"));
        }
        if c >= n {
            return Err(format!("trigram ({a}, {b}, {c}) references a word outside the vocabulary"));
        }
    }
    Ok(())
}
