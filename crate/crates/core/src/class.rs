//! The class companion model: a word→class mapping derived from an external
//! tag lexicon, per-class emission lists P(w|C), and the most likely class to
//! follow each pair of context classes.
//!
//! Classes let the scorer say something useful about a word whose word-level
//! context was pruned or never seen: the grammatical slot after a context is
//! predictable even when the exact words are not. Only the argmax of the
//! class-transition distribution is kept, so at query time the transition
//! factor degrades to an indicator: a word contributes its emission
//! probability exactly when its class is the expected one.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;

use crate::binfmt::{ClassFileData, QuantParams};
use crate::counts::{NgramCounts, Vocabulary};

/// Label of the catch-all class absorbing unmapped words and dropped labels.
pub const OTHER_LABEL: &str = "<other>";
/// Default class budget, counting the catch-all.
pub const DEFAULT_MAX_CLASSES: usize = 32;
/// Default per-class member-list length.
pub const DEFAULT_CLASS_K: usize = 10;

#[derive(Debug, Error)]
pub enum ClassError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon line {line}: expected \"word<TAB>label\", got {text:?}")]
    BadLexiconLine { line: usize, text: String },
    #[error("class count must be in 1..=256 (1-byte class IDs), got {0}")]
    BadClassCount(usize),
}

/// A word → class-label table ingested from a tab-separated annotation file,
/// one `word<TAB>LABEL` pair per line. Each word keeps a single label; on
/// duplicate lines the first wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassLexicon {
    entries: HashMap<String, String>,
}

impl ClassLexicon {
    pub fn from_entries<W, L>(pairs: impl IntoIterator<Item = (W, L)>) -> ClassLexicon
    where
        W: Into<String>,
        L: Into<String>,
    {
        let mut entries = HashMap::new();
        for (w, l) in pairs {
            entries.entry(w.into()).or_insert_with(|| l.into());
        }
        ClassLexicon { entries }
    }

    /// Parses lexicon lines. Blank lines are skipped; a line without a tab,
    /// or with an empty word or label, is an error naming the line number.
    pub fn read_from<R: BufRead>(source: R) -> Result<ClassLexicon, ClassError> {
        let mut entries = HashMap::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line
                .split_once('\t')
                .map(|(w, l)| (w.trim(), l.trim()))
                .filter(|(w, l)| !w.is_empty() && !l.is_empty());
            match parsed {
                Some((word, label)) => {
                    entries
                        .entry(word.to_string())
                        .or_insert_with(|| label.to_string());
                }
                None => {
                    return Err(ClassError::BadLexiconLine { line: idx + 1, text: line })
                }
            }
        }
        Ok(ClassLexicon { entries })
    }

    pub fn label(&self, word: &str) -> Option<&str> {
        self.entries.get(word).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The class model over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    /// Class labels by class ID; the last entry is always [`OTHER_LABEL`].
    pub labels: Vec<String>,
    /// Member-list length the emission lists were truncated to.
    pub k: usize,
    /// Class ID per vocabulary word, indexed by word ID.
    pub word_class: Vec<u8>,
    /// Per class, up to `k` `(word ID, P(word | class))` pairs, probability
    /// descending with ID-ascending tie-break. Tags never appear.
    pub class_topk: Vec<Vec<(u32, f64)>>,
    /// Row-major `n²` table: most likely class to follow each context pair.
    pub pair_argmax: Vec<u8>,
}

impl ClassModel {
    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    /// The catch-all class ID (always the last one).
    pub fn other_class(&self) -> u8 {
        (self.labels.len() - 1) as u8
    }

    pub fn class_of(&self, word_id: u32) -> u8 {
        self.word_class
            .get(word_id as usize)
            .copied()
            .unwrap_or_else(|| self.other_class())
    }

    pub fn argmax(&self, c1: u8, c2: u8) -> u8 {
        self.pair_argmax[c1 as usize * self.n_classes() + c2 as usize]
    }

    /// Eq.-5 style probability of `w` after context classes `(c1, c2)`:
    /// the stored emission P(w | class(w)) when class(w) is the most likely
    /// class after the pair, 0 otherwise. Words outside their class's stored
    /// member list (including tags) have emission 0.
    pub fn class_probability(&self, w: u32, ctx: (u8, u8)) -> f64 {
        let class = self.class_of(w);
        if class != self.argmax(ctx.0, ctx.1) {
            return 0.0;
        }
        self.class_topk[class as usize]
            .iter()
            .find(|&&(id, _)| id == w)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Converts to the serializable form: emissions quantized and each list
    /// re-sorted by (quantized score, ID) so that equal-after-quantization
    /// probabilities still yield the canonical byte order.
    pub fn to_file_data(&self) -> ClassFileData {
        let quant = QuantParams::default();
        let class_topk = self
            .class_topk
            .iter()
            .map(|list| {
                let mut q: Vec<(u32, u16)> = list
                    .iter()
                    .map(|&(id, p)| {
                        (id, quant.quantize(p).expect("emissions lie in (0, 1]"))
                    })
                    .collect();
                q.sort_unstable_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
                q
            })
            .collect();
        ClassFileData {
            n_classes: self.n_classes() as u16,
            k: self.k as u16,
            word_class: self.word_class.clone(),
            class_topk,
            pair_argmax: self.pair_argmax.clone(),
        }
    }
}

/// Assigns class IDs: the `max_classes − 1` labels mapping the most
/// vocabulary words keep their own class (IDs in popularity order, ties
/// alphabetical), everything else — rarer labels, unmapped words, and the
/// four tags — collapses into the catch-all class with the last ID.
///
/// Returns the label list (indexed by class ID) and the per-word class
/// array (indexed by word ID).
pub fn build_word_class(
    lexicon: &ClassLexicon,
    vocab: &Vocabulary,
    max_classes: usize,
) -> Result<(Vec<String>, Vec<u8>), ClassError> {
    if max_classes == 0 || max_classes > 256 {
        return Err(ClassError::BadClassCount(max_classes));
    }

    let mut mapped: Vec<(u32, Option<&str>)> = Vec::with_capacity(vocab.len());
    let mut label_mass: HashMap<&str, usize> = HashMap::new();
    for (id, word) in vocab.iter().enumerate() {
        let id = id as u32;
        let label = if vocab.is_tag_id(id) {
            None
        } else {
            lexicon.label(word).filter(|&l| l != OTHER_LABEL)
        };
        if let Some(l) = label {
            *label_mass.entry(l).or_insert(0) += 1;
        }
        mapped.push((id, label));
    }

    let mut ranked: Vec<(&str, usize)> = label_mass.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_classes - 1);
    let class_of_label: HashMap<&str, u8> = ranked
        .iter()
        .enumerate()
        .map(|(i, &(l, _))| (l, i as u8))
        .collect();

    let mut labels: Vec<String> = ranked.iter().map(|&(l, _)| l.to_string()).collect();
    labels.push(OTHER_LABEL.to_string());
    let other = (labels.len() - 1) as u8;

    let word_class = mapped
        .into_iter()
        .map(|(_, label)| {
            label.and_then(|l| class_of_label.get(l).copied()).unwrap_or(other)
        })
        .collect();
    Ok((labels, word_class))
}

/// Computes the statistical halves of the model from raw n-gram counts:
///
/// * emissions: P(w|C) = count(w) / Σ count of the class's non-tag members,
///   kept as a best-first list truncated to `k` per class;
/// * transitions: every counted corpus trigram maps to its class triple
///   (out-of-vocabulary words behave as `<unk>`, i.e. the catch-all class),
///   and each context pair keeps only its argmax continuation class, ties
///   broken toward the lowest class ID. Pairs never seen map to the
///   catch-all class.
pub fn build_class_stats(
    counts: &NgramCounts,
    vocab: &Vocabulary,
    word_class: &[u8],
    n_classes: usize,
    k: usize,
) -> (Vec<Vec<(u32, f64)>>, Vec<u8>) {
    debug_assert_eq!(word_class.len(), vocab.len());
    let other = (n_classes - 1) as u8;

    let mut members: Vec<Vec<(u32, u64)>> = vec![Vec::new(); n_classes];
    let mut denom: Vec<u64> = vec![0; n_classes];
    for (id, word) in vocab.iter().enumerate() {
        let id = id as u32;
        if vocab.is_tag_id(id) {
            continue;
        }
        let c = counts.uni_count(word);
        if c == 0 {
            continue;
        }
        let class = word_class[id as usize] as usize;
        denom[class] += c;
        members[class].push((id, c));
    }
    let class_topk = members
        .into_iter()
        .zip(&denom)
        .map(|(mut list, &den)| {
            list.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            list.truncate(k);
            list.into_iter().map(|(id, c)| (id, c as f64 / den as f64)).collect()
        })
        .collect();

    let class_of = |word: &str| -> u8 {
        let id = vocab.id_or_unk(word);
        word_class.get(id as usize).copied().unwrap_or(other)
    };
    let mut triple_counts: HashMap<(u8, u8, u8), u64> = HashMap::new();
    for ((a, b, c), &n) in &counts.tri {
        *triple_counts
            .entry((class_of(a), class_of(b), class_of(c)))
            .or_insert(0) += n;
    }
    let mut best: HashMap<(u8, u8), (u64, u8)> = HashMap::new();
    for (&(c1, c2, c3), &n) in &triple_counts {
        let entry = best.entry((c1, c2)).or_insert((n, c3));
        if n > entry.0 || (n == entry.0 && c3 < entry.1) {
            *entry = (n, c3);
        }
    }
    let mut pair_argmax = vec![other; n_classes * n_classes];
    for ((c1, c2), (_, c3)) in best {
        pair_argmax[c1 as usize * n_classes + c2 as usize] = c3;
    }
    (class_topk, pair_argmax)
}

/// Builds the full class model: label assignment, emissions, transitions.
pub fn build_class_model(
    lexicon: &ClassLexicon,
    counts: &NgramCounts,
    vocab: &Vocabulary,
    max_classes: usize,
    k: usize,
) -> Result<ClassModel, ClassError> {
    let (labels, word_class) = build_word_class(lexicon, vocab, max_classes)?;
    let (class_topk, pair_argmax) =
        build_class_stats(counts, vocab, &word_class, labels.len(), k);
    Ok(ClassModel { labels, k, word_class, class_topk, pair_argmax })
}
