//! Relative-frequency scoring and ARPA text-format I/O.
//!
//! Kept n-grams get log10 relative-frequency scores: `count(w)/total` for
//! unigrams (total excludes `<s>`, which is context-only and never emitted),
//! `c12/c1` for bigrams, `c123/c12` for trigrams. The backoff-weight column
//! of classic ARPA files is omitted entirely — backoff happens at query time
//! through a constant factor, so there is nothing per-entry to store.
//!
//! Scores are canonicalized to 6 decimal places when assigned, which makes
//! the text format lossless: write → read reproduces the model exactly.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::binfmt::quant::LOG10_FLOOR;
use crate::counts::{NgramCounts, Vocabulary};
use crate::prune::PrunedNgrams;
use crate::textprep::TagToken;

/// Default Stupid Backoff factor λ recorded as model metadata.
pub const DEFAULT_LAMBDA: f64 = 0.4;

/// An ARPA-level model: per-order entry lists of (log10 score, ID tuple),
/// sorted by ID tuple ascending within each order.
///
/// `lambda` is runtime metadata (the backoff constant the model was built
/// for); it is not part of the text format, so equality compares only the
/// entry lists.
#[derive(Debug, Clone)]
pub struct ArpaModel {
    pub uni: Vec<(f64, u32)>,
    pub bi: Vec<(f64, (u32, u32))>,
    pub tri: Vec<(f64, (u32, u32, u32))>,
    pub lambda: f64,
}

impl PartialEq for ArpaModel {
    fn eq(&self, other: &Self) -> bool {
        self.uni == other.uni && self.bi == other.bi && self.tri == other.tri
    }
}

impl ArpaModel {
    pub fn empty(lambda: f64) -> ArpaModel {
        ArpaModel { uni: Vec::new(), bi: Vec::new(), tri: Vec::new(), lambda }
    }

    pub fn order_counts(&self) -> [usize; 3] {
        [self.uni.len(), self.bi.len(), self.tri.len()]
    }
}

/// Rounds a score to 6 decimal places — the precision of the text format.
/// Assigning canonical scores up front keeps write → read an identity.
pub fn canonical_score(score: f64) -> f64 {
    (score * 1e6).round() / 1e6
}

fn log10_ratio(num: u64, den: u64) -> f64 {
    debug_assert!(num >= 1 && den >= 1);
    canonical_score((num as f64 / den as f64).log10()).max(LOG10_FLOOR)
}

/// Assigns relative-frequency scores to every kept n-gram.
///
/// `<s>` and zero-count tags get the score floor (they are never suggested;
/// the floor quantizes to the cap). Entries come out sorted by ID tuple.
pub fn assign_scores(
    pruned: &PrunedNgrams,
    counts: &NgramCounts,
    vocab: &Vocabulary,
    lambda: f64,
) -> ArpaModel {
    let total = counts.total_non_start_tokens();
    let mut uni: Vec<(f64, u32)> = Vec::with_capacity(vocab.len());
    for (id, word) in vocab.iter().enumerate() {
        let id = id as u32;
        let c = counts.uni_count(word);
        let score = if id == TagToken::SentenceStart.id() || c == 0 {
            LOG10_FLOOR
        } else {
            log10_ratio(c, total)
        };
        uni.push((score, id));
    }

    // Context counts for trigram denominators; closure guarantees presence.
    let bi_counts: HashMap<(u32, u32), u64> = pruned.kept_bi.iter().copied().collect();

    let bi = pruned
        .kept_bi
        .iter()
        .map(|&((a, b), c12)| {
            let c1 = counts.uni_count(vocab.word(a).expect("closure"));
            (log10_ratio(c12, c1), (a, b))
        })
        .collect();
    let tri = pruned
        .kept_tri
        .iter()
        .map(|&((a, b, c), c123)| {
            let c12 = *bi_counts.get(&(a, b)).expect("closure");
            (log10_ratio(c123, c12), (a, b, c))
        })
        .collect();
    ArpaModel { uni, bi, tri, lambda }
}

/// Writes the model in ARPA text form: a `\data\` header with per-order
/// entry counts, one `\N-grams:` section per non-empty order holding
/// `score<TAB>w1 w2 ...` lines, then `\end\`.
pub fn write_arpa<W: Write>(
    model: &ArpaModel,
    vocab: &Vocabulary,
    mut sink: W,
) -> std::io::Result<()> {
    let word = |id: u32| vocab.word(id).unwrap_or(TagToken::Unknown.surface());
    writeln!(sink, "\\data\\")?;
    for (order, n) in model.order_counts().iter().enumerate() {
        writeln!(sink, "ngram {}={}", order + 1, n)?;
    }
    writeln!(sink)?;
    if !model.uni.is_empty() {
        writeln!(sink, "\\1-grams:")?;
        for &(score, id) in &model.uni {
            writeln!(sink, "{:.6}\t{}", score, word(id))?;
        }
        writeln!(sink)?;
    }
    if !model.bi.is_empty() {
        writeln!(sink, "\\2-grams:")?;
        for &(score, (a, b)) in &model.bi {
            writeln!(sink, "{:.6}\t{} {}", score, word(a), word(b))?;
        }
        writeln!(sink)?;
    }
    if !model.tri.is_empty() {
        writeln!(sink, "\\3-grams:")?;
        for &(score, (a, b, c)) in &model.tri {
            writeln!(sink, "{:.6}\t{} {} {}", score, word(a), word(b), word(c))?;
        }
        writeln!(sink)?;
    }
    writeln!(sink, "\\end\\")?;
    Ok(())
}

/// `write_arpa` into a string.
pub fn arpa_to_string(model: &ArpaModel, vocab: &Vocabulary) -> String {
    let mut buf = Vec::new();
    write_arpa(model, vocab, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ARPA output is UTF-8")
}

#[derive(Debug, Error)]
pub enum ArpaError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected \\data\\ header")]
    MissingHeader { line: usize },
    #[error("line {line}: malformed ngram count declaration {text:?}")]
    BadCountLine { line: usize, text: String },
    #[error("line {line}: unparsable score {text:?}")]
    BadScore { line: usize, text: String },
    #[error("line {line}: entry has {found} words, expected {expected}")]
    BadEntry { line: usize, expected: usize, found: usize },
    #[error("{order}-grams section declares {declared} entries but contains {found}")]
    SectionCountMismatch { order: usize, declared: usize, found: usize },
    #[error("line {line}: unexpected section {text:?}")]
    UnexpectedSection { line: usize, text: String },
    #[error("file ended before \\end\\ marker")]
    UnexpectedEof,
}

/// Reads an ARPA text model. Words that are not in the vocabulary map to
/// `<unk>`; entries are then re-sorted into ID-tuple order and, where the
/// remapping created duplicate tuples, the entry appearing first in the
/// file wins.
pub fn read_arpa<R: BufRead>(source: R, vocab: &Vocabulary) -> Result<ArpaModel, ArpaError> {
    let mut lines = Vec::new();
    for l in source.lines() {
        lines.push(l?);
    }
    let mut pos = 0usize;
    let skip_blank = |pos: &mut usize| {
        while *pos < lines.len() && lines[*pos].trim().is_empty() {
            *pos += 1;
        }
    };

    skip_blank(&mut pos);
    if pos >= lines.len() || lines[pos].trim() != "\\data\\" {
        return Err(ArpaError::MissingHeader { line: pos + 1 });
    }
    pos += 1;

    let mut declared = [0usize; 3];
    while pos < lines.len() {
        let text = lines[pos].trim();
        if text.is_empty() || text.starts_with('\\') {
            break;
        }
        let parsed = text
            .strip_prefix("ngram ")
            .and_then(|rest| rest.split_once('='))
            .and_then(|(n, c)| {
                Some((n.trim().parse::<usize>().ok()?, c.trim().parse::<usize>().ok()?))
            });
        match parsed {
            Some((order @ 1..=3, count)) => declared[order - 1] = count,
            _ => {
                return Err(ArpaError::BadCountLine { line: pos + 1, text: text.to_string() })
            }
        }
        pos += 1;
    }

    let mut uni: Vec<(f64, u32)> = Vec::with_capacity(declared[0]);
    let mut bi: Vec<(f64, (u32, u32))> = Vec::with_capacity(declared[1]);
    let mut tri: Vec<(f64, (u32, u32, u32))> = Vec::with_capacity(declared[2]);
    let mut seen_end = false;

    while pos < lines.len() {
        skip_blank(&mut pos);
        if pos >= lines.len() {
            break;
        }
        let text = lines[pos].trim().to_string();
        if text == "\\end\\" {
            seen_end = true;
            break;
        }
        let order = match text.as_str() {
            "\\1-grams:" => 1,
            "\\2-grams:" => 2,
            "\\3-grams:" => 3,
            _ => return Err(ArpaError::UnexpectedSection { line: pos + 1, text }),
        };
        pos += 1;
        let mut found = 0usize;
        while pos < lines.len() {
            let entry = lines[pos].trim();
            if entry.is_empty() || entry.starts_with('\\') {
                break;
            }
            let mut fields = entry.split_whitespace();
            let score_text = fields.next().expect("non-empty line has a first field");
            let score: f64 = score_text.parse().map_err(|_| ArpaError::BadScore {
                line: pos + 1,
                text: score_text.to_string(),
            })?;
            let ids: Vec<u32> = fields.map(|w| vocab.id_or_unk(w)).collect();
            if ids.len() != order {
                return Err(ArpaError::BadEntry {
                    line: pos + 1,
                    expected: order,
                    found: ids.len(),
                });
            }
            match order {
                1 => uni.push((score, ids[0])),
                2 => bi.push((score, (ids[0], ids[1]))),
                _ => tri.push((score, (ids[0], ids[1], ids[2]))),
            }
            found += 1;
            pos += 1;
        }
        if found != declared[order - 1] {
            return Err(ArpaError::SectionCountMismatch {
                order,
                declared: declared[order - 1],
                found,
            });
        }
    }
    if !seen_end {
        return Err(ArpaError::UnexpectedEof);
    }
    for (order, (&decl, len)) in declared
        .iter()
        .zip([uni.len(), bi.len(), tri.len()])
        .enumerate()
    {
        if decl != len {
            return Err(ArpaError::SectionCountMismatch {
                order: order + 1,
                declared: decl,
                found: len,
            });
        }
    }

    // Remapping unknown words to <unk> can create duplicate tuples: sort
    // stably and keep the first file occurrence of each tuple.
    uni.sort_by_key(|&(_, id)| id);
    uni.dedup_by_key(|&mut (_, id)| id);
    bi.sort_by_key(|&(_, ids)| ids);
    bi.dedup_by_key(|&mut (_, ids)| ids);
    tri.sort_by_key(|&(_, ids)| ids);
    tri.dedup_by_key(|&mut (_, ids)| ids);

    Ok(ArpaModel { uni, bi, tri, lambda: DEFAULT_LAMBDA })
}
