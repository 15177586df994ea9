//! N-gram counting and vocabulary selection.
//!
//! Counts every within-sentence window of length 1–3 (windows never cross
//! sentence boundaries; the `<s>` / `<e>` markers participate), then picks
//! the capped vocabulary in frequency-rank order with reserved tag IDs at
//! the front.

use std::collections::HashMap;

use crate::textprep::{is_tag, Sentence, TagToken};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Size caps for the three model orders. The model order itself is fixed at
/// trigrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelCaps {
    /// Maximum vocabulary size, including the 4 reserved tags. Must be ≥ 5
    /// so at least one real word fits.
    pub n_uni: usize,
    /// Maximum number of stored bigram entries.
    pub n_bi: usize,
    /// Maximum number of stored trigram entries.
    pub n_tri: usize,
}

impl Default for ModelCaps {
    fn default() -> Self {
        ModelCaps { n_uni: 100_000, n_bi: 200_000, n_tri: 250_000 }
    }
}

impl ModelCaps {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_uni < 5 {
            return Err(format!("n_uni must be at least 5, got {}", self.n_uni));
        }
        // Word IDs and bigram-row references are stored in 3 bytes.
        const LIMIT: usize = 1 << 24;
        if self.n_uni >= LIMIT || self.n_bi >= LIMIT {
            return Err(format!(
                "caps must stay below 2^24 (3-byte IDs): n_uni={} n_bi={}",
                self.n_uni, self.n_bi
            ));
        }
        Ok(())
    }
}

/// Raw occurrence counts for unigrams, bigrams, and trigrams.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NgramCounts {
    pub uni: HashMap<String, u64>,
    pub bi: HashMap<(String, String), u64>,
    pub tri: HashMap<(String, String, String), u64>,
    /// Sum of all unigram counts (tags included).
    pub total_tokens: u64,
}

impl NgramCounts {
    pub fn uni_count(&self, w: &str) -> u64 {
        self.uni.get(w).copied().unwrap_or(0)
    }

    pub fn bi_count(&self, w1: &str, w2: &str) -> u64 {
        self.bi.get(&(w1.to_string(), w2.to_string())).copied().unwrap_or(0)
    }

    pub fn tri_count(&self, w1: &str, w2: &str, w3: &str) -> u64 {
        self.tri
            .get(&(w1.to_string(), w2.to_string(), w3.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Token count excluding `<s>` — the unigram probability denominator.
    pub fn total_non_start_tokens(&self) -> u64 {
        self.total_tokens - self.uni_count(TagToken::SentenceStart.surface())
    }

    #[cfg(feature = "parallel")]
    fn absorb(&mut self, other: NgramCounts) {
        for (k, v) in other.uni {
            *self.uni.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.bi {
            *self.bi.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.tri {
            *self.tri.entry(k).or_insert(0) += v;
        }
        self.total_tokens += other.total_tokens;
    }

    /// Sorted text dump, one n-gram per line: `w1[ w2[ w3]]\tcount`.
    pub fn dump(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        lines.extend(self.uni.iter().map(|(w, c)| format!("{w}\t{c}")));
        lines.extend(self.bi.iter().map(|((a, b), c)| format!("{a} {b}\t{c}")));
        lines.extend(self.tri.iter().map(|((a, b, w), c)| format!("{a} {b} {w}\t{c}")));
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

fn count_sentence(counts: &mut NgramCounts, sentence: &Sentence) {
    let t = &sentence.tokens;
    counts.total_tokens += t.len() as u64;
    for w in t {
        *counts.uni.entry(w.clone()).or_insert(0) += 1;
    }
    for pair in t.windows(2) {
        *counts.bi.entry((pair[0].clone(), pair[1].clone())).or_insert(0) += 1;
    }
    for tri in t.windows(3) {
        *counts
            .tri
            .entry((tri[0].clone(), tri[1].clone(), tri[2].clone()))
            .or_insert(0) += 1;
    }
}

/// Counts all 1–3 token windows of every sentence (sequential).
pub fn count_ngrams_seq(sentences: &[Sentence]) -> NgramCounts {
    let mut counts = NgramCounts::default();
    for s in sentences {
        count_sentence(&mut counts, s);
    }
    counts
}

/// Counts all 1–3 token windows of every sentence, sharded across threads.
/// Shard merges add counts, so the result is identical to the sequential
/// version regardless of shard boundaries.
#[cfg(feature = "parallel")]
pub fn count_ngrams_par(sentences: &[Sentence]) -> NgramCounts {
    let shard = (sentences.len() / (rayon::current_num_threads() * 4)).max(256);
    sentences
        .par_chunks(shard)
        .map(count_ngrams_seq)
        .reduce(NgramCounts::default, |mut a, b| {
            a.absorb(b);
            a
        })
}

/// Counts all 1–3 token windows of every sentence.
pub fn count_ngrams(sentences: &[Sentence]) -> NgramCounts {
    #[cfg(feature = "parallel")]
    {
        count_ngrams_par(sentences)
    }
    #[cfg(not(feature = "parallel"))]
    {
        count_ngrams_seq(sentences)
    }
}

/// The model vocabulary: dense word IDs in frequency-rank order.
///
/// IDs 0–3 are always the tags `<s>`, `<e>`, `<unk>`, `<bad>`. Every other
/// word is ranked by unigram count descending, ties broken lexicographically
/// ascending, so the ID order is also the unigram-probability order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

/// Number of reserved tag IDs at the front of every vocabulary.
pub const NUM_TAGS: u32 = 4;

impl Vocabulary {
    /// Builds a vocabulary from an ID-ordered word list. The list must start
    /// with the four tags and contain no duplicates.
    pub fn from_words(words: Vec<String>) -> Result<Vocabulary, String> {
        if words.len() < NUM_TAGS as usize {
            return Err("vocabulary must include the 4 reserved tags".into());
        }
        for (i, tag) in TagToken::ALL.iter().enumerate() {
            if words[i] != tag.surface() {
                return Err(format!(
                    "word {} must be the reserved tag {}, got {:?}",
                    i,
                    tag.surface(),
                    words[i]
                ));
            }
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(format!("duplicate word {w:?} in vocabulary"));
            }
        }
        Ok(Vocabulary { words, index })
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// ID for a word, falling back to `<unk>` for out-of-vocabulary words.
    pub fn id_or_unk(&self, word: &str) -> u32 {
        self.id(word).unwrap_or(TagToken::Unknown.id())
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the 4 tags are always present
    }

    pub fn is_tag_id(&self, id: u32) -> bool {
        id < NUM_TAGS
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Words in ID order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|s| s.as_str())
    }
}

/// Picks the vocabulary: the 4 tags plus the `n_uni − 4` most frequent
/// words, ranked by (count descending, word ascending).
pub fn select_vocabulary(counts: &NgramCounts, caps: &ModelCaps) -> Vocabulary {
    let mut ranked: Vec<(&str, u64)> = counts
        .uni
        .iter()
        .filter(|(w, _)| !is_tag(w))
        .map(|(w, c)| (w.as_str(), *c))
        .collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(caps.n_uni.saturating_sub(NUM_TAGS as usize));

    let mut words: Vec<String> =
        TagToken::ALL.iter().map(|t| t.surface().to_string()).collect();
    words.extend(ranked.into_iter().map(|(w, _)| w.to_string()));
    Vocabulary::from_words(words).expect("ranked construction satisfies the invariants")
}

/// Fraction of the non-tag token mass covered by the vocabulary.
/// A corpus with no non-tag tokens has coverage 0 by definition.
pub fn coverage(counts: &NgramCounts, vocab: &Vocabulary) -> f64 {
    let mut covered: u64 = 0;
    let mut total: u64 = 0;
    for (w, c) in &counts.uni {
        if is_tag(w) {
            continue;
        }
        total += c;
        if vocab.contains(w) {
            covered += c;
        }
    }
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::clean_text;

    fn caps(n_uni: usize) -> ModelCaps {
        ModelCaps { n_uni, ..ModelCaps::default() }
    }

    #[test]
    fn single_sentence_windows_enumerated() {
        let counts = count_ngrams(&[Sentence::from_words(["a", "b"])]);
        assert_eq!(counts.uni_count("<s>"), 1);
        assert_eq!(counts.uni_count("a"), 1);
        assert_eq!(counts.uni_count("b"), 1);
        assert_eq!(counts.uni_count("<e>"), 1);
        assert_eq!(counts.bi_count("<s>", "a"), 1);
        assert_eq!(counts.bi_count("a", "b"), 1);
        assert_eq!(counts.bi_count("b", "<e>"), 1);
        assert_eq!(counts.tri_count("<s>", "a", "b"), 1);
        assert_eq!(counts.tri_count("a", "b", "<e>"), 1);
        assert_eq!(counts.uni.len(), 4);
        assert_eq!(counts.bi.len(), 3);
        assert_eq!(counts.tri.len(), 2);
        assert_eq!(counts.total_tokens, 4);
    }

    #[test]
    fn empty_stream_counts_nothing() {
        let counts = count_ngrams(&[]);
        assert_eq!(counts, NgramCounts::default());
    }

    #[test]
    fn start_tag_count_equals_sentence_count() {
        let sentences = clean_text("a b. c. d e f", &Default::default());
        let counts = count_ngrams(&sentences);
        assert_eq!(counts.uni_count("<s>"), 3);
        assert_eq!(counts.uni_count("<e>"), 3);
    }

    #[test]
    fn windows_never_cross_sentences() {
        let sentences = clean_text("a b. c d", &Default::default());
        let counts = count_ngrams(&sentences);
        assert_eq!(counts.bi_count("b", "c"), 0);
        assert_eq!(counts.bi_count("<e>", "<s>"), 0);
        assert_eq!(counts.tri_count("b", "<e>", "<s>"), 0);
    }

    /// Independent brute-force recount: enumerate windows with index
    /// arithmetic instead of `windows()`.
    fn brute_force(sentences: &[Sentence]) -> NgramCounts {
        let mut c = NgramCounts::default();
        for s in sentences {
            let t = &s.tokens;
            c.total_tokens += t.len() as u64;
            for i in 0..t.len() {
                *c.uni.entry(t[i].clone()).or_insert(0) += 1;
                if i + 1 < t.len() {
                    *c.bi.entry((t[i].clone(), t[i + 1].clone())).or_insert(0) += 1;
                }
                if i + 2 < t.len() {
                    *c.tri
                        .entry((t[i].clone(), t[i + 1].clone(), t[i + 2].clone()))
                        .or_insert(0) += 1;
                }
            }
        }
        c
    }

    #[test]
    fn matches_brute_force_on_small_corpus() {
        let text = "the cat sat on the mat\nthe cat ran\na cat sat\n\
                    the dog sat on the cat\nthe mat sat";
        let sentences = clean_text(text, &Default::default());
        assert_eq!(count_ngrams(&sentences), brute_force(&sentences));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_counting_agree() {
        let text = "a b c d. b c d a. c d a b. d a b c. a b. b c. c d";
        let base = clean_text(text, &Default::default());
        let sentences: Vec<Sentence> =
            std::iter::repeat(base).take(300).flatten().collect();
        assert_eq!(count_ngrams_par(&sentences), count_ngrams_seq(&sentences));
    }

    #[test]
    fn bigram_counts_bounded_by_unigram_counts() {
        let text = "the cat sat on the mat\nthe cat ran away quickly\n\
                    a dog sat on a mat";
        let counts = count_ngrams(&clean_text(text, &Default::default()));
        for ((w1, w2), &c12) in &counts.bi {
            assert!(c12 <= counts.uni_count(w1), "({w1},{w2})");
            assert!(c12 <= counts.uni_count(w2), "({w1},{w2})");
        }
        // Successor counts sum to at most the context count.
        let mut successor_mass: HashMap<&str, u64> = HashMap::new();
        for ((w1, _), c) in &counts.bi {
            *successor_mass.entry(w1).or_insert(0) += c;
        }
        for (w1, mass) in successor_mass {
            assert!(mass <= counts.uni_count(w1), "{w1}");
        }
    }

    #[test]
    fn tag_ids_are_fixed() {
        let counts = count_ngrams(&clean_text("b a", &Default::default()));
        let vocab = select_vocabulary(&counts, &caps(100));
        assert_eq!(vocab.id("<s>"), Some(0));
        assert_eq!(vocab.id("<e>"), Some(1));
        assert_eq!(vocab.id("<unk>"), Some(2));
        assert_eq!(vocab.id("<bad>"), Some(3));
        assert!(vocab.is_tag_id(3));
        assert!(!vocab.is_tag_id(4));
    }

    #[test]
    fn selection_applies_count_then_lex_tiebreak() {
        // a:5 b:5 c:1 with n_uni=6 → a and b kept (a first), c dropped.
        let mut counts = NgramCounts::default();
        counts.uni.insert("a".into(), 5);
        counts.uni.insert("b".into(), 5);
        counts.uni.insert("c".into(), 1);
        counts.total_tokens = 11;
        let vocab = select_vocabulary(&counts, &caps(6));
        assert_eq!(vocab.len(), 6);
        assert_eq!(vocab.id("a"), Some(4));
        assert_eq!(vocab.id("b"), Some(5));
        assert_eq!(vocab.id("c"), None);
        assert_eq!(vocab.id_or_unk("c"), 2);
    }

    #[test]
    fn huge_cap_keeps_everything() {
        let sentences = clean_text("x y z z y x w", &Default::default());
        let counts = count_ngrams(&sentences);
        let vocab = select_vocabulary(&counts, &caps(1000));
        for w in ["w", "x", "y", "z"] {
            assert!(vocab.contains(w), "{w}");
        }
        assert_eq!(vocab.len(), 8); // 4 tags + 4 words
    }

    #[test]
    fn selection_matches_brute_force_ranking() {
        let text = "e d c b a\ne d c b\ne d c\ne d\ne";
        let counts = count_ngrams(&clean_text(text, &Default::default()));
        let vocab = select_vocabulary(&counts, &caps(7));
        // Brute force: sort (count desc, word asc), take n_uni − 4.
        let mut ranked: Vec<(&String, &u64)> =
            counts.uni.iter().filter(|(w, _)| !is_tag(w)).collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let expect: Vec<&str> = ranked.iter().take(3).map(|(w, _)| w.as_str()).collect();
        assert_eq!(expect, vec!["e", "d", "c"]);
        for (i, w) in expect.iter().enumerate() {
            assert_eq!(vocab.id(w), Some(4 + i as u32));
        }
        assert_eq!(vocab.len(), 7);
    }

    #[test]
    fn selection_is_stable_under_sentence_reordering() {
        let text = "b b a\nc c b\na a c";
        let mut sentences = clean_text(text, &Default::default());
        let v1 = select_vocabulary(&count_ngrams(&sentences), &caps(6));
        sentences.reverse();
        let v2 = select_vocabulary(&count_ngrams(&sentences), &caps(6));
        assert_eq!(v1, v2);
    }

    #[test]
    fn coverage_bounds() {
        let sentences = clean_text("a a a b", &Default::default());
        let counts = count_ngrams(&sentences);
        let all = select_vocabulary(&counts, &caps(100));
        assert_eq!(coverage(&counts, &all), 1.0);
        let none = select_vocabulary(&NgramCounts::default(), &caps(100));
        assert_eq!(coverage(&counts, &none), 0.0);
        assert_eq!(coverage(&NgramCounts::default(), &all), 0.0);
    }

    #[test]
    fn coverage_on_partial_vocabulary() {
        // a:3, b:1 → keeping only a covers 3/4.
        let sentences = clean_text("a a a b", &Default::default());
        let counts = count_ngrams(&sentences);
        let vocab = select_vocabulary(&counts, &caps(5));
        assert!(vocab.contains("a") && !vocab.contains("b"));
        assert_eq!(coverage(&counts, &vocab), 0.75);
    }

    #[test]
    fn coverage_is_monotone_in_vocabulary_cap() {
        let text = "f e d c b a\nf e d c b\nf e d c\nf e d\nf e\nf";
        let counts = count_ngrams(&clean_text(text, &Default::default()));
        let mut last = 0.0;
        for n_uni in 5..=11 {
            let c = coverage(&counts, &select_vocabulary(&counts, &caps(n_uni)));
            assert!(c >= last, "coverage dropped at n_uni={n_uni}");
            last = c;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn caps_validation() {
        assert!(ModelCaps::default().validate().is_ok());
        assert!(caps(4).validate().is_err());
        assert!(ModelCaps { n_uni: 5, n_bi: 1 << 24, n_tri: 0 }.validate().is_err());
    }

    #[test]
    fn dump_is_sorted_and_parseable() {
        let counts = count_ngrams(&clean_text("b a", &Default::default()));
        let dump = counts.dump();
        let lines: Vec<&str> = dump.lines().collect();
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
        assert!(lines.contains(&"<s> b a\t1"));
        assert!(lines.contains(&"a <e>\t1"));
    }
}
