//! Corpus preprocessing: cleaning, sentence segmentation, and tagging.
//!
//! Raw text is turned into tokenized sentences wrapped in `<s>` / `<e>`
//! markers, with blacklisted words replaced by `<bad>` and rare words by
//! `<unk>`. The stages compose in a fixed order — clean, blacklist,
//! rare-word tagging — and are deterministic for a fixed input and config.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

/// The four reserved tag tokens. Their surface forms are fixed strings and
/// they are never produced as suggestions downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagToken {
    SentenceStart,
    SentenceEnd,
    Unknown,
    Blacklisted,
}

impl TagToken {
    pub const ALL: [TagToken; 4] = [
        TagToken::SentenceStart,
        TagToken::SentenceEnd,
        TagToken::Unknown,
        TagToken::Blacklisted,
    ];

    /// The reserved vocabulary ID of this tag (tags occupy IDs 0–3 in
    /// declaration order).
    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn surface(self) -> &'static str {
        match self {
            TagToken::SentenceStart => "<s>",
            TagToken::SentenceEnd => "<e>",
            TagToken::Unknown => "<unk>",
            TagToken::Blacklisted => "<bad>",
        }
    }

    pub fn from_surface(s: &str) -> Option<TagToken> {
        TagToken::ALL.into_iter().find(|t| t.surface() == s)
    }
}

/// True for any of the four reserved tag surface forms.
pub fn is_tag(token: &str) -> bool {
    TagToken::from_surface(token).is_some()
}

/// Preprocessing settings.
#[derive(Debug, Clone)]
pub struct PrepConfig {
    /// Words with corpus frequency below this become `<unk>`. Must be ≥ 1;
    /// 1 disables rare-word tagging (nothing has frequency below 1).
    pub rare_threshold: u64,
    /// Lowercase words replaced by `<bad>`.
    pub blacklist: HashSet<String>,
    /// Lowercase all tokens while cleaning (on by default).
    pub lowercase_input: bool,
    /// Optional cap on the number of corpus bytes consumed (sampling).
    pub byte_budget: Option<u64>,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            rare_threshold: 3,
            blacklist: HashSet::new(),
            lowercase_input: true,
            byte_budget: None,
        }
    }
}

/// A tokenized sentence: always starts with `<s>`, ends with `<e>`, and
/// contains neither marker in between. Tokens never contain whitespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
}

impl Sentence {
    /// Wraps already-clean word tokens in sentence markers.
    pub fn from_words<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Sentence {
        let mut tokens = vec![TagToken::SentenceStart.surface().to_string()];
        tokens.extend(words.into_iter().map(Into::into));
        tokens.push(TagToken::SentenceEnd.surface().to_string());
        Sentence { tokens }
    }

    /// The tokens between the `<s>` / `<e>` markers.
    pub fn words(&self) -> &[String] {
        &self.tokens[1..self.tokens.len() - 1]
    }
}

/// What `clean_corpus` saw while reading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanSummary {
    /// Invalid UTF-8 byte sequences replaced with U+FFFD.
    pub invalid_sequences: usize,
    pub bytes_read: u64,
    pub sentences: usize,
}

/// Splits raw text into cleaned, tokenized sentences.
///
/// Sentences are delimited by newlines or terminal punctuation (`.` `!` `?`),
/// whichever comes first. Tokens are whitespace-split, stripped of leading
/// and trailing punctuation (intra-word apostrophes and hyphens survive),
/// and lowercased when the config says so. Empty sentences are dropped.
/// Invalid byte sequences are replaced with U+FFFD and counted in the
/// summary rather than failing the run.
pub fn clean_corpus<R: Read>(
    raw: R,
    config: &PrepConfig,
) -> std::io::Result<(Vec<Sentence>, CleanSummary)> {
    let mut reader = BufReader::new(raw);
    let mut summary = CleanSummary::default();
    let mut sentences = Vec::new();
    let mut line = Vec::new();
    loop {
        if let Some(budget) = config.byte_budget {
            if summary.bytes_read >= budget {
                break;
            }
        }
        line.clear();
        let n = reader.read_until(b'\n', &mut line)?;
        if n == 0 {
            break;
        }
        summary.bytes_read += n as u64;
        let text = String::from_utf8_lossy(&line);
        summary.invalid_sequences += text.matches('\u{FFFD}').count();
        for chunk in split_terminal(&text) {
            if let Some(sentence) = tokenize_chunk(chunk, config) {
                sentences.push(sentence);
            }
        }
    }
    summary.sentences = sentences.len();
    Ok((sentences, summary))
}

/// `clean_corpus` over an in-memory string; infallible.
pub fn clean_text(text: &str, config: &PrepConfig) -> Vec<Sentence> {
    clean_corpus(text.as_bytes(), config).expect("reading from a str cannot fail").0
}

/// Splits a line further at terminal punctuation, consuming the delimiter.
fn split_terminal(line: &str) -> impl Iterator<Item = &str> {
    line.split(['.', '!', '?', '\n'])
}

/// Tokenizes one sentence chunk; returns None when no tokens survive.
fn tokenize_chunk(chunk: &str, config: &PrepConfig) -> Option<Sentence> {
    let mut words = Vec::new();
    for raw in chunk.split_whitespace() {
        let stripped = raw.trim_matches(|c: char| !c.is_alphanumeric());
        if stripped.is_empty() {
            continue;
        }
        if config.lowercase_input {
            words.push(stripped.to_lowercase());
        } else {
            words.push(stripped.to_string());
        }
    }
    if words.is_empty() {
        None
    } else {
        Some(Sentence::from_words(words))
    }
}

/// Replaces every occurrence of a blacklisted word with `<bad>`.
///
/// Matching is case-insensitive against the lowercase blacklist entries;
/// tags are never replaced. Sentence count and per-sentence token counts
/// are preserved.
pub fn apply_blacklist(sentences: &mut [Sentence], blacklist: &HashSet<String>) {
    if blacklist.is_empty() {
        return;
    }
    for sentence in sentences {
        for token in &mut sentence.tokens {
            if is_tag(token) {
                continue;
            }
            let hit = if token.chars().any(|c| c.is_uppercase()) {
                blacklist.contains(&token.to_lowercase())
            } else {
                blacklist.contains(token.as_str())
            };
            if hit {
                *token = TagToken::Blacklisted.surface().to_string();
            }
        }
    }
}

/// Replaces every word whose total corpus frequency is below the threshold
/// with `<unk>`. Tags are never counted or replaced. Requires the whole
/// collection because frequencies are global.
pub fn tag_rare_words(sentences: &mut [Sentence], rare_threshold: u64) {
    if rare_threshold <= 1 {
        return;
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for sentence in sentences.iter() {
        for token in &sentence.tokens {
            if !is_tag(token) {
                *freq.entry(token.as_str()).or_insert(0) += 1;
            }
        }
    }
    let rare: HashSet<String> = freq
        .into_iter()
        .filter(|&(_, n)| n < rare_threshold)
        .map(|(w, _)| w.to_string())
        .collect();
    if rare.is_empty() {
        return;
    }
    for sentence in sentences {
        for token in &mut sentence.tokens {
            if rare.contains(token.as_str()) {
                *token = TagToken::Unknown.surface().to_string();
            }
        }
    }
}

/// Full preprocessing pipeline: clean → blacklist → rare-word tagging.
pub fn preprocess<R: Read>(
    raw: R,
    config: &PrepConfig,
) -> std::io::Result<(Vec<Sentence>, CleanSummary)> {
    let (mut sentences, summary) = clean_corpus(raw, config)?;
    apply_blacklist(&mut sentences, &config.blacklist);
    tag_rare_words(&mut sentences, config.rare_threshold);
    Ok((sentences, summary))
}

/// Renders sentences one per line, tokens space-separated including the tag
/// surface forms — the debug dump format.
pub fn render_sentences(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&s.tokens.join(" "));
        out.push('\n');
    }
    out
}
