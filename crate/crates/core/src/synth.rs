//! Deterministic synthetic data: a template-grammar corpus generator for
//! end-to-end quality checks, and a direct model-file writer for load- and
//! latency-scaling benchmarks where only structure and size matter.
//!
//! Everything is seeded; the same seed always produces the same bytes.

use std::collections::HashSet;
use std::path::Path;

use rand::prelude::*;
use rand_distr::Zipf;
use rand_pcg::Pcg64Mcg;

use crate::arpa::ArpaModel;
use crate::binfmt::{
    serialize_data_file, write_class_file, BinfmtError, ClassFileData, FwoTables, QuantParams,
    VocabTrie,
};
use crate::counts::NUM_TAGS;
use crate::engine::ModelPaths;
use crate::textprep::TagToken;

/// A generated training text plus a word→part-of-speech lexicon (TSV).
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub text: String,
    pub lexicon: String,
}

const DET: usize = 0;
const NOUN: usize = 1;
const VERB: usize = 2;
const ADJ: usize = 3;
const PREP: usize = 4;
const CONJ: usize = 5;
const PRON: usize = 6;
const AUX: usize = 7;
const ADV: usize = 8;

const LABELS: [&str; 9] =
    ["DET", "NOUN", "VERB", "ADJ", "PREP", "CONJ", "PRON", "AUX", "ADV"];

const CLOSED: [&[&str]; 9] = [
    &["the", "a", "this", "that", "every", "some"],
    &[], // nouns are generated
    &[], // verbs are generated
    &[], // adjectives are generated
    &["on", "in", "under", "over", "near", "with"],
    &["and", "but", "so"],
    &["it", "he", "she", "they", "we"],
    &["will", "can", "must", "may"],
    &["quickly", "slowly", "quietly", "often", "rarely"],
];

/// (class sizes for the generated open classes)
const OPEN_SIZES: [(usize, usize); 3] = [(NOUN, 120), (VERB, 80), (ADJ, 60)];

const TEMPLATES: [&[usize]; 7] = [
    &[DET, NOUN, VERB],
    &[DET, NOUN, VERB, ADV],
    &[DET, ADJ, NOUN, VERB],
    &[DET, NOUN, VERB, PREP, DET, NOUN],
    &[PRON, AUX, VERB, DET, NOUN],
    &[DET, NOUN, VERB, CONJ, PRON, VERB],
    &[DET, ADJ, NOUN, VERB, PREP, DET, ADJ, NOUN],
];

fn make_open_words(rng: &mut Pcg64Mcg, n: usize, taken: &mut HashSet<String>) -> Vec<String> {
    const ONSETS: &[&str] = &[
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr",
        "gr", "kl", "pl", "st", "tr", "sh", "ch",
    ];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou", "ei"];
    const CODAS: &[&str] = &["", "n", "r", "s", "t", "l", "m", "nd", "st"];
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = if rng.gen_range(0..3) == 0 { 3 } else { 2 };
        let mut word = String::new();
        for _ in 0..syllables {
            word.push_str(ONSETS.choose(rng).unwrap());
            word.push_str(VOWELS.choose(rng).unwrap());
        }
        word.push_str(CODAS.choose(rng).unwrap());
        if taken.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

/// Word inventory of one part of speech with a Zipf rank distribution.
struct SlotClass {
    words: Vec<String>,
    zipf: Zipf<f64>,
}

impl SlotClass {
    fn new(words: Vec<String>, exponent: f64) -> SlotClass {
        let zipf = Zipf::new(words.len() as u64, exponent).expect("valid zipf parameters");
        SlotClass { words, zipf }
    }

    fn sample(&self, rng: &mut Pcg64Mcg) -> &str {
        let rank = rng.sample(self.zipf) as usize;
        &self.words[rank - 1]
    }
}

/// Generates a corpus of at least `target_tokens` words (stopping at the
/// first sentence boundary past the target) from a small template grammar
/// with Zipf-distributed word choice, plus the matching lexicon.
pub fn corpus(seed: u64, target_tokens: usize) -> SynthCorpus {
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    let mut taken: HashSet<String> =
        CLOSED.iter().flat_map(|c| c.iter().map(|w| w.to_string())).collect();

    let classes: Vec<SlotClass> = CLOSED
        .iter()
        .enumerate()
        .map(|(slot, members)| {
            if members.is_empty() {
                let (_, size) = OPEN_SIZES.iter().find(|(s, _)| *s == slot).unwrap();
                SlotClass::new(make_open_words(&mut rng, *size, &mut taken), 1.2)
            } else {
                SlotClass::new(members.iter().map(|w| w.to_string()).collect(), 1.0)
            }
        })
        .collect();

    let mut lexicon = String::new();
    for (slot, class) in classes.iter().enumerate() {
        for word in &class.words {
            lexicon.push_str(word);
            lexicon.push('\t');
            lexicon.push_str(LABELS[slot]);
            lexicon.push('\n');
        }
    }

    let mut text = String::new();
    let mut tokens = 0usize;
    while tokens < target_tokens {
        let template = TEMPLATES.choose(&mut rng).unwrap();
        for (i, &slot) in template.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            text.push_str(classes[slot].sample(&mut rng));
        }
        text.push_str(".\n");
        tokens += template.len();
    }
    SynthCorpus { text, lexicon }
}

/// Shape of a directly written model file set.
#[derive(Debug, Clone, Copy)]
pub struct SynthModelSpec {
    /// Non-tag vocabulary size.
    pub n_words: usize,
    /// Number of bigram context rows (≤ `n_words`).
    pub bi_rows: usize,
    /// Successors per bigram row (≤ `n_words`).
    pub bi_successors: usize,
    /// Number of trigram context rows (≤ `bi_rows · bi_successors`).
    pub tri_rows: usize,
    /// Successors per trigram row (≤ `n_words`).
    pub tri_successors: usize,
    pub k: u16,
    pub n_classes: u16,
    pub seed: u64,
}

impl Default for SynthModelSpec {
    fn default() -> SynthModelSpec {
        SynthModelSpec {
            n_words: 1000,
            bi_rows: 400,
            bi_successors: 12,
            tri_rows: 2000,
            tri_successors: 6,
            k: 5,
            n_classes: 16,
            seed: 7,
        }
    }
}

/// A written file set plus the vocabulary behind it (ID = 4 + index).
#[derive(Debug, Clone)]
pub struct SynthModel {
    pub paths: ModelPaths,
    pub words: Vec<String>,
}

fn base26(mut value: usize, width: usize) -> String {
    let mut chars = vec![b'a'; width];
    for slot in chars.iter_mut().rev() {
        *slot = b'a' + (value % 26) as u8;
        value /= 26;
    }
    String::from_utf8(chars).expect("ascii")
}

/// Writes a structurally valid `<name>.vocab` / `.ngram` / `.class` set of
/// the requested shape through the real serializers. Scores land exactly on
/// the quantization grid, so files round-trip without loss.
pub fn write_model_files(
    dir: &Path,
    name: &str,
    spec: &SynthModelSpec,
) -> Result<SynthModel, BinfmtError> {
    assert!(spec.n_words >= 1, "need at least one word");
    assert!(spec.bi_rows <= spec.n_words && spec.bi_successors <= spec.n_words);
    assert!(spec.tri_rows <= spec.bi_rows * spec.bi_successors);
    assert!(spec.tri_successors <= spec.n_words);
    assert!(spec.n_classes >= 1);

    let mut rng = Pcg64Mcg::seed_from_u64(spec.seed);
    let n = spec.n_words;
    let width = {
        let mut w = 1;
        let mut span = 26usize;
        while span < n.div_ceil(26).max(1) {
            w += 1;
            span *= 26;
        }
        w
    };
    // First letter cycles a–z so completion tables have many prefixes.
    let words: Vec<String> = (0..n)
        .map(|i| format!("{}{}", (b'a' + (i % 26) as u8) as char, base26(i / 26, width)))
        .collect();

    let id = |i: usize| -> u32 { NUM_TAGS + (i % n) as u32 };
    let grid_score = |q: u32| -> f64 { -(q as f64) / 1000.0 };

    let mut arpa = ArpaModel::empty(0.4);
    for tag in TagToken::ALL {
        arpa.uni.push((grid_score(29_999), tag.id()));
    }
    for i in 0..n {
        arpa.uni.push((grid_score(3_000 + (i % 20_000) as u32), id(i)));
    }
    for row in 0..spec.bi_rows {
        let a = id(row);
        for j in 0..spec.bi_successors {
            let b = id(row + j);
            let q = 1_000 + ((row * 31 + j * 17) % 25_000) as u32;
            arpa.bi.push((grid_score(q), (a, b)));
        }
    }
    for t in 0..spec.tri_rows {
        let (row, j) = (t % spec.bi_rows, t / spec.bi_rows);
        let (a, b) = (id(row), id(row + j));
        for m in 0..spec.tri_successors {
            let c = id(t + m);
            let q = 500 + ((t * 13 + m * 11) % 25_000) as u32;
            arpa.tri.push((grid_score(q), (a, b, c)));
        }
    }
    // Jitter a few bigram scores so compressed sizes are not artificially
    // repetitive; stays on the grid.
    for entry in arpa.bi.iter_mut() {
        if rng.gen_range(0..4) == 0 {
            entry.0 = grid_score(1_000 + rng.gen_range(0..25_000));
        }
    }

    let k = spec.k as usize;
    let fwo = FwoTables {
        prediction: (0..n.min(k)).map(&id).collect(),
        completion: (0..26.min(n))
            .map(|c| {
                let ids: Vec<u32> = (0..k)
                    .map_while(|row| {
                        let i = c + row * 26;
                        (i < n).then(|| id(i))
                    })
                    .collect();
                ((b'a' + c as u8) as char, ids)
            })
            .collect(),
    };

    let n_uni = NUM_TAGS as usize + n;
    let nc = spec.n_classes as usize;
    let word_class: Vec<u8> = (0..n_uni)
        .map(|w| {
            if w < NUM_TAGS as usize {
                (nc - 1) as u8
            } else {
                ((w - NUM_TAGS as usize) % nc) as u8
            }
        })
        .collect();
    let class_topk: Vec<Vec<(u32, u16)>> = (0..nc)
        .map(|c| {
            (0..k)
                .map_while(|rank| {
                    let i = c + rank * nc;
                    (i < n).then(|| (id(i), 200 + rank as u16 * 5))
                })
                .collect()
        })
        .collect();
    let pair_argmax: Vec<u8> =
        (0..nc * nc).map(|pair| ((pair / nc + pair % nc) % nc) as u8).collect();
    let class_data = ClassFileData {
        n_classes: spec.n_classes,
        k: spec.k,
        word_class,
        class_topk,
        pair_argmax,
    };

    let trie = VocabTrie::from_words(
        TagToken::ALL.iter().map(|t| t.surface()).chain(words.iter().map(String::as_str)),
    )?;

    let paths = ModelPaths::for_base(dir.join(name));
    std::fs::write(&paths.vocab, trie.to_bytes())?;
    let ngram_bytes =
        serialize_data_file(&arpa, &fwo, &QuantParams::default(), spec.k, 0.4, 0.5)?;
    std::fs::write(&paths.ngram, ngram_bytes)?;
    let class_bytes = write_class_file(&class_data)?;
    std::fs::write(paths.class.as_ref().expect("for_base sets a class path"), class_bytes)?;
    Ok(SynthModel { paths, words })
}
