//! Golden-file checks: a fixed corpus, lexicon, and blacklist must always
//! build byte-identical model files, the same text re-export, the same
//! build report, and the same evaluation numbers. Any intentional change to
//! cleaning, counting, pruning, scoring, or the file formats is re-blessed
//! with `UPDATE_GOLDEN=1 cargo test -p ngramkit --test golden` and shows up
//! in review as a diff of these files.
//!
//! `Cargo.lock` pins the compressor, so the `.ngram` bytes are stable.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use ngramkit::arpa::arpa_to_string;
use ngramkit::binfmt::read_data_file;
use ngramkit::counts::{count_ngrams, select_vocabulary};
use ngramkit::engine::load_model;
use ngramkit::evalkit::{evaluate, TestSet};
use ngramkit::pipeline::{build_model, BuildOptions};
use ngramkit::textprep::preprocess;
use ngramkit::{EngineConfig, ModelCaps, PrepConfig};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// The pinned build settings. Changing any of these re-blesses the goldens.
fn golden_options() -> BuildOptions {
    let blacklist: HashSet<String> =
        std::fs::read_to_string(data_dir().join("blacklist.txt"))
            .expect("blacklist fixture")
            .lines()
            .map(str::to_string)
            .collect();
    // Caps chosen to bind: the fixture counts ~68 distinct words, ~212
    // bigrams, ~332 trigrams, so selection and pruning all truncate.
    BuildOptions {
        prep: PrepConfig { rare_threshold: 2, blacklist, ..PrepConfig::default() },
        caps: ModelCaps { n_uni: 60, n_bi: 150, n_tri: 200 },
        k: 5,
        max_classes: 8,
        class_k: 5,
        ..BuildOptions::default()
    }
}

/// Compares bytes against a golden file, or rewrites it under
/// `UPDATE_GOLDEN=1`.
fn check(name: &str, got: &[u8]) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, got).expect("bless golden file");
        return;
    }
    let want = std::fs::read(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    if got != want.as_slice() {
        panic!(
            "{name} differs from the golden copy ({} vs {} bytes); if the change \
             is intentional, re-bless with UPDATE_GOLDEN=1 and review the diff",
            got.len(),
            want.len()
        );
    }
}

#[test]
fn fixed_corpus_builds_identical_files_and_numbers() {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = std::fs::read_to_string(data_dir().join("corpus.txt")).expect("corpus");
    let lexicon = std::fs::read_to_string(data_dir().join("lexicon.tsv")).expect("lexicon");
    let options = golden_options();

    let (paths, report) = build_model(
        corpus.as_bytes(),
        Some(lexicon.as_bytes()),
        &options,
        dir.path().join("model"),
    )
    .expect("build");

    check("model.vocab", &std::fs::read(&paths.vocab).expect("vocab bytes"));
    check("model.ngram", &std::fs::read(&paths.ngram).expect("ngram bytes"));
    check(
        "model.class",
        &std::fs::read(paths.class.as_ref().expect("class file")).expect("class bytes"),
    );
    check("build-report.txt", format!("{report}\n").as_bytes());

    // The text re-export of the stored n-grams, with dequantized scores.
    let model = read_data_file(&std::fs::read(&paths.ngram).expect("ngram bytes"))
        .expect("parse ngram");
    let (sentences, _) =
        preprocess(corpus.as_bytes(), &options.prep).expect("clean corpus");
    let vocab = select_vocabulary(&count_ngrams(&sentences), &options.caps);
    check("model.arpa", arpa_to_string(&model.to_arpa(), &vocab).as_bytes());

    // Evaluation numbers on the fixed held-out text.
    let engine = load_model(&paths, &EngineConfig::default()).expect("load");
    let test_text =
        std::fs::read_to_string(data_dir().join("testset.txt")).expect("test set");
    let prep = PrepConfig { rare_threshold: 1, ..PrepConfig::default() };
    let testset = TestSet::from_text(&test_text, &prep);
    let eval = evaluate(&testset, &engine, 3).expect("evaluate");
    check("eval.kv", eval.to_kv().as_bytes());
}

#[test]
fn rebuilding_twice_is_deterministic() {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = std::fs::read_to_string(data_dir().join("corpus.txt")).expect("corpus");
    let lexicon = std::fs::read_to_string(data_dir().join("lexicon.tsv")).expect("lexicon");
    let options = golden_options();

    let read_set = |base: &Path| -> Vec<Vec<u8>> {
        let paths = ngramkit::engine::ModelPaths::for_base(base);
        vec![
            std::fs::read(&paths.vocab).expect("vocab"),
            std::fs::read(&paths.ngram).expect("ngram"),
            std::fs::read(paths.class.as_ref().expect("class")).expect("class"),
        ]
    };
    for name in ["first", "second"] {
        build_model(
            corpus.as_bytes(),
            Some(lexicon.as_bytes()),
            &options,
            dir.path().join(name),
        )
        .expect("build");
    }
    assert_eq!(
        read_set(&dir.path().join("first")),
        read_set(&dir.path().join("second")),
        "two builds from identical inputs must be byte-identical"
    );
}
