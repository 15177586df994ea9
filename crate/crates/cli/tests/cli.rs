//! End-to-end runs of the compiled `ngramkit` binary: exit codes, output
//! files, and the stdout surfaces other tooling scrapes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ngramkit");

const CORPUS: &str = "\
the sailor mends the net on the pier
a gull rides the wind over the harbor
the captain checks the chart before the storm
the crew hauls the catch onto the deck
every boat ties up at the pier in the evening
the old sailor watches the tide from the lighthouse
a young sailor loads the crates onto the boat
the storm drops heavy waves on the pier
the captain guides the boat past the lighthouse
the crew unloads salted fish at the market
a heavy rope holds the mast against the wind
the tide lifts the boats near the pier
the sailor sells the catch at the market early
gulls follow the boat into the harbor
the captain buys a new chart in the town
the quiet harbor waits for the morning tide
a broken net hangs from the old mast
the crew mends the sails before the voyage
the lighthouse guides the sailors through the storm
every morning the boats leave the harbor early
the busy market opens near the harbor
the young captain follows the bright star
the anchor drops into the calm water
the sailor ties the rope around the crate
fresh fish arrive at the market every evening
the wind fills the sails over the waves
an old chart shows the safe route home
the crew watches the gulls above the water
the tide turns before the evening comes
the storm passes and the harbor calms
";

const LEXICON: &str = "\
the\tDET
a\tDET
an\tDET
every\tDET
sailor\tNOUN
captain\tNOUN
crew\tNOUN
harbor\tNOUN
boat\tNOUN
pier\tNOUN
net\tNOUN
storm\tNOUN
tide\tNOUN
market\tNOUN
lighthouse\tNOUN
chart\tNOUN
rope\tNOUN
mast\tNOUN
fish\tNOUN
gull\tNOUN
mends\tVERB
hauls\tVERB
ties\tVERB
watches\tVERB
guides\tVERB
drops\tVERB
sells\tVERB
buys\tVERB
loads\tVERB
follows\tVERB
old\tADJ
young\tADJ
heavy\tADJ
quiet\tADJ
busy\tADJ
bright\tADJ
broken\tADJ
fresh\tADJ
salted\tADJ
on\tPREP
in\tPREP
at\tPREP
over\tPREP
near\tPREP
before\tPREP
and\tCONJ
early\tADV
";

const TESTSET: &str = "\
the sailor mends the net before the storm
the captain guides the boat into the harbor
the crew hauls the catch onto the pier
a young gull rides the wind over the waves
the tide lifts the boats in the evening
the old lighthouse watches the quiet harbor
";

fn run_with_stdin(args: &[&str], stdin: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args)
        .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn().expect("spawn ngramkit");
    if let Some(text) = stdin {
        child.stdin.as_mut().expect("piped stdin").write_all(text.as_bytes()).expect("feed stdin");
    }
    drop(child.stdin.take());
    child.wait_with_output().expect("wait for ngramkit")
}

fn run(args: &[&str]) -> Output {
    run_with_stdin(args, None)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Fixture {
    dir: TempDir,
    corpus: PathBuf,
    lexicon: PathBuf,
    testset: PathBuf,
}

impl Fixture {
    fn new() -> Fixture {
        let dir = TempDir::new().expect("tempdir");
        let corpus = dir.path().join("corpus.txt");
        let lexicon = dir.path().join("lexicon.tsv");
        let testset = dir.path().join("testset.txt");
        fs::write(&corpus, CORPUS).unwrap();
        fs::write(&lexicon, LEXICON).unwrap();
        fs::write(&testset, TESTSET).unwrap();
        Fixture { dir, corpus, lexicon, testset }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Builds a model under caps that force pruning on this corpus and
    /// returns the basename plus the report printed to stdout.
    fn build(&self, base: &str, extra: &[&str]) -> (PathBuf, String) {
        let out = self.path(base);
        let mut args: Vec<&str> = vec!["build", "--rare-threshold", "1"];
        let corpus = self.corpus.to_str().unwrap();
        let lexicon = self.lexicon.to_str().unwrap();
        let output = out.to_str().unwrap().to_owned();
        args.extend(["--corpus", corpus, "--lexicon", lexicon]);
        if !extra.iter().any(|a| a.starts_with("--n-")) {
            args.extend(["--n-uni", "64", "--n-bi", "100", "--n-tri", "90"]);
        }
        args.extend(extra);
        args.extend(["--output", &output]);
        let result = run(&args);
        assert_eq!(code(&result), 0, "build failed: {}", stderr(&result));
        (out, stdout(&result))
    }
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut name = base.file_name().unwrap().to_os_string();
    name.push(".");
    name.push(ext);
    base.with_file_name(name)
}

/// Pulls the three counts out of a `counted X words, Y bigrams, Z trigrams`
/// or `kept …` report line.
fn parse_triple(report: &str, label: &str) -> (u64, u64, u64) {
    let line = report
        .lines()
        .find(|l| l.starts_with(label))
        .unwrap_or_else(|| panic!("no `{label}` line in {report:?}"));
    let fields: Vec<&str> = line.split_whitespace().collect();
    let num = |i: usize| fields[i].parse().unwrap_or_else(|_| panic!("bad number in {line:?}"));
    (num(1), num(3), num(5))
}

/// Every number immediately followed by a standalone `B` token.
fn byte_figures(line: &str) -> Vec<u64> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    tokens
        .windows(2)
        .filter(|pair| pair[1] == "B" || pair[1] == "B,")
        .map(|pair| pair[0].parse().expect("byte figure"))
        .collect()
}

#[test]
fn build_writes_the_three_files_and_a_report() {
    let fx = Fixture::new();
    let (base, report) = fx.build("m", &[]);

    for ext in ["vocab", "ngram", "class"] {
        let path = with_ext(&base, ext);
        assert!(path.exists(), "missing {}", path.display());
        assert!(report.contains(&format!("wrote {}", path.display())));
    }
    for label in ["corpus", "counted", "kept", "coverage", "classes", "files"] {
        assert!(report.lines().any(|l| l.starts_with(label)), "no `{label}` line:\n{report}");
    }
    let (uni, bi, tri) = parse_triple(&report, "kept");
    assert_eq!((uni, bi, tri), (64, 100, 90), "caps should bind on this corpus");
}

#[test]
fn huge_caps_leave_nothing_pruned() {
    let fx = Fixture::new();
    let (_, report) =
        fx.build("m", &["--n-uni", "100000", "--n-bi", "200000", "--n-tri", "250000"]);
    let counted = parse_triple(&report, "counted");
    let kept = parse_triple(&report, "kept");
    // The vocabulary always carries the four reserved tags; with no rare or
    // blacklisted words, <unk> and <bad> never occur, so it outsizes the
    // counted-distinct figure by exactly those two.
    assert_eq!(kept.0, counted.0 + 2, "huge caps keep every word:\n{report}");
    assert_eq!(kept.1, counted.1, "huge caps keep every bigram:\n{report}");
    assert_eq!(kept.2, counted.2, "huge caps keep every trigram:\n{report}");
}

#[test]
fn manifest_and_flags_build_identical_models() {
    let fx = Fixture::new();
    let (flag_base, _) = fx.build("by-flags", &[]);

    let manifest = fx.path("build.cfg");
    fs::write(
        &manifest,
        format!(
            "# same settings as the flag run\n\
             corpus = {}\n\
             lexicon = {}\n\
             rare_threshold = 1\n\
             n_uni = 64\n\
             n_bi = 100\n\
             n_tri = 90\n\
             output = {}\n",
            fx.corpus.display(),
            fx.lexicon.display(),
            fx.path("by-manifest").display()
        ),
    )
    .unwrap();
    let result = run(&["build", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));

    for ext in ["vocab", "ngram", "class"] {
        let a = fs::read(with_ext(&flag_base, ext)).unwrap();
        let b = fs::read(with_ext(&fx.path("by-manifest"), ext)).unwrap();
        assert_eq!(a, b, ".{ext} files differ between flag and manifest builds");
    }
}

#[test]
fn flags_override_manifest_entries() {
    let fx = Fixture::new();
    let manifest = fx.path("build.cfg");
    fs::write(
        &manifest,
        format!(
            "corpus = {}\nrare_threshold = 1\nn_uni = 64\noutput = {}\n",
            fx.corpus.display(),
            fx.path("m").display()
        ),
    )
    .unwrap();
    let result = run(&["build", "--manifest", manifest.to_str().unwrap(), "--n-uni", "40"]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let (uni, _, _) = parse_triple(&stdout(&result), "kept");
    assert_eq!(uni, 40, "the flag should beat the manifest entry");
}

#[test]
fn a_missing_corpus_aborts_before_any_processing() {
    let fx = Fixture::new();
    let out = fx.path("sub").join("m");
    let result = run(&[
        "build",
        "--corpus",
        fx.path("nowhere.txt").to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("no such file"), "stderr: {}", stderr(&result));
    assert!(!fx.path("sub").exists(), "nothing should be created for a doomed build");
}

#[test]
fn bad_invocations_exit_one() {
    let fx = Fixture::new();
    let manifest = fx.path("build.cfg");
    fs::write(&manifest, "bogus = 1\n").unwrap();
    let result = run(&["build", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code(&result), 1);
    assert!(stderr(&result).contains("unknown key `bogus`"), "stderr: {}", stderr(&result));

    // clap-level failures: unknown flag, malformed value, missing subcommand.
    assert_eq!(code(&run(&["build", "--frobnicate"])), 1);
    assert_eq!(code(&run(&["evaluate", "m", "t", "--k", "three"])), 1);
    assert_eq!(code(&run(&[])), 1);
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(code(&help), 0);
    for subcommand in ["build", "suggest", "evaluate", "inspect", "bench"] {
        assert!(stdout(&help).contains(subcommand), "--help should list {subcommand}");
    }
    assert_eq!(code(&run(&["--version"])), 0);
}

/// Splits a suggestion line into (rank, word, branch); the score column is
/// checked to parse as a float.
fn parse_suggestion(line: &str) -> (usize, String, String) {
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields.len(), 4, "unexpected suggestion line {line:?}");
    let rank: usize = fields[0].parse().expect("rank");
    let score: f64 = fields[2].parse().expect("score");
    assert!(score.is_finite() && score > 0.0, "score out of range in {line:?}");
    (rank, fields[1].to_string(), fields[3].to_string())
}

#[test]
fn suggest_answers_one_shot_queries() {
    let fx = Fixture::new();
    let (base, _) = fx.build("m", &[]);
    let base = base.to_str().unwrap();

    let predict = run(&["suggest", base, "the sailor|", "--k", "3"]);
    assert_eq!(code(&predict), 0, "{}", stderr(&predict));
    let lines: Vec<(usize, String, String)> =
        stdout(&predict).lines().map(parse_suggestion).collect();
    assert!(!lines.is_empty() && lines.len() <= 3);
    for (i, (rank, _, branch)) in lines.iter().enumerate() {
        assert_eq!(*rank, i + 1, "ranks must count up from 1");
        assert!(
            ["trigram", "bigram", "class+unigram"].contains(&branch.as_str()),
            "unknown branch {branch:?}"
        );
    }

    let complete = run(&["suggest", base, "the sailor|s", "--k", "3"]);
    assert_eq!(code(&complete), 0, "{}", stderr(&complete));
    let words: Vec<String> =
        stdout(&complete).lines().map(|l| parse_suggestion(l).1).collect();
    assert!(!words.is_empty(), "the fixture has plenty of s-words");
    for word in &words {
        assert!(word.starts_with('s'), "{word:?} does not match the typed prefix");
    }
}

#[test]
fn suggest_reads_lines_from_stdin_until_eof() {
    let fx = Fixture::new();
    let (base, _) = fx.build("m", &[]);

    let result = run_with_stdin(
        &["suggest", base.to_str().unwrap(), "--k", "3"],
        Some("the sailor|\n\n|b\n"),
    );
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let output = stdout(&result);
    let blocks: Vec<&str> =
        output.split("\n\n").map(str::trim).filter(|b| !b.is_empty()).collect();
    assert_eq!(blocks.len(), 2, "one block per non-empty query:\n{output}");
    for line in blocks[1].lines() {
        let (_, word, _) = parse_suggestion(line);
        assert!(word.starts_with('b'), "{word:?} should complete the prefix `b`");
    }
}

#[test]
fn evaluate_matches_the_library_and_writes_the_kv_report() {
    use ngramkit::engine::ModelPaths;
    use ngramkit::evalkit::{evaluate_files, TestSet};
    use ngramkit::{EngineConfig, PrepConfig};

    let fx = Fixture::new();
    let (base, _) = fx.build("m", &[]);
    let report_path = fx.path("eval.kv");

    let result = run(&[
        "evaluate",
        base.to_str().unwrap(),
        fx.testset.to_str().unwrap(),
        "--k",
        "3",
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    for label in ["test set", "keystrokes", "ksr", "nwp rate"] {
        assert!(stdout(&result).contains(label), "missing `{label}`:\n{}", stdout(&result));
    }

    let config = EngineConfig { k: 3, ..Default::default() };
    let prep = PrepConfig { rare_threshold: 1, ..PrepConfig::default() };
    let testset = TestSet::from_text(TESTSET, &prep);
    let expected = evaluate_files(&ModelPaths::for_base_lenient(&base), &config, &testset)
        .expect("library evaluation");
    assert_eq!(
        fs::read_to_string(&report_path).unwrap(),
        expected.to_kv(),
        "the kv report must equal the library's"
    );
}

#[test]
fn out_of_range_parameters_are_usage_errors() {
    let fx = Fixture::new();
    let (base, _) = fx.build("m", &[]);
    let base = base.to_str().unwrap();
    let testset = fx.testset.to_str().unwrap();

    for args in [
        vec!["evaluate", base, testset, "--k", "0"],
        vec!["evaluate", base, testset, "--k", "10"],
        vec!["suggest", base, "x|", "--lambda", "1.5"],
        vec!["suggest", base, "x|", "--r", "-0.1"],
        vec!["bench", base, testset, "--trials", "2"],
    ] {
        let result = run(&args);
        assert_eq!(code(&result), 1, "{args:?} should be a usage error: {}", stderr(&result));
    }
}

#[test]
fn inspect_section_sizes_sum_to_the_file_contents() {
    let fx = Fixture::new();
    let (base, _) = fx.build("m", &[]);

    let result = run(&["inspect", base.to_str().unwrap()]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let output = stdout(&result);
    let lines: Vec<&str> = output.lines().collect();

    let vocab_line = lines.iter().position(|l| l.starts_with("vocab")).expect("vocab line");
    assert_eq!(
        byte_figures(lines[vocab_line])[0],
        fs::metadata(with_ext(&base, "vocab")).unwrap().len()
    );

    let ngram_line = lines.iter().position(|l| l.starts_with("ngram")).expect("ngram line");
    let figures = byte_figures(lines[ngram_line]);
    assert_eq!(figures[0], fs::metadata(with_ext(&base, "ngram")).unwrap().len());
    let payload = figures[1];
    let sections: u64 =
        lines[ngram_line + 1..ngram_line + 7].iter().map(|l| byte_figures(l)[0]).sum();
    assert_eq!(sections, payload, "ngram sections must sum to the payload:\n{output}");

    let class_line = lines.iter().position(|l| l.starts_with("class")).expect("class line");
    let class_file = byte_figures(lines[class_line])[0];
    assert_eq!(class_file, fs::metadata(with_ext(&base, "class")).unwrap().len());
    let class_sections: u64 =
        lines[class_line + 1..class_line + 6].iter().map(|l| byte_figures(l)[0]).sum();
    assert_eq!(class_sections, class_file, "class sections must sum to the file:\n{output}");
}

#[test]
fn inspect_arpa_dump_matches_the_build_counts() {
    let fx = Fixture::new();
    let (base, report) = fx.build("m", &[]);
    let kept = parse_triple(&report, "kept");

    let result = run(&["inspect", base.to_str().unwrap(), "--arpa"]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let arpa = stdout(&result);
    assert!(arpa.starts_with("\\data\\"));
    for marker in ["\\1-grams:", "\\2-grams:", "\\3-grams:", "\\end\\"] {
        assert!(arpa.contains(marker), "missing {marker} in the ARPA dump");
    }
    let count = |order: usize| -> u64 {
        let tag = format!("ngram {order}=");
        let line = arpa.lines().find(|l| l.starts_with(&tag)).expect("header count");
        line[tag.len()..].parse().expect("count")
    };
    assert_eq!((count(1), count(2), count(3)), kept);
}

#[test]
fn inspect_with_top_lists_table_entries() {
    let fx = Fixture::new();
    let (base, _) = fx.build("m", &[]);

    let result = run(&["inspect", base.to_str().unwrap(), "--top", "3"]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let output = stdout(&result);
    for heading in ["top unigrams", "bigram rows", "trigram rows", "frequent words", "classes"]
    {
        assert!(output.contains(heading), "missing `{heading}` section:\n{output}");
    }
    // The most probable unigram on this corpus is unambiguous.
    let top = output.lines().skip_while(|l| *l != "top unigrams").nth(1).expect("first entry");
    assert!(top.split_whitespace().next() == Some("the"), "unexpected top word: {top:?}");
}

#[test]
fn corrupted_models_fail_with_named_errors_and_exit_two() {
    let fx = Fixture::new();
    let (base, _) = fx.build("m", &[]);

    // A clipped compressed stream must be called out, not half-loaded.
    let broken = fx.path("broken");
    for ext in ["vocab", "ngram", "class"] {
        fs::copy(with_ext(&base, ext), with_ext(&broken, ext)).unwrap();
    }
    let ngram = fs::read(with_ext(&broken, "ngram")).unwrap();
    fs::write(with_ext(&broken, "ngram"), &ngram[..ngram.len() / 2]).unwrap();

    let named = ["magic", "version", "truncated", "trailing", "corrupt", "decompression"];
    for args in
        [vec!["inspect", broken.to_str().unwrap()], vec!["suggest", broken.to_str().unwrap(), "x|"]]
    {
        let result = run(&args);
        assert_eq!(code(&result), 2, "{args:?} must fail on the clipped file");
        let message = stderr(&result);
        assert!(named.iter().any(|n| message.contains(n)), "unnamed error: {message}");
    }

    // A flipped magic byte in the vocabulary is named as such.
    let mut vocab = fs::read(with_ext(&broken, "vocab")).unwrap();
    vocab[0] = b'X';
    fs::write(with_ext(&broken, "vocab"), &vocab).unwrap();
    let result = run(&["inspect", broken.to_str().unwrap()]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("magic"), "stderr: {}", stderr(&result));
}

#[test]
fn bench_prints_timing_and_size_figures() {
    let fx = Fixture::new();
    let (base, _) = fx.build("m", &[]);

    let result =
        run(&["bench", base.to_str().unwrap(), fx.testset.to_str().unwrap(), "--trials", "3"]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let output = stdout(&result);
    for label in ["load time", "suggestion time", "model size", "resident est."] {
        assert!(output.contains(label), "missing `{label}`:\n{output}");
    }
}
