//! The build manifest: which corpus, which knobs, where to write.
//!
//! Every setting can come from command-line flags, from a manifest file of
//! `key = value` lines (`#` starts a comment), or both — a flag always wins
//! over the file. `corpus` may repeat in either place to concatenate files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::Args;
use ngramkit::pipeline::BuildOptions;

use crate::{data_error, read_named, usage_error, CliResult};

#[derive(Args, Debug, Default)]
pub struct BuildArgs {
    /// Manifest file of `key = value` lines; flags override its entries
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Training corpus (repeatable; files are concatenated in order)
    #[arg(long = "corpus")]
    corpus: Vec<PathBuf>,
    /// Words to strike from the corpus, one per line
    #[arg(long)]
    blacklist: Option<PathBuf>,
    /// word<TAB>LABEL table; enables the class companion model
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Vocabulary size cap
    #[arg(long)]
    n_uni: Option<usize>,
    /// Kept-bigram cap
    #[arg(long)]
    n_bi: Option<usize>,
    /// Kept-trigram cap
    #[arg(long)]
    n_tri: Option<usize>,
    /// Words seen fewer than this many times become <unk>
    #[arg(long)]
    rare_threshold: Option<u64>,
    /// Suggestion-list length baked into the frequent-word tables, 1-9
    #[arg(long)]
    k: Option<u16>,
    /// Backoff factor stored in the model, (0, 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// Class-interpolation ratio stored in the model, [0, 1]
    #[arg(long)]
    r: Option<f64>,
    /// Trigram-pruning backoff factor, (0, 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Output basename: writes <output>.vocab/.ngram/.class
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// A fully merged and checked build request.
pub struct ResolvedBuild {
    pub corpus: Vec<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub output: PathBuf,
    pub options: BuildOptions,
}

impl BuildArgs {
    /// Merges manifest and flags, then checks that every referenced input
    /// exists before any processing starts.
    pub fn resolve(self) -> CliResult<ResolvedBuild> {
        let mut m = match &self.manifest {
            Some(path) => Manifest::from_file(path)?,
            None => Manifest::default(),
        };

        if !self.corpus.is_empty() {
            m.corpus = self.corpus;
        }
        merge(&mut m.blacklist, self.blacklist);
        merge(&mut m.lexicon, self.lexicon);
        merge(&mut m.n_uni, self.n_uni);
        merge(&mut m.n_bi, self.n_bi);
        merge(&mut m.n_tri, self.n_tri);
        merge(&mut m.rare_threshold, self.rare_threshold);
        merge(&mut m.k, self.k);
        merge(&mut m.lambda, self.lambda);
        merge(&mut m.r, self.r);
        merge(&mut m.alpha, self.alpha);
        merge(&mut m.output, self.output);

        if m.corpus.is_empty() {
            return Err(usage_error("no corpus given (pass --corpus or a manifest `corpus =` line)"));
        }
        let output = m.output.ok_or_else(|| {
            usage_error("no output basename given (pass --output or a manifest `output =` line)")
        })?;
        for path in m.corpus.iter().chain(&m.blacklist).chain(&m.lexicon) {
            if !path.exists() {
                return Err(data_error(format!("{}: no such file", path.display())));
            }
        }

        let mut options = BuildOptions::default();
        if let Some(path) = &m.blacklist {
            options.prep.blacklist = load_blacklist(path)?;
        }
        if let Some(v) = m.rare_threshold {
            options.prep.rare_threshold = v;
        }
        if let Some(v) = m.n_uni {
            options.caps.n_uni = v;
        }
        if let Some(v) = m.n_bi {
            options.caps.n_bi = v;
        }
        if let Some(v) = m.n_tri {
            options.caps.n_tri = v;
        }
        if let Some(v) = m.k {
            options.k = v;
        }
        if let Some(v) = m.lambda {
            options.lambda = v;
        }
        if let Some(v) = m.r {
            options.r = v;
        }
        if let Some(v) = m.alpha {
            options.alpha = v;
        }

        Ok(ResolvedBuild { corpus: m.corpus, lexicon: m.lexicon, output, options })
    }
}

fn merge<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn load_blacklist(path: &Path) -> CliResult<HashSet<String>> {
    let text = read_named(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(str::to_lowercase)
        .collect())
}

/// The manifest-file side of [`BuildArgs`]: same fields, parsed from text.
#[derive(Debug, Default, PartialEq)]
struct Manifest {
    corpus: Vec<PathBuf>,
    blacklist: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    n_uni: Option<usize>,
    n_bi: Option<usize>,
    n_tri: Option<usize>,
    rare_threshold: Option<u64>,
    k: Option<u16>,
    lambda: Option<f64>,
    r: Option<f64>,
    alpha: Option<f64>,
    output: Option<PathBuf>,
}

impl Manifest {
    fn from_file(path: &Path) -> CliResult<Manifest> {
        Manifest::from_text(&read_named(path)?, &path.display().to_string())
    }

    fn from_text(text: &str, origin: &str) -> CliResult<Manifest> {
        let mut manifest = Manifest::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| usage_error(format!("{origin}:{}: {msg}", idx + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(at(format!("`{line}` is missing a key or a value")));
            }
            match key {
                "corpus" => manifest.corpus.push(PathBuf::from(value)),
                "blacklist" => manifest.blacklist = Some(PathBuf::from(value)),
                "lexicon" => manifest.lexicon = Some(PathBuf::from(value)),
                "output" => manifest.output = Some(PathBuf::from(value)),
                "n_uni" => manifest.n_uni = Some(parse(key, value).map_err(at)?),
                "n_bi" => manifest.n_bi = Some(parse(key, value).map_err(at)?),
                "n_tri" => manifest.n_tri = Some(parse(key, value).map_err(at)?),
                "rare_threshold" => {
                    manifest.rare_threshold = Some(parse(key, value).map_err(at)?)
                }
                "k" => manifest.k = Some(parse(key, value).map_err(at)?),
                "lambda" => manifest.lambda = Some(parse(key, value).map_err(at)?),
                "r" => manifest.r = Some(parse(key, value).map_err(at)?),
                "alpha" => manifest.alpha = Some(parse(key, value).map_err(at)?),
                _ => return Err(at(format!("unknown key `{key}`"))),
            }
        }
        Ok(manifest)
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("bad `{key}` value {value:?}: {e}"))
}
