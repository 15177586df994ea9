//! `inspect`: header fields, per-section byte arithmetic, table dumps, and
//! the dequantized ARPA re-export for diffing against text models.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ngramkit::arpa::arpa_to_string;
use ngramkit::binfmt::classfile::{self, ClassFileData};
use ngramkit::binfmt::data::{self, DataModel};
use ngramkit::binfmt::{
    decompress_payload, parse_data_payload, read_class_file, BinfmtError, QuantParams, VocabTrie,
};
use ngramkit::counts::Vocabulary;
use ngramkit::engine::ModelPaths;

use crate::{data_error, CliError, CliResult};

#[derive(Args)]
pub struct InspectArgs {
    /// Model basename (the part before .vocab/.ngram/.class)
    model: PathBuf,
    /// Also print the first N entries of every table
    #[arg(long, default_value_t = 0)]
    top: usize,
    /// Dump the model as dequantized ARPA text instead of the summary
    #[arg(long)]
    arpa: bool,
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| data_error(format!("cannot read {}: {e}", path.display())))
}

fn format_error(path: &Path, e: BinfmtError) -> CliError {
    data_error(format!("{}: {e}", path.display()))
}

pub fn cmd_inspect(args: InspectArgs) -> CliResult<()> {
    let paths = ModelPaths::for_base_lenient(&args.model);

    let vocab_bytes = read_bytes(&paths.vocab)?;
    let trie =
        VocabTrie::read_from(&vocab_bytes[..]).map_err(|e| format_error(&paths.vocab, e))?;

    let ngram_bytes = read_bytes(&paths.ngram)?;
    let payload =
        decompress_payload(&ngram_bytes).map_err(|e| format_error(&paths.ngram, e))?;
    let model = parse_data_payload(&payload).map_err(|e| format_error(&paths.ngram, e))?;

    let class = match &paths.class {
        Some(path) => {
            let bytes = read_bytes(path)?;
            Some((read_class_file(&bytes).map_err(|e| format_error(path, e))?, bytes.len()))
        }
        None => None,
    };

    // The same cross-file checks the engine applies, so a file set it would
    // reject never prints as healthy.
    if trie.len() != model.uni.len() {
        return Err(data_error(format!(
            "model files disagree: {} words in the vocabulary, {} unigram scores",
            trie.len(),
            model.uni.len()
        )));
    }
    if let Some((c, _)) = &class {
        if c.word_class.len() != model.uni.len() {
            return Err(data_error(format!(
                "model files disagree: {} words in the vocabulary, {} class assignments",
                model.uni.len(),
                c.word_class.len()
            )));
        }
    }

    if args.arpa {
        let words: Vec<String> =
            (0..trie.len() as u32).map(|id| word_of(&trie, id).to_string()).collect();
        let vocab = Vocabulary::from_words(words)
            .map_err(|e| data_error(format!("{}: {e}", paths.vocab.display())))?;
        print!("{}", arpa_to_string(&model.to_arpa(), &vocab));
        return Ok(());
    }

    print_summary(&trie, vocab_bytes.len(), &model, ngram_bytes.len(), payload.len(), &class);
    if args.top > 0 {
        print_tables(&trie, &model, class.as_ref().map(|(c, _)| c), args.top);
    }
    Ok(())
}

fn word_of(trie: &VocabTrie, id: u32) -> &str {
    trie.word(id).unwrap_or("?")
}

fn print_summary(
    trie: &VocabTrie,
    vocab_file: usize,
    model: &DataModel,
    ngram_file: usize,
    payload: usize,
    class: &Option<(ClassFileData, usize)>,
) {
    let k = model.params.k as usize;
    let uni = 2 * model.uni.len();
    let bi: usize = model.bi_groups.iter().map(|g| 5 + 5 * g.successors.len()).sum();
    let tri: usize = model.tri_groups.iter().map(|g| 5 + 5 * g.successors.len()).sum();
    let prediction = 3 * k;
    let completion = 2 + model.fwo.completion.len() * (4 + 3 * k);
    let tri_entries: usize = model.tri_groups.iter().map(|g| g.successors.len()).sum();

    println!("vocab   {} B file, {} words", vocab_file, trie.len());
    println!("ngram   {} B file, {} B payload", ngram_file, payload);
    println!("  header          {:>8} B", data::HEADER_LEN);
    println!("  unigrams        {:>8} B  ({} words)", uni, model.uni.len());
    println!(
        "  bigram rows     {:>8} B  ({} rows, {} entries)",
        bi,
        model.bi_groups.len(),
        model.n_bi_entries()
    );
    println!(
        "  trigram rows    {:>8} B  ({} rows, {} entries)",
        tri,
        model.tri_groups.len(),
        tri_entries
    );
    println!("  fwo prediction  {:>8} B", prediction);
    println!(
        "  fwo completion  {:>8} B  ({} first characters)",
        completion,
        model.fwo.completion.len()
    );
    println!(
        "params  k = {}, lambda = {:.3}, r = {:.3}",
        k,
        model.params.lambda(),
        model.params.r()
    );

    match class {
        Some((c, file)) => {
            let nk = c.n_classes as usize * c.k as usize;
            println!(
                "class   {} B file, {} classes, {} members per class",
                file, c.n_classes, c.k
            );
            println!("  header          {:>8} B", classfile::HEADER_LEN);
            println!("  word map        {:>8} B", c.word_class.len());
            println!("  class members   {:>8} B", 3 * nk);
            println!("  emissions       {:>8} B", 2 * nk);
            println!("  pair table      {:>8} B", (c.n_classes as usize).pow(2));
        }
        None => println!("class   (absent)"),
    }
}

fn print_tables(trie: &VocabTrie, model: &DataModel, class: Option<&ClassFileData>, top: usize) {
    let quant = QuantParams::default();
    // Parsing validated every stored score against the quantizer cap.
    let deq = |q: u16| quant.dequantize_log10(q).expect("parser checked the cap");
    let entry = |&(id, q): &(u32, u16)| format!("{} {:.3}", word_of(trie, id), deq(q));

    println!("top unigrams");
    let mut ids: Vec<u32> = (0..model.uni.len() as u32).collect();
    ids.sort_by_key(|&id| (model.uni[id as usize], id));
    for &id in ids.iter().take(top) {
        println!("  {:<24} {:>10.3}", word_of(trie, id), deq(model.uni[id as usize]));
    }

    println!("bigram rows");
    for g in model.bi_groups.iter().take(top) {
        let row: Vec<String> = g.successors.iter().take(top).map(entry).collect();
        println!("  {:<24} {}", word_of(trie, g.ctx), row.join(", "));
    }

    // Trigram rows key on the flat bigram-entry index; spell them back out
    // as the two context words.
    let mut bi_entries: Vec<(u32, u32)> = Vec::with_capacity(model.n_bi_entries());
    for g in &model.bi_groups {
        for &(id, _) in &g.successors {
            bi_entries.push((g.ctx, id));
        }
    }
    println!("trigram rows");
    for g in model.tri_groups.iter().take(top) {
        let (w1, w2) = bi_entries[g.ctx as usize];
        let ctx = format!("{} {}", word_of(trie, w1), word_of(trie, w2));
        let row: Vec<String> = g.successors.iter().take(top).map(entry).collect();
        println!("  {:<24} {}", ctx, row.join(", "));
    }

    println!("frequent words");
    let any: Vec<&str> = model.fwo.prediction.iter().take(top).map(|&id| word_of(trie, id)).collect();
    println!("  {:<24} {}", "(any context)", any.join(" "));
    for (ch, ids) in model.fwo.completion.iter().take(top) {
        let row: Vec<&str> = ids.iter().take(top).map(|&id| word_of(trie, id)).collect();
        println!("  {:<24} {}", ch, row.join(" "));
    }

    if let Some(c) = class {
        println!("classes");
        for (index, members) in c.class_topk.iter().enumerate().take(top) {
            let row: Vec<String> = members.iter().map(entry).collect();
            println!("  {:<24} {}", index, row.join(", "));
        }
    }
}
