//! The compressed n-gram data file: quantized scores for all three orders
//! plus the frequent-word lists, in one zlib (RFC 1950) stream.
//!
//! Uncompressed payload layout (`OPNG`, little-endian):
//!
//! ```text
//! header     magic(4) version(1) n_uni(4) n_bi(4) n_tri(4)
//!            K(2) lambda_milli(2) r_milli(2)
//! unigrams   n_uni × score(2)            IDs implicit from position
//! bigrams    groups, context-ID ascending, until n_bi entries are read:
//!              ctx_id(3) n_succ(2) then n_succ × [word_id(3) score(2)]
//!              successors best-first (score ascending, ID ascending)
//! trigrams   groups, context ascending, until n_tri entries are read:
//!              ctx_entry(3) n_succ(2) then n_succ × [word_id(3) score(2)]
//!            ctx_entry is the position of the context bigram among all
//!            bigram successor entries, counted in file order
//! fwo pred   K × word_id(3), 0xFFFFFF-padded
//! fwo comp   n_entries(2) then n_entries × [char(4) K × word_id(3)],
//!            chars ascending, ID lists 0xFFFFFF-padded
//! ```
//!
//! Scores are quantizer values (smaller = more probable), and bigram /
//! trigram scores are conditionals — exactly what the backoff cascade
//! consumes at query time.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use byteorder::{LittleEndian, WriteBytesExt};
use flate2::write::ZlibEncoder;
use flate2::{Compression, Decompress, FlushDecompress, Status};

use super::{
    expect_eof, read_u16, read_u24, read_u32, read_u8, BinfmtError, QuantParams,
    FORMAT_VERSION, ID_SENTINEL, NGRAM_MAGIC,
};
use crate::arpa::ArpaModel;
use crate::counts::{NgramCounts, Vocabulary, NUM_TAGS};
use crate::textprep::is_tag;

/// Pinned compression level, so identical inputs give identical files.
const COMPRESSION_LEVEL: u32 = 6;

/// Header size in bytes.
pub const HEADER_LEN: usize = 4 + 1 + 4 + 4 + 4 + 2 + 2 + 2;

/// Scalar parameters carried in the data-file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    /// Suggestion-list length the frequent-word blocks were built for.
    pub k: u16,
    /// Stupid Backoff factor × 1000.
    pub lambda_milli: u16,
    /// Class-interpolation ratio × 1000.
    pub r_milli: u16,
}

impl ModelParams {
    pub fn lambda(&self) -> f64 {
        self.lambda_milli as f64 / 1000.0
    }

    pub fn r(&self) -> f64 {
        self.r_milli as f64 / 1000.0
    }
}

/// One context row: the context reference plus its successor list,
/// best-first (quantized score ascending, word ID ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub ctx: u32,
    pub successors: Vec<(u32, u16)>,
}

/// The frequent-word lists: a global prediction list and a per-first-
/// character completion table. Both hold non-tag word IDs, best-first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FwoTables {
    pub prediction: Vec<u32>,
    /// Sorted by character.
    pub completion: Vec<(char, Vec<u32>)>,
}

/// Parsed data file. Structural equality is byte-level fidelity: two equal
/// `DataModel`s serialize to identical files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataModel {
    pub params: ModelParams,
    /// Quantized unigram scores; the index is the word ID.
    pub uni: Vec<u16>,
    /// Bigram rows, context unigram ID ascending.
    pub bi_groups: Vec<Group>,
    /// Trigram rows, context bigram-entry index ascending.
    pub tri_groups: Vec<Group>,
    pub fwo: FwoTables,
}

impl DataModel {
    pub fn n_bi_entries(&self) -> usize {
        self.bi_groups.iter().map(|g| g.successors.len()).sum()
    }

    pub fn n_tri_entries(&self) -> usize {
        self.tri_groups.iter().map(|g| g.successors.len()).sum()
    }

    /// Closed-form size of the uncompressed payload. Frequent-word lists are
    /// sentinel-padded to K on disk, so the arithmetic uses K, not the
    /// in-memory list lengths.
    pub fn payload_len(&self) -> usize {
        let k = self.params.k as usize;
        let groups: usize = self
            .bi_groups
            .iter()
            .chain(&self.tri_groups)
            .map(|g| 3 + 2 + 5 * g.successors.len())
            .sum();
        HEADER_LEN
            + 2 * self.uni.len()
            + groups
            + 3 * k
            + 2
            + self.fwo.completion.len() * (4 + 3 * k)
    }

    /// Re-exports the stored n-grams as a text-format model with dequantized
    /// log10 scores — each score within one quantization step (0.001) of
    /// whatever was serialized. Entries come out sorted by ID tuple.
    pub fn to_arpa(&self) -> ArpaModel {
        let quant = QuantParams::default();
        let deq = |q: u16| quant.dequantize_log10(q).expect("stored scores are under the cap");
        let uni = self
            .uni
            .iter()
            .enumerate()
            .map(|(id, &q)| (deq(q), id as u32))
            .collect();
        let mut bi = Vec::new();
        let mut flat_ctx = Vec::new();
        for g in &self.bi_groups {
            for &(b, q) in &g.successors {
                bi.push((deq(q), (g.ctx, b)));
                flat_ctx.push((g.ctx, b));
            }
        }
        bi.sort_by_key(|&(_, ids)| ids);
        let mut tri = Vec::new();
        for g in &self.tri_groups {
            let (a, b) = flat_ctx[g.ctx as usize];
            for &(c, q) in &g.successors {
                tri.push((deq(q), (a, b, c)));
            }
        }
        tri.sort_by_key(|&(_, ids)| ids);
        ArpaModel { uni, bi, tri, lambda: self.params.lambda() }
    }
}

/// Builds the frequent-word lists: the global top-K non-tag words by count,
/// and per first character the top-K non-tag words starting with it. The
/// vocabulary's rank order *is* the count order, so both lists fall out of
/// a single ID-ascending scan.
pub fn build_fwo(_counts: &NgramCounts, vocab: &Vocabulary, k: usize) -> FwoTables {
    let mut prediction = Vec::with_capacity(k);
    let mut completion: BTreeMap<char, Vec<u32>> = BTreeMap::new();
    for (id, word) in vocab.iter().enumerate() {
        if is_tag(word) {
            continue;
        }
        let id = id as u32;
        if prediction.len() < k {
            prediction.push(id);
        }
        if let Some(first) = word.chars().next() {
            let entry = completion.entry(first).or_default();
            if entry.len() < k {
                entry.push(id);
            }
        }
    }
    FwoTables { prediction, completion: completion.into_iter().collect() }
}

fn write_padded_ids<W: Write>(sink: &mut W, ids: &[u32], k: usize) -> std::io::Result<()> {
    for i in 0..k {
        let id = ids.get(i).copied().unwrap_or(ID_SENTINEL);
        sink.write_u24::<LittleEndian>(id)?;
    }
    Ok(())
}

/// Serializes the model to the uncompressed payload.
///
/// The ARPA model must have dense unigram IDs (0..n_uni−1) and satisfy
/// closure: every trigram's context bigram must be present as a bigram
/// entry. Successor lists longer than a 2-byte count are a serialization
/// error naming the offending context.
pub fn serialize_data_payload(
    arpa: &ArpaModel,
    fwo: &FwoTables,
    quant: &QuantParams,
    k: u16,
    lambda: f64,
    r: f64,
) -> Result<Vec<u8>, BinfmtError> {
    let n_uni = arpa.uni.len();
    for (pos, &(_, id)) in arpa.uni.iter().enumerate() {
        if id as usize != pos {
            return Err(BinfmtError::Unserializable(format!(
                "unigram IDs must be dense and ascending; position {pos} holds ID {id}"
            )));
        }
    }
    if n_uni >= ID_SENTINEL as usize {
        return Err(BinfmtError::Unserializable(format!(
            "{n_uni} unigrams exceed the 3-byte ID space"
        )));
    }
    if !(0.0 < lambda && lambda <= 1.0) || !(0.0..=1.0).contains(&r) {
        return Err(BinfmtError::Unserializable(format!(
            "lambda {lambda} or ratio {r} outside their domains"
        )));
    }

    // Quantize and group bigrams by context, successors best-first; record
    // each entry's flat position so trigram contexts can reference it.
    let mut bi_groups: Vec<Group> = Vec::new();
    for &(score, (a, b)) in &arpa.bi {
        let q = quant.quantize_log10(score)?;
        match bi_groups.last_mut() {
            Some(g) if g.ctx == a => g.successors.push((b, q)),
            _ => {
                if bi_groups.last().is_some_and(|g| g.ctx > a) {
                    return Err(BinfmtError::Unserializable(
                        "bigram entries not sorted by ID tuple".into(),
                    ));
                }
                bi_groups.push(Group { ctx: a, successors: vec![(b, q)] });
            }
        }
    }
    let mut flat = HashMap::with_capacity(arpa.bi.len());
    let mut next_flat: u32 = 0;
    for g in &mut bi_groups {
        g.successors.sort_unstable_by(|x, y| x.1.cmp(&y.1).then(x.0.cmp(&y.0)));
        for &(b, _) in &g.successors {
            flat.insert((g.ctx, b), next_flat);
            next_flat += 1;
        }
    }

    let mut tri_by_ctx: BTreeMap<u32, Vec<(u32, u16)>> = BTreeMap::new();
    for &(score, (a, b, c)) in &arpa.tri {
        let q = quant.quantize_log10(score)?;
        let ctx = *flat.get(&(a, b)).ok_or_else(|| {
            BinfmtError::Unserializable(format!(
                "trigram context ({a}, {b}) is not a stored bigram (closure violation)"
            ))
        })?;
        tri_by_ctx.entry(ctx).or_default().push((c, q));
    }
    let tri_groups: Vec<Group> = tri_by_ctx
        .into_iter()
        .map(|(ctx, mut successors)| {
            successors.sort_unstable_by(|x, y| x.1.cmp(&y.1).then(x.0.cmp(&y.0)));
            Group { ctx, successors }
        })
        .collect();

    for (what, groups) in [("bigram", &bi_groups), ("trigram", &tri_groups)] {
        if let Some(g) = groups.iter().find(|g| g.successors.len() > u16::MAX as usize) {
            return Err(BinfmtError::Unserializable(format!(
                "{what} context {} has {} successors; the count field is 2 bytes",
                g.ctx,
                g.successors.len()
            )));
        }
    }

    let k_usize = k as usize;
    let mut payload = Vec::new();
    payload.write_all(&NGRAM_MAGIC)?;
    payload.write_u8(FORMAT_VERSION)?;
    payload.write_u32::<LittleEndian>(n_uni as u32)?;
    payload.write_u32::<LittleEndian>(arpa.bi.len() as u32)?;
    payload.write_u32::<LittleEndian>(arpa.tri.len() as u32)?;
    payload.write_u16::<LittleEndian>(k)?;
    payload.write_u16::<LittleEndian>((lambda * 1000.0).round() as u16)?;
    payload.write_u16::<LittleEndian>((r * 1000.0).round() as u16)?;

    for &(score, _) in &arpa.uni {
        payload.write_u16::<LittleEndian>(quant.quantize_log10(score)?)?;
    }
    for groups in [&bi_groups, &tri_groups] {
        for g in groups {
            payload.write_u24::<LittleEndian>(g.ctx)?;
            payload.write_u16::<LittleEndian>(g.successors.len() as u16)?;
            for &(id, q) in &g.successors {
                payload.write_u24::<LittleEndian>(id)?;
                payload.write_u16::<LittleEndian>(q)?;
            }
        }
    }
    write_padded_ids(&mut payload, &fwo.prediction, k_usize)?;
    payload.write_u16::<LittleEndian>(fwo.completion.len() as u16)?;
    for (c, ids) in &fwo.completion {
        payload.write_u32::<LittleEndian>(*c as u32)?;
        write_padded_ids(&mut payload, ids, k_usize)?;
    }
    Ok(payload)
}

/// Compresses an uncompressed payload into the on-disk representation.
pub fn compress_payload(payload: &[u8]) -> std::io::Result<Vec<u8>> {
    let mut encoder = ZlibEncoder::new(Vec::new(), Compression::new(COMPRESSION_LEVEL));
    encoder.write_all(payload)?;
    encoder.finish()
}

/// Inflates the on-disk compressed bytes back into a payload. A truncated
/// stream, a missing terminator or checksum, and bytes after the stream end
/// are all errors — the streaming decoder would silently accept some of
/// those, so this drives the decompressor directly and demands a clean
/// stream end with every input byte consumed.
pub fn decompress_payload(bytes: &[u8]) -> Result<Vec<u8>, BinfmtError> {
    let corrupt = |msg: &str| {
        BinfmtError::Decompress(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            msg.to_string(),
        ))
    };
    let mut inflater = Decompress::new(true);
    let mut payload = Vec::with_capacity(bytes.len().saturating_mul(4).max(4 * 1024));
    loop {
        let consumed = inflater.total_in() as usize;
        let produced = payload.len();
        let status = inflater
            .decompress_vec(&bytes[consumed..], &mut payload, FlushDecompress::Finish)
            .map_err(|e| {
                BinfmtError::Decompress(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    e,
                ))
            })?;
        match status {
            Status::StreamEnd => break,
            Status::Ok | Status::BufError => {
                if payload.len() == payload.capacity() {
                    payload.reserve(payload.capacity().max(4 * 1024));
                } else if inflater.total_in() as usize == consumed
                    && payload.len() == produced
                {
                    return Err(corrupt("compressed stream ends before its terminator"));
                }
            }
        }
    }
    if (inflater.total_in() as usize) != bytes.len() {
        return Err(corrupt("trailing bytes after the compressed stream"));
    }
    Ok(payload)
}

/// Serializes and compresses in one step — the bytes of `<name>.ngram`.
pub fn serialize_data_file(
    arpa: &ArpaModel,
    fwo: &FwoTables,
    quant: &QuantParams,
    k: u16,
    lambda: f64,
    r: f64,
) -> Result<Vec<u8>, BinfmtError> {
    let payload = serialize_data_payload(arpa, fwo, quant, k, lambda, r)?;
    Ok(compress_payload(&payload)?)
}

fn read_group_block<R: Read>(
    source: &mut R,
    section: &'static str,
    declared_entries: usize,
    ctx_limit: u32,
    ctx_kind: &str,
    n_uni: u32,
    quant: &QuantParams,
) -> Result<Vec<Group>, BinfmtError> {
    let mut groups: Vec<Group> = Vec::new();
    let mut entries = 0usize;
    while entries < declared_entries {
        let ctx = read_u24(source, section)?;
        if ctx >= ctx_limit {
            return Err(BinfmtError::UnresolvedReference {
                section,
                detail: format!("context {ctx} out of range ({ctx_kind} limit {ctx_limit})"),
            });
        }
        if let Some(prev) = groups.last() {
            if ctx <= prev.ctx {
                return Err(BinfmtError::Corrupt {
                    section,
                    detail: format!("contexts out of order: {} then {ctx}", prev.ctx),
                });
            }
        }
        let n_succ = read_u16(source, section)? as usize;
        if n_succ == 0 {
            return Err(BinfmtError::Corrupt {
                section,
                detail: format!("context {ctx} declares an empty successor list"),
            });
        }
        if entries + n_succ > declared_entries {
            return Err(BinfmtError::Corrupt {
                section,
                detail: format!(
                    "entries overrun the declared count: {} + {n_succ} > {declared_entries}",
                    entries
                ),
            });
        }
        let mut successors = Vec::with_capacity(n_succ);
        let mut seen = HashSet::with_capacity(n_succ);
        for _ in 0..n_succ {
            let id = read_u24(source, section)?;
            let q = read_u16(source, section)?;
            if id >= n_uni {
                return Err(BinfmtError::UnresolvedReference {
                    section,
                    detail: format!("successor ID {id} out of range (n_uni {n_uni})"),
                });
            }
            if q > quant.c2 {
                return Err(BinfmtError::Corrupt {
                    section,
                    detail: format!("score {q} above quantizer cap {}", quant.c2),
                });
            }
            if !seen.insert(id) {
                return Err(BinfmtError::Corrupt {
                    section,
                    detail: format!("context {ctx} lists successor {id} twice"),
                });
            }
            if let Some(&(last_id, last_q)) = successors.last() {
                if (q, id) <= (last_q, last_id) {
                    return Err(BinfmtError::Corrupt {
                        section,
                        detail: format!(
                            "context {ctx} successors not best-first at ID {id}"
                        ),
                    });
                }
            }
            successors.push((id, q));
        }
        entries += n_succ;
        groups.push(Group { ctx, successors });
    }
    Ok(groups)
}

fn read_padded_ids<R: Read>(
    source: &mut R,
    k: usize,
    section: &'static str,
    n_uni: u32,
) -> Result<Vec<u32>, BinfmtError> {
    let mut ids = Vec::new();
    let mut padding = false;
    for _ in 0..k {
        let id = read_u24(source, section)?;
        if id == ID_SENTINEL {
            padding = true;
            continue;
        }
        if padding {
            return Err(BinfmtError::Corrupt {
                section,
                detail: "word ID after sentinel padding".into(),
            });
        }
        if id >= n_uni {
            return Err(BinfmtError::UnresolvedReference {
                section,
                detail: format!("word ID {id} out of range (n_uni {n_uni})"),
            });
        }
        if id < NUM_TAGS {
            return Err(BinfmtError::Corrupt {
                section,
                detail: format!("tag ID {id} in a frequent-word list"),
            });
        }
        ids.push(id);
    }
    Ok(ids)
}

/// Parses the uncompressed payload, re-validating every invariant the
/// serializer guarantees: magic, version, ordering, deduplication, score
/// ranges, and referential closure.
pub fn parse_data_payload(payload: &[u8]) -> Result<DataModel, BinfmtError> {
    const FILE: &str = "ngram data";
    let quant = QuantParams::default();
    let mut src = payload;
    let source = &mut src;

    let mut magic = [0u8; 4];
    super::read_exact_section(source, &mut magic, "data header")?;
    if magic != NGRAM_MAGIC {
        return Err(BinfmtError::BadMagic { file: FILE, found: magic });
    }
    let version = read_u8(source, "data header")?;
    if version != FORMAT_VERSION {
        return Err(BinfmtError::BadVersion { file: FILE, found: version });
    }
    let n_uni = read_u32(source, "data header")?;
    let n_bi = read_u32(source, "data header")? as usize;
    let n_tri = read_u32(source, "data header")? as usize;
    let k = read_u16(source, "data header")?;
    let lambda_milli = read_u16(source, "data header")?;
    let r_milli = read_u16(source, "data header")?;
    if n_uni >= ID_SENTINEL {
        return Err(BinfmtError::Corrupt {
            section: "data header",
            detail: format!("unigram count {n_uni} exceeds the 3-byte ID space"),
        });
    }
    if lambda_milli == 0 || lambda_milli > 1000 || r_milli > 1000 {
        return Err(BinfmtError::Corrupt {
            section: "data header",
            detail: format!("lambda_milli {lambda_milli} / r_milli {r_milli} out of range"),
        });
    }

    let mut uni = Vec::with_capacity(n_uni as usize);
    for _ in 0..n_uni {
        let q = read_u16(source, "unigram block")?;
        if q > quant.c2 {
            return Err(BinfmtError::Corrupt {
                section: "unigram block",
                detail: format!("score {q} above quantizer cap {}", quant.c2),
            });
        }
        uni.push(q);
    }

    let bi_groups =
        read_group_block(source, "bigram block", n_bi, n_uni, "n_uni", n_uni, &quant)?;
    let tri_groups = read_group_block(
        source,
        "trigram block",
        n_tri,
        n_bi as u32,
        "bigram entries",
        n_uni,
        &quant,
    )?;

    let prediction = read_padded_ids(source, k as usize, "fwo prediction block", n_uni)?;
    let n_comp = read_u16(source, "fwo completion block")? as usize;
    let mut completion = Vec::with_capacity(n_comp);
    let mut last_char: Option<char> = None;
    for _ in 0..n_comp {
        let raw = read_u32(source, "fwo completion block")?;
        let c = char::from_u32(raw).ok_or(BinfmtError::Corrupt {
            section: "fwo completion block",
            detail: format!("invalid character 0x{raw:X}"),
        })?;
        if last_char.is_some_and(|prev| c <= prev) {
            return Err(BinfmtError::Corrupt {
                section: "fwo completion block",
                detail: format!("characters out of order at {c:?}"),
            });
        }
        last_char = Some(c);
        let ids = read_padded_ids(source, k as usize, "fwo completion block", n_uni)?;
        completion.push((c, ids));
    }
    expect_eof(source, "fwo completion block")?;

    Ok(DataModel {
        params: ModelParams { k, lambda_milli, r_milli },
        uni,
        bi_groups,
        tri_groups,
        fwo: FwoTables { prediction, completion },
    })
}

/// Decompresses and parses the on-disk `.ngram` bytes.
pub fn read_data_file(bytes: &[u8]) -> Result<DataModel, BinfmtError> {
    parse_data_payload(&decompress_payload(bytes)?)
}
