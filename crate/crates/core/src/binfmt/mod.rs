//! The multi-file binary model format.
//!
//! A model is three sibling files, all little-endian:
//!
//! * `<name>.vocab` — the vocabulary as a serialized prefix trie ([`trie`])
//! * `<name>.ngram` — quantized n-gram scores plus frequent-word lists,
//!   zlib-compressed as a single RFC 1950 stream ([`data`])
//! * `<name>.class` — the word-class companion model, uncompressed
//!   ([`classfile`])
//!
//! The exact byte layouts are documented in `docs/FORMAT.md`. Every parser
//! validates magic, version, field ranges, and referential closure, and
//! reports failures as named, section-specific errors — a corrupted file
//! never yields a usable model.

pub mod classfile;
pub mod data;
pub mod quant;
pub mod trie;

pub use classfile::{read_class_file, write_class_file, ClassFileData};
pub use data::{
    build_fwo, compress_payload, decompress_payload, parse_data_payload, read_data_file,
    serialize_data_file, serialize_data_payload, DataModel, FwoTables, ModelParams,
};
pub use quant::{QuantError, QuantParams, LOG10_FLOOR};
pub use trie::VocabTrie;

use thiserror::Error;

/// Magic prefix of the vocabulary trie file.
pub const VOCAB_MAGIC: [u8; 4] = *b"OPNV";
/// Magic prefix of the (uncompressed) n-gram data payload.
pub const NGRAM_MAGIC: [u8; 4] = *b"OPNG";
/// Magic prefix of the class file.
pub const CLASS_MAGIC: [u8; 4] = *b"OPNC";
/// Current format version, shared by all three files.
pub const FORMAT_VERSION: u8 = 1;

/// Sentinel padding value for unused 3-byte ID slots.
pub const ID_SENTINEL: u32 = 0xFF_FFFF;
/// Sentinel for the 2-byte emission slot paired with an ID sentinel.
pub const SCORE_SENTINEL: u16 = 0xFFFF;

#[derive(Debug, Error)]
pub enum BinfmtError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}: bad magic {found:?}")]
    BadMagic { file: &'static str, found: [u8; 4] },
    #[error("{file}: unsupported format version {found}")]
    BadVersion { file: &'static str, found: u8 },
    #[error("truncated file while reading {section}")]
    Truncated { section: &'static str },
    #[error("trailing bytes after {section}")]
    TrailingData { section: &'static str },
    #[error("corrupt {section}: {detail}")]
    Corrupt { section: &'static str, detail: String },
    #[error("unresolved reference in {section}: {detail}")]
    UnresolvedReference { section: &'static str, detail: String },
    #[error("cannot serialize: {0}")]
    Unserializable(String),
    #[error("decompression failed: {0}")]
    Decompress(std::io::Error),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

/// Reads exactly `buf.len()` bytes, mapping EOF to a section-named error.
pub(crate) fn read_exact_section<R: std::io::Read>(
    reader: &mut R,
    buf: &mut [u8],
    section: &'static str,
) -> Result<(), BinfmtError> {
    reader
        .read_exact(buf)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => BinfmtError::Truncated { section },
            _ => BinfmtError::Io(e),
        })
}

pub(crate) fn read_u8<R: std::io::Read>(
    r: &mut R,
    section: &'static str,
) -> Result<u8, BinfmtError> {
    let mut b = [0u8; 1];
    read_exact_section(r, &mut b, section)?;
    Ok(b[0])
}

pub(crate) fn read_u16<R: std::io::Read>(
    r: &mut R,
    section: &'static str,
) -> Result<u16, BinfmtError> {
    let mut b = [0u8; 2];
    read_exact_section(r, &mut b, section)?;
    Ok(u16::from_le_bytes(b))
}

pub(crate) fn read_u24<R: std::io::Read>(
    r: &mut R,
    section: &'static str,
) -> Result<u32, BinfmtError> {
    let mut b = [0u8; 3];
    read_exact_section(r, &mut b, section)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], 0]))
}

pub(crate) fn read_u32<R: std::io::Read>(
    r: &mut R,
    section: &'static str,
) -> Result<u32, BinfmtError> {
    let mut b = [0u8; 4];
    read_exact_section(r, &mut b, section)?;
    Ok(u32::from_le_bytes(b))
}

/// Verifies that `reader` is exhausted; anything left is trailing garbage.
pub(crate) fn expect_eof<R: std::io::Read>(
    reader: &mut R,
    section: &'static str,
) -> Result<(), BinfmtError> {
    let mut probe = [0u8; 1];
    match reader.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(BinfmtError::TrailingData { section }),
    }
}
