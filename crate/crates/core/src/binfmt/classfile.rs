//! The class file: a word→class map, per-class top-K member lists with
//! quantized membership probabilities, and the precomputed argmax of the
//! class-transition table. Uncompressed (`OPNC`, little-endian):
//!
//! ```text
//! header      magic(4) version(1) n_uni(4) n_classes(2) K(2)
//! word_class  n_uni × class(1)             index = word ID
//! top-K IDs   n_classes × K × word_id(3)   0xFFFFFF-padded
//! emissions   n_classes × K × score(2)     parallel to the IDs, 0xFFFF-padded
//! pair_argmax n_classes² × class(1)        row-major [class(c1)][class(c2)]
//! ```
//!
//! Member lists are best-first (score ascending, ID ascending); padding
//! slots in the two parallel blocks must agree.

use std::io::Write;

use byteorder::{LittleEndian, WriteBytesExt};

use super::{
    expect_eof, read_exact_section, read_u16, read_u24, read_u32, read_u8, BinfmtError,
    QuantParams, CLASS_MAGIC, FORMAT_VERSION, ID_SENTINEL, SCORE_SENTINEL,
};
use crate::counts::NUM_TAGS;

/// Header size in bytes.
pub const HEADER_LEN: usize = 4 + 1 + 4 + 2 + 2;

/// Parsed class file. Structural equality is byte-level fidelity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFileData {
    pub n_classes: u16,
    pub k: u16,
    /// One class index per vocabulary word; length is the vocabulary size.
    pub word_class: Vec<u8>,
    /// Per class, up to K `(word_id, quantized P(word | class))` pairs,
    /// best-first. Length is always `n_classes`.
    pub class_topk: Vec<Vec<(u32, u16)>>,
    /// Row-major `n_classes × n_classes` table: the most likely class to
    /// follow each pair of context classes.
    pub pair_argmax: Vec<u8>,
}

impl ClassFileData {
    /// Closed-form size of the serialized file.
    pub fn file_len(&self) -> usize {
        HEADER_LEN
            + self.word_class.len()
            + self.n_classes as usize * self.k as usize * 3
            + self.n_classes as usize * self.k as usize * 2
            + self.n_classes as usize * self.n_classes as usize
    }
}

/// Serializes a class file, validating every cross-reference first.
pub fn write_class_file(data: &ClassFileData) -> Result<Vec<u8>, BinfmtError> {
    let n_classes = data.n_classes as usize;
    let n_uni = data.word_class.len();
    let k = data.k as usize;
    let quant = QuantParams::default();

    if n_classes == 0 || n_classes > 256 {
        return Err(BinfmtError::Unserializable(format!(
            "{n_classes} classes cannot index a 1-byte class field"
        )));
    }
    if n_uni >= ID_SENTINEL as usize {
        return Err(BinfmtError::Unserializable(format!(
            "{n_uni} words exceed the 3-byte ID space"
        )));
    }
    if data.class_topk.len() != n_classes {
        return Err(BinfmtError::Unserializable(format!(
            "{} member lists for {n_classes} classes",
            data.class_topk.len()
        )));
    }
    if data.pair_argmax.len() != n_classes * n_classes {
        return Err(BinfmtError::Unserializable(format!(
            "transition table holds {} cells, expected {n_classes}²",
            data.pair_argmax.len()
        )));
    }
    if let Some(&c) = data.word_class.iter().find(|&&c| c as usize >= n_classes) {
        return Err(BinfmtError::Unserializable(format!(
            "word mapped to class {c}, but only {n_classes} classes exist"
        )));
    }
    if let Some(&c) = data.pair_argmax.iter().find(|&&c| c as usize >= n_classes) {
        return Err(BinfmtError::Unserializable(format!(
            "transition argmax {c}, but only {n_classes} classes exist"
        )));
    }
    for (class, list) in data.class_topk.iter().enumerate() {
        if list.len() > k {
            return Err(BinfmtError::Unserializable(format!(
                "class {class} lists {} members, limit is K = {k}",
                list.len()
            )));
        }
        for &(id, q) in list {
            if id as usize >= n_uni || id < NUM_TAGS {
                return Err(BinfmtError::Unserializable(format!(
                    "class {class} lists word ID {id}, outside the suggestible range"
                )));
            }
            if q > quant.c2 {
                return Err(BinfmtError::Unserializable(format!(
                    "class {class} member score {q} above quantizer cap {}",
                    quant.c2
                )));
            }
        }
        for w in list.windows(2) {
            if (w[1].1, w[1].0) <= (w[0].1, w[0].0) {
                return Err(BinfmtError::Unserializable(format!(
                    "class {class} member list is not best-first"
                )));
            }
        }
    }

    let mut out = Vec::with_capacity(data.file_len());
    out.write_all(&CLASS_MAGIC)?;
    out.write_u8(FORMAT_VERSION)?;
    out.write_u32::<LittleEndian>(n_uni as u32)?;
    out.write_u16::<LittleEndian>(data.n_classes)?;
    out.write_u16::<LittleEndian>(data.k)?;
    out.write_all(&data.word_class)?;
    for list in &data.class_topk {
        for i in 0..k {
            let id = list.get(i).map_or(ID_SENTINEL, |&(id, _)| id);
            out.write_u24::<LittleEndian>(id)?;
        }
    }
    for list in &data.class_topk {
        for i in 0..k {
            let q = list.get(i).map_or(SCORE_SENTINEL, |&(_, q)| q);
            out.write_u16::<LittleEndian>(q)?;
        }
    }
    out.write_all(&data.pair_argmax)?;
    debug_assert_eq!(out.len(), data.file_len());
    Ok(out)
}

/// Parses and fully validates the bytes of a class file.
pub fn read_class_file(bytes: &[u8]) -> Result<ClassFileData, BinfmtError> {
    let quant = QuantParams::default();
    let mut src = bytes;
    let source = &mut src;

    let mut magic = [0u8; 4];
    read_exact_section(source, &mut magic, "class header")?;
    if magic != CLASS_MAGIC {
        return Err(BinfmtError::BadMagic { file: "class", found: magic });
    }
    let version = read_u8(source, "class header")?;
    if version != FORMAT_VERSION {
        return Err(BinfmtError::BadVersion { file: "class", found: version });
    }
    let n_uni = read_u32(source, "class header")? as usize;
    let n_classes = read_u16(source, "class header")?;
    let k = read_u16(source, "class header")?;
    if n_classes == 0 || n_classes > 256 {
        return Err(BinfmtError::Corrupt {
            section: "class header",
            detail: format!("{n_classes} classes cannot index a 1-byte class field"),
        });
    }
    if n_uni >= ID_SENTINEL as usize {
        return Err(BinfmtError::Corrupt {
            section: "class header",
            detail: format!("word count {n_uni} exceeds the 3-byte ID space"),
        });
    }

    let mut word_class = vec![0u8; n_uni];
    read_exact_section(source, &mut word_class, "word-class block")?;
    if let Some(&c) = word_class.iter().find(|&&c| c as u16 >= n_classes) {
        return Err(BinfmtError::UnresolvedReference {
            section: "word-class block",
            detail: format!("word mapped to class {c} of {n_classes}"),
        });
    }

    let n = n_classes as usize;
    let mut ids = vec![vec![0u32; k as usize]; n];
    for row in ids.iter_mut() {
        for slot in row.iter_mut() {
            *slot = read_u24(source, "class member block")?;
        }
    }
    let mut class_topk = Vec::with_capacity(n);
    for (class, row) in ids.iter().enumerate() {
        let mut list = Vec::new();
        let mut padding = false;
        for &id in row {
            if id == ID_SENTINEL {
                padding = true;
                continue;
            }
            if padding {
                return Err(BinfmtError::Corrupt {
                    section: "class member block",
                    detail: format!("class {class} has a word ID after sentinel padding"),
                });
            }
            if id as usize >= n_uni {
                return Err(BinfmtError::UnresolvedReference {
                    section: "class member block",
                    detail: format!("word ID {id} out of range (n_uni {n_uni})"),
                });
            }
            if id < NUM_TAGS {
                return Err(BinfmtError::Corrupt {
                    section: "class member block",
                    detail: format!("tag ID {id} in class {class} member list"),
                });
            }
            list.push((id, 0u16));
        }
        class_topk.push(list);
    }
    for (class, list) in class_topk.iter_mut().enumerate() {
        let mut filled = 0usize;
        for i in 0..k as usize {
            let q = read_u16(source, "class emission block")?;
            if filled < list.len() {
                if q == SCORE_SENTINEL {
                    return Err(BinfmtError::Corrupt {
                        section: "class emission block",
                        detail: format!(
                            "class {class} slot {i} pairs a word ID with a padding score"
                        ),
                    });
                }
                if q > quant.c2 {
                    return Err(BinfmtError::Corrupt {
                        section: "class emission block",
                        detail: format!("score {q} above quantizer cap {}", quant.c2),
                    });
                }
                list[filled].1 = q;
                filled += 1;
            } else if q != SCORE_SENTINEL {
                return Err(BinfmtError::Corrupt {
                    section: "class emission block",
                    detail: format!(
                        "class {class} slot {i} pairs a padding ID with score {q}"
                    ),
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(id, _) in list.iter() {
            if !seen.insert(id) {
                return Err(BinfmtError::Corrupt {
                    section: "class member block",
                    detail: format!("class {class} lists word {id} twice"),
                });
            }
        }
        for w in list.windows(2) {
            if (w[1].1, w[1].0) <= (w[0].1, w[0].0) {
                return Err(BinfmtError::Corrupt {
                    section: "class emission block",
                    detail: format!("class {class} member list is not best-first"),
                });
            }
        }
    }

    let mut pair_argmax = vec![0u8; n * n];
    read_exact_section(source, &mut pair_argmax, "class transition block")?;
    if let Some(&c) = pair_argmax.iter().find(|&&c| c as u16 >= n_classes) {
        return Err(BinfmtError::UnresolvedReference {
            section: "class transition block",
            detail: format!("transition argmax {c} of {n_classes} classes"),
        });
    }
    expect_eof(source, "class transition block")?;

    Ok(ClassFileData { n_classes, k, word_class, class_topk, pair_argmax })
}
