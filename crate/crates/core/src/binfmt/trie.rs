//! The vocabulary trie file: a serialized prefix trie giving word ↔ ID
//! lookup and prefix enumeration.
//!
//! Layout (`OPNV`, little-endian): header `magic(4) version(1) n_words(4)`,
//! then the root node. Each node is `word_id(3, 0xFFFFFF when the node ends
//! no word) n_children(2)` followed by its children in strictly ascending
//! label order, each as `label(4, Unicode scalar)` plus the child node,
//! recursively in pre-order. Both the writer and the parser walk with an
//! explicit stack, so word length cannot overflow the call stack.

use std::io::{Read, Write};

use byteorder::{LittleEndian, WriteBytesExt};

use super::{
    expect_eof, read_u16, read_u24, read_u32, read_u8, BinfmtError, FORMAT_VERSION,
    ID_SENTINEL, VOCAB_MAGIC,
};
use crate::counts::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    word_id: Option<u32>,
    /// Child edges, strictly ascending by label.
    children: Vec<(char, u32)>,
}

impl Node {
    fn leaf() -> Node {
        Node { word_id: None, children: Vec::new() }
    }

    fn child(&self, label: char) -> Option<u32> {
        self.children
            .binary_search_by_key(&label, |&(c, _)| c)
            .ok()
            .map(|i| self.children[i].1)
    }
}

/// Prefix trie over the vocabulary. Node 0 is the root; `words` is the
/// ID-ordered surface list reconstructed at load time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabTrie {
    nodes: Vec<Node>,
    words: Vec<String>,
}

impl VocabTrie {
    /// Builds the trie for a vocabulary (IDs are the vocabulary ranks).
    pub fn from_vocab(vocab: &Vocabulary) -> Result<VocabTrie, BinfmtError> {
        Self::from_words(vocab.iter())
    }

    /// Builds a trie from an ID-ordered word sequence. Duplicates are a
    /// construction error.
    pub fn from_words<'a>(
        words: impl IntoIterator<Item = &'a str>,
    ) -> Result<VocabTrie, BinfmtError> {
        let mut trie = VocabTrie { nodes: vec![Node::leaf()], words: Vec::new() };
        for (id, word) in words.into_iter().enumerate() {
            if id >= ID_SENTINEL as usize {
                return Err(BinfmtError::Unserializable(format!(
                    "vocabulary too large for 3-byte IDs: {} words",
                    id + 1
                )));
            }
            trie.insert(word, id as u32)?;
            trie.words.push(word.to_string());
        }
        Ok(trie)
    }

    fn insert(&mut self, word: &str, id: u32) -> Result<(), BinfmtError> {
        let mut at = 0usize;
        for c in word.chars() {
            at = match self.nodes[at].child(c) {
                Some(next) => next as usize,
                None => {
                    let next = self.nodes.len() as u32;
                    self.nodes.push(Node::leaf());
                    let children = &mut self.nodes[at].children;
                    let pos = children.partition_point(|&(l, _)| l < c);
                    children.insert(pos, (c, next));
                    next as usize
                }
            };
        }
        if self.nodes[at].word_id.is_some() {
            return Err(BinfmtError::Unserializable(format!(
                "duplicate word {word:?} in vocabulary"
            )));
        }
        self.nodes[at].word_id = Some(id);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Word → ID.
    pub fn id(&self, word: &str) -> Option<u32> {
        let mut at = 0usize;
        for c in word.chars() {
            at = self.nodes[at].child(c)? as usize;
        }
        self.nodes[at].word_id
    }

    /// ID → word.
    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(|s| s.as_str())
    }

    /// Words in ID order.
    pub fn iter_words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|s| s.as_str())
    }

    /// IDs of every word starting with `prefix`, in lexicographic word
    /// order. The empty prefix enumerates the whole vocabulary.
    pub fn prefix_ids(&self, prefix: &str) -> Vec<u32> {
        let mut at = 0usize;
        for c in prefix.chars() {
            match self.nodes[at].child(c) {
                Some(next) => at = next as usize,
                None => return Vec::new(),
            }
        }
        let mut ids = Vec::new();
        let mut stack = vec![at];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if let Some(id) = node.word_id {
                ids.push(id);
            }
            // Reverse push keeps traversal in ascending label order.
            for &(_, child) in node.children.iter().rev() {
                stack.push(child as usize);
            }
        }
        ids
    }

    /// Serializes the trie (uncompressed).
    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<(), BinfmtError> {
        sink.write_all(&VOCAB_MAGIC)?;
        sink.write_u8(FORMAT_VERSION)?;
        sink.write_u32::<LittleEndian>(self.words.len() as u32)?;
        enum Task {
            Node(usize),
            Label(char),
        }
        let mut stack = vec![Task::Node(0)];
        while let Some(task) = stack.pop() {
            match task {
                Task::Label(c) => sink.write_u32::<LittleEndian>(c as u32)?,
                Task::Node(at) => {
                    let node = &self.nodes[at];
                    sink.write_u24::<LittleEndian>(node.word_id.unwrap_or(ID_SENTINEL))?;
                    sink.write_u16::<LittleEndian>(node.children.len() as u16)?;
                    for &(label, child) in node.children.iter().rev() {
                        stack.push(Task::Node(child as usize));
                        stack.push(Task::Label(label));
                    }
                }
            }
        }
        Ok(())
    }

    /// Serializes to an owned buffer.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Parses and fully validates a serialized trie: labels must be strictly
    /// ascending within each node, and stored word IDs must form a bijection
    /// with 0..n_words−1.
    pub fn read_from<R: Read>(mut source: R) -> Result<VocabTrie, BinfmtError> {
        const FILE: &str = "vocab trie";
        let mut magic = [0u8; 4];
        super::read_exact_section(&mut source, &mut magic, "vocab trie header")?;
        if magic != VOCAB_MAGIC {
            return Err(BinfmtError::BadMagic { file: FILE, found: magic });
        }
        let version = read_u8(&mut source, "vocab trie header")?;
        if version != FORMAT_VERSION {
            return Err(BinfmtError::BadVersion { file: FILE, found: version });
        }
        let n_words = read_u32(&mut source, "vocab trie header")? as usize;
        if n_words >= ID_SENTINEL as usize {
            return Err(BinfmtError::Corrupt {
                section: "vocab trie header",
                detail: format!("word count {n_words} exceeds the 3-byte ID space"),
            });
        }

        let mut nodes = Vec::new();
        let read_node = |source: &mut R,
                             nodes: &mut Vec<Node>|
         -> Result<(usize, u16), BinfmtError> {
            let raw_id = read_u24(source, "vocab trie nodes")?;
            let n_children = read_u16(source, "vocab trie nodes")?;
            let word_id = if raw_id == ID_SENTINEL {
                None
            } else if (raw_id as usize) < n_words {
                Some(raw_id)
            } else {
                return Err(BinfmtError::UnresolvedReference {
                    section: "vocab trie nodes",
                    detail: format!("word ID {raw_id} out of range (n_words {n_words})"),
                });
            };
            nodes.push(Node { word_id, children: Vec::new() });
            Ok((nodes.len() - 1, n_children))
        };

        let (root, root_children) = read_node(&mut source, &mut nodes)?;
        let mut stack: Vec<(usize, u16)> = vec![(root, root_children)];
        while let Some(&mut (at, ref mut remaining)) = stack.last_mut() {
            if *remaining == 0 {
                stack.pop();
                continue;
            }
            *remaining -= 1;
            let raw_label = read_u32(&mut source, "vocab trie nodes")?;
            let label = char::from_u32(raw_label).ok_or(BinfmtError::Corrupt {
                section: "vocab trie nodes",
                detail: format!("invalid edge label 0x{raw_label:X}"),
            })?;
            if let Some(&(last, _)) = nodes[at].children.last() {
                if label <= last {
                    return Err(BinfmtError::Corrupt {
                        section: "vocab trie nodes",
                        detail: format!(
                            "edge labels out of order: {last:?} then {label:?}"
                        ),
                    });
                }
            }
            let (child, n_children) = read_node(&mut source, &mut nodes)?;
            nodes[at].children.push((label, child as u32));
            stack.push((child, n_children));
        }
        expect_eof(&mut source, "vocab trie nodes")?;

        // Recover surfaces and check the ID bijection in one walk. The walk
        // keeps a single running path string (push on descent, pop on
        // ascent) so total work is linear in the stored characters.
        let mut words: Vec<Option<String>> = vec![None; n_words];
        let mut path = String::new();
        let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&(at, next_child)) = frames.last() {
            if next_child == 0 {
                if let Some(id) = nodes[at].word_id {
                    let slot = &mut words[id as usize];
                    if slot.is_some() {
                        return Err(BinfmtError::Corrupt {
                            section: "vocab trie nodes",
                            detail: format!("word ID {id} stored twice"),
                        });
                    }
                    *slot = Some(path.clone());
                }
            }
            if let Some(&(label, child)) = nodes[at].children.get(next_child) {
                frames.last_mut().expect("frame exists").1 += 1;
                path.push(label);
                frames.push((child as usize, 0));
            } else {
                frames.pop();
                path.pop();
            }
        }
        let words: Vec<String> = words
            .into_iter()
            .enumerate()
            .map(|(id, w)| {
                w.ok_or(BinfmtError::Corrupt {
                    section: "vocab trie nodes",
                    detail: format!("word ID {id} missing from trie"),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(VocabTrie { nodes, words })
    }
}
