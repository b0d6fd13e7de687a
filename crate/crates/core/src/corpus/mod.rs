//! Bag-of-words corpora and the bipartite word/document token graph.

mod graph;
mod libsvm;

pub use graph::{Edge, TokenGraph};
pub use libsvm::{load_libsvm, parse_libsvm, parse_libsvm_str, parse_line};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("corpus is empty")]
    Empty,
    #[error("I/O error{}: {error}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Io {
        line: Option<usize>,
        error: std::io::Error,
    },
    #[error("topic {topic} out of range for K = {k} (word {word}, doc {doc})")]
    TopicOutOfRange { topic: u32, k: usize, word: u32, doc: u32 },
    #[error("word id {word} out of range for vocabulary size {vocab}")]
    WordOutOfRange { word: u32, vocab: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: u32,
    /// `(word, count)` pairs, sorted by word, unique, counts ≥ 1.
    pub entries: Vec<(u32, u32)>,
}

impl Document {
    pub fn len(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Document>,
    vocab_size: usize,
    total_tokens: u64,
}

impl Corpus {
    /// Vocabulary size is one past the largest word id seen.
    pub fn from_documents(docs: Vec<Document>) -> Self {
        let vocab_size = docs
            .iter()
            .flat_map(|d| d.entries.iter().map(|&(w, _)| w as usize + 1))
            .max()
            .unwrap_or(0);
        Self::with_vocab(docs, vocab_size).expect("vocabulary covers every word")
    }

    /// Builds with an explicit vocabulary size, which may exceed the
    /// largest observed id.
    pub fn with_vocab(docs: Vec<Document>, vocab_size: usize) -> Result<Self, CorpusError> {
        let mut total_tokens = 0;
        for d in &docs {
            for &(w, c) in &d.entries {
                if w as usize >= vocab_size {
                    return Err(CorpusError::WordOutOfRange {
                        word: w,
                        vocab: vocab_size,
                    });
                }
                total_tokens += c as u64;
            }
        }
        Ok(Corpus {
            docs,
            vocab_size,
            total_tokens,
        })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }
}
