use std::ops::Range;

use super::{Corpus, CorpusError};

/// One distinct (word, document) pair. Its per-occurrence topics live in
/// `TokenGraph::topics()[offset..offset + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub word: u32,
    pub doc: u32,
    pub offset: usize,
    pub len: u32,
}

impl Edge {
    pub fn tokens(&self) -> Range<usize> {
        self.offset..self.offset + self.len as usize
    }
}

/// Bipartite word/document multigraph. Edges are sorted by `(word, doc)`, so
/// all edges of a word are contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenGraph {
    edges: Vec<Edge>,
    topics: Vec<u32>,
    word_start: Vec<usize>,
    word_degree: Vec<u64>,
    doc_degree: Vec<u64>,
}

impl TokenGraph {
    /// Builds the graph with every topic set to 0.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::build(corpus, 1, |_, _| 0).expect("topic 0 is valid for K = 1")
    }

    /// Builds the graph, asking `init(word, doc)` for the topic of every
    /// occurrence in edge order.
    pub fn build(
        corpus: &Corpus,
        k: usize,
        mut init: impl FnMut(u32, u32) -> u32,
    ) -> Result<Self, CorpusError> {
        let mut pairs: Vec<(u32, u32, u32)> = Vec::with_capacity(
            corpus.docs().iter().map(|d| d.entries.len()).sum(),
        );
        for (d, doc) in corpus.docs().iter().enumerate() {
            for &(w, c) in &doc.entries {
                pairs.push((w, d as u32, c));
            }
        }
        pairs.sort_unstable();

        let w_count = corpus.vocab_size();
        let d_count = corpus.doc_count();
        let mut edges = Vec::with_capacity(pairs.len());
        let mut topics = Vec::with_capacity(corpus.total_tokens() as usize);
        let mut word_degree = vec![0u64; w_count];
        let mut doc_degree = vec![0u64; d_count];
        let mut word_start = vec![0usize; w_count + 1];
        for &(w, d, c) in &pairs {
            let offset = topics.len();
            for _ in 0..c {
                let t = init(w, d);
                if t as usize >= k {
                    return Err(CorpusError::TopicOutOfRange {
                        topic: t,
                        k,
                        word: w,
                        doc: d,
                    });
                }
                topics.push(t);
            }
            edges.push(Edge {
                word: w,
                doc: d,
                offset,
                len: c,
            });
            word_degree[w as usize] += c as u64;
            doc_degree[d as usize] += c as u64;
            word_start[w as usize + 1] += 1;
        }
        for w in 0..w_count {
            word_start[w + 1] += word_start[w];
        }
        Ok(TokenGraph {
            edges,
            topics,
            word_start,
            word_degree,
            doc_degree,
        })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn topics(&self) -> &[u32] {
        &self.topics
    }

    pub fn topics_mut(&mut self) -> &mut [u32] {
        &mut self.topics
    }

    pub fn edge_topics(&self, e: usize) -> &[u32] {
        &self.topics[self.edges[e].tokens()]
    }

    /// Edge index range of word `w`.
    pub fn word_edges(&self, w: u32) -> Range<usize> {
        self.word_start[w as usize]..self.word_start[w as usize + 1]
    }

    pub fn word_degree(&self) -> &[u64] {
        &self.word_degree
    }

    pub fn doc_degree(&self) -> &[u64] {
        &self.doc_degree
    }

    pub fn vocab_size(&self) -> usize {
        self.word_degree.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_degree.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.topics.len() as u64
    }

    /// Current topics of every token grouped by document, as CSR offsets
    /// (length D + 1) and a flat topic array.
    pub fn doc_topic_lists(&self) -> (Vec<usize>, Vec<u32>) {
        let mut offsets = vec![0usize; self.doc_count() + 1];
        for (d, &deg) in self.doc_degree.iter().enumerate() {
            offsets[d + 1] = offsets[d] + deg as usize;
        }
        let mut fill = offsets.clone();
        let mut flat = vec![0u32; self.topics.len()];
        for e in &self.edges {
            let slot = &mut fill[e.doc as usize];
            for &t in &self.topics[e.tokens()] {
                flat[*slot] = t;
                *slot += 1;
            }
        }
        (offsets, flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_libsvm_str;

    #[test]
    fn single_edge() {
        let c = parse_libsvm_str("1 1:2").unwrap();
        let g = TokenGraph::from_corpus(&c);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].word, 0);
        assert_eq!(g.edge_topics(0), &[0, 0]);
        assert_eq!(g.word_degree(), &[2]);
        assert_eq!(g.doc_degree(), &[2]);
    }

    #[test]
    fn edges_grouped_by_word() {
        let c = parse_libsvm_str("1 6:1 2:1\n1 1:3 6:2").unwrap();
        let g = TokenGraph::from_corpus(&c);
        let words: Vec<u32> = g.edges().iter().map(|e| e.word).collect();
        assert_eq!(words, vec![0, 1, 5, 5]);
        assert_eq!(g.word_edges(5), 2..4);
        assert_eq!(g.word_edges(3), 2..2);
    }

    #[test]
    fn out_of_range_topic() {
        let c = parse_libsvm_str("1 1:1").unwrap();
        assert!(matches!(
            TokenGraph::build(&c, 2, |_, _| 2),
            Err(CorpusError::TopicOutOfRange { topic: 2, .. })
        ));
    }

    #[test]
    fn degrees_match_recount() {
        let c = parse_libsvm_str("1 1:2 3:1\n0 3:4\n2 2:1 1:1").unwrap();
        let g = TokenGraph::from_corpus(&c);
        let mut wd = vec![0u64; c.vocab_size()];
        let mut dd = vec![0u64; c.doc_count()];
        for (d, doc) in c.docs().iter().enumerate() {
            for &(w, n) in &doc.entries {
                wd[w as usize] += n as u64;
                dd[d] += n as u64;
            }
        }
        assert_eq!(g.word_degree(), wd.as_slice());
        assert_eq!(g.doc_degree(), dd.as_slice());
        let mut from_edges_w = vec![0u64; c.vocab_size()];
        let mut from_edges_d = vec![0u64; c.doc_count()];
        for e in g.edges() {
            from_edges_w[e.word as usize] += g.edge_topics_len(e);
            from_edges_d[e.doc as usize] += g.edge_topics_len(e);
        }
        assert_eq!(from_edges_w, wd);
        assert_eq!(from_edges_d, dd);
    }

    #[test]
    fn doc_lists_collect_every_token() {
        let c = parse_libsvm_str("1 1:2 3:1\n0 3:4").unwrap();
        let mut next = 0;
        let g = TokenGraph::build(&c, 10, |_, _| {
            next += 1;
            next - 1
        })
        .unwrap();
        let (off, flat) = g.doc_topic_lists();
        assert_eq!(off, vec![0, 3, 7]);
        let mut d0 = flat[0..3].to_vec();
        d0.sort();
        assert_eq!(d0, vec![0, 1, 2]);
    }

    impl TokenGraph {
        fn edge_topics_len(&self, e: &Edge) -> u64 {
            self.topics[e.tokens()].len() as u64
        }
    }
}
