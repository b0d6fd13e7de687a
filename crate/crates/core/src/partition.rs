//! Vertex-cut partitioning of the token graph.
//!
//! Every strategy assigns each edge to exactly one partition; a vertex is
//! replicated on every partition that holds one of its edges, and its master
//! copy lives on the partition its own hash selects.

use std::fmt;
use std::str::FromStr;

use crate::corpus::TokenGraph;
use crate::rng::{mix, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertex {
    Word(u32),
    Doc(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Hash of both endpoints.
    Random,
    /// Hash of one endpoint: words when `by_word`, documents otherwise.
    Edge1D { by_word: bool },
    /// Grid over the word x document adjacency matrix.
    Edge2D,
    /// Degree-based hashing with a low-degree threshold.
    DbhPlus { threshold: u64 },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Edge1D { by_word: true } => "edge1d",
            Strategy::Edge1D { by_word: false } => "edge1d-doc",
            Strategy::Edge2D => "edge2d",
            Strategy::DbhPlus { .. } => "dbh+",
        }
    }

    pub fn threshold(&self) -> u64 {
        match self {
            Strategy::DbhPlus { threshold } => *threshold,
            _ => 0,
        }
    }

    /// Parses a strategy name; `threshold` only applies to `dbh+`.
    pub fn parse(name: &str, threshold: u64) -> Result<Self, String> {
        match name {
            "random" => Ok(Strategy::Random),
            "edge1d" | "edge1d-word" => Ok(Strategy::Edge1D { by_word: true }),
            "edge1d-doc" => Ok(Strategy::Edge1D { by_word: false }),
            "edge2d" => Ok(Strategy::Edge2D),
            "dbh+" | "dbh-plus" | "dbh" => Ok(Strategy::DbhPlus { threshold }),
            other => Err(format!(
                "unknown partitioner {other:?} (expected random, edge1d, edge1d-doc, edge2d, dbh+)"
            )),
        }
    }

    pub const ALL: [Strategy; 5] = [
        Strategy::Random,
        Strategy::Edge1D { by_word: true },
        Strategy::Edge1D { by_word: false },
        Strategy::Edge2D,
        Strategy::DbhPlus { threshold: 0 },
    ];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::parse(s, 0)
    }
}

pub fn vertex_hash(seed: u64, v: Vertex) -> u64 {
    match v {
        Vertex::Word(w) => mix(seed, &[Domain::Partition as u64, 0, w as u64]),
        Vertex::Doc(d) => mix(seed, &[Domain::Partition as u64, 1, d as u64]),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionAssignment {
    parts: u32,
    seed: u64,
    strategy: Strategy,
    edge_partition: Vec<u32>,
}

impl PartitionAssignment {
    /// Wraps an explicit edge map. Fails if any entry is `>= parts`.
    pub fn from_edge_map(
        parts: u32,
        seed: u64,
        strategy: Strategy,
        edge_partition: Vec<u32>,
    ) -> Result<Self, String> {
        if parts == 0 {
            return Err("partition count must be at least 1".into());
        }
        if let Some(bad) = edge_partition.iter().find(|&&p| p >= parts) {
            return Err(format!("edge assigned to partition {bad} of {parts}"));
        }
        Ok(PartitionAssignment {
            parts,
            seed,
            strategy,
            edge_partition,
        })
    }

    pub fn parts(&self) -> u32 {
        self.parts
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn edge_partition(&self) -> &[u32] {
        &self.edge_partition
    }

    /// Partition holding the master copy of `v`.
    pub fn master(&self, v: Vertex) -> u32 {
        (vertex_hash(self.seed, v) % self.parts as u64) as u32
    }

    /// Sorted partitions holding a replica of each word and each document.
    pub fn replicas(&self, graph: &TokenGraph) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
        let mut words = vec![Vec::new(); graph.vocab_size()];
        let mut docs = vec![Vec::new(); graph.doc_count()];
        for (e, edge) in graph.edges().iter().enumerate() {
            let p = self.edge_partition[e];
            words[edge.word as usize].push(p);
            docs[edge.doc as usize].push(p);
        }
        for list in words.iter_mut().chain(docs.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        (words, docs)
    }

    /// Edge indices of each partition, in graph (word-major) order.
    pub fn partition_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.parts as usize];
        for (e, &p) in self.edge_partition.iter().enumerate() {
            out[p as usize].push(e);
        }
        out
    }
}

fn bucket(hash: u64, p: u32) -> u32 {
    (hash % p as u64) as u32
}

pub fn assign(graph: &TokenGraph, strategy: Strategy, p: u32, seed: u64) -> PartitionAssignment {
    match strategy {
        Strategy::Random => assign_random(graph, p, seed),
        Strategy::Edge1D { by_word } => assign_edge1d(graph, p, by_word, seed),
        Strategy::Edge2D => assign_edge2d(graph, p, seed),
        Strategy::DbhPlus { threshold } => assign_dbh_plus(graph, p, threshold, seed),
    }
}

fn finish(p: u32, seed: u64, strategy: Strategy, edge_partition: Vec<u32>) -> PartitionAssignment {
    PartitionAssignment::from_edge_map(p.max(1), seed, strategy, edge_partition)
        .expect("strategies only emit partitions below p")
}

pub fn assign_random(graph: &TokenGraph, p: u32, seed: u64) -> PartitionAssignment {
    let p = p.max(1);
    let map = graph
        .edges()
        .iter()
        .map(|e| bucket(mix(seed, &[Domain::Partition as u64, 2, e.word as u64, e.doc as u64]), p))
        .collect();
    finish(p, seed, Strategy::Random, map)
}

pub fn assign_edge1d(graph: &TokenGraph, p: u32, by_word: bool, seed: u64) -> PartitionAssignment {
    let p = p.max(1);
    let map = graph
        .edges()
        .iter()
        .map(|e| {
            let v = if by_word {
                Vertex::Word(e.word)
            } else {
                Vertex::Doc(e.doc)
            };
            bucket(vertex_hash(seed, v), p)
        })
        .collect();
    finish(p, seed, Strategy::Edge1D { by_word }, map)
}

/// Grid placement: the word hash picks a column and the document hash a row,
/// so a word lives in at most one column and a document in at most one
/// partition per column, both at most ⌈√p⌉ partitions.
pub fn assign_edge2d(graph: &TokenGraph, p: u32, seed: u64) -> PartitionAssignment {
    let p = p.max(1);
    let cols = (p as f64).sqrt().ceil() as u32;
    let rows = p.div_ceil(cols);
    let last_col_rows = p - rows * (cols - 1);
    let map = graph
        .edges()
        .iter()
        .map(|e| {
            let col = bucket(vertex_hash(seed, Vertex::Word(e.word)), cols);
            let col_rows = if col < cols - 1 { rows } else { last_col_rows };
            let row = bucket(vertex_hash(seed, Vertex::Doc(e.doc)), col_rows);
            col * rows + row
        })
        .collect();
    finish(p, seed, Strategy::Edge2D, map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Word,
    Doc,
}

/// Which endpoint's partition an edge follows. Below the threshold the edge
/// goes with the higher-degree endpoint, otherwise with the lower-degree
/// one; ties go to the word.
pub fn dbh_plus_owner(word_degree: u64, doc_degree: u64, threshold: u64) -> Endpoint {
    let low_pair = word_degree.max(doc_degree) < threshold;
    let word_wins = if low_pair {
        word_degree >= doc_degree
    } else {
        word_degree <= doc_degree
    };
    if word_wins {
        Endpoint::Word
    } else {
        Endpoint::Doc
    }
}

pub fn assign_dbh_plus(graph: &TokenGraph, p: u32, threshold: u64, seed: u64) -> PartitionAssignment {
    let p = p.max(1);
    let wd = graph.word_degree();
    let dd = graph.doc_degree();
    let map = graph
        .edges()
        .iter()
        .map(|e| {
            let v = match dbh_plus_owner(wd[e.word as usize], dd[e.doc as usize], threshold) {
                Endpoint::Word => Vertex::Word(e.word),
                Endpoint::Doc => Vertex::Doc(e.doc),
            };
            bucket(vertex_hash(seed, v), p)
        })
        .collect();
    finish(p, seed, Strategy::DbhPlus { threshold }, map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMetrics {
    pub edges_per_partition: Vec<u64>,
    /// max / mean edges per partition.
    pub edge_balance: f64,
    /// Mean replica count over vertices with at least one edge.
    pub replication_factor: f64,
    pub word_replication_factor: f64,
    pub doc_replication_factor: f64,
    pub max_replication: usize,
}

pub fn partition_metrics(assignment: &PartitionAssignment, graph: &TokenGraph) -> PartitionMetrics {
    let mut counts = vec![0u64; assignment.parts() as usize];
    for &p in assignment.edge_partition() {
        counts[p as usize] += 1;
    }
    let total: u64 = counts.iter().sum();
    let mean = total as f64 / counts.len() as f64;
    let edge_balance = if total == 0 {
        1.0
    } else {
        *counts.iter().max().unwrap() as f64 / mean
    };
    let (words, docs) = assignment.replicas(graph);
    let mean_of = |lists: &[Vec<u32>]| {
        let (sum, n) = lists
            .iter()
            .filter(|l| !l.is_empty())
            .fold((0usize, 0usize), |(s, n), l| (s + l.len(), n + 1));
        (sum, n)
    };
    let (ws, wn) = mean_of(&words);
    let (ds, dn) = mean_of(&docs);
    let ratio = |s: usize, n: usize| if n == 0 { 0.0 } else { s as f64 / n as f64 };
    let max_replication = words
        .iter()
        .chain(docs.iter())
        .map(|l| l.len())
        .max()
        .unwrap_or(0);
    PartitionMetrics {
        edges_per_partition: counts,
        edge_balance,
        replication_factor: ratio(ws + ds, wn + dn),
        word_replication_factor: ratio(ws, wn),
        doc_replication_factor: ratio(ds, dn),
        max_replication,
    }
}
