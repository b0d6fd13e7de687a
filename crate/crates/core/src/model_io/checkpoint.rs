use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelIoError;
use crate::corpus::{Corpus, Document, TokenGraph};
use crate::engine::{EngineError, ModelState, TokenMeta, TrainConfig};
use crate::kernels::{HyperParams, KernelKind};
use crate::metrics::{IterationRecord, MetricHistory};
use crate::rng::{stream, Domain};
use crate::sparse::SparseCounts;

pub const FORMAT_NAME: &str = "topicgraph-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

const WORDS: &str = "[words]";
const EDGES: &str = "[edges]";
const META: &str = "[meta]";
const HISTORY: &str = "[history]";
const END: &str = "[end]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub w: usize,
    pub d: usize,
    pub hyper: HyperParams,
    pub iteration: u64,
    pub seed: u64,
    pub kernel: KernelKind,
    pub edges: u64,
    pub tokens: u64,
}

/// Size caps applied while parsing, so that a hostile header cannot force
/// huge allocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadLimits {
    pub max_topics: usize,
    pub max_vocab: usize,
    pub max_docs: usize,
    pub max_tokens: u64,
}

impl Default for LoadLimits {
    fn default() -> Self {
        LoadLimits {
            max_topics: 1 << 20,
            max_vocab: 1 << 26,
            max_docs: 1 << 28,
            max_tokens: 1 << 34,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub graph: TokenGraph,
    pub state: ModelState,
    pub meta: Option<Vec<TokenMeta>>,
    pub history: MetricHistory,
}

fn push_run(out: &mut String, value: impl std::fmt::Display, run: usize) {
    if !out.is_empty() && !out.ends_with('\t') {
        out.push(' ');
    }
    if run == 1 {
        let _ = write!(out, "{value}");
    } else {
        let _ = write!(out, "{value}*{run}");
    }
}

fn encode_runs<T: PartialEq + Copy, D: std::fmt::Display>(
    out: &mut String,
    values: &[T],
    show: impl Fn(T) -> D,
) {
    let mut i = 0;
    while i < values.len() {
        let mut j = i + 1;
        while j < values.len() && values[j] == values[i] {
            j += 1;
        }
        push_run(out, show(values[i]), j - i);
        i = j;
    }
}

/// Writes the checkpoint text. `meta`, when given, has one entry per token.
pub fn write_checkpoint<W: Write>(
    mut out: W,
    state: &ModelState,
    graph: &TokenGraph,
    config: &TrainConfig,
    meta: Option<&[TokenMeta]>,
    history: &MetricHistory,
) -> Result<(), ModelIoError> {
    let header = CheckpointHeader {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        k: state.k(),
        w: state.vocab_size(),
        d: state.doc_count(),
        hyper: config.hyper,
        iteration: state.iteration(),
        seed: config.seed,
        kernel: config.kernel,
        edges: graph.edges().len() as u64,
        tokens: graph.total_tokens(),
    };
    let json = serde_json::to_string(&header).map_err(std::io::Error::other)?;
    writeln!(out, "{json}")?;
    writeln!(out, "{WORDS}")?;
    let mut line = String::new();
    for (w, row) in state.word_rows().iter().enumerate() {
        if row.nnz() == 0 {
            continue;
        }
        line.clear();
        let _ = write!(line, "{w}\t");
        for (i, (k, c)) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{k}:{c}");
        }
        writeln!(out, "{line}")?;
    }
    writeln!(out, "{EDGES}")?;
    for e in graph.edges() {
        line.clear();
        let _ = write!(line, "{}\t{}\t", e.word, e.doc);
        encode_runs(&mut line, &graph.topics()[e.tokens()], |t| t);
        writeln!(out, "{line}")?;
    }
    if let Some(meta) = meta {
        if meta.len() != graph.topics().len() {
            return Err(ModelIoError::Invariant("token metadata length mismatch".into()));
        }
        writeln!(out, "{META}")?;
        for e in graph.edges() {
            line.clear();
            encode_runs(&mut line, &meta[e.tokens()], |m| {
                format!("{}:{}", m.skipped, m.same)
            });
            writeln!(out, "{line}")?;
        }
    }
    writeln!(out, "{HISTORY}")?;
    for r in &history.records {
        let json = serde_json::to_string(r).map_err(std::io::Error::other)?;
        writeln!(out, "{json}")?;
    }
    writeln!(out, "{END}")?;
    out.flush()?;
    Ok(())
}

/// Writes to `<path>.tmp` and renames into place.
pub fn save_checkpoint(
    path: &Path,
    state: &ModelState,
    graph: &TokenGraph,
    config: &TrainConfig,
    meta: Option<&[TokenMeta]>,
    history: &MetricHistory,
) -> Result<(), EngineError> {
    let run = || -> Result<(), ModelIoError> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        write_checkpoint(
            BufWriter::new(File::create(&tmp)?),
            state,
            graph,
            config,
            meta,
            history,
        )?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    };
    run().map_err(|e| EngineError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelIoError> {
    parse_checkpoint(BufReader::new(File::open(path)?), &LoadLimits::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Words,
    Edges,
    Meta,
    History,
    End,
}

struct Parser {
    line: usize,
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ModelIoError> {
        Err(ModelIoError::Format {
            line: self.line,
            msg: msg.into(),
        })
    }

    fn int<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T, ModelIoError> {
        match s.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("{what} is not a valid integer: {s:?}")),
        }
    }

    /// `value` or `value*run`; run ≥ 1.
    fn run<'a>(&self, tok: &'a str) -> Result<(&'a str, u64), ModelIoError> {
        match tok.split_once('*') {
            None => Ok((tok, 1)),
            Some((v, r)) => {
                let r: u64 = self.int(r, "run length")?;
                if r == 0 {
                    return self.err("run length must be ≥ 1");
                }
                Ok((v, r))
            }
        }
    }
}

/// Parses checkpoint text, validating every count against the edge topics.
pub fn parse_checkpoint<R: BufRead>(
    reader: R,
    limits: &LoadLimits,
) -> Result<Checkpoint, ModelIoError> {
    let mut lines = reader.lines();
    let mut p = Parser { line: 1 };
    let first = match lines.next() {
        Some(l) => l?,
        None => return Err(ModelIoError::Truncated("empty file".into())),
    };
    let header: CheckpointHeader = match serde_json::from_str(&first) {
        Ok(h) => h,
        Err(e) => return p.err(format!("bad header: {e}")),
    };
    if header.format != FORMAT_NAME {
        return p.err(format!("not a checkpoint (format {:?})", header.format));
    }
    if header.version != FORMAT_VERSION {
        return Err(ModelIoError::Version {
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }
    if header.hyper.validate().is_err() || header.hyper.k != header.k {
        return p.err("header hyper-parameters are invalid or disagree with K");
    }
    if header.k > limits.max_topics
        || header.w > limits.max_vocab
        || header.d > limits.max_docs
        || header.tokens > limits.max_tokens
    {
        return p.err("header dimensions exceed load limits");
    }
    let (k, w_count, d_count) = (header.k, header.w, header.d);

    let mut section: Option<Section> = None;
    let mut word_rows: Vec<(u32, SparseCounts)> = Vec::new();
    let mut edges: Vec<(u32, u32, u32)> = Vec::new();
    let mut topics: Vec<u32> = Vec::new();
    let mut meta: Option<Vec<TokenMeta>> = None;
    let mut meta_edges = 0usize;
    let mut history = MetricHistory::default();

    for line in lines {
        let line = line?;
        p.line += 1;
        let next = match line.as_str() {
            WORDS => Some(Section::Words),
            EDGES => Some(Section::Edges),
            META => Some(Section::Meta),
            HISTORY => Some(Section::History),
            END => Some(Section::End),
            _ => None,
        };
        if let Some(next) = next {
            if section.is_some_and(|s| s >= next) {
                return p.err(format!("section {line} out of order"));
            }
            if next > Section::Edges && section < Some(Section::Edges) {
                return Err(ModelIoError::MissingEdges);
            }
            if next == Section::Meta {
                meta = Some(Vec::new());
            }
            if next > Section::Meta && meta.is_some() && meta_edges != edges.len() {
                return p.err(format!(
                    "meta section has {meta_edges} lines for {} edges",
                    edges.len()
                ));
            }
            section = Some(next);
            continue;
        }
        match section {
            None => return p.err("content before the first section"),
            Some(Section::End) => return p.err("content after end marker"),
            Some(Section::Words) => {
                let Some((w, rest)) = line.split_once('\t') else {
                    return p.err("word row needs <word>\\t<topic:count ...>");
                };
                let w: u32 = p.int(w, "word id")?;
                if w as usize >= w_count {
                    return p.err(format!("word {w} out of range"));
                }
                if word_rows.last().is_some_and(|&(prev, _)| prev >= w) {
                    return p.err("word rows must be strictly increasing");
                }
                let mut pairs: Vec<(u32, u32)> = Vec::new();
                for tok in rest.split(' ') {
                    let Some((t, c)) = tok.split_once(':') else {
                        return p.err(format!("expected topic:count, found {tok:?}"));
                    };
                    let t: u32 = p.int(t, "topic")?;
                    let c: u32 = p.int(c, "count")?;
                    if t as usize >= k || c == 0 {
                        return p.err(format!("bad entry {tok:?}"));
                    }
                    if pairs.last().is_some_and(|&(prev, _)| prev >= t) {
                        return p.err("topics must be strictly increasing");
                    }
                    pairs.push((t, c));
                }
                let row = SparseCounts::from_sorted_pairs(k, pairs)
                    .map_err(|e| ModelIoError::Format { line: p.line, msg: e.to_string() })?;
                word_rows.push((w, row));
            }
            Some(Section::Edges) => {
                let mut parts = line.splitn(3, '\t');
                let (Some(w), Some(d), Some(runs)) = (parts.next(), parts.next(), parts.next())
                else {
                    return p.err("edge row needs <word>\\t<doc>\\t<topics>");
                };
                let w: u32 = p.int(w, "word id")?;
                let d: u32 = p.int(d, "doc id")?;
                if w as usize >= w_count || d as usize >= d_count {
                    return p.err(format!("edge ({w}, {d}) out of range"));
                }
                if edges.last().is_some_and(|&(pw, pd, _)| (pw, pd) >= (w, d)) {
                    return p.err("edges must be strictly increasing by (word, doc)");
                }
                let mut len: u64 = 0;
                for tok in runs.split(' ') {
                    let (t, r) = p.run(tok)?;
                    let t: u32 = p.int(t, "topic")?;
                    if t as usize >= k {
                        return p.err(format!("topic {t} out of range"));
                    }
                    len += r;
                    if topics.len() as u64 + r > header.tokens {
                        return p.err("more tokens than the header declares");
                    }
                    topics.extend(std::iter::repeat_n(t, r as usize));
                }
                if len > u32::MAX as u64 {
                    return p.err("edge multiplicity exceeds 32 bits");
                }
                edges.push((w, d, len as u32));
            }
            Some(Section::Meta) => {
                let Some(&(_, _, len)) = edges.get(meta_edges) else {
                    return p.err("more meta rows than edges");
                };
                let out = meta.as_mut().expect("meta section opened");
                let mut got: u64 = 0;
                for tok in line.split(' ') {
                    let (v, r) = p.run(tok)?;
                    let Some((s, t)) = v.split_once(':') else {
                        return p.err(format!("expected skipped:same, found {v:?}"));
                    };
                    let m = TokenMeta {
                        skipped: p.int(s, "skip count")?,
                        same: p.int(t, "same count")?,
                    };
                    got += r;
                    if got > len as u64 {
                        return p.err("meta row longer than its edge");
                    }
                    out.extend(std::iter::repeat_n(m, r as usize));
                }
                if got != len as u64 {
                    return p.err("meta row shorter than its edge");
                }
                meta_edges += 1;
            }
            Some(Section::History) => match serde_json::from_str::<IterationRecord>(&line) {
                Ok(r) => history.push(r),
                Err(e) => return p.err(format!("bad history record: {e}")),
            },
        }
    }
    if section < Some(Section::Edges) {
        return Err(ModelIoError::MissingEdges);
    }
    if section != Some(Section::End) {
        return Err(ModelIoError::Truncated("end marker not found".into()));
    }
    if edges.len() as u64 != header.edges || topics.len() as u64 != header.tokens {
        return Err(ModelIoError::Truncated(format!(
            "header declares {} edges / {} tokens, found {} / {}",
            header.edges,
            header.tokens,
            edges.len(),
            topics.len()
        )));
    }

    let mut docs: Vec<Document> = (0..d_count as u32)
        .map(|id| Document {
            id,
            entries: Vec::new(),
        })
        .collect();
    for &(w, d, len) in &edges {
        docs[d as usize].entries.push((w, len));
    }
    let corpus = Corpus::with_vocab(docs, w_count)
        .map_err(|e| ModelIoError::Invariant(e.to_string()))?;
    let mut next = topics.iter().copied();
    let graph = TokenGraph::build(&corpus, k, |_, _| next.next().unwrap_or(0))
        .map_err(|e| ModelIoError::Invariant(e.to_string()))?;
    let mut state =
        ModelState::from_graph(&graph, k).map_err(|e| ModelIoError::Invariant(e.to_string()))?;
    state.set_iteration(header.iteration);

    let mut stored = word_rows.iter().peekable();
    for (w, row) in state.word_rows().iter().enumerate() {
        let listed = match stored.peek() {
            Some((sw, srow)) if *sw as usize == w => {
                stored.next();
                Some(srow)
            }
            _ => None,
        };
        let ok = match listed {
            Some(srow) => srow == row,
            None => row.nnz() == 0,
        };
        if !ok {
            return Err(ModelIoError::Invariant(format!(
                "word {w}: stored row differs from the recount of edge topics"
            )));
        }
    }
    state
        .check_invariants(&graph)
        .map_err(|e| ModelIoError::Invariant(e.to_string()))?;
    Ok(Checkpoint {
        header,
        graph,
        state,
        meta,
        history,
    })
}

/// Rebuilds training state for `corpus` from a checkpoint. Documents
/// `0..D` must match the checkpoint; later documents are new and get
/// uniform random topics. Returns the graph, counts and token metadata
/// (empty when the checkpoint had none).
pub fn resume_state(
    ckpt: &Checkpoint,
    corpus: &Corpus,
    k: usize,
    seed: u64,
) -> Result<(TokenGraph, ModelState, Vec<TokenMeta>), ModelIoError> {
    let h = &ckpt.header;
    if k != h.k {
        return Err(ModelIoError::Incompatible(format!(
            "checkpoint has K = {} but {k} topics were requested",
            h.k
        )));
    }
    if corpus.vocab_size() < h.w {
        return Err(ModelIoError::Incompatible(format!(
            "vocabulary shrank from {} to {}",
            h.w,
            corpus.vocab_size()
        )));
    }
    if corpus.doc_count() < h.d {
        return Err(ModelIoError::Incompatible(format!(
            "corpus has {} documents, checkpoint has {}",
            corpus.doc_count(),
            h.d
        )));
    }
    let mut graph = TokenGraph::from_corpus(corpus);
    if graph.vocab_size() < h.w {
        // Trailing vocabulary ids may be unused by the corpus.
        let padded = Corpus::with_vocab(corpus.docs().to_vec(), h.w)
            .map_err(|e| ModelIoError::Incompatible(e.to_string()))?;
        graph = TokenGraph::from_corpus(&padded);
    }
    let old_meta = ckpt.meta.as_deref();
    let mut meta = if old_meta.is_some() {
        vec![TokenMeta::default(); graph.topics().len()]
    } else {
        Vec::new()
    };
    let mut rng = stream(seed, Domain::Extend, &[h.iteration]);
    let old_edges = ckpt.graph.edges();
    let mut cursor = 0usize;
    let new_edges = graph.edges().to_vec();
    let topics = graph.topics_mut();
    for e in &new_edges {
        if (e.doc as usize) < h.d {
            let Some(old) = old_edges.get(cursor) else {
                return Err(ModelIoError::Incompatible(format!(
                    "document {} differs from the checkpoint",
                    e.doc
                )));
            };
            if (old.word, old.doc, old.len) != (e.word, e.doc, e.len) {
                let d = if (old.word, old.doc) < (e.word, e.doc) { old.doc } else { e.doc };
                return Err(ModelIoError::Incompatible(format!(
                    "document {d} differs from the checkpoint"
                )));
            }
            topics[e.tokens()].copy_from_slice(ckpt.graph.edge_topics(cursor));
            if let Some(m) = old_meta {
                meta[e.tokens()].copy_from_slice(&m[old.tokens()]);
            }
            cursor += 1;
        } else {
            for t in &mut topics[e.tokens()] {
                *t = rng.random_range(0..k as u32);
            }
        }
    }
    if cursor != old_edges.len() {
        return Err(ModelIoError::Incompatible(format!(
            "document {} differs from the checkpoint",
            old_edges[cursor].doc
        )));
    }
    let mut state =
        ModelState::from_graph(&graph, k).map_err(|e| ModelIoError::Invariant(e.to_string()))?;
    state.set_iteration(h.iteration);
    Ok((graph, state, meta))
}
