use rand::seq::index::sample;
use rand::Rng;

use super::{EngineError, ModelState, SparseInit};
use crate::corpus::TokenGraph;
use crate::rng::{stream, Domain};

/// Uniform topic per occurrence, drawn in edge order from one stream.
pub fn init_random(graph: &mut TokenGraph, k: usize, seed: u64) -> Result<ModelState, EngineError> {
    let mut rng = stream(seed, Domain::Init, &[0]);
    for t in graph.topics_mut() {
        *t = rng.random_range(0..k as u32);
    }
    ModelState::from_graph(graph, k)
}

fn support_size(k: usize, deg: f64) -> usize {
    ((deg * k as f64).ceil() as usize).clamp(1, k)
}

/// Sorted random subset of `⌈deg·K⌉` topics for vertex `id`.
fn vertex_support(seed: u64, domain: Domain, id: u32, k: usize, deg: f64) -> Vec<u32> {
    let mut rng = stream(seed, domain, &[id as u64]);
    let mut s: Vec<u32> = sample(&mut rng, k, support_size(k, deg))
        .into_iter()
        .map(|t| t as u32)
        .collect();
    s.sort_unstable();
    s
}

/// Per-vertex topic subsets used by sparse initialization: per word for
/// `Word`, per document for `Doc`, `None` otherwise.
pub fn initial_supports(
    mode: SparseInit,
    vocab: usize,
    docs: usize,
    k: usize,
    seed: u64,
) -> Option<Vec<Vec<u32>>> {
    match mode {
        SparseInit::None => None,
        SparseInit::Word(deg) => Some(
            (0..vocab as u32)
                .map(|w| vertex_support(seed, Domain::SparseInitWord, w, k, deg))
                .collect(),
        ),
        SparseInit::Doc(deg) => Some(
            (0..docs as u32)
                .map(|d| vertex_support(seed, Domain::SparseInitDoc, d, k, deg))
                .collect(),
        ),
    }
}

/// Every occurrence of word `w` draws uniformly from that word's subset.
/// Returns the state and the subsets.
pub fn init_sparse_word(
    graph: &mut TokenGraph,
    k: usize,
    deg: f64,
    seed: u64,
) -> Result<(ModelState, Vec<Vec<u32>>), EngineError> {
    let supports = initial_supports(SparseInit::Word(deg), graph.vocab_size(), 0, k, seed)
        .expect("word mode yields supports");
    let mut rng = stream(seed, Domain::Init, &[1]);
    let edges = graph.edges().to_vec();
    let topics = graph.topics_mut();
    for e in &edges {
        let s = &supports[e.word as usize];
        for t in &mut topics[e.tokens()] {
            *t = s[rng.random_range(0..s.len())];
        }
    }
    Ok((ModelState::from_graph(graph, k)?, supports))
}

/// Every occurrence in document `d` draws uniformly from that document's
/// subset.
pub fn init_sparse_doc(
    graph: &mut TokenGraph,
    k: usize,
    deg: f64,
    seed: u64,
) -> Result<(ModelState, Vec<Vec<u32>>), EngineError> {
    let supports = initial_supports(SparseInit::Doc(deg), 0, graph.doc_count(), k, seed)
        .expect("doc mode yields supports");
    let mut rng = stream(seed, Domain::Init, &[2]);
    let edges = graph.edges().to_vec();
    let topics = graph.topics_mut();
    for e in &edges {
        let s = &supports[e.doc as usize];
        for t in &mut topics[e.tokens()] {
            *t = s[rng.random_range(0..s.len())];
        }
    }
    Ok((ModelState::from_graph(graph, k)?, supports))
}
