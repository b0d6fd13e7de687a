//! Seeded synthetic corpora: LDA-generated text and power-law bipartite
//! graphs.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, Zipf};

use crate::corpus::{Corpus, Document};
use crate::rng::{mix, stream, Domain};
use crate::samplers::AliasTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaParams {
    pub docs: usize,
    pub vocab: usize,
    pub topics: usize,
    pub mean_doc_len: f64,
    /// Dirichlet concentration of document-topic mixtures.
    pub alpha: f64,
    /// Dirichlet concentration of topic-word distributions.
    pub beta: f64,
    pub seed: u64,
}

impl LdaParams {
    /// 5k documents, 5k words, K = 20, about 100 tokens per document.
    pub fn convergence(seed: u64) -> Self {
        LdaParams {
            docs: 5000,
            vocab: 5000,
            topics: 20,
            mean_doc_len: 100.0,
            alpha: 0.1,
            beta: 0.02,
            seed,
        }
    }
}

fn dirichlet<R: Rng + ?Sized>(rng: &mut R, dim: usize, conc: f64) -> Vec<f64> {
    let g = Gamma::new(conc, 1.0).expect("positive concentration");
    let mut v: Vec<f64> = (0..dim).map(|_| g.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        v = vec![1.0 / dim as f64; dim];
    }
    v
}

fn draw<R: Rng + ?Sized>(table: &AliasTable, rng: &mut R) -> u32 {
    table.sample(rng.random::<f64>() * table.len() as f64, rng.random())
}

/// Draws topic-word and document-topic distributions from symmetric
/// Dirichlets and emits documents token by token. Document lengths are
/// `1 + Poisson(mean - 1)`.
pub fn lda_corpus(params: &LdaParams) -> Corpus {
    let mut rng = stream(mix(params.seed, &[0x5d]), Domain::Init, &[]);
    let phi: Vec<AliasTable> = (0..params.topics)
        .map(|_| {
            AliasTable::from_weights(&dirichlet(&mut rng, params.vocab, params.beta))
                .expect("topic distribution has mass")
        })
        .collect();
    let len_dist = Poisson::new((params.mean_doc_len - 1.0).max(1e-9)).expect("valid mean");
    let mut docs = Vec::with_capacity(params.docs);
    for d in 0..params.docs {
        let theta = AliasTable::from_weights(&dirichlet(&mut rng, params.topics, params.alpha))
            .expect("mixture has mass");
        let len = 1 + len_dist.sample(&mut rng) as usize;
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for _ in 0..len {
            let k = draw(&theta, &mut rng);
            let w = draw(&phi[k as usize], &mut rng);
            *counts.entry(w).or_insert(0) += 1;
        }
        docs.push(Document {
            id: d as u32,
            entries: counts.into_iter().collect(),
        });
    }
    Corpus::with_vocab(docs, params.vocab).expect("word ids below vocab")
}

/// Roughly `edges` distinct (word, doc) pairs with Zipf-distributed word and
/// document degrees of exponent `exponent`.
pub fn power_law_corpus(edges: usize, vocab: usize, docs: usize, exponent: f64, seed: u64) -> Corpus {
    let mut rng = stream(mix(seed, &[0x9e]), Domain::Init, &[]);
    let wz = Zipf::new(vocab as f64, exponent).expect("valid Zipf");
    let dz = Zipf::new(docs as f64, exponent).expect("valid Zipf");
    // Random relabeling so high-degree ids are not clustered at 0.
    let wperm = rand::seq::index::sample(&mut rng, vocab, vocab).into_vec();
    let dperm = rand::seq::index::sample(&mut rng, docs, docs).into_vec();
    let mut per_doc: Vec<BTreeMap<u32, u32>> = vec![BTreeMap::new(); docs];
    let mut distinct = 0usize;
    let mut attempts = 0usize;
    while distinct < edges && attempts < edges * 50 {
        attempts += 1;
        let w = wperm[wz.sample(&mut rng) as usize - 1] as u32;
        let d = dperm[dz.sample(&mut rng) as usize - 1];
        let slot = per_doc[d].entry(w).or_insert(0);
        if *slot == 0 {
            distinct += 1;
        }
        *slot += 1;
    }
    let docs: Vec<Document> = per_doc
        .into_iter()
        .enumerate()
        .map(|(d, m)| Document {
            id: d as u32,
            entries: m.into_iter().collect(),
        })
        .collect();
    Corpus::with_vocab(docs, vocab).expect("word ids below vocab")
}
