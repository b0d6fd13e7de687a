//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;
use topicgraph::corpus::{Corpus, TokenGraph};
use topicgraph::engine::ModelState;
use topicgraph::kernels::{formula3, HyperParams};
use topicgraph::rng::worker_rng;

/// Textbook serial collapsed Gibbs sweep on dense count tables. Tokens are
/// visited word-major (word, then document, then occurrence).
pub struct SerialOracle {
    k: usize,
    w: usize,
    hyper: HyperParams,
    tokens: Vec<(usize, usize)>,
    pub z: Vec<u32>,
    nwk: Vec<Vec<i64>>,
    nkd: Vec<Vec<i64>>,
    nk: Vec<i64>,
}

impl SerialOracle {
    pub fn new(graph: &TokenGraph, hyper: HyperParams) -> Self {
        let k = hyper.k;
        let mut tokens = Vec::new();
        for e in graph.edges() {
            for _ in 0..e.len {
                tokens.push((e.word as usize, e.doc as usize));
            }
        }
        let z = graph.topics().to_vec();
        let mut nwk = vec![vec![0i64; k]; graph.vocab_size()];
        let mut nkd = vec![vec![0i64; k]; graph.doc_count()];
        let mut nk = vec![0i64; k];
        for (&(w, d), &t) in tokens.iter().zip(&z) {
            nwk[w][t as usize] += 1;
            nkd[d][t as usize] += 1;
            nk[t as usize] += 1;
        }
        SerialOracle {
            k,
            w: graph.vocab_size(),
            hyper,
            tokens,
            z,
            nwk,
            nkd,
            nk,
        }
    }

    /// One sweep for iteration `iter`, drawing from the stream of worker 0
    /// of partition 0.
    pub fn sweep(&mut self, seed: u64, iter: u64) {
        let h = self.hyper;
        let kf = self.k as f64;
        let n: i64 = self.nk.iter().sum();
        let t2 = kf * h.alpha / (n as f64 + h.alpha_as);
        let alpha_k: Vec<f64> = self
            .nk
            .iter()
            .map(|&c| t2 * (c as f64 + h.alpha_as / kf))
            .collect();
        let w_beta = self.w as f64 * h.beta;
        let mut rng = worker_rng(seed, iter, 0, 0);
        let mut p = vec![0.0; self.k];
        for i in 0..self.tokens.len() {
            let (w, d) = self.tokens[i];
            let old = self.z[i] as usize;
            self.nwk[w][old] -= 1;
            self.nkd[d][old] -= 1;
            self.nk[old] -= 1;
            let mut total = 0.0;
            for k in 0..self.k {
                p[k] = (self.nwk[w][k] as f64 + h.beta) / (self.nk[k] as f64 + w_beta)
                    * (self.nkd[d][k] as f64 + alpha_k[k]);
                total += p[k];
            }
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut new = self.k - 1;
            for (k, &pk) in p.iter().enumerate() {
                acc += pk;
                if acc > u {
                    new = k;
                    break;
                }
            }
            self.z[i] = new as u32;
            self.nwk[w][new] += 1;
            self.nkd[d][new] += 1;
            self.nk[new] += 1;
        }
    }
}

/// Dense `W × K` and `D × K` tables.
pub fn dense_tables(state: &ModelState) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = state.k();
    let words = state
        .word_rows()
        .iter()
        .map(|r| r.to_dense().0.iter().map(|&c| c as f64).collect())
        .collect();
    let docs = state
        .doc_rows()
        .iter()
        .map(|r| {
            let mut v = vec![0.0; k];
            for (t, c) in r.iter() {
                v[t as usize] = c as f64;
            }
            v
        })
        .collect();
    (words, docs)
}

/// Per-token likelihood from dense tables, looping over documents and
/// their words.
pub fn naive_llh_total(state: &ModelState, corpus: &Corpus, h: &HyperParams) -> f64 {
    let (nwk, nkd) = dense_tables(state);
    let k = state.k();
    let nk: Vec<f64> = state.global().iter().map(|&c| c as f64).collect();
    let n: f64 = nk.iter().sum();
    let wb = corpus.vocab_size() as f64 * h.beta;
    let kf = k as f64;
    let mut llh = 0.0;
    for (d, doc) in corpus.docs().iter().enumerate() {
        let nd = doc.len() as f64;
        for &(w, c) in &doc.entries {
            let mut s = 0.0;
            for j in 0..k {
                let a = (nk[j] + h.alpha_as) / (n + kf * h.alpha_as);
                s += (nkd[d][j] + a) / (nd + kf * a) * (nwk[w as usize][j] + h.beta) / (nk[j] + wb);
            }
            llh += c as f64 * s.ln();
        }
    }
    llh
}

/// Collapsed split with log-gamma over every (row, topic) cell.
pub fn naive_llh_split(state: &ModelState, h: &HyperParams) -> (f64, f64) {
    let (nwk, nkd) = dense_tables(state);
    let k = state.k();
    let w = state.vocab_size();
    let nk: Vec<f64> = state.global().iter().map(|&c| c as f64).collect();
    let n: f64 = nk.iter().sum();
    if n == 0.0 {
        return (0.0, 0.0);
    }
    let mut word = 0.0;
    for j in 0..k {
        let mut col = 0.0;
        for row in &nwk {
            col += ln_gamma(row[j] + h.beta) - ln_gamma(h.beta);
        }
        word += col + ln_gamma(w as f64 * h.beta) - ln_gamma(nk[j] + w as f64 * h.beta);
    }
    let kf = k as f64;
    let alpha_k: Vec<f64> = nk
        .iter()
        .map(|&c| kf * h.alpha * (c + h.alpha_as / kf) / (n + h.alpha_as))
        .collect();
    let asum: f64 = alpha_k.iter().sum();
    let mut doc = 0.0;
    for row in &nkd {
        let nd: f64 = row.iter().sum();
        if nd == 0.0 {
            continue;
        }
        for j in 0..k {
            doc += ln_gamma(row[j] + alpha_k[j]) - ln_gamma(alpha_k[j]);
        }
        doc += ln_gamma(asum) - ln_gamma(nd + asum);
    }
    (word, doc)
}

/// Target over K topics for one token of a small model. `fresh` removes the
/// token from every count; otherwise the zen mixture is reproduced with
/// exclusion only in the document bucket of single-occurrence edges.
pub fn token_target(
    state: &ModelState,
    graph: &TokenGraph,
    h: &HyperParams,
    edge: usize,
    which: usize,
    fresh: bool,
) -> Vec<f64> {
    let e = graph.edges()[edge];
    let z = graph.edge_topics(edge)[which] as usize;
    let k = h.k;
    let kf = k as f64;
    let n: u64 = state.global().iter().sum();
    let wb = graph.vocab_size() as f64 * h.beta;
    let word = state.word_counts(e.word).to_dense().0;
    let doc = state.doc_counts(e.doc);
    (0..k)
        .map(|j| {
            let nk = state.global()[j] as f64;
            let alpha_k = kf * h.alpha * (nk + h.alpha_as / kf) / (n as f64 + h.alpha_as);
            let (nwk, nkd) = (word[j] as f64, doc.get(j) as f64);
            let d = if j == z { 1.0 } else { 0.0 };
            if fresh {
                formula3(nwk - d, nkd - d, nk - d, alpha_k, h.beta, wb)
            } else if e.len == 1 {
                ((nwk + h.beta) * alpha_k + (nkd - d) * (nwk - d + h.beta)) / (nk + wb)
            } else {
                formula3(nwk, nkd, nk, alpha_k, h.beta, wb)
            }
        })
        .collect()
}

/// Pearson chi-square p-value of `counts` against `weights`.
pub fn chi_square_p(counts: &[u64], weights: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let total: f64 = weights.iter().sum();
    let mut stat = 0.0;
    let mut df = 0usize;
    for (&c, &w) in counts.iter().zip(weights) {
        if w <= 0.0 {
            assert_eq!(c, 0, "drew a zero-weight outcome");
            continue;
        }
        let e = n as f64 * w / total;
        stat += (c as f64 - e).powi(2) / e;
        df += 1;
    }
    if df <= 1 {
        return 1.0;
    }
    1.0 - ChiSquared::new((df - 1) as f64).unwrap().cdf(stat)
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}
