//! Log-likelihood, perplexity and termination.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::TokenGraph;
use crate::engine::{IterationStats, ModelState};
use crate::kernels::{precompute_terms, HyperParams};

/// Pairwise summation; the result does not depend on how callers chunk the
/// input as long as the element order is fixed.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Per-token log-likelihood
/// `Σ log Σ_k (N_kd + a_k)/(N_d + K a_k) · (N_wk + β)/(N_k + Wβ)` with
/// `a_k = (N_k + α')/(N + Kα')`, summed over every token.
pub fn log_likelihood_total(state: &ModelState, graph: &TokenGraph, hyper: &HyperParams) -> f64 {
    edge_log_likelihoods(state, graph, hyper)
        .map(|v| pairwise_sum(&v))
        .unwrap_or(0.0)
}

/// Per-edge contributions (occurrence count × log probability) in edge
/// order, or `None` for an empty model.
pub fn edge_log_likelihoods(
    state: &ModelState,
    graph: &TokenGraph,
    hyper: &HyperParams,
) -> Option<Vec<f64>> {
    let k = state.k();
    let global = state.global();
    let n: u64 = global.iter().sum();
    if n == 0 {
        return None;
    }
    let kf = k as f64;
    let w_beta = graph.vocab_size() as f64 * hyper.beta;
    let a: Vec<f64> = global
        .iter()
        .map(|&nk| (nk as f64 + hyper.alpha_as) / (n as f64 + kf * hyper.alpha_as))
        .collect();
    let t1: Vec<f64> = global.iter().map(|&nk| 1.0 / (nk as f64 + w_beta)).collect();
    // Σ_k a_k/(N_d + K a_k) · β t1_k depends only on N_d.
    let mut smooth_cache: HashMap<u64, f64> = HashMap::new();
    let mut word_dense = vec![0u32; k];
    let mut out = Vec::with_capacity(graph.edges().len());
    for w in 0..graph.vocab_size() as u32 {
        let range = graph.word_edges(w);
        if range.is_empty() {
            continue;
        }
        let wrow = state.word_counts(w);
        wrow.scatter_into(&mut word_dense);
        for e in &graph.edges()[range] {
            let n_d = graph.doc_degree()[e.doc as usize];
            let nd = n_d as f64;
            let smooth = *smooth_cache.entry(n_d).or_insert_with(|| {
                (0..k)
                    .map(|j| a[j] / (nd + kf * a[j]) * hyper.beta * t1[j])
                    .sum()
            });
            let mut word_part = 0.0;
            for (j, c) in wrow.iter() {
                let j = j as usize;
                word_part += a[j] / (nd + kf * a[j]) * c as f64 * t1[j];
            }
            let mut doc_part = 0.0;
            for (j, c) in state.doc_counts(e.doc).iter() {
                let j = j as usize;
                doc_part += c as f64 / (nd + kf * a[j]) * (word_dense[j] as f64 + hyper.beta) * t1[j];
            }
            out.push(e.len as f64 * (smooth + word_part + doc_part).ln());
        }
        wrow.clear_from(&mut word_dense);
    }
    Some(out)
}

/// Collapsed `(log p(w | z), log p(z))` using symmetric β and the asymmetric
/// document prior `α_k` of the current counts.
pub fn log_likelihood_split(state: &ModelState, hyper: &HyperParams) -> (f64, f64) {
    let global = state.global();
    if global.iter().all(|&c| c == 0) {
        return (0.0, 0.0);
    }
    let w = state.vocab_size();
    let beta = hyper.beta;
    let w_beta = w as f64 * beta;
    let lg_beta = ln_gamma(beta);
    let lg_w_beta = ln_gamma(w_beta);

    let mut word_terms: Vec<f64> = Vec::with_capacity(w + global.len());
    for row in state.word_rows() {
        let v: f64 = row
            .values()
            .iter()
            .map(|&c| ln_gamma(c as f64 + beta) - lg_beta)
            .sum();
        word_terms.push(v);
    }
    for &nk in global {
        word_terms.push(lg_w_beta - ln_gamma(nk as f64 + w_beta));
    }
    let llh_word = pairwise_sum(&word_terms);

    let terms = precompute_terms(global, w, hyper);
    let alpha_k = &terms.alpha_k;
    let alpha_sum: f64 = alpha_k.iter().sum();
    let lg_alpha: Vec<f64> = alpha_k.iter().map(|&a| ln_gamma(a)).collect();
    let lg_alpha_sum = ln_gamma(alpha_sum);
    let doc_terms: Vec<f64> = state
        .doc_rows()
        .iter()
        .filter(|row| row.nnz() > 0)
        .map(|row| {
            let mut v = 0.0;
            for (k, c) in row.iter() {
                let k = k as usize;
                v += ln_gamma(c as f64 + alpha_k[k]) - lg_alpha[k];
            }
            v + lg_alpha_sum - ln_gamma(row.total() as f64 + alpha_sum)
        })
        .collect();
    (llh_word, pairwise_sum(&doc_terms))
}

pub fn perplexity(llh_total: f64, n: u64) -> f64 {
    (-llh_total / n as f64).exp()
}

/// Stats and (when evaluated) quality metrics of one iteration; serialized
/// as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    #[serde(flatten)]
    pub stats: IterationStats,
    pub llh_total: Option<f64>,
    pub llh_word: Option<f64>,
    pub llh_doc: Option<f64>,
    pub perplexity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricHistory {
    pub records: Vec<IterationRecord>,
}

impl MetricHistory {
    pub fn push(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Most recent evaluated perplexity.
    pub fn last_perplexity(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.perplexity)
    }
}

/// Stop once `max_iterations` is reached or the last evaluated perplexity is
/// at or below the target.
pub fn check_termination(
    iteration: u64,
    max_iterations: u64,
    history: &MetricHistory,
    target_perplexity: Option<f64>,
) -> bool {
    if iteration >= max_iterations {
        return true;
    }
    match (target_perplexity, history.last().and_then(|r| r.perplexity)) {
        (Some(target), Some(p)) => p <= target,
        _ => false,
    }
}
