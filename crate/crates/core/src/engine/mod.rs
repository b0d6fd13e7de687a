//! Training orchestration: model state, initialization, the per-iteration
//! workflow over partitions, and the training loop.

mod init;
mod iteration;
mod trainer;

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, TokenGraph};
use crate::kernels::{HyperError, HyperParams, KernelKind, KernelOptions};
use crate::partition::Strategy;
use crate::rng::splitmix64;
use crate::sparse::{SparseCounts, VectorError};

pub use init::{init_random, init_sparse_doc, init_sparse_word, initial_supports};
pub use iteration::{merge_deltas, run_iteration, DeltaEntry, MergeMode, PartitionPlan};
pub use trainer::{checkpoint_path, train, Trainer};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("model invariant violated: {0}")]
    Invariant(String),
    #[error("count update failed: {0}")]
    Count(#[from] VectorError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Word-topic, document-topic and global topic counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelState {
    k: usize,
    words: Vec<SparseCounts>,
    docs: Vec<SparseCounts>,
    global: Vec<u64>,
    iteration: u64,
}

impl ModelState {
    pub fn empty(k: usize, vocab: usize, docs: usize) -> Self {
        ModelState {
            k,
            words: vec![SparseCounts::new(k); vocab],
            docs: vec![SparseCounts::new(k); docs],
            global: vec![0; k],
            iteration: 0,
        }
    }

    /// Counts recomputed from the graph's topics.
    pub fn from_graph(graph: &TokenGraph, k: usize) -> Result<Self, EngineError> {
        let mut dense = vec![0u32; k];
        let mut words = Vec::with_capacity(graph.vocab_size());
        let mut doc_pairs: Vec<(u32, u32)> = Vec::with_capacity(graph.topics().len());
        for w in 0..graph.vocab_size() as u32 {
            let mut touched: Vec<u32> = Vec::new();
            for e in &graph.edges()[graph.word_edges(w)] {
                for &t in &graph.topics()[e.tokens()] {
                    if t as usize >= k {
                        return Err(EngineError::Invariant(format!(
                            "topic {t} out of range for K = {k} (word {w}, doc {})",
                            e.doc
                        )));
                    }
                    if dense[t as usize] == 0 {
                        touched.push(t);
                    }
                    dense[t as usize] += 1;
                    doc_pairs.push((e.doc, t));
                }
            }
            touched.sort_unstable();
            let row = SparseCounts::from_sorted_pairs(k, touched.iter().map(|&t| (t, dense[t as usize])))?;
            for &t in &touched {
                dense[t as usize] = 0;
            }
            words.push(row);
        }
        doc_pairs.sort_unstable();
        let mut docs = vec![SparseCounts::new(k); graph.doc_count()];
        let mut i = 0;
        while i < doc_pairs.len() {
            let d = doc_pairs[i].0;
            let mut j = i;
            while j < doc_pairs.len() && doc_pairs[j].0 == d {
                j += 1;
            }
            docs[d as usize] =
                SparseCounts::from_sorted_pairs(k, doc_pairs[i..j].iter().map(|&(_, t)| (t, 1)))?;
            i = j;
        }
        let mut state = ModelState {
            k,
            words,
            docs,
            global: vec![0; k],
            iteration: 0,
        };
        state.recompute_global();
        Ok(state)
    }

    pub fn from_parts(
        k: usize,
        words: Vec<SparseCounts>,
        docs: Vec<SparseCounts>,
        iteration: u64,
    ) -> Self {
        let mut state = ModelState {
            k,
            words,
            docs,
            global: vec![0; k],
            iteration,
        };
        state.recompute_global();
        state
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.global.iter().sum()
    }

    pub fn global(&self) -> &[u64] {
        &self.global
    }

    pub fn word_counts(&self, w: u32) -> &SparseCounts {
        &self.words[w as usize]
    }

    pub fn doc_counts(&self, d: u32) -> &SparseCounts {
        &self.docs[d as usize]
    }

    pub fn word_rows(&self) -> &[SparseCounts] {
        &self.words
    }

    pub fn doc_rows(&self) -> &[SparseCounts] {
        &self.docs
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn set_iteration(&mut self, iteration: u64) {
        self.iteration = iteration;
    }

    pub(crate) fn rows_mut(&mut self) -> (&mut [SparseCounts], &mut [SparseCounts]) {
        (&mut self.words, &mut self.docs)
    }

    pub(crate) fn replace_rows(&mut self, words: Vec<SparseCounts>, docs: Vec<SparseCounts>) {
        self.words = words;
        self.docs = docs;
    }

    /// `N_k = Σ_w N_wk`.
    pub fn recompute_global(&mut self) {
        self.global.iter_mut().for_each(|g| *g = 0);
        for row in &self.words {
            for (k, c) in row.iter() {
                self.global[k as usize] += c as u64;
            }
        }
    }

    /// Row sums against graph degrees and `Σ N_k = N`.
    pub fn check_invariants(&self, graph: &TokenGraph) -> Result<(), EngineError> {
        if self.words.len() != graph.vocab_size() || self.docs.len() != graph.doc_count() {
            return Err(EngineError::Invariant(format!(
                "shape mismatch: state {}x{} words/docs, graph {}x{}",
                self.words.len(),
                self.docs.len(),
                graph.vocab_size(),
                graph.doc_count()
            )));
        }
        for (w, (row, &deg)) in self.words.iter().zip(graph.word_degree()).enumerate() {
            if row.total() != deg {
                return Err(EngineError::Invariant(format!(
                    "word {w}: Σ_k N_wk = {} but degree is {deg}",
                    row.total()
                )));
            }
        }
        for (d, (row, &deg)) in self.docs.iter().zip(graph.doc_degree()).enumerate() {
            if row.total() != deg {
                return Err(EngineError::Invariant(format!(
                    "doc {d}: Σ_k N_kd = {} but length is {deg}",
                    row.total()
                )));
            }
        }
        let mut from_words = vec![0u64; self.k];
        for row in &self.words {
            for (k, c) in row.iter() {
                from_words[k as usize] += c as u64;
            }
        }
        if from_words != self.global {
            return Err(EngineError::Invariant(
                "N_k differs from Σ_w N_wk".to_string(),
            ));
        }
        let n: u64 = self.global.iter().sum();
        if n != graph.total_tokens() {
            return Err(EngineError::Invariant(format!(
                "Σ_k N_k = {n} but the corpus has {} tokens",
                graph.total_tokens()
            )));
        }
        Ok(())
    }

    /// Order-sensitive hash of every count.
    pub fn checksum(&self) -> u64 {
        let mut h = splitmix64(self.k as u64);
        let mut fold = |x: u64| h = splitmix64(h ^ x);
        for rows in [&self.words, &self.docs] {
            for row in rows.iter() {
                fold(u64::MAX);
                for (k, c) in row.iter() {
                    fold(((k as u64) << 32) | c as u64);
                }
            }
        }
        for &g in &self.global {
            fold(g);
        }
        h
    }
}

/// Per-token convergence bookkeeping for token exclusion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMeta {
    /// Iterations skipped since the last change.
    pub skipped: u8,
    /// Consecutive sampled draws that kept the previous topic.
    pub same: u8,
}

const MIN_SAMPLE_LOG2: i32 = -20;

/// `min(1, 2^(i − t))`, floored at `2^-20`.
pub fn sample_probability(meta: TokenMeta) -> f64 {
    let e = (meta.skipped as i32 - meta.same as i32).clamp(MIN_SAMPLE_LOG2, 0);
    (e as f64).exp2()
}

pub fn exclusion_active(iteration: u64, start: Option<u64>) -> bool {
    start.is_some_and(|s| iteration >= s)
}

/// Decides whether a token is resampled this iteration. A skip increments
/// the skip counter; outside the exclusion window the token is always
/// sampled and `meta` is left alone.
pub fn should_sample<R: Rng + ?Sized>(
    meta: &mut TokenMeta,
    iteration: u64,
    start: Option<u64>,
    rng: &mut R,
) -> bool {
    if !exclusion_active(iteration, start) {
        return true;
    }
    let p = sample_probability(*meta);
    if p >= 1.0 || rng.random::<f64>() < p {
        true
    } else {
        meta.skipped = meta.skipped.saturating_add(1);
        false
    }
}

/// Updates `meta` after a sampled draw.
pub fn record_draw(meta: &mut TokenMeta, changed: bool) {
    if changed {
        *meta = TokenMeta::default();
    } else {
        meta.same = meta.same.saturating_add(1);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "deg")]
pub enum SparseInit {
    None,
    Word(f64),
    Doc(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hyper: HyperParams,
    pub kernel: KernelKind,
    pub kernel_options: KernelOptions,
    pub strategy: Strategy,
    pub parts: u32,
    pub workers: u32,
    pub max_iterations: u64,
    pub target_perplexity: Option<f64>,
    pub sparse_init: SparseInit,
    /// First iteration at which token exclusion applies; `None` disables it.
    pub exclusion_start: Option<u64>,
    pub delta_aggregation: bool,
    pub seed: u64,
    /// Checkpoint cadence in iterations; 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Evaluate metrics every this many iterations (and always on the last);
    /// 0 disables evaluation.
    pub eval_every: u64,
    /// Hash the snapshot before and after sampling and fail if it changed.
    pub verify_snapshot: bool,
}

pub const DEFAULT_EXCLUSION_START: u64 = 30;
pub const DEFAULT_CHECKPOINT_EVERY: u64 = 10;

impl TrainConfig {
    pub fn new(hyper: HyperParams) -> Self {
        TrainConfig {
            hyper,
            kernel: KernelKind::Zen,
            kernel_options: KernelOptions::default(),
            strategy: Strategy::DbhPlus { threshold: 0 },
            parts: 1,
            workers: 1,
            max_iterations: 100,
            target_perplexity: None,
            sparse_init: SparseInit::None,
            exclusion_start: None,
            delta_aggregation: false,
            seed: 0,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            checkpoint_dir: None,
            eval_every: 1,
            verify_snapshot: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.hyper.validate()?;
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.parts == 0 {
            return bad("partition count must be at least 1");
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1");
        }
        if let SparseInit::Word(deg) | SparseInit::Doc(deg) = self.sparse_init {
            if !(deg > 0.0 && deg <= 1.0) {
                return bad("sparse init degree must be in (0, 1]");
            }
        }
        if self.exclusion_start.is_some() && self.delta_aggregation {
            return bad("token exclusion and delta aggregation cannot be combined");
        }
        let boost = self.kernel_options.beta_boost;
        if !(boost.is_finite() && boost >= 0.0) {
            return bad("beta boost must be a finite value ≥ 0");
        }
        if self.kernel_options.mh_steps == 0 {
            return bad("MH steps must be at least 1");
        }
        if let Some(t) = self.target_perplexity {
            if !(t.is_finite() && t > 0.0) {
                return bad("target perplexity must be positive");
            }
        }
        Ok(())
    }
}

/// What one iteration did.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iter: u64,
    /// Wall time of the five workflow steps.
    pub seconds_per_step: [f64; 5],
    pub tokens_sampled: u64,
    pub tokens_skipped: u64,
    pub topics_changed: u64,
    /// Count entries shipped to partitions as replicas.
    pub shipped_entries: u64,
    /// Entries sent back to word and document masters.
    pub transfer_word: u64,
    pub transfer_doc: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_libsvm_str;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exclusion_probability() {
        assert_eq!(sample_probability(TokenMeta { skipped: 0, same: 2 }), 0.25);
        assert_eq!(sample_probability(TokenMeta { skipped: 3, same: 2 }), 1.0);
        assert_eq!(sample_probability(TokenMeta { skipped: 0, same: 200 }), 2f64.powi(-20));
    }

    #[test]
    fn exclusion_disabled_leaves_meta() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = TokenMeta { skipped: 0, same: 9 };
        assert!(should_sample(&mut m, 10, None, &mut rng));
        assert!(should_sample(&mut m, 10, Some(30), &mut rng));
        assert_eq!(m, TokenMeta { skipped: 0, same: 9 });
    }

    #[test]
    fn skip_increments_and_change_resets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = TokenMeta { skipped: 0, same: 20 };
        let mut skips = 0;
        for _ in 0..5 {
            if !should_sample(&mut m, 40, Some(30), &mut rng) {
                skips += 1;
            }
        }
        assert_eq!(m.skipped, skips);
        record_draw(&mut m, false);
        assert_eq!(m.same, 21);
        record_draw(&mut m, true);
        assert_eq!(m, TokenMeta::default());
    }

    #[test]
    fn invariants_and_checksum() {
        let c = parse_libsvm_str("1 1:2 3:1\n0 3:4 2:1").unwrap();
        let mut g = TokenGraph::from_corpus(&c);
        for (i, t) in g.topics_mut().iter_mut().enumerate() {
            *t = (i % 3) as u32;
        }
        let s = ModelState::from_graph(&g, 3).unwrap();
        s.check_invariants(&g).unwrap();
        assert_eq!(s.total_tokens(), 8);
        let mut s2 = s.clone();
        assert_eq!(s.checksum(), s2.checksum());
        s2.rows_mut().0[0].add(0, 1).unwrap();
        assert_ne!(s.checksum(), s2.checksum());
        assert!(s2.check_invariants(&g).is_err());
    }

    #[test]
    fn config_validation() {
        let h = HyperParams::new(4, 0.01, 0.01, 1.0).unwrap();
        let mut c = TrainConfig::new(h);
        c.validate().unwrap();
        c.exclusion_start = Some(30);
        c.delta_aggregation = true;
        assert!(c.validate().is_err());
        c.delta_aggregation = false;
        c.sparse_init = SparseInit::Word(0.0);
        assert!(c.validate().is_err());
        c.sparse_init = SparseInit::Doc(1.0);
        c.validate().unwrap();
    }
}
