//! Per-token sampling kernels and the per-iteration shared terms.
//!
//! A kernel is driven word by word: `begin_word`, then `sample_edge` for each
//! (word, document) edge of that word, then `end_word`. Kernels read the
//! frozen model snapshot in [`ModelView`]; the `standard`, `sparse` and
//! `light` kernels additionally keep a worker-private overlay so that their
//! own draws are visible to later tokens of the same worker.

mod fresh;
mod zen;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::samplers::AliasTable;
use crate::sparse::SparseCounts;

pub use fresh::{FreshCounts, LightKernel, SparseLdaKernel, StandardKernel};
pub use zen::{
    hybrid_select, remedy_probability, zen_build_doc_cdf, zen_build_word_table, zen_draw,
    zen_sample_token, Bucket, HybridChoice, RemedyBucket, ZenKernel, ZenTables,
};

#[derive(Debug, Error, PartialEq)]
pub enum HyperError {
    #[error("topic count must be at least 1")]
    NoTopics,
    #[error("{name} must be finite and > 0, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Concentration of the asymmetric document prior.
    pub alpha_as: f64,
}

impl HyperParams {
    pub fn new(k: usize, alpha: f64, beta: f64, alpha_as: f64) -> Result<Self, HyperError> {
        let h = HyperParams {
            k,
            alpha,
            beta,
            alpha_as,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), HyperError> {
        if self.k == 0 {
            return Err(HyperError::NoTopics);
        }
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("alpha_as", self.alpha_as),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(HyperError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Per-topic terms computed once per iteration from the frozen `N_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTerms {
    pub k: usize,
    pub w: usize,
    pub alpha: f64,
    pub beta: f64,
    pub w_beta: f64,
    pub n: u64,
    /// `1 / (N_k + Wβ)`
    pub t1: Vec<f64>,
    /// `Kα / (N + α')`
    pub t2: f64,
    /// `α'/K − Wβ`
    pub t3: f64,
    /// `α_k / (N_k + Wβ)`, evaluated as `α_k·t1`.
    pub t4: Vec<f64>,
    /// `β·t1`
    pub t5: Vec<f64>,
    /// `β·t4`
    pub g_dense: Vec<f64>,
    /// `Kα (N_k + α'/K) / (N + α')`
    pub alpha_k: Vec<f64>,
}

pub fn precompute_terms(global: &[u64], w: usize, hyper: &HyperParams) -> IterationTerms {
    let k = hyper.k;
    assert_eq!(global.len(), k, "global counts must have K entries");
    let n: u64 = global.iter().sum();
    let w_beta = w as f64 * hyper.beta;
    let t2 = k as f64 * hyper.alpha / (n as f64 + hyper.alpha_as);
    let t3 = hyper.alpha_as / k as f64 - w_beta;
    let prior_shift = hyper.alpha_as / k as f64;
    let mut t1 = Vec::with_capacity(k);
    let mut t4 = Vec::with_capacity(k);
    let mut t5 = Vec::with_capacity(k);
    let mut g_dense = Vec::with_capacity(k);
    let mut alpha_k = Vec::with_capacity(k);
    for &nk in global {
        let a = 1.0 / (nk as f64 + w_beta);
        let ak = t2 * (nk as f64 + prior_shift);
        let b = ak * a;
        t1.push(a);
        t4.push(b);
        t5.push(hyper.beta * a);
        g_dense.push(hyper.beta * b);
        alpha_k.push(ak);
    }
    IterationTerms {
        k,
        w,
        alpha: hyper.alpha,
        beta: hyper.beta,
        w_beta,
        n,
        t1,
        t2,
        t3,
        t4,
        t5,
        g_dense,
        alpha_k,
    }
}

/// Unnormalized conditional `(N_wk + β)/(N_k + Wβ) · (N_kd + α_k)`. Callers
/// pass counts with the current token already removed.
#[inline]
pub fn formula3(n_wk: f64, n_kd: f64, n_k: f64, alpha_k: f64, beta: f64, w_beta: f64) -> f64 {
    (n_wk + beta) / (n_k + w_beta) * (n_kd + alpha_k)
}

/// Counts seen by one token.
#[derive(Debug, Clone, Copy)]
pub struct TokenContext<'a> {
    pub word: &'a SparseCounts,
    pub doc: &'a SparseCounts,
    pub last_topic: u32,
    /// Occurrences of the word in the document.
    pub multiplicity: u32,
}

/// Formula value for topic `k` using the context's counts as given.
pub fn standard_cgs_probability(
    k: usize,
    ctx: &TokenContext<'_>,
    global: &[u64],
    terms: &IterationTerms,
) -> f64 {
    formula3(
        ctx.word.get(k) as f64,
        ctx.doc.get(k) as f64,
        global[k] as f64,
        terms.alpha_k[k],
        terms.beta,
        terms.w_beta,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Zen,
    ZenHybrid,
    Sparse,
    Light,
    Standard,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Zen,
        KernelKind::ZenHybrid,
        KernelKind::Sparse,
        KernelKind::Light,
        KernelKind::Standard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Zen => "zen",
            KernelKind::ZenHybrid => "zen-hybrid",
            KernelKind::Sparse => "sparse",
            KernelKind::Light => "light",
            KernelKind::Standard => "standard",
        }
    }

    /// Whether the kernel sees its own earlier draws within an iteration.
    pub fn is_fresh(self) -> bool {
        matches!(
            self,
            KernelKind::Sparse | KernelKind::Light | KernelKind::Standard
        )
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown kernel {s:?} (expected zen, zen-hybrid, sparse, light, standard)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Resampling correction for the zen kernels.
    pub remedy: bool,
    /// Metropolis–Hastings proposals per token for `light`.
    pub mh_steps: u32,
    /// Relative β increase in the document term for topics outside a word's
    /// initial support. Zero disables it.
    pub beta_boost: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            remedy: true,
            mh_steps: 8,
            beta_boost: 0.0,
        }
    }
}

/// Tables shared by every worker for one iteration.
#[derive(Debug, Clone, Default)]
pub struct SharedTables {
    /// `zen`: alias over gDense. `light`: alias over `β·t1`.
    pub global: Option<AliasTable>,
    /// `light`: token topics grouped by document (CSR offsets, flat topics).
    pub doc_lists: Option<(Vec<usize>, Vec<u32>)>,
}

impl SharedTables {
    pub fn build(
        kind: KernelKind,
        terms: &IterationTerms,
        doc_lists: impl FnOnce() -> (Vec<usize>, Vec<u32>),
    ) -> Self {
        match kind {
            KernelKind::Zen | KernelKind::ZenHybrid => SharedTables {
                global: Some(
                    AliasTable::from_weights(&terms.g_dense)
                        .expect("gDense is strictly positive"),
                ),
                doc_lists: None,
            },
            KernelKind::Light => SharedTables {
                global: Some(
                    AliasTable::from_weights(&terms.t5).expect("β·t1 is strictly positive"),
                ),
                doc_lists: Some(doc_lists()),
            },
            KernelKind::Sparse | KernelKind::Standard => SharedTables::default(),
        }
    }
}

/// Read-only model snapshot for one iteration.
#[derive(Debug, Clone, Copy)]
pub struct ModelView<'a> {
    pub terms: &'a IterationTerms,
    pub words: &'a [SparseCounts],
    pub docs: &'a [SparseCounts],
    pub global: &'a [u64],
    pub tables: &'a SharedTables,
    /// Initial per-word topic supports, when sparse word init was used.
    pub support: Option<&'a [Vec<u32>]>,
}

/// One worker's kernel instance.
pub enum WorkerKernel<'a> {
    Zen(ZenKernel<'a>),
    Standard(StandardKernel<'a>),
    Sparse(SparseLdaKernel<'a>),
    Light(LightKernel<'a>),
}

impl<'a> WorkerKernel<'a> {
    pub fn new(kind: KernelKind, view: ModelView<'a>, opts: KernelOptions) -> Self {
        match kind {
            KernelKind::Zen => WorkerKernel::Zen(ZenKernel::new(view, opts, false)),
            KernelKind::ZenHybrid => WorkerKernel::Zen(ZenKernel::new(view, opts, true)),
            KernelKind::Standard => WorkerKernel::Standard(StandardKernel::new(view)),
            KernelKind::Sparse => WorkerKernel::Sparse(SparseLdaKernel::new(view)),
            KernelKind::Light => WorkerKernel::Light(LightKernel::new(view, opts.mh_steps)),
        }
    }

    pub fn begin_word(&mut self, w: u32) {
        match self {
            WorkerKernel::Zen(k) => k.begin_word(w),
            WorkerKernel::Standard(k) => k.begin_word(w),
            WorkerKernel::Sparse(k) => k.begin_word(w),
            WorkerKernel::Light(k) => k.begin_word(w),
        }
    }

    /// Resamples the tokens of edge `(w, doc)` whose `active` flag is set,
    /// overwriting their topics in place.
    pub fn sample_edge<R: Rng + ?Sized>(
        &mut self,
        doc: u32,
        topics: &mut [u32],
        active: &[bool],
        rng: &mut R,
    ) {
        debug_assert_eq!(topics.len(), active.len());
        match self {
            WorkerKernel::Zen(k) => k.sample_edge(doc, topics, active, rng),
            WorkerKernel::Standard(k) => k.sample_edge(doc, topics, active, rng),
            WorkerKernel::Sparse(k) => k.sample_edge(doc, topics, active, rng),
            WorkerKernel::Light(k) => k.sample_edge(doc, topics, active, rng),
        }
    }

    pub fn end_word(&mut self) {
        match self {
            WorkerKernel::Zen(k) => k.end_word(),
            WorkerKernel::Standard(k) => k.end_word(),
            WorkerKernel::Sparse(k) => k.end_word(),
            WorkerKernel::Light(k) => k.end_word(),
        }
    }
}

/// Draws a new topic for token `which` of edge `(word, doc)` against an
/// untouched snapshot, as the first draw of an iteration would.
#[allow(clippy::too_many_arguments)]
pub fn sample_token_once<R: Rng + ?Sized>(
    kind: KernelKind,
    view: ModelView<'_>,
    opts: KernelOptions,
    word: u32,
    doc: u32,
    edge_topics: &[u32],
    which: usize,
    rng: &mut R,
) -> u32 {
    let mut kernel = WorkerKernel::new(kind, view, opts);
    let mut topics = edge_topics.to_vec();
    let mut active = vec![false; topics.len()];
    active[which] = true;
    kernel.begin_word(word);
    kernel.sample_edge(doc, &mut topics, &active, rng);
    kernel.end_word();
    topics[which]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyper() -> HyperParams {
        HyperParams::new(2, 0.1, 0.01, 1.0).unwrap()
    }

    #[test]
    fn terms_small_example() {
        let t = precompute_terms(&[10, 20], 3, &hyper());
        assert!((t.t1[0] - 1.0 / 10.03).abs() < 1e-15);
        assert!((t.t1[1] - 1.0 / 20.03).abs() < 1e-15);
        let n = 30.0;
        for (k, nk) in [10.0, 20.0].into_iter().enumerate() {
            let alpha_k = 2.0 * 0.1 * (nk + 1.0 / 2.0) / (n + 1.0);
            assert!((t.alpha_k[k] - alpha_k).abs() <= 1e-15 * alpha_k);
            let t4 = alpha_k / (nk + 0.03);
            assert!((t.t4[k] - t4).abs() <= 1e-13 * t4);
            assert!((t.g_dense[k] - 0.01 * t4).abs() <= 1e-13 * t4);
            assert!((t.t5[k] - 0.01 / (nk + 0.03)).abs() < 1e-16);
        }
    }

    #[test]
    fn uniform_counts_give_uniform_dense_term() {
        let t = precompute_terms(&[7, 7, 7, 7], 11, &HyperParams::new(4, 0.5, 0.1, 2.0).unwrap());
        assert!(t.g_dense.iter().all(|&g| g == t.g_dense[0]));
    }

    #[test]
    fn kernel_names_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(k.name().parse::<KernelKind>().unwrap(), k);
        }
        assert!("alias".parse::<KernelKind>().is_err());
    }

    #[test]
    fn hyper_validation() {
        assert_eq!(HyperParams::new(0, 1.0, 1.0, 1.0), Err(HyperError::NoTopics));
        assert!(HyperParams::new(2, 0.0, 1.0, 1.0).is_err());
        assert!(HyperParams::new(2, 1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn single_token_formula_value() {
        // One token, K = 2, token removed: all counts zero except N_k of the
        // other topic.
        let h = hyper();
        let t = precompute_terms(&[1, 0], 1, &h);
        let empty = SparseCounts::new(2);
        let ctx = TokenContext {
            word: &empty,
            doc: &empty,
            last_topic: 0,
            multiplicity: 1,
        };
        let global_excl = [0u64, 0];
        // alpha_k with N = 1: 0.2 (N_k + 0.5) / 2
        let a0 = 0.2 * 1.5 / 2.0;
        let p0 = standard_cgs_probability(0, &ctx, &global_excl, &t);
        assert!((p0 - 0.01 / 0.01 * a0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn terms_are_pure(counts in proptest::collection::vec(0u64..1000, 1..20), w in 1usize..5000) {
            let h = HyperParams::new(counts.len(), 0.3, 0.02, 1.5).unwrap();
            prop_assume!(counts.iter().sum::<u64>() > 0);
            prop_assert_eq!(precompute_terms(&counts, w, &h), precompute_terms(&counts, w, &h));
        }
    }
}
