use std::collections::HashMap;

use rand::Rng;

use super::{IterationTerms, KernelOptions, ModelView};
use crate::samplers::{AliasTable, CumulativeTable, FPlusTree};
use crate::sparse::SparseCounts;

/// Mixture component a zen draw came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bucket {
    Global,
    Word,
    Doc,
    /// `N_kd·β·t1`, only in the word-side hybrid decomposition.
    DocPrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemedyBucket {
    Word,
    Doc,
    DocPrior,
}

/// Probability of redrawing when the drawn topic equals the token's previous
/// topic. `n_wk` and `n_kd` are the stale counts at that topic.
pub fn remedy_probability(bucket: RemedyBucket, n_wk: u32, n_kd: u32) -> f64 {
    match bucket {
        RemedyBucket::Word if n_wk > 0 => 1.0 / n_wk as f64,
        RemedyBucket::DocPrior if n_kd > 0 => 1.0 / n_kd as f64,
        RemedyBucket::Doc if n_wk > 0 && n_kd > 0 => {
            let (d, w) = (n_kd as f64, n_wk as f64);
            (1.0 / d + (d + w - 1.0) / (d * w)).min(1.0)
        }
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridChoice {
    /// Third term over the document's topics.
    ZenDoc,
    /// Third term over the word's topics.
    ZenWord,
}

pub fn hybrid_select(k_d: usize, k_w: usize) -> HybridChoice {
    if k_d <= k_w {
        HybridChoice::ZenDoc
    } else {
        HybridChoice::ZenWord
    }
}

/// Rebuilds `table` over `N_wk·t4`. Returns false when the word has no
/// tokens.
pub fn zen_build_word_table(
    word: &SparseCounts,
    terms: &IterationTerms,
    table: &mut AliasTable,
) -> bool {
    table
        .rebuild(
            word.iter()
                .map(|(k, c)| (k, c as f64 * terms.t4[k as usize])),
        )
        .is_ok()
}

/// Rebuilds `cdf` over `N_kd·(N_wk + β)·t1`. With `exclude = Some(z)` both
/// counts are reduced by one at `z`. `boost` gives a per-topic β mask and the
/// boosted β used where the mask is false. Returns the table mass (0 when
/// empty).
pub fn zen_build_doc_cdf(
    doc: &SparseCounts,
    word_dense: &[u32],
    terms: &IterationTerms,
    exclude: Option<u32>,
    boost: Option<(&[bool], f64)>,
    cdf: &mut CumulativeTable,
) -> f64 {
    let entries = doc.iter().map(|(k, n_kd)| {
        let ku = k as usize;
        let (mut d, mut w) = (n_kd as f64, word_dense[ku] as f64);
        if exclude == Some(k) {
            d -= 1.0;
            w -= 1.0;
        }
        let weight = match boost {
            Some((mask, boosted)) if !mask[ku] => d * (w + boosted) * terms.t1[ku],
            _ => d * (terms.t5[ku] + w * terms.t1[ku]),
        };
        (k, weight)
    });
    match cdf.rebuild(entries) {
        Ok(()) => cdf.mass(),
        Err(_) => 0.0,
    }
}

/// The three zen components for one token.
#[derive(Debug, Clone, Copy)]
pub struct ZenTables<'t> {
    pub global: &'t AliasTable,
    pub word: Option<&'t AliasTable>,
    pub doc: Option<&'t CumulativeTable>,
    /// The document table already has the token removed.
    pub doc_excluded: bool,
}

/// One draw from the mixture using a single uniform.
#[inline]
pub fn zen_draw<R: Rng + ?Sized>(t: &ZenTables<'_>, rng: &mut R) -> (u32, Bucket) {
    let dm = t.doc.map_or(0.0, |d| d.mass());
    let wm = t.word.map_or(0.0, |w| w.mass());
    let gm = t.global.mass();
    let u = rng.random::<f64>() * (dm + wm + gm);
    if u < dm {
        (t.doc.unwrap().sample(u), Bucket::Doc)
    } else if u < dm + wm {
        let word = t.word.unwrap();
        let x = (u - dm) / wm * word.len() as f64;
        (word.sample_reuse(x), Bucket::Word)
    } else {
        let x = ((u - dm - wm) / gm).min(1.0) * t.global.len() as f64;
        (t.global.sample_reuse(x), Bucket::Global)
    }
}

/// Draws a topic and applies at most one remedy redraw.
pub fn zen_sample_token<R: Rng + ?Sized>(
    t: &ZenTables<'_>,
    z_prev: u32,
    n_wk: u32,
    n_kd: u32,
    remedy: bool,
    rng: &mut R,
) -> u32 {
    let (z, bucket) = zen_draw(t, rng);
    if !remedy || z != z_prev {
        return z;
    }
    let p = match bucket {
        Bucket::Word => remedy_probability(RemedyBucket::Word, n_wk, n_kd),
        Bucket::Doc if !t.doc_excluded => remedy_probability(RemedyBucket::Doc, n_wk, n_kd),
        _ => 0.0,
    };
    if p > 0.0 && (p >= 1.0 || rng.random::<f64>() < p) {
        zen_draw(t, rng).0
    } else {
        z
    }
}

/// Stale document prior term `N_kd·β·t1` over the document's support.
struct PriorTree {
    topics: Vec<u32>,
    tree: FPlusTree,
}

/// Stale-snapshot kernel for `zen` and `zen-hybrid`.
pub struct ZenKernel<'a> {
    view: ModelView<'a>,
    opts: KernelOptions,
    hybrid: bool,
    word: u32,
    word_dense: Vec<u32>,
    word_table: AliasTable,
    word_ok: bool,
    doc_cdf: CumulativeTable,
    word_cdf: CumulativeTable,
    prior_trees: HashMap<u32, PriorTree>,
    boost_mask: Vec<bool>,
    boost_active: bool,
}

impl<'a> ZenKernel<'a> {
    pub fn new(view: ModelView<'a>, opts: KernelOptions, hybrid: bool) -> Self {
        let k = view.terms.k;
        ZenKernel {
            view,
            opts,
            hybrid,
            word: 0,
            word_dense: vec![0; k],
            word_table: AliasTable::default(),
            word_ok: false,
            doc_cdf: CumulativeTable::default(),
            word_cdf: CumulativeTable::default(),
            prior_trees: HashMap::new(),
            boost_mask: vec![false; k],
            boost_active: false,
        }
    }

    pub fn begin_word(&mut self, w: u32) {
        self.word = w;
        let row = &self.view.words[w as usize];
        row.scatter_into(&mut self.word_dense);
        self.word_ok = zen_build_word_table(row, self.view.terms, &mut self.word_table);
        self.boost_active = false;
        if self.opts.beta_boost > 0.0 {
            if let Some(support) = self.view.support {
                for &k in &support[w as usize] {
                    self.boost_mask[k as usize] = true;
                }
                self.boost_active = true;
            }
        }
    }

    pub fn end_word(&mut self) {
        self.view.words[self.word as usize].clear_from(&mut self.word_dense);
        if self.boost_active {
            if let Some(support) = self.view.support {
                for &k in &support[self.word as usize] {
                    self.boost_mask[k as usize] = false;
                }
            }
            self.boost_active = false;
        }
    }

    pub fn sample_edge<R: Rng + ?Sized>(
        &mut self,
        doc: u32,
        topics: &mut [u32],
        active: &[bool],
        rng: &mut R,
    ) {
        let view = self.view;
        let drow = &view.docs[doc as usize];
        let word_nnz = view.words[self.word as usize].nnz();
        let choice = if self.hybrid {
            hybrid_select(drow.nnz(), word_nnz)
        } else {
            HybridChoice::ZenDoc
        };
        match choice {
            HybridChoice::ZenDoc => self.sample_doc_side(drow, topics, active, rng),
            HybridChoice::ZenWord => self.sample_word_side(doc, drow, topics, active, rng),
        }
    }

    fn boost(&self) -> Option<(&[bool], f64)> {
        self.boost_active
            .then(|| (&self.boost_mask[..], self.view.terms.beta * (1.0 + self.opts.beta_boost)))
    }

    fn sample_doc_side<R: Rng + ?Sized>(
        &mut self,
        drow: &SparseCounts,
        topics: &mut [u32],
        active: &[bool],
        rng: &mut R,
    ) {
        let view = self.view;
        let global = view.tables.global.as_ref().expect("zen needs the gDense table");
        let single = topics.len() == 1;
        let mut doc_cdf = std::mem::take(&mut self.doc_cdf);
        let mut doc_mass = 0.0;
        if !single {
            doc_mass = zen_build_doc_cdf(drow, &self.word_dense, view.terms, None, self.boost(), &mut doc_cdf);
        }
        for (z, _) in topics.iter_mut().zip(active).filter(|(_, &a)| a) {
            let z_prev = *z;
            if single {
                doc_mass = zen_build_doc_cdf(
                    drow,
                    &self.word_dense,
                    view.terms,
                    Some(z_prev),
                    self.boost(),
                    &mut doc_cdf,
                );
            }
            let tables = ZenTables {
                global,
                word: self.word_ok.then_some(&self.word_table),
                doc: (doc_mass > 0.0).then_some(&doc_cdf),
                doc_excluded: single,
            };
            *z = zen_sample_token(
                &tables,
                z_prev,
                self.word_dense[z_prev as usize],
                drow.get(z_prev as usize),
                self.opts.remedy,
                rng,
            );
        }
        self.doc_cdf = doc_cdf;
    }

    fn sample_word_side<R: Rng + ?Sized>(
        &mut self,
        doc: u32,
        drow: &SparseCounts,
        topics: &mut [u32],
        active: &[bool],
        rng: &mut R,
    ) {
        let view = self.view;
        let terms = view.terms;
        let global = view.tables.global.as_ref().expect("zen needs the gDense table");
        let prior = self.prior_trees.entry(doc).or_insert_with(|| {
            let topics: Vec<u32> = drow.indices().to_vec();
            let weights: Vec<f64> = drow
                .iter()
                .map(|(k, c)| c as f64 * terms.t5[k as usize])
                .collect();
            PriorTree {
                tree: FPlusTree::new(&weights).expect("document weights are non-negative"),
                topics,
            }
        });
        let wrow = &view.words[self.word as usize];
        let single = topics.len() == 1;
        let build = |cdf: &mut CumulativeTable, exclude: Option<u32>| -> f64 {
            let entries = wrow.iter().map(|(k, n_wk)| {
                let ku = k as usize;
                let (mut w, mut d) = (n_wk as f64, drow.get(ku) as f64);
                if exclude == Some(k) {
                    w -= 1.0;
                    d -= 1.0;
                }
                (k, w * (d + terms.alpha_k[ku]) * terms.t1[ku])
            });
            match cdf.rebuild(entries) {
                Ok(()) => cdf.mass(),
                Err(_) => 0.0,
            }
        };
        let mut cdf = std::mem::take(&mut self.word_cdf);
        let mut third = 0.0;
        if !single {
            third = build(&mut cdf, None);
        }
        let fm = prior.tree.total();
        let gm = global.mass();
        for (z, _) in topics.iter_mut().zip(active).filter(|(_, &a)| a) {
            let z_prev = *z;
            if single {
                third = build(&mut cdf, Some(z_prev));
            }
            let draw = |rng: &mut R| -> (u32, Bucket) {
                let u = rng.random::<f64>() * (third + fm + gm);
                if u < third {
                    (cdf.sample(u), Bucket::Doc)
                } else if u < third + fm {
                    let leaf = prior.tree.sample(u - third);
                    (prior.topics[leaf], Bucket::DocPrior)
                } else {
                    let x = ((u - third - fm) / gm).min(1.0) * global.len() as f64;
                    (global.sample_reuse(x), Bucket::Global)
                }
            };
            let (mut t, bucket) = draw(rng);
            if self.opts.remedy && t == z_prev {
                let n_wk = self.word_dense[z_prev as usize];
                let n_kd = drow.get(z_prev as usize);
                let p = match bucket {
                    Bucket::Doc if !single => remedy_probability(RemedyBucket::Doc, n_wk, n_kd),
                    Bucket::DocPrior => remedy_probability(RemedyBucket::DocPrior, n_wk, n_kd),
                    _ => 0.0,
                };
                if p > 0.0 && (p >= 1.0 || rng.random::<f64>() < p) {
                    t = draw(rng).0;
                }
            }
            *z = t;
        }
        self.word_cdf = cdf;
    }
}
