use std::collections::HashMap;

use rand::Rng;

use super::{formula3, ModelView};
use crate::samplers::{linear_sample, AliasTable};
use crate::sparse::SparseCounts;

/// Worker-private counts layered over the snapshot: the current word row and
/// document row as dense arrays, edited document rows, and local `N_k`.
pub struct FreshCounts<'a> {
    view: ModelView<'a>,
    pub global: Vec<i64>,
    docs: HashMap<u32, SparseCounts>,
    word: u32,
    pub word_dense: Vec<u32>,
    pub word_support: Vec<u32>,
    in_word: Vec<bool>,
    doc: u32,
    pub doc_dense: Vec<u32>,
    pub doc_support: Vec<u32>,
    in_doc: Vec<bool>,
    doc_dirty: bool,
}

impl<'a> FreshCounts<'a> {
    pub fn new(view: ModelView<'a>) -> Self {
        let k = view.terms.k;
        FreshCounts {
            view,
            global: view.global.iter().map(|&c| c as i64).collect(),
            docs: HashMap::new(),
            word: 0,
            word_dense: vec![0; k],
            word_support: Vec::new(),
            in_word: vec![false; k],
            doc: 0,
            doc_dense: vec![0; k],
            doc_support: Vec::new(),
            in_doc: vec![false; k],
            doc_dirty: false,
        }
    }

    pub fn begin_word(&mut self, w: u32) {
        self.word = w;
        let row = &self.view.words[w as usize];
        row.scatter_into(&mut self.word_dense);
        self.word_support.clear();
        self.word_support.extend_from_slice(row.indices());
        for &k in row.indices() {
            self.in_word[k as usize] = true;
        }
    }

    pub fn end_word(&mut self) {
        for &k in &self.word_support {
            self.word_dense[k as usize] = 0;
            self.in_word[k as usize] = false;
        }
        self.word_support.clear();
    }

    pub fn begin_edge(&mut self, d: u32) {
        self.doc = d;
        let row = self
            .docs
            .get(&d)
            .unwrap_or(&self.view.docs[d as usize]);
        row.scatter_into(&mut self.doc_dense);
        self.doc_support.clear();
        self.doc_support.extend_from_slice(row.indices());
        for &k in row.indices() {
            self.in_doc[k as usize] = true;
        }
        self.doc_dirty = false;
    }

    pub fn end_edge(&mut self) {
        if self.doc_dirty {
            self.doc_support.sort_unstable();
            let k = self.view.terms.k;
            let dense = &self.doc_dense;
            let row = SparseCounts::from_sorted_pairs(
                k,
                self.doc_support.iter().map(|&t| (t, dense[t as usize])),
            )
            .expect("support topics are in range");
            self.docs.insert(self.doc, row);
        }
        for &k in &self.doc_support {
            self.doc_dense[k as usize] = 0;
            self.in_doc[k as usize] = false;
        }
        self.doc_support.clear();
    }

    #[inline]
    pub fn remove(&mut self, z: u32) {
        let z = z as usize;
        self.word_dense[z] -= 1;
        self.doc_dense[z] -= 1;
        self.global[z] -= 1;
        self.doc_dirty = true;
    }

    #[inline]
    pub fn add(&mut self, z: u32) {
        let zu = z as usize;
        self.word_dense[zu] += 1;
        self.doc_dense[zu] += 1;
        self.global[zu] += 1;
        if !self.in_word[zu] {
            self.in_word[zu] = true;
            self.word_support.push(z);
        }
        if !self.in_doc[zu] {
            self.in_doc[zu] = true;
            self.doc_support.push(z);
        }
        self.doc_dirty = true;
    }

    /// Formula value for topic `k` on the current counts.
    #[inline]
    pub fn probability(&self, k: usize) -> f64 {
        let t = self.view.terms;
        formula3(
            self.word_dense[k] as f64,
            self.doc_dense[k] as f64,
            self.global[k] as f64,
            t.alpha_k[k],
            t.beta,
            t.w_beta,
        )
    }
}

/// Full O(K) evaluation with linear search.
pub struct StandardKernel<'a> {
    fresh: FreshCounts<'a>,
    weights: Vec<f64>,
}

impl<'a> StandardKernel<'a> {
    pub fn new(view: ModelView<'a>) -> Self {
        StandardKernel {
            weights: vec![0.0; view.terms.k],
            fresh: FreshCounts::new(view),
        }
    }

    pub fn begin_word(&mut self, w: u32) {
        self.fresh.begin_word(w);
    }

    pub fn end_word(&mut self) {
        self.fresh.end_word();
    }

    pub fn sample_edge<R: Rng + ?Sized>(
        &mut self,
        doc: u32,
        topics: &mut [u32],
        active: &[bool],
        rng: &mut R,
    ) {
        self.fresh.begin_edge(doc);
        for (z, _) in topics.iter_mut().zip(active).filter(|(_, &a)| a) {
            self.fresh.remove(*z);
            let mut total = 0.0;
            for k in 0..self.weights.len() {
                let p = self.fresh.probability(k);
                self.weights[k] = p;
                total += p;
            }
            let u = rng.random::<f64>() * total;
            let t = linear_sample(&self.weights, u) as u32;
            self.fresh.add(t);
            *z = t;
        }
        self.fresh.end_edge();
    }
}

/// Three buckets `α_kβ·t1 + N_kd·β·t1 + N_wk(N_kd + α_k)·t1` on fresh
/// counts, each searched linearly.
pub struct SparseLdaKernel<'a> {
    fresh: FreshCounts<'a>,
    smooth: Vec<f64>,
    smooth_sum: f64,
    q: Vec<f64>,
    r: Vec<f64>,
}

impl<'a> SparseLdaKernel<'a> {
    pub fn new(view: ModelView<'a>) -> Self {
        let fresh = FreshCounts::new(view);
        let k = view.terms.k;
        let mut kernel = SparseLdaKernel {
            fresh,
            smooth: vec![0.0; k],
            smooth_sum: 0.0,
            q: Vec::new(),
            r: Vec::new(),
        };
        kernel.refresh_smooth();
        kernel
    }

    fn smooth_term(&self, k: usize) -> f64 {
        let t = self.fresh.view.terms;
        t.alpha_k[k] * t.beta / (self.fresh.global[k] as f64 + t.w_beta)
    }

    fn refresh_smooth(&mut self) {
        let mut sum = 0.0;
        for k in 0..self.smooth.len() {
            let s = self.smooth_term(k);
            self.smooth[k] = s;
            sum += s;
        }
        self.smooth_sum = sum;
    }

    fn update_smooth(&mut self, k: usize) {
        let s = self.smooth_term(k);
        self.smooth_sum += s - self.smooth[k];
        self.smooth[k] = s;
    }

    pub fn begin_word(&mut self, w: u32) {
        self.fresh.begin_word(w);
        self.refresh_smooth();
    }

    pub fn end_word(&mut self) {
        self.fresh.end_word();
    }

    pub fn sample_edge<R: Rng + ?Sized>(
        &mut self,
        doc: u32,
        topics: &mut [u32],
        active: &[bool],
        rng: &mut R,
    ) {
        self.fresh.begin_edge(doc);
        let terms = self.fresh.view.terms;
        for (z, _) in topics.iter_mut().zip(active).filter(|(_, &a)| a) {
            self.fresh.remove(*z);
            self.update_smooth(*z as usize);
            let f = &self.fresh;
            self.q.clear();
            let mut q_sum = 0.0;
            for &k in &f.word_support {
                let ku = k as usize;
                let v = f.word_dense[ku] as f64 * (f.doc_dense[ku] as f64 + terms.alpha_k[ku])
                    / (f.global[ku] as f64 + terms.w_beta);
                self.q.push(v);
                q_sum += v;
            }
            self.r.clear();
            let mut r_sum = 0.0;
            for &k in &f.doc_support {
                let ku = k as usize;
                let v = f.doc_dense[ku] as f64 * terms.beta / (f.global[ku] as f64 + terms.w_beta);
                self.r.push(v);
                r_sum += v;
            }
            let u = rng.random::<f64>() * (q_sum + r_sum + self.smooth_sum);
            let t = if u < q_sum {
                f.word_support[linear_sample(&self.q, u)]
            } else if u < q_sum + r_sum {
                f.doc_support[linear_sample(&self.r, u - q_sum)]
            } else {
                let rest = (u - q_sum - r_sum).min(self.smooth_sum);
                linear_sample(&self.smooth, rest) as u32
            };
            self.fresh.add(t);
            self.update_smooth(t as usize);
            *z = t;
        }
        self.fresh.end_edge();
    }
}

/// Metropolis–Hastings with alternating word and document proposals. The
/// word proposal is a stale alias table over `(N_wk + β)·t1`; the document
/// proposal picks a stale token topic of the document, or a uniform topic
/// with probability `Kα / (N_d + Kα)`.
pub struct LightKernel<'a> {
    fresh: FreshCounts<'a>,
    mh_steps: u32,
    word_snap: Vec<u32>,
    doc_snap: Vec<u32>,
    word_table: AliasTable,
    word_mass: f64,
}

impl<'a> LightKernel<'a> {
    pub fn new(view: ModelView<'a>, mh_steps: u32) -> Self {
        let k = view.terms.k;
        LightKernel {
            fresh: FreshCounts::new(view),
            mh_steps: mh_steps.max(1),
            word_snap: vec![0; k],
            doc_snap: vec![0; k],
            word_table: AliasTable::default(),
            word_mass: 0.0,
        }
    }

    pub fn begin_word(&mut self, w: u32) {
        self.fresh.begin_word(w);
        let view = self.fresh.view;
        let row = &view.words[w as usize];
        row.scatter_into(&mut self.word_snap);
        let t1 = &view.terms.t1;
        self.word_mass = match self
            .word_table
            .rebuild(row.iter().map(|(k, c)| (k, c as f64 * t1[k as usize])))
        {
            Ok(()) => self.word_table.mass(),
            Err(_) => 0.0,
        };
    }

    pub fn end_word(&mut self) {
        let view = self.fresh.view;
        view.words[self.fresh.word as usize].clear_from(&mut self.word_snap);
        self.fresh.end_word();
    }

    pub fn sample_edge<R: Rng + ?Sized>(
        &mut self,
        doc: u32,
        topics: &mut [u32],
        active: &[bool],
        rng: &mut R,
    ) {
        let view = self.fresh.view;
        let terms = view.terms;
        let (offsets, flat) = view
            .tables
            .doc_lists
            .as_ref()
            .expect("light needs document topic lists");
        let list = &flat[offsets[doc as usize]..offsets[doc as usize + 1]];
        let n_d = list.len() as f64;
        let k_alpha = terms.k as f64 * terms.alpha;
        let beta_table = view.tables.global.as_ref().expect("light needs the β·t1 table");
        let beta_mass = beta_table.mass();
        let snap_row = &view.docs[doc as usize];
        snap_row.scatter_into(&mut self.doc_snap);
        self.fresh.begin_edge(doc);

        for (z, _) in topics.iter_mut().zip(active).filter(|(_, &a)| a) {
            self.fresh.remove(*z);
            let mut s = *z;
            let mut p_s = self.fresh.probability(s as usize);
            for step in 0..self.mh_steps {
                let (t, q_s, q_t) = if step % 2 == 0 {
                    let u = rng.random::<f64>() * (self.word_mass + beta_mass);
                    let t = if u < self.word_mass {
                        let x = u / self.word_mass * self.word_table.len() as f64;
                        self.word_table.sample_reuse(x)
                    } else {
                        let x = ((u - self.word_mass) / beta_mass).min(1.0)
                            * beta_table.len() as f64;
                        beta_table.sample_reuse(x)
                    };
                    let q = |k: u32| {
                        (self.word_snap[k as usize] as f64 + terms.beta) * terms.t1[k as usize]
                    };
                    (t, q(s), q(t))
                } else {
                    let u = rng.random::<f64>() * (n_d + k_alpha);
                    let t = if u < n_d {
                        list[(u as usize).min(list.len() - 1)]
                    } else {
                        (((u - n_d) / terms.alpha) as usize).min(terms.k - 1) as u32
                    };
                    let q = |k: u32| self.doc_snap[k as usize] as f64 + terms.alpha;
                    (t, q(s), q(t))
                };
                if t == s {
                    continue;
                }
                let p_t = self.fresh.probability(t as usize);
                let ratio = (p_t * q_s) / (p_s * q_t);
                if ratio >= 1.0 || rng.random::<f64>() < ratio {
                    s = t;
                    p_s = p_t;
                }
            }
            self.fresh.add(s);
            *z = s;
        }
        self.fresh.end_edge();
        snap_row.clear_from(&mut self.doc_snap);
    }
}
