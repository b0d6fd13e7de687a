use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;

use super::{
    exclusion_active, record_draw, should_sample, EngineError, IterationStats, ModelState,
    TokenMeta, TrainConfig,
};
use crate::corpus::{Edge, TokenGraph};
use crate::kernels::{precompute_terms, ModelView, SharedTables, WorkerKernel};
use crate::partition::{assign, PartitionAssignment, Strategy};
use crate::rng::worker_rng;
use crate::sparse::SparseCounts;

/// Edges of one partition in word-major order, grouped by word.
#[derive(Debug, Clone)]
struct Layout {
    edges: Vec<u32>,
    /// Local token offsets, one past the end included.
    token_start: Vec<usize>,
    /// `(word, first local edge, end local edge)`
    groups: Vec<(u32, usize, usize)>,
    /// Distinct documents with an edge here.
    docs: Vec<u32>,
}

impl Layout {
    fn tokens(&self) -> usize {
        *self.token_start.last().unwrap()
    }
}

/// Edge placement plus the per-partition processing order.
#[derive(Debug, Clone)]
pub struct PartitionPlan {
    assignment: PartitionAssignment,
    layouts: Vec<Layout>,
}

impl PartitionPlan {
    pub fn new(graph: &TokenGraph, strategy: Strategy, parts: u32, seed: u64) -> Self {
        Self::from_assignment(graph, assign(graph, strategy, parts, seed))
    }

    pub fn from_assignment(graph: &TokenGraph, assignment: PartitionAssignment) -> Self {
        let layouts = assignment
            .partition_edges()
            .into_iter()
            .map(|edge_ids| {
                let mut token_start = Vec::with_capacity(edge_ids.len() + 1);
                let mut groups: Vec<(u32, usize, usize)> = Vec::new();
                let mut docs = Vec::new();
                let mut acc = 0usize;
                for (i, &e) in edge_ids.iter().enumerate() {
                    let edge = &graph.edges()[e];
                    token_start.push(acc);
                    acc += edge.len as usize;
                    docs.push(edge.doc);
                    match groups.last_mut() {
                        Some(g) if g.0 == edge.word => g.2 = i + 1,
                        _ => groups.push((edge.word, i, i + 1)),
                    }
                }
                token_start.push(acc);
                docs.sort_unstable();
                docs.dedup();
                Layout {
                    edges: edge_ids.into_iter().map(|e| e as u32).collect(),
                    token_start,
                    groups,
                    docs,
                }
            })
            .collect();
        PartitionPlan {
            assignment,
            layouts,
        }
    }

    pub fn assignment(&self) -> &PartitionAssignment {
        &self.assignment
    }

    pub fn parts(&self) -> usize {
        self.layouts.len()
    }

    /// Count entries each partition receives as replicas of the current
    /// model.
    pub fn shipped_entries(&self, state: &ModelState) -> u64 {
        self.layouts
            .iter()
            .map(|l| {
                let w: usize = l
                    .groups
                    .iter()
                    .map(|g| state.word_counts(g.0).nnz())
                    .sum();
                let d: usize = l.docs.iter().map(|&d| state.doc_counts(d).nnz()).sum();
                (w + d) as u64
            })
            .sum()
    }

    fn gather<T: Copy>(&self, graph: &TokenGraph, src: &[T], p: usize) -> Vec<T> {
        let layout = &self.layouts[p];
        let mut out = Vec::with_capacity(layout.tokens());
        for &e in &layout.edges {
            out.extend_from_slice(&src[graph.edges()[e as usize].tokens()]);
        }
        out
    }

    fn scatter<T: Copy>(&self, graph_edges: &[Edge], dst: &mut [T], local: &[T], p: usize) {
        let layout = &self.layouts[p];
        for (i, &e) in layout.edges.iter().enumerate() {
            let r = graph_edges[e as usize].tokens();
            dst[r].copy_from_slice(&local[layout.token_start[i]..layout.token_start[i + 1]]);
        }
    }
}

/// How partition results reach the masters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeMode {
    /// Each partition sends a full recount of the vertices it touches.
    Full,
    /// Each partition sends aggregated `(vertex, topic, ±n)` changes.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DeltaEntry {
    pub vertex: u32,
    pub topic: u32,
    pub delta: i32,
}

/// What one partition sends back for merging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionUpdate {
    Delta {
        words: Vec<DeltaEntry>,
        docs: Vec<DeltaEntry>,
    },
    /// `(vertex, topic, count)` sorted by vertex then topic.
    Full {
        words: Vec<(u32, u32, u32)>,
        docs: Vec<(u32, u32, u32)>,
    },
}

impl PartitionUpdate {
    /// Entries sent to word and to document masters.
    pub fn volume(&self) -> (u64, u64) {
        match self {
            PartitionUpdate::Delta { words, docs } => (words.len() as u64, docs.len() as u64),
            PartitionUpdate::Full { words, docs } => (words.len() as u64, docs.len() as u64),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Change {
    word: u32,
    doc: u32,
    old: u32,
    new: u32,
}

#[derive(Debug, Default)]
struct WorkerOut {
    changes: Vec<Change>,
    sampled: u64,
    skipped: u64,
}

impl WorkerOut {
    fn absorb(&mut self, other: WorkerOut) {
        self.changes.extend(other.changes);
        self.sampled += other.sampled;
        self.skipped += other.skipped;
    }
}

fn aggregate(mut raw: Vec<(u32, u32, i32)>) -> Vec<DeltaEntry> {
    raw.sort_unstable_by_key(|&(v, k, _)| (v, k));
    let mut out: Vec<DeltaEntry> = Vec::new();
    for (v, k, d) in raw {
        match out.last_mut() {
            Some(last) if last.vertex == v && last.topic == k => last.delta += d,
            _ => out.push(DeltaEntry {
                vertex: v,
                topic: k,
                delta: d,
            }),
        }
    }
    out.retain(|e| e.delta != 0);
    out
}

fn delta_update(changes: &[Change]) -> PartitionUpdate {
    let mut words = Vec::with_capacity(changes.len() * 2);
    let mut docs = Vec::with_capacity(changes.len() * 2);
    for c in changes {
        words.push((c.word, c.old, -1));
        words.push((c.word, c.new, 1));
        docs.push((c.doc, c.old, -1));
        docs.push((c.doc, c.new, 1));
    }
    PartitionUpdate::Delta {
        words: aggregate(words),
        docs: aggregate(docs),
    }
}

fn recount(mut pairs: Vec<(u32, u32)>) -> Vec<(u32, u32, u32)> {
    pairs.sort_unstable();
    let mut out: Vec<(u32, u32, u32)> = Vec::new();
    for (v, k) in pairs {
        match out.last_mut() {
            Some(last) if last.0 == v && last.1 == k => last.2 += 1,
            _ => out.push((v, k, 1)),
        }
    }
    out
}

fn full_update(layout: &Layout, graph_edges: &[Edge], topics: &[u32]) -> PartitionUpdate {
    let mut words = Vec::with_capacity(topics.len());
    let mut docs = Vec::with_capacity(topics.len());
    for (i, &e) in layout.edges.iter().enumerate() {
        let edge = &graph_edges[e as usize];
        for &t in &topics[layout.token_start[i]..layout.token_start[i + 1]] {
            words.push((edge.word, t));
            docs.push((edge.doc, t));
        }
    }
    PartitionUpdate::Full {
        words: recount(words),
        docs: recount(docs),
    }
}

fn rebuild_rows(
    k: usize,
    count: usize,
    mut triples: Vec<(u32, u32, u32)>,
) -> Result<Vec<SparseCounts>, EngineError> {
    triples.sort_unstable();
    let mut rows = vec![SparseCounts::new(k); count];
    let mut i = 0;
    while i < triples.len() {
        let v = triples[i].0;
        let mut j = i;
        while j < triples.len() && triples[j].0 == v {
            j += 1;
        }
        if v as usize >= count {
            return Err(EngineError::Invariant(format!("merge entry for unknown vertex {v}")));
        }
        rows[v as usize] =
            SparseCounts::from_sorted_pairs(k, triples[i..j].iter().map(|&(_, t, c)| (t, c)))?;
        i = j;
    }
    Ok(rows)
}

/// Applies partition results to the master counts. All updates must use
/// the same mode. In full mode every row is replaced by the sum of the
/// partition recounts; in delta mode changes are added in place.
pub fn merge_deltas(
    state: &mut ModelState,
    updates: Vec<PartitionUpdate>,
) -> Result<(), EngineError> {
    let full = matches!(updates.first(), Some(PartitionUpdate::Full { .. }));
    if full {
        let mut words = Vec::new();
        let mut docs = Vec::new();
        for u in updates {
            match u {
                PartitionUpdate::Full { words: w, docs: d } => {
                    words.extend(w);
                    docs.extend(d);
                }
                PartitionUpdate::Delta { .. } => {
                    return Err(EngineError::Invariant("mixed merge modes".into()))
                }
            }
        }
        let k = state.k();
        let new_words = rebuild_rows(k, state.vocab_size(), words)?;
        let new_docs = rebuild_rows(k, state.doc_count(), docs)?;
        state.replace_rows(new_words, new_docs);
        return Ok(());
    }
    let (word_rows, doc_rows) = state.rows_mut();
    for u in updates {
        let PartitionUpdate::Delta { words, docs } = u else {
            return Err(EngineError::Invariant("mixed merge modes".into()));
        };
        for (rows, entries, side) in [(&mut *word_rows, words, "word"), (&mut *doc_rows, docs, "doc")] {
            for e in entries {
                let row = rows.get_mut(e.vertex as usize).ok_or_else(|| {
                    EngineError::Invariant(format!("delta for unknown {side} {}", e.vertex))
                })?;
                row.add(e.topic as usize, e.delta as i64).map_err(|err| {
                    EngineError::Invariant(format!("{side} {}: {err}", e.vertex))
                })?;
            }
        }
    }
    Ok(())
}

struct GroupScratch {
    active: Vec<bool>,
    old: Vec<u32>,
}

#[allow(clippy::too_many_arguments)]
fn process_group<R: Rng + ?Sized>(
    kernel: &mut WorkerKernel<'_>,
    layout: &Layout,
    group: (u32, usize, usize),
    graph_edges: &[Edge],
    topics: &mut [u32],
    meta: &mut [TokenMeta],
    iteration: u64,
    exclusion_start: Option<u64>,
    rng: &mut R,
    scratch: &mut GroupScratch,
    out: &mut WorkerOut,
) {
    let (word, first, end) = group;
    let base = layout.token_start[first];
    let n = topics.len();
    let excluding = exclusion_active(iteration, exclusion_start);
    scratch.active.clear();
    scratch.active.resize(n, true);
    if excluding {
        for (a, m) in scratch.active.iter_mut().zip(meta.iter_mut()) {
            *a = should_sample(m, iteration, exclusion_start, rng);
        }
    }
    let sampled = scratch.active.iter().filter(|&&a| a).count() as u64;
    out.sampled += sampled;
    out.skipped += n as u64 - sampled;
    if sampled == 0 {
        return;
    }
    kernel.begin_word(word);
    for e in first..end {
        let r = layout.token_start[e] - base..layout.token_start[e + 1] - base;
        let active = &scratch.active[r.clone()];
        if !active.iter().any(|&a| a) {
            continue;
        }
        let doc = graph_edges[layout.edges[e] as usize].doc;
        scratch.old.clear();
        scratch.old.extend_from_slice(&topics[r.clone()]);
        kernel.sample_edge(doc, &mut topics[r.clone()], active, rng);
        for (i, pos) in r.enumerate() {
            if !active[i] {
                continue;
            }
            let (old, new) = (scratch.old[i], topics[pos]);
            let changed = old != new;
            if changed {
                out.changes.push(Change { word, doc, old, new });
            }
            if excluding {
                record_draw(&mut meta[pos], changed);
            }
        }
    }
    kernel.end_word();
}

#[allow(clippy::too_many_arguments)]
fn run_partition(
    p: usize,
    layout: &Layout,
    graph_edges: &[Edge],
    topics: &mut [u32],
    meta: &mut [TokenMeta],
    view: ModelView<'_>,
    config: &TrainConfig,
    iteration: u64,
) -> WorkerOut {
    let has_meta = !meta.is_empty();
    let new_scratch = || GroupScratch {
        active: Vec::new(),
        old: Vec::new(),
    };
    if config.workers <= 1 {
        let mut out = WorkerOut::default();
        let mut kernel = WorkerKernel::new(config.kernel, view, config.kernel_options);
        let mut rng = worker_rng(config.seed, iteration, p as u32, 0);
        let mut scratch = new_scratch();
        for &g in &layout.groups {
            let r = layout.token_start[g.1]..layout.token_start[g.2];
            let m: &mut [TokenMeta] = if has_meta { &mut meta[r.clone()] } else { &mut [] };
            process_group(
                &mut kernel,
                layout,
                g,
                graph_edges,
                &mut topics[r],
                m,
                iteration,
                config.exclusion_start,
                &mut rng,
                &mut scratch,
                &mut out,
            );
        }
        return out;
    }

    // Word-granularity work stealing: each group's token slices sit behind
    // their own lock and are claimed once through a shared cursor.
    let mut chunks: Vec<Mutex<(&mut [u32], &mut [TokenMeta])>> =
        Vec::with_capacity(layout.groups.len());
    let (mut t_rest, mut m_rest) = (topics, meta);
    for g in &layout.groups {
        let len = layout.token_start[g.2] - layout.token_start[g.1];
        let (t, tr) = std::mem::take(&mut t_rest).split_at_mut(len);
        t_rest = tr;
        let m = if has_meta {
            let (m, mr) = std::mem::take(&mut m_rest).split_at_mut(len);
            m_rest = mr;
            m
        } else {
            &mut []
        };
        chunks.push(Mutex::new((t, m)));
    }
    let cursor = AtomicUsize::new(0);
    let outs: Vec<WorkerOut> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..config.workers)
            .map(|worker| {
                let chunks = &chunks;
                let cursor = &cursor;
                s.spawn(move || {
                    let mut out = WorkerOut::default();
                    let mut kernel = WorkerKernel::new(config.kernel, view, config.kernel_options);
                    let mut rng = worker_rng(config.seed, iteration, p as u32, worker);
                    let mut scratch = new_scratch();
                    loop {
                        let i = cursor.fetch_add(1, Ordering::Relaxed);
                        if i >= chunks.len() {
                            break;
                        }
                        let mut guard = chunks[i].lock().expect("group lock poisoned");
                        let (t, m) = &mut *guard;
                        process_group(
                            &mut kernel,
                            layout,
                            layout.groups[i],
                            graph_edges,
                            t,
                            m,
                            iteration,
                            config.exclusion_start,
                            &mut rng,
                            &mut scratch,
                            &mut out,
                        );
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut out = WorkerOut::default();
    for o in outs {
        out.absorb(o);
    }
    out
}

/// One training iteration:
/// 1. freeze `N_k` and compute the shared terms and tables;
/// 2. hand each partition its replica rows and token slices;
/// 3. sample every partition against the frozen snapshot;
/// 4. merge partition results into the master counts;
/// 5. recompute `N_k` from the word rows and check invariants.
///
/// `meta` is either empty (exclusion off) or has one entry per token.
pub fn run_iteration(
    state: &mut ModelState,
    graph: &mut TokenGraph,
    meta: &mut [TokenMeta],
    plan: &PartitionPlan,
    config: &TrainConfig,
    support: Option<&[Vec<u32>]>,
) -> Result<IterationStats, EngineError> {
    let iteration = state.iteration() + 1;
    let mut stats = IterationStats {
        iter: iteration,
        ..IterationStats::default()
    };
    let has_meta = !meta.is_empty();
    if has_meta && meta.len() != graph.topics().len() {
        return Err(EngineError::Invariant("token metadata length mismatch".into()));
    }

    // 1
    let clock = Instant::now();
    let terms = precompute_terms(state.global(), graph.vocab_size(), &config.hyper);
    let tables = SharedTables::build(config.kernel, &terms, || graph.doc_topic_lists());
    stats.seconds_per_step[0] = clock.elapsed().as_secs_f64();

    // 2
    let clock = Instant::now();
    stats.shipped_entries = plan.shipped_entries(state);
    let parts = plan.parts();
    let mut local_topics: Vec<Vec<u32>> =
        (0..parts).map(|p| plan.gather(graph, graph.topics(), p)).collect();
    let mut local_meta: Vec<Vec<TokenMeta>> = (0..parts)
        .map(|p| {
            if has_meta {
                plan.gather(graph, meta, p)
            } else {
                Vec::new()
            }
        })
        .collect();
    stats.seconds_per_step[1] = clock.elapsed().as_secs_f64();

    // 3
    let clock = Instant::now();
    let before = config.verify_snapshot.then(|| state.checksum());
    let outputs: Vec<WorkerOut> = {
        let view = ModelView {
            terms: &terms,
            words: state.word_rows(),
            docs: state.doc_rows(),
            global: state.global(),
            tables: &tables,
            support,
        };
        let graph_edges = graph.edges();
        let jobs = local_topics.iter_mut().zip(local_meta.iter_mut()).enumerate();
        if parts == 1 {
            jobs.map(|(p, (t, m))| {
                run_partition(p, &plan.layouts[p], graph_edges, t, m, view, config, iteration)
            })
            .collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = jobs
                    .map(|(p, (t, m))| {
                        let layout = &plan.layouts[p];
                        s.spawn(move || {
                            run_partition(p, layout, graph_edges, t, m, view, config, iteration)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("partition worker panicked"))
                    .collect()
            })
        }
    };
    if let Some(before) = before {
        let after = state.checksum();
        if before != after {
            return Err(EngineError::Invariant(format!(
                "snapshot changed during sampling ({before:#x} -> {after:#x})"
            )));
        }
    }
    stats.seconds_per_step[2] = clock.elapsed().as_secs_f64();

    // 4
    let clock = Instant::now();
    let graph_edges = graph.edges().to_vec();
    for p in 0..parts {
        plan.scatter(&graph_edges, graph.topics_mut(), &local_topics[p], p);
        if has_meta {
            plan.scatter(&graph_edges, meta, &local_meta[p], p);
        }
    }
    let mode = if config.delta_aggregation {
        MergeMode::Delta
    } else {
        MergeMode::Full
    };
    let mut updates = Vec::with_capacity(parts);
    for (p, out) in outputs.iter().enumerate() {
        stats.tokens_sampled += out.sampled;
        stats.tokens_skipped += out.skipped;
        stats.topics_changed += out.changes.len() as u64;
        let update = match mode {
            MergeMode::Delta => delta_update(&out.changes),
            MergeMode::Full => full_update(&plan.layouts[p], &graph_edges, &local_topics[p]),
        };
        let (w, d) = update.volume();
        stats.transfer_word += w;
        stats.transfer_doc += d;
        updates.push(update);
    }
    merge_deltas(state, updates)?;
    stats.seconds_per_step[3] = clock.elapsed().as_secs_f64();

    // 5
    let clock = Instant::now();
    state.recompute_global();
    state.check_invariants(graph)?;
    state.set_iteration(iteration);
    stats.seconds_per_step[4] = clock.elapsed().as_secs_f64();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_libsvm_str;
    use crate::engine::init_random;
    use crate::kernels::{HyperParams, KernelKind};

    fn setup(kernel: KernelKind, parts: u32) -> (ModelState, TokenGraph, PartitionPlan, TrainConfig) {
        let c = parse_libsvm_str("1 1:3 2:1 4:2\n1 2:2 3:1\n1 1:1 4:4 5:1\n0 3:3 5:2").unwrap();
        let mut g = TokenGraph::from_corpus(&c);
        let s = init_random(&mut g, 3, 4).unwrap();
        let mut cfg = TrainConfig::new(HyperParams::new(3, 0.1, 0.01, 1.0).unwrap());
        cfg.kernel = kernel;
        cfg.parts = parts;
        cfg.strategy = Strategy::Random;
        cfg.verify_snapshot = true;
        let plan = PartitionPlan::new(&g, cfg.strategy, parts, cfg.seed);
        (s, g, plan, cfg)
    }

    #[test]
    fn every_kernel_keeps_invariants() {
        for kernel in KernelKind::ALL {
            for parts in [1, 3] {
                let (mut s, mut g, plan, cfg) = setup(kernel, parts);
                for _ in 0..5 {
                    let stats = run_iteration(&mut s, &mut g, &mut [], &plan, &cfg, None).unwrap();
                    assert_eq!(stats.tokens_sampled, g.total_tokens());
                }
                assert_eq!(s.iteration(), 5);
                assert_eq!(s, { let mut e = ModelState::from_graph(&g, 3).unwrap(); e.set_iteration(5); e });
            }
        }
    }

    #[test]
    fn delta_and_full_merge_agree() {
        let (mut a, mut ga, plan, cfg) = setup(KernelKind::Zen, 2);
        let (mut b, mut gb) = (a.clone(), ga.clone());
        let mut cfg_delta = cfg.clone();
        cfg_delta.delta_aggregation = true;
        let sa = run_iteration(&mut a, &mut ga, &mut [], &plan, &cfg, None).unwrap();
        let sb = run_iteration(&mut b, &mut gb, &mut [], &plan, &cfg_delta, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga.topics(), gb.topics());
        assert!(sb.transfer_word <= 2 * sb.topics_changed);
        assert!(sb.transfer_doc <= 2 * sb.topics_changed);
        assert_eq!(sa.topics_changed, sb.topics_changed);
    }

    #[test]
    fn empty_partition_is_fine() {
        let (mut s, mut g, _, cfg) = setup(KernelKind::Zen, 1);
        let n = g.edges().len();
        let assignment = PartitionAssignment::from_edge_map(3, 0, Strategy::Random, vec![0; n]).unwrap();
        let plan = PartitionPlan::from_assignment(&g, assignment);
        let stats = run_iteration(&mut s, &mut g, &mut [], &plan, &cfg, None).unwrap();
        assert_eq!(stats.tokens_sampled, g.total_tokens());
    }

    #[test]
    fn no_changes_means_empty_delta() {
        let mut s = ModelState::empty(2, 1, 1);
        let before = s.clone();
        merge_deltas(&mut s, vec![delta_update(&[])]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn negative_merge_fails() {
        let mut s = ModelState::empty(2, 1, 1);
        let bad = PartitionUpdate::Delta {
            words: vec![DeltaEntry {
                vertex: 0,
                topic: 1,
                delta: -1,
            }],
            docs: vec![],
        };
        assert!(matches!(merge_deltas(&mut s, vec![bad]), Err(EngineError::Invariant(_))));
    }

    #[test]
    fn multi_worker_keeps_invariants() {
        let (mut s, mut g, plan, mut cfg) = setup(KernelKind::Sparse, 2);
        cfg.workers = 3;
        for _ in 0..3 {
            run_iteration(&mut s, &mut g, &mut [], &plan, &cfg, None).unwrap();
        }
        s.check_invariants(&g).unwrap();
    }
}
