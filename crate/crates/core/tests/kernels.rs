mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{l1, normalize, token_target};
use topicgraph::corpus::{Corpus, Document, TokenGraph};
use topicgraph::engine::{run_iteration, ModelState, PartitionPlan, TrainConfig};
use topicgraph::kernels::{
    precompute_terms, sample_token_once, HyperParams, KernelKind, KernelOptions, ModelView,
    SharedTables,
};
use topicgraph::partition::Strategy;

fn doc(id: u32, entries: &[(u32, u32)]) -> Document {
    Document {
        id,
        entries: entries.to_vec(),
    }
}

/// Repeatedly redraws one token with the light kernel, rebuilding the
/// snapshot for its current topic, and compares the long-run topic
/// frequencies with the exact conditional.
#[test]
fn light_chain_settles_on_the_conditional() {
    let mut docs = vec![doc(0, &[(0, 1), (1, 3)])];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in 1..40 {
        let entries: Vec<(u32, u32)> = (1..5).map(|w| (w, rng.random_range(1..8))).collect();
        docs.push(doc(d, &entries));
    }
    let corpus = Corpus::from_documents(docs);
    let h = HyperParams::new(2, 0.3, 0.05, 1.0).unwrap();
    let base = TokenGraph::build(&corpus, 2, |_, _| rng.random_range(0..2)).unwrap();
    assert_eq!((base.edges()[0].word, base.edges()[0].doc, base.edges()[0].len), (0, 0, 1));
    let at = base.edges()[0].offset;

    let snapshots: Vec<(TokenGraph, ModelState)> = (0..2)
        .map(|z| {
            let mut g = base.clone();
            g.topics_mut()[at] = z;
            let s = ModelState::from_graph(&g, 2).unwrap();
            (g, s)
        })
        .collect();
    let terms: Vec<_> = snapshots
        .iter()
        .map(|(g, s)| precompute_terms(s.global(), g.vocab_size(), &h))
        .collect();
    let tables: Vec<_> = snapshots
        .iter()
        .zip(&terms)
        .map(|((g, _), t)| SharedTables::build(KernelKind::Light, t, || g.doc_topic_lists()))
        .collect();
    let opts = KernelOptions {
        mh_steps: 8,
        ..KernelOptions::default()
    };
    let mut chain = ChaCha8Rng::seed_from_u64(70);
    let mut s = 0u32;
    let mut counts = [0u64; 2];
    let steps = 1_000_000;
    for _ in 0..steps {
        let i = s as usize;
        let view = ModelView {
            terms: &terms[i],
            words: snapshots[i].1.word_rows(),
            docs: snapshots[i].1.doc_rows(),
            global: snapshots[i].1.global(),
            tables: &tables[i],
            support: None,
        };
        s = sample_token_once(KernelKind::Light, view, opts, 0, 0, &[s], 0, &mut chain);
        counts[s as usize] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
    let (g, st) = &snapshots[0];
    let target = normalize(&token_target(st, g, &h, 0, 0, true));
    let d = l1(&freq, &target);
    assert!(d < 1e-2, "L1 {d}: {freq:?} vs {target:?}");
}

/// One zen sweep over two single-occurrence tokens draws each token
/// independently from its stale conditional.
#[test]
fn zen_sweep_matches_enumerated_transitions() {
    let corpus = Corpus::from_documents(vec![doc(0, &[(0, 1), (1, 1)])]);
    let h = HyperParams::new(2, 0.5, 0.1, 1.0).unwrap();
    let mut start = TokenGraph::from_corpus(&corpus);
    start.topics_mut().copy_from_slice(&[0, 1]);
    let state0 = ModelState::from_graph(&start, 2).unwrap();
    let p0 = normalize(&token_target(&state0, &start, &h, 0, 0, false));
    let p1 = normalize(&token_target(&state0, &start, &h, 1, 0, false));
    let expected: Vec<f64> = (0..4).map(|c| p0[c >> 1] * p1[c & 1]).collect();

    let mut config = TrainConfig::new(h);
    config.kernel = KernelKind::Zen;
    config.kernel_options.remedy = false;
    let plan = PartitionPlan::new(&start, Strategy::Random, 1, 0);
    let trials = 100_000u64;
    let mut counts = [0u64; 4];
    for t in 0..trials {
        config.seed = t;
        let mut g = start.clone();
        let mut s = state0.clone();
        run_iteration(&mut s, &mut g, &mut [], &plan, &config, None).unwrap();
        let z = g.topics();
        counts[((z[0] << 1) | z[1]) as usize] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / trials as f64).collect();
    let d = l1(&freq, &expected);
    assert!(d < 1e-2, "L1 {d}: {freq:?} vs {expected:?}");
}
