use std::collections::{HashMap, HashSet};

use topicgraph::corpus::TokenGraph;
use topicgraph::partition::{assign, partition_metrics, Strategy};
use topicgraph::synth::power_law_corpus;

fn graph(edges: usize, exponent: f64, seed: u64) -> TokenGraph {
    let n = (edges / 5).max(1);
    TokenGraph::from_corpus(&power_law_corpus(edges, n, n, exponent, seed))
}

#[test]
fn random_edge_counts_are_multinomial() {
    let g = graph(100_000, 1.1, 1);
    let m = g.edges().len() as f64;
    for p in [4u32, 16, 64] {
        let a = assign(&g, Strategy::Random, p, 9);
        let mean = m / p as f64;
        let sd = (m * (1.0 / p as f64) * (1.0 - 1.0 / p as f64)).sqrt();
        for (i, &c) in partition_metrics(&a, &g).edges_per_partition.iter().enumerate() {
            let z = (c as f64 - mean).abs() / sd;
            assert!(z < 5.0, "p={p} partition {i}: {c} edges, z={z:.2}");
        }
    }
}

#[test]
fn metrics_match_recount() {
    for (seed, exponent) in [(2u64, 1.1), (3, 1.6), (4, 2.2)] {
        let g = graph(5_000, exponent, seed);
        for strategy in Strategy::ALL {
            for p in [1u32, 3, 8] {
                let a = assign(&g, strategy, p, seed);
                let m = partition_metrics(&a, &g);
                let mut counts = vec![0u64; p as usize];
                let mut words: HashMap<u32, HashSet<u32>> = HashMap::new();
                let mut docs: HashMap<u32, HashSet<u32>> = HashMap::new();
                for (e, &part) in a.edge_partition().iter().enumerate() {
                    counts[part as usize] += 1;
                    words.entry(g.edges()[e].word).or_default().insert(part);
                    docs.entry(g.edges()[e].doc).or_default().insert(part);
                }
                assert_eq!(m.edges_per_partition, counts);
                let mean = |v: &HashMap<u32, HashSet<u32>>| {
                    v.values().map(|s| s.len()).sum::<usize>() as f64 / v.len() as f64
                };
                let all: usize = words.values().chain(docs.values()).map(|s| s.len()).sum();
                let rf = all as f64 / (words.len() + docs.len()) as f64;
                assert!((m.word_replication_factor - mean(&words)).abs() < 1e-12);
                assert!((m.doc_replication_factor - mean(&docs)).abs() < 1e-12);
                assert!((m.replication_factor - rf).abs() < 1e-12);
                let max = words.values().chain(docs.values()).map(|s| s.len()).max().unwrap();
                assert_eq!(m.max_replication, max);
                let avg = g.edges().len() as f64 / p as f64;
                let top = *counts.iter().max().unwrap() as f64;
                assert!((m.edge_balance - top / avg).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn keyed_strategies_keep_their_vertex_whole() {
    let g = graph(20_000, 1.3, 5);
    for p in [4u32, 16] {
        let by_word = partition_metrics(&assign(&g, Strategy::Edge1D { by_word: true }, p, 1), &g);
        assert_eq!(by_word.word_replication_factor, 1.0);
        let by_doc = partition_metrics(&assign(&g, Strategy::Edge1D { by_word: false }, p, 1), &g);
        assert_eq!(by_doc.doc_replication_factor, 1.0);
    }
}

#[test]
fn degree_aware_strategies_replicate_less_than_random() {
    let g = graph(100_000, 1.1, 6);
    let rf = |s| partition_metrics(&assign(&g, s, 16, 3), &g).replication_factor;
    let random = rf(Strategy::Random);
    assert!(rf(Strategy::DbhPlus { threshold: 0 }) < random);
    assert!(rf(Strategy::Edge2D) < random);
}
