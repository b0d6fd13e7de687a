//! Replays the fuzz seed corpora, plus seeded byte mutations of every seed,
//! through the parser entry points on the stable toolchain.

use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicgraph::corpus::{parse_libsvm, TokenGraph};
use topicgraph::engine::TrainConfig;
use topicgraph::model_io::{parse_checkpoint, parse_infer_line, write_checkpoint, LoadLimits};

const LIMITS: LoadLimits = LoadLimits {
    max_topics: 64,
    max_vocab: 4096,
    max_docs: 4096,
    max_tokens: 1 << 16,
};

const MUTATIONS: usize = 400;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<Vec<u8>> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| fs::read(entry.unwrap().path()).unwrap())
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    const ALPHABET: &[u8] = b"0123456789:*\t \n-[]{}\",.ekx";
    let mut v = seed.to_vec();
    for _ in 0..rng.random_range(1..=4) {
        let pos = if v.is_empty() { 0 } else { rng.random_range(0..v.len()) };
        match rng.random_range(0..4) {
            0 if !v.is_empty() => v[pos] = ALPHABET[rng.random_range(0..ALPHABET.len())],
            1 => v.insert(pos, ALPHABET[rng.random_range(0..ALPHABET.len())]),
            2 if !v.is_empty() => {
                v.remove(pos);
            }
            _ => v.truncate(pos),
        }
    }
    v
}

fn inputs(target: &str, salt: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(salt);
    let base = seeds(target);
    let mut all = base.clone();
    for s in &base {
        for _ in 0..MUTATIONS {
            all.push(mutate(&mut rng, s));
        }
    }
    all
}

#[test]
fn libsvm_inputs() {
    let mut accepted = 0;
    for data in inputs("parse_libsvm", 1) {
        if let Ok(corpus) = parse_libsvm(&data[..]) {
            accepted += 1;
            if corpus.vocab_size() > 1 << 20 || corpus.total_tokens() > 1 << 20 {
                continue;
            }
            let graph = TokenGraph::from_corpus(&corpus);
            assert_eq!(graph.total_tokens(), corpus.total_tokens());
            assert_eq!(graph.word_degree().iter().sum::<u64>(), corpus.total_tokens());
        }
    }
    assert!(accepted > 0);
}

#[test]
fn checkpoint_inputs() {
    let mut accepted = 0;
    for data in inputs("parse_checkpoint", 2) {
        let Ok(ck) = parse_checkpoint(&data[..], &LIMITS) else {
            continue;
        };
        accepted += 1;
        ck.state.check_invariants(&ck.graph).unwrap();
        let mut config = TrainConfig::new(ck.header.hyper);
        config.kernel = ck.header.kernel;
        config.seed = ck.header.seed;
        let mut out = Vec::new();
        write_checkpoint(&mut out, &ck.state, &ck.graph, &config, ck.meta.as_deref(), &ck.history)
            .unwrap();
        let again = parse_checkpoint(&out[..], &LIMITS).unwrap();
        assert_eq!(again.state, ck.state);
        assert_eq!(again.graph, ck.graph);
        assert_eq!(again.meta, ck.meta);
    }
    assert!(accepted >= 2);
}

#[test]
fn infer_line_inputs() {
    for data in inputs("parse_infer_line", 3) {
        let Ok(line) = std::str::from_utf8(&data) else {
            continue;
        };
        if let Ok(doc) = parse_infer_line(line) {
            assert!(doc.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(doc.iter().all(|&(_, c)| c >= 1));
        }
    }
}
