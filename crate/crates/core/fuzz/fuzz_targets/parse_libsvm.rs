#![no_main]

use libfuzzer_sys::fuzz_target;
use topicgraph::corpus::{parse_libsvm, TokenGraph};

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = parse_libsvm(data) {
        if corpus.vocab_size() > 1 << 20 || corpus.total_tokens() > 1 << 20 {
            return;
        }
        let graph = TokenGraph::from_corpus(&corpus);
        assert_eq!(graph.total_tokens(), corpus.total_tokens());
        assert_eq!(graph.word_degree().iter().sum::<u64>(), corpus.total_tokens());
    }
});
