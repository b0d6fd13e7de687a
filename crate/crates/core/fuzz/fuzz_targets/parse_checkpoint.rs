#![no_main]

use libfuzzer_sys::fuzz_target;
use topicgraph::engine::TrainConfig;
use topicgraph::model_io::{parse_checkpoint, write_checkpoint, LoadLimits};

const LIMITS: LoadLimits = LoadLimits {
    max_topics: 64,
    max_vocab: 4096,
    max_docs: 4096,
    max_tokens: 1 << 16,
};

fuzz_target!(|data: &[u8]| {
    let Ok(ck) = parse_checkpoint(data, &LIMITS) else {
        return;
    };
    ck.state.check_invariants(&ck.graph).expect("accepted checkpoint is consistent");
    let mut config = TrainConfig::new(ck.header.hyper);
    config.kernel = ck.header.kernel;
    config.seed = ck.header.seed;
    let mut out = Vec::new();
    write_checkpoint(&mut out, &ck.state, &ck.graph, &config, ck.meta.as_deref(), &ck.history)
        .expect("writing to memory succeeds");
    let again = parse_checkpoint(&out[..], &LIMITS).expect("re-encoded checkpoint parses");
    assert_eq!(again.state, ck.state);
    assert_eq!(again.graph, ck.graph);
    assert_eq!(again.meta, ck.meta);
});
