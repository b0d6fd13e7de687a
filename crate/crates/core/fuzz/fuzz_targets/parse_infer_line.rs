#![no_main]

use libfuzzer_sys::fuzz_target;
use topicgraph::model_io::parse_infer_line;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(doc) = parse_infer_line(line) {
        assert!(doc.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(doc.iter().all(|&(_, c)| c >= 1));
    }
});
