#![no_main]
use libfuzzer_sys::fuzz_target;
use socp_prune::io::{parse_manifest, parse_predictions};

// Sizes come from a fixed manifest; the table body is fuzzed.
const MANIFEST: &str = "format_version = 1\nnum_models = 2\nnum_samples = 3\nnum_classes = 2\npredictions = \"p.csv\"\nlabels = \"l.csv\"\n";

fuzz_target!(|data: &[u8]| {
    let m = parse_manifest(MANIFEST).unwrap();
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_predictions(text, &m);
    }
});
