#![no_main]
use libfuzzer_sys::fuzz_target;
use socp_prune::io::parse_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = parse_manifest(text) {
            assert_eq!(parse_manifest(&m.render()).as_ref(), Ok(&m));
        }
    }
});
