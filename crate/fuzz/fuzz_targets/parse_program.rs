#![no_main]
use libfuzzer_sys::fuzz_target;
use socp_prune::conic::text::{parse_program, write_program};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = parse_program(text) {
            // Anything accepted must survive a write/parse round trip.
            let again = parse_program(&write_program(&p)).expect("rendered program parses");
            assert_eq!(again.num_vars, p.num_vars);
            assert_eq!(again.cones, p.cones);
        }
    }
});
