#![no_main]

use hodlr_bench::config::parse_matrix_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_matrix_spec(s) {
        // Display is canonical: parsing it again is a fixed point.
        let shown = spec.to_string();
        assert_eq!(parse_matrix_spec(&shown).unwrap().to_string(), shown);
    }
});
