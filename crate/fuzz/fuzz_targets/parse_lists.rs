// Comma-separated lists behind --sizes, --seeds, --eps-list and --methods.
#![no_main]

use hodlr_bench::config::{parse_eps_list, parse_methods, parse_number_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = parse_number_list::<usize>(s);
    let _ = parse_number_list::<u64>(s);
    if let Ok(eps) = parse_eps_list(s) {
        assert!(eps.iter().all(|e| e.is_finite() && *e > 0.0));
    }
    if let Ok(methods) = parse_methods(s) {
        assert_eq!(methods.len(), s.split(',').count());
    }
});
