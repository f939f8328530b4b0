//! HDLR1 decoder: arbitrary bytes must never panic, and anything that decodes
//! must re-encode to the same bytes.
#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(h) = hodlr::decode(data) {
        let bytes = hodlr::encode(&h).expect("decoded matrix re-encodes");
        assert_eq!(bytes, data);
    }
});
