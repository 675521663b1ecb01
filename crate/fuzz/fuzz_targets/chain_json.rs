#![no_main]
use libfuzzer_sys::fuzz_target;

use plateau_core::formats::{chain_to_json, parse_chain_json};

fuzz_target!(|data: &str| {
    if let Ok(chain) = parse_chain_json(data) {
        let again = parse_chain_json(&chain_to_json(&chain)).unwrap();
        assert_eq!(chain, again);
    }
});
