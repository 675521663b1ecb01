#![no_main]
use libfuzzer_sys::fuzz_target;

use plateau_core::formats::parse_group_table;

fuzz_target!(|data: &str| {
    if let Ok(g) = parse_group_table(data) {
        assert!(g.order() > 0);
    }
});
