#![no_main]
use libfuzzer_sys::fuzz_target;

use plateau_core::formats::parse_spec_csv;

fuzz_target!(|data: &str| {
    let _ = parse_spec_csv(data);
});
