#![no_main]
use libfuzzer_sys::fuzz_target;

use plateau_core::formats::parse_lengths;
use plateau_core::FiniteGroup;

fuzz_target!(|data: &str| {
    // S3 has non-trivial conjugacy classes, so class consistency gets exercised.
    let g = FiniteGroup::symmetric(3);
    let _ = parse_lengths(data, &g);
});
