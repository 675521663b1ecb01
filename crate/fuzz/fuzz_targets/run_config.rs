#![no_main]
use libfuzzer_sys::fuzz_target;

use std::path::Path;

use plateau_cli::config::RunConfig;

fuzz_target!(|data: &str| {
    let _ = RunConfig::parse(data, Path::new("."));
});
