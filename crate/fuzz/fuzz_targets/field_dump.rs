#![no_main]
use libfuzzer_sys::fuzz_target;

use plateau_sim::FieldDump;

fuzz_target!(|data: &[u8]| {
    if let Ok(dump) = FieldDump::parse(data) {
        let again = FieldDump::parse(&dump.to_bytes()).unwrap();
        assert_eq!(dump.dims, again.dims);
        assert_eq!(dump.values.len(), again.values.len());
    }
});
