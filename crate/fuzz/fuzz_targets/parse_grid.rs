#![no_main]

use libfuzzer_sys::fuzz_target;
use snl_core::files::parse_grid;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(specs) = parse_grid(text) {
            for spec in specs {
                assert!(spec.validate().is_ok());
            }
        }
    }
});
