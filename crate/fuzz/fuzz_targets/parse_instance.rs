#![no_main]

use libfuzzer_sys::fuzz_target;
use snl_core::files::{parse_instance, write_instance};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(instance) = parse_instance(text) else { return };
    // anything accepted must survive a canonical round trip
    let canonical = write_instance(&instance).expect("accepted instance serializes");
    let again = parse_instance(&canonical).expect("canonical form parses");
    assert_eq!(again, instance);
    assert_eq!(write_instance(&again).unwrap(), canonical);
});
