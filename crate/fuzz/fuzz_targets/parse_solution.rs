#![no_main]

use libfuzzer_sys::fuzz_target;
use snl_core::files::{parse_solution, write_solution};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(solution) = parse_solution(text) else { return };
    // report scalars may be NaN, so compare canonical text rather than values
    let canonical = write_solution(&solution).expect("accepted solution serializes");
    let again = parse_solution(&canonical).expect("canonical form parses");
    assert_eq!(write_solution(&again).unwrap(), canonical);
});
