#![no_main]

use libfuzzer_sys::fuzz_target;
use snl_core::generate::RangeExpr;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(expr) = text.parse::<RangeExpr>() else { return };
    let shown = expr.to_string();
    let back: RangeExpr = shown.parse().expect("displayed form parses");
    assert_eq!(back, expr);
    for m in [1, 1000, usize::MAX] {
        let rho = expr.resolve(m);
        assert!(rho >= 0.0);
    }
});
