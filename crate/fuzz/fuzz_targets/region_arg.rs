//! Fuzz the `x0,y0,x1,y1` rectangle argument parser used by `--region` and
//! `--domain`. Accepted rectangles must be finite and non-degenerate.

#![no_main]

use libfuzzer_sys::fuzz_target;

use convexlab::geometry::parse_rect;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rect) = parse_rect(text) {
        assert!(rect.width() > 0.0 && rect.height() > 0.0);
        assert!(rect.area().is_finite());
    }
});
