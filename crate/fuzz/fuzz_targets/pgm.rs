#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = dwb::cli::parse_pgm(data) {
        assert!(img.iter().all(|v| (0.0..=255.0).contains(v)));
    }
});
