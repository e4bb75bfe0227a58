#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = dwb::cli::parse_idx_images(data) {
        let again = dwb::cli::parse_idx_images(&dwb::cli::idx::encode_idx_images(&images)).unwrap();
        assert_eq!(again, images);
    }
});
