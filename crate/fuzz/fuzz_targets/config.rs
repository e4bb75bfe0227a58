#![no_main]

use dwb::cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Anything accepted must survive serialization unchanged.
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let back = ExperimentConfig::parse(&cfg.serialize()).expect("serialized config parses");
        assert_eq!(back.serialize(), cfg.serialize());
    }
});
