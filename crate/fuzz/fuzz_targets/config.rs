#![no_main]

use bayesseg::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

// A configuration that validates must survive a serialize/parse round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml(text) {
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).expect("serialized config parses");
        assert_eq!(again.to_toml(), cfg.to_toml());
    }
});
