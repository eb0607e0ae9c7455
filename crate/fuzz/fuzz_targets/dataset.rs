#![no_main]

use bayesseg::harness::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = Dataset::parse(text) {
        assert_eq!(ds.obs.len(), ds.states.len());
        assert!(ds.states.iter().all(|&s| s < ds.num_states));
        assert_eq!(Dataset::parse(&ds.to_text()).expect("written dataset parses"), ds);
    }
});
