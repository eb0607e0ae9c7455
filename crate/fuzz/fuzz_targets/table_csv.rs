#![no_main]

use bayesseg::harness::Table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = Table::parse_csv(text) {
        let _ = table.render();
        let csv = table.to_csv().expect("table writes");
        assert_eq!(Table::parse_csv(&csv).expect("written table parses"), table);
    }
});
