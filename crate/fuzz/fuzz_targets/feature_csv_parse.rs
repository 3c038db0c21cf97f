#![no_main]

use colossal::features::{parse_feature_csv, render_feature_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_feature_csv(text) {
        let rendered = render_feature_csv(&table).expect("parsed ids are writable");
        let again = parse_feature_csv(&rendered).expect("canonical csv parses");
        assert_eq!(again.rows(), table.rows());
    }
});
