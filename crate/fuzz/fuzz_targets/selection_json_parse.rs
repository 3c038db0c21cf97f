#![no_main]

use colossal::selectors::SelectionResult;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(result) = SelectionResult::from_json(text) {
        let again = SelectionResult::from_json(&result.to_json()).expect("own json parses");
        assert_eq!(again.selected, result.selected);
        assert_eq!(again.budget, result.budget);
    }
});
