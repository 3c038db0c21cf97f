#![no_main]

use colossal::bench::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = parse_config(text) {
        // the resolved echo must parse back to the identical config
        let again = parse_config(&config.render_resolved()).expect("echo parses");
        assert_eq!(again, config);
    }
});
