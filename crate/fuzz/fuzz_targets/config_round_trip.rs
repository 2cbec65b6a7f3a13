#![no_main]

use hardy_weak::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&cfg.render()).expect("rendered config parses");
        assert_eq!(again, cfg);
    }
});
