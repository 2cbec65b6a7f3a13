#![no_main]

use hardy_weak::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Err(e) = parse_config(text) {
            // reported lines must exist in the input
            if let Some(line) = e.line() {
                assert!(line >= 1 && line <= text.lines().count().max(1));
            }
        }
    }
});
