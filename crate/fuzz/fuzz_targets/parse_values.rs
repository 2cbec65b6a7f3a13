#![no_main]

use hardy_weak::config::parse_values;
use hardy_weak::hardy::classical_inequality_check;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = parse_values(text) {
            let _ = classical_inequality_check(&report);
        }
    }
});
