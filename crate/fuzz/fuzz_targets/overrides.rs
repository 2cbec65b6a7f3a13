#![no_main]

use hardy_weak::config::{apply_overrides, parse_config, ExperimentConfig};
use libfuzzer_sys::fuzz_target;

// One override per line, key and value separated by a tab.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let pairs: Vec<(&str, &str)> = text
        .lines()
        .map(|l| l.split_once('\t').unwrap_or((l, "")))
        .collect();
    let mut cfg = ExperimentConfig::default();
    if apply_overrides(&mut cfg, pairs.iter().copied()).is_ok() {
        assert_eq!(
            parse_config(&cfg.render()).expect("valid config renders"),
            cfg
        );
    }
});
