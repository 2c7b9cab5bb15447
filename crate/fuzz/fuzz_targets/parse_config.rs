#![no_main]

use actdet::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config(text) {
            cfg.spec
                .validate()
                .expect("parser returned an invalid spec");
        }
    }
});
