#![no_main]

use actdet::codec::{decode_scene, encode_scene};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = decode_scene(data) {
        assert_eq!(encode_scene(&s), data);
    }
});
