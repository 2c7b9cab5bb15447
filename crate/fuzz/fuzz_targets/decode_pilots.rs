#![no_main]

use actdet::codec::{decode_pilots, encode_pilots};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = decode_pilots(data) {
        assert_eq!(encode_pilots(&p), data);
    }
});
