#![no_main]

use ddemph_core::melfile::{decode_mel, encode_mel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(mel) = decode_mel(data) {
        assert_eq!(encode_mel(&mel), data);
    }
});
