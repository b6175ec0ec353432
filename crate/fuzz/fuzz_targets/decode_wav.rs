#![no_main]

use ddemph_core::wav::{decode_wav, encode_wav};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(wave) = decode_wav(data) {
        if let Ok(bytes) = encode_wav(&wave) {
            assert_eq!(decode_wav(&bytes).expect("encoded wav decodes").len(), wave.len());
        }
    }
});
