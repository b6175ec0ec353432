#![no_main]

use ddemph_core::analysis::{word_report, Alignment};
use ddemph_core::vocoder::Waveform;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(a) = Alignment::from_json(text) {
        // bounded so huge intervals are rejected rather than allocated
        let wave = Waveform::new(vec![0.0; 4800], a.sample_rate);
        let _ = word_report(&wave, &a);
    }
});
