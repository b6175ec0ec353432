#![no_main]

use ddemph_core::phonology::parse_utterance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(utt) = parse_utterance(text) {
        let again = parse_utterance(&utt.to_json()).expect("serialized utterance parses");
        assert_eq!(again, utt);
    }
});
