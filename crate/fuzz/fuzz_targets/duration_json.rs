#![no_main]

use ddemph_core::duration::{DurationModel, DurationSequence};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = DurationSequence::from_json(text) {
        assert_eq!(DurationSequence::from_json(&d.to_json()).unwrap(), d);
    }
    if let Ok(m) = DurationModel::from_json(text) {
        let again = DurationModel::from_json(&m.to_json()).expect("serialized model parses");
        assert!(again.table().keys().eq(m.table().keys()));
    }
});
