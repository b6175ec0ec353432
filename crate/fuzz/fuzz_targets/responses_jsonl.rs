#![no_main]

use ddemph_core::evalstats::{render_table, summarize, TestType};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let test_type = [TestType::Mushra, TestType::Preference, TestType::Identify][selector as usize % 3];
    if let Ok(summary) = summarize(test_type, text) {
        let _ = render_table(&summary);
        let _ = serde_json::to_string(&summary);
    }
});
