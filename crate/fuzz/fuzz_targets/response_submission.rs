#![no_main]

use ddemph_service::ResponseSubmission;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(sub) = serde_json::from_slice::<ResponseSubmission>(data) {
        let text = serde_json::to_string(&sub).unwrap();
        assert_eq!(serde_json::from_str::<ResponseSubmission>(&text).unwrap(), sub);
    }
});
