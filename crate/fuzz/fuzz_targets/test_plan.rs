#![no_main]

use ddemph_service::TestPlan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(plan) = TestPlan::from_json(text) {
        let _ = plan.validate();
    }
});
