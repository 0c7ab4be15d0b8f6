#![no_main]

use hedonica::trace::{parse_trace, replay_check};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(trace) = parse_trace(text) {
        let _ = replay_check(&trace);
    }
});
