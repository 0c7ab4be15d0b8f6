#![no_main]

use hedonica::trace::TraceLine;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(line) = text.parse::<TraceLine>() {
        let rendered = line.to_string();
        let again: TraceLine = rendered.parse().expect("rendered lines parse");
        assert_eq!(again.to_string(), rendered);
    }
});
