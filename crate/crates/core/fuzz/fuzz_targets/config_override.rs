#![no_main]

use hedonica::domain::SimConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut config = SimConfig::default();
    for spec in text.lines() {
        let before = config.clone();
        if config.apply_override(spec).is_err() {
            assert_eq!(config, before, "failed override must not modify the config");
        }
    }
});
