#![no_main]

use hedonica::domain::{validate_config, SimConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = SimConfig::from_json(text) {
        let violations = validate_config(&config);
        assert_eq!(violations.is_empty(), config.validated().is_ok());
    }
});
