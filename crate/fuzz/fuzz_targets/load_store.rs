#![no_main]
use gymtrack::cloud::load_from_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = load_from_str(text, &gymtrack::demo_registry());
    }
});
