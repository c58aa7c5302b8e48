#![no_main]
use gymtrack::gateway::parse_whitelist;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_whitelist(text);
    }
});
