#![no_main]
use gymtrack::sim::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // parse + validate; a valid scenario must survive a JSON roundtrip
        if let Ok(scenario) = Scenario::from_json(text) {
            let json = serde_json::to_string(&scenario).unwrap();
            let back = Scenario::from_json(&json).unwrap();
            assert_eq!(back, scenario);
        }
    }
});
