#![no_main]
use gymtrack::sim::EventLog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(log) = EventLog::parse_ndjson(text) {
            let _ = gymtrack::sim::metrics_from_log(&log);
        }
    }
});
