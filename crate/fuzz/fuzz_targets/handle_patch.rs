#![no_main]
use gymtrack::cloud::{handle_patch, Store};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mut store = Store::new(&gymtrack::demo_registry());
    let response = handle_patch(&mut store, "leg_curl", data);
    assert!(matches!(response.status, 200 | 400 | 404));
});
