#![no_main]
use gymtrack::cloud::http::read_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_request(&mut &data[..]);
});
