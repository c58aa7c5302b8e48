#![no_main]
use gymtrack::cloud::http::read_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_response(&mut &data[..]);
});
