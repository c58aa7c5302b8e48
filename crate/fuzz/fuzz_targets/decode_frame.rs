#![no_main]
use gymtrack::codec::{decode_frame, encode_frame};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_frame(data) {
        // anything that decodes must re-encode to the identical bytes
        assert_eq!(encode_frame(&frame).as_slice(), data);
    }
});
