#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // must reject malformed headers before allocating the matrix
    let _ = mipt::checkpoint::decode_checkpoint(data);
});
