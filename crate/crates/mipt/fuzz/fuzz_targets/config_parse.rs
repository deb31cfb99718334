#![no_main]

use libfuzzer_sys::fuzz_target;
use mipt::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse_str(text) {
        // anything that parses must round-trip through its canonical form
        let again = RunConfig::parse_str(&cfg.to_string()).expect("canonical form parses");
        assert_eq!(cfg.digest(), again.digest());
    }
});
