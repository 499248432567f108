#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = loopsol::dressing::parse_chain_str(data);
});
