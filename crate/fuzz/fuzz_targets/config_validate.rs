#![no_main]
use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &str| {
    // Relative input paths resolve against a directory that never exists.
    let _ = loopsol_cli::config::validate(data, Path::new("/nonexistent-fuzz-root"));
});
