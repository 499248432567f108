#![no_main]
use libfuzzer_sys::fuzz_target;
use loopsol::jetcalc::DiffPolyMatrix;

fuzz_target!(|data: &str| {
    if let Ok(m) = DiffPolyMatrix::parse(data) {
        let back = DiffPolyMatrix::from_json(&m.to_json()).expect("encoded matrix must decode");
        assert_eq!(back, m);
    }
});
