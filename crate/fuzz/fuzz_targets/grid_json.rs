#![no_main]
use libfuzzer_sys::fuzz_target;
use loopsol::grid::SolutionGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(v) = serde_json::from_slice::<serde_json::Value>(data) else { return };
    if let Ok(grid) = SolutionGrid::from_json(&v) {
        let again = SolutionGrid::from_json(&grid.to_json()).expect("encoded grid must decode");
        assert_eq!(again.to_json(), grid.to_json());
    }
});
