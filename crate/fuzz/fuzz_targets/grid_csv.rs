#![no_main]
use libfuzzer_sys::fuzz_target;
use loopsol::grid::SolutionGrid;

fuzz_target!(|data: &str| {
    let Ok(grid) = SolutionGrid::from_csv(data, "u", "") else { return };
    let text = grid.to_csv().expect("parsed grid must encode");
    let again = SolutionGrid::from_csv(&text, "u", "").expect("encoded grid must decode");
    assert_eq!(again.to_json()["values"], grid.to_json()["values"]);
});
