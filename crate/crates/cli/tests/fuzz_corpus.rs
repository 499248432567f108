//! Replays the fuzz seed corpus through the same entry points as the fuzz
//! targets, so the seeds stay meaningful on stable toolchains.

use std::path::{Path, PathBuf};

use loopsol::dressing::parse_chain_str;
use loopsol::grid::SolutionGrid;
use loopsol::jetcalc::DiffPolyMatrix;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn config_seeds_validate() {
    let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for (p, b) in seeds("config_validate") {
        loopsol_cli::config::validate(text(&b), &base).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn diffpoly_seeds_round_trip() {
    for (p, b) in seeds("diffpoly_parse") {
        let m = DiffPolyMatrix::parse(text(&b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(DiffPolyMatrix::from_json(&m.to_json()).unwrap(), m);
    }
}

#[test]
fn grid_csv_seeds_round_trip() {
    let mut parsed = 0;
    for (_, b) in seeds("grid_csv") {
        let Ok(grid) = SolutionGrid::from_csv(text(&b), "u", "") else { continue };
        let again = SolutionGrid::from_csv(&grid.to_csv().unwrap(), "u", "").unwrap();
        assert_eq!(again.to_json()["values"], grid.to_json()["values"]);
        parsed += 1;
    }
    assert!(parsed >= 2);
}

#[test]
fn grid_json_seeds_round_trip() {
    let mut parsed = 0;
    for (p, b) in seeds("grid_json") {
        let v: serde_json::Value = serde_json::from_slice(&b).unwrap();
        match SolutionGrid::from_json(&v) {
            Ok(grid) => {
                assert_eq!(SolutionGrid::from_json(&grid.to_json()).unwrap().to_json(), grid.to_json());
                parsed += 1;
            }
            Err(_) => assert!(p.ends_with("huge_dim.json"), "{}", p.display()),
        }
    }
    assert_eq!(parsed, 2);
}

#[test]
fn chain_seeds_parse() {
    for (p, b) in seeds("dressing_chain") {
        let chain = parse_chain_str(text(&b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(!chain.is_empty());
    }
}

/// Byte-level mutations of every seed must be rejected or accepted, never panic.
#[test]
fn mutated_seeds_do_not_panic() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let alphabet = b"{}[],:\"0123456789.-+eE/ nulltrueNaN\n";
    let base = Path::new("/nonexistent-fuzz-root");
    for target in ["config_validate", "diffpoly_parse", "grid_csv", "grid_json", "dressing_chain"] {
        for (_, seed) in seeds(target) {
            for _ in 0..300 {
                let mut b = seed.clone();
                for _ in 0..rng.random_range(1..6) {
                    let at = rng.random_range(0..=b.len());
                    match rng.random_range(0..3) {
                        0 if at < b.len() => {
                            b.remove(at);
                        }
                        1 if at < b.len() => b[at] = alphabet[rng.random_range(0..alphabet.len())],
                        _ => b.insert(at, alphabet[rng.random_range(0..alphabet.len())]),
                    }
                }
                let s = String::from_utf8_lossy(&b);
                match target {
                    "config_validate" => drop(loopsol_cli::config::validate(&s, base)),
                    "diffpoly_parse" => {
                        if let Ok(m) = DiffPolyMatrix::parse(&s) {
                            assert_eq!(DiffPolyMatrix::from_json(&m.to_json()).unwrap(), m);
                        }
                    }
                    "grid_csv" => drop(SolutionGrid::from_csv(&s, "u", "")),
                    "grid_json" => {
                        if let Ok(v) = serde_json::from_str(&s) {
                            drop(SolutionGrid::from_json(&v));
                        }
                    }
                    _ => drop(parse_chain_str(&s)),
                }
            }
        }
    }
}
