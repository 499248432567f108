use std::collections::BTreeMap;

use loopsol::algebra::{catalog, centralizer_split, eigenspace_project, AlgebraContext};
use loopsol::gaussrat::GaussRational;
use loopsol::jetcalc::*;
use loopsol::matrix::*;
use loopsol::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn golden(name: &str) -> DiffPolyMatrix {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    DiffPolyMatrix::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn q(order: u32) -> DiffPoly {
    DiffPoly::var(JetVar::new(0, order))
}

#[test]
fn first_terms_are_b_and_u() {
    let ctx = catalog("sl2-su2").unwrap();
    let qs = compute_q_sequence(&ctx, &ctx.a, 1).unwrap();
    let ev = |m: &DiffPolyMatrix| m.evaluate(&|v: JetVar| Some(if v.component == 0 { re(2.0) } else { re(-3.0) })).unwrap();
    assert!(dist(&ev(&qs[0]), &ctx.a) < 1e-15);
    assert!(dist(&ev(&qs[1]), &from_rows(&[vec![re(0.0), re(2.0)], vec![re(-3.0), re(0.0)]])) < 1e-15);
}

#[test]
fn sl2_tables_match_goldens() {
    let ctx = catalog("sl2-su2").unwrap();
    let qs = compute_q_sequence(&ctx, &ctx.a, 3).unwrap();
    for j in 1..=3 {
        assert_eq!(qs[j], golden(&format!("q_a{j}.json")), "Q_{j}");
        assert_eq!(flow_rhs(&ctx, &ctx.a, j).unwrap(), golden(&format!("flow_a{j}.json")), "flow {j}");
    }
    assert_eq!(Substitution::su2().apply(&flow_rhs(&ctx, &ctx.a, 2).unwrap()), golden("flow_nls.json"));
    assert_eq!(Substitution::so2().apply(&flow_rhs(&ctx, &ctx.a, 3).unwrap()), golden("flow_mkdv.json"));
}

#[test]
fn recursion_identity_holds_exactly() {
    let i = c(0.0, 1.0);
    for (id, b) in [
        ("sl2-su2", None),
        ("sl2-su2/so2", None),
        ("sl3-diag", None),
        ("sl3-diag", Some(diag(&[i * 2.0, -i, -i]))),
    ] {
        let ctx = catalog(id).unwrap();
        let b = b.unwrap_or_else(|| ctx.a.clone());
        let res = recursion_residuals(&ctx, &b, 5).unwrap();
        assert_eq!(res.len(), 6);
        assert!(res.iter().all(DiffPolyMatrix::is_zero), "{id}");
    }
}

#[test]
fn b_outside_the_centralizer_is_rejected() {
    let ctx = catalog("sl2-su2").unwrap();
    let b = from_rows(&[vec![re(0.0), re(1.0)], vec![re(0.0), re(0.0)]]);
    assert!(compute_q(&ctx, &b, 2).is_err());
}

#[test]
fn json_and_text_round_trips_are_exact() {
    let ctx = catalog("sl3-diag").unwrap();
    let q3 = compute_q(&ctx, &ctx.a, 3).unwrap();
    assert_eq!(DiffPolyMatrix::from_json(&q3.to_json()).unwrap(), q3);
    let text = serde_json::to_string(&q3.to_json()).unwrap();
    assert_eq!(DiffPolyMatrix::parse(&text).unwrap(), q3);
}

#[test]
fn malformed_trees_are_parse_errors() {
    for bad in [
        "",
        "[1, 2]",
        r#"{"op": "matrix", "dim": 2, "args": []}"#,
        r#"{"op": "jet", "component": 0, "order": 0}"#,
        r#"{"op": "matrix", "dim": 1, "args": [{"op": "pow", "args": []}]}"#,
        r#"{"op": "matrix", "dim": 1, "args": [{"op": "const", "re": "1/0", "im": "0"}]}"#,
        r#"{"op": "matrix", "dim": 1, "args": [{"op": "const", "re": "x", "im": "0"}]}"#,
    ] {
        assert!(DiffPolyMatrix::parse(bad).is_err(), "{bad}");
    }
}

#[test]
fn total_derivative_by_hand() {
    // d/dx (q q_x) = q_x² + q q_xx
    let p = q(0).mul(&q(1));
    let expected = q(1).mul(&q(1)).add(&q(0).mul(&q(2)));
    assert_eq!(p.total_x_derivative(4).unwrap(), expected);
    assert!(matches!(p.total_x_derivative(1), Err(Error::OrderExceeded(..))));
}

#[test]
fn formal_integration_inverts_the_derivative() {
    let p = q(0).mul(&q(0)).mul(&q(1)).add(&q(2));
    let dp = p.total_x_derivative(8).unwrap();
    assert_eq!(dp.formal_integrate().unwrap(), p);
    // q² is not a total derivative.
    assert!(matches!(q(0).mul(&q(0)).formal_integrate(), Err(Error::NotExact(_))));
}

#[test]
fn coefficients_are_exact_rationals() {
    let third = GaussRational::from_fracs(1, 3, 0, 1);
    let p = q(0).scale(&third).add(&q(0).scale(&third)).add(&q(0).scale(&third));
    assert_eq!(p, q(0));
}

#[test]
fn su2_substitution_conjugates() {
    let ctx = catalog("sl2-su2").unwrap();
    let u = Substitution::su2().apply(&compute_q(&ctx, &ctx.a, 1).unwrap());
    let z = c(0.3, -0.7);
    let jets = |v: JetVar| Some(if v.conj { z.conj() } else { z });
    let m = u.evaluate(&jets).unwrap();
    assert!((m[(1, 0)] + z.conj()).norm() < 1e-15);
}

/// Random jets of a field valued in 𝒢₀ ∩ 𝒢ₐ^⊥.
fn graded_jets(ctx: &AlgebraContext, rng: &mut ChaCha8Rng, orders: u32) -> BTreeMap<JetVar, C64> {
    let sigma = ctx.sigma.as_ref().unwrap();
    let mut jets = BTreeMap::new();
    for order in 0..=orders {
        let x = ctx.ambient.basis().iter().fold(zeros(ctx.dim), |acc, e| {
            acc + e * C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let (_, perp) = centralizer_split(ctx, &eigenspace_project(sigma, 0, &x).unwrap()).unwrap();
        for (k, v) in ctx.perp_coordinates(&perp).unwrap().into_iter().enumerate() {
            jets.insert(JetVar::new(k as u32, order), v);
        }
    }
    jets
}

#[test]
fn twisted_q_lies_in_its_eigenspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (id, jmax) in [("sl2-su2/so2", 5), ("sl3-tzitzeica", 4)] {
        let ctx = catalog(id).unwrap();
        let sigma = ctx.sigma.clone().unwrap();
        let qs = compute_q_sequence(&ctx, &ctx.a, jmax).unwrap();
        for _ in 0..5 {
            let jets = graded_jets(&ctx, &mut rng, 2 * jmax as u32);
            for (j, qj) in qs.iter().enumerate() {
                let m = qj.evaluate_map(&jets).unwrap();
                let p = eigenspace_project(&sigma, 1 - j as i64, &m).unwrap();
                assert!(dist(&p, &m) <= 1e-10 * (1.0 + norm(&m)), "{id} Q_{j}");
            }
        }
    }
}

#[test]
fn twisted_flows_preserve_the_zero_eigenspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (id, j) in [("sl2-su2/so2", 3), ("sl2-su2/so2", 1), ("sl3-tzitzeica", 1)] {
        let ctx = catalog(id).unwrap();
        let sigma = ctx.sigma.clone().unwrap();
        let rhs = flow_rhs(&ctx, &ctx.a, j).unwrap();
        let jets = graded_jets(&ctx, &mut rng, 2 * j as u32 + 2);
        let m = rhs.evaluate_map(&jets).unwrap();
        assert!(dist(&eigenspace_project(&sigma, 0, &m).unwrap(), &m) <= 1e-10 * (1.0 + norm(&m)), "{id} j={j}");
    }
}

#[test]
fn evaluation_reports_missing_jets() {
    let ctx = catalog("sl2-su2").unwrap();
    let q2 = compute_q(&ctx, &ctx.a, 2).unwrap();
    assert!(matches!(q2.evaluate(&|_| None), Err(Error::MissingJet(_))));
}
