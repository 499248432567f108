use std::sync::Arc;

use loopsol::algebra::{catalog, AlgebraContext};
use loopsol::dressing::*;
use loopsol::grid::Axis;
use loopsol::laxflow::{pde_residual, Equation};
use loopsol::matrix::*;
use loopsol::Error;

fn vacuum(ctx: &Arc<AlgebraContext>, h: Hierarchy) -> Arc<dyn FrameEvaluator> {
    Arc::new(VacuumFrame::new(ctx.clone(), h).unwrap())
}

fn vec_of(v: &[C64]) -> ComplexVector {
    ComplexVector::from_vec(v.to_vec())
}

fn g_element(pole: C64, v: &[C64]) -> SimplePoleDressing {
    SimplePoleDressing::new(Family::GIsPi, pole, vec![vec_of(v)], RealityTag::U).unwrap()
}

fn h_element() -> SimplePoleDressing {
    let th = 0.4f64;
    let w = 1.25f64.sqrt();
    let v = vec_of(&[re(1.0), re(0.5), c(0.0, th.cos() * w), c(0.0, th.sin() * w)]);
    SimplePoleDressing::new(Family::HIsPi, c(0.0, 0.7), vec![v], RealityTag::GTauSigma).unwrap()
}

#[test]
fn dressed_sge_kink_has_the_closed_form() {
    // Every 4·arctan(exp(kx + t/k)) solves q_xt = sin q; the pole is selects k = 2s.
    let ctx = Arc::new(catalog("sl2-su2/so2").unwrap());
    let ax = Axis::linspace(-0.5, 0.5, 21).unwrap();
    for s in [0.5, 0.8, 1.3] {
        let el = g_element(c(0.0, s), &[re(1.0), re(1.0)]);
        let sol = dress(Dressing::Simple(el), vacuum(&ctx, Hierarchy::Minus1), ax, ax).unwrap();
        let q = readout::sge_angle(&sol.v);
        let k = 2.0 * s;
        for it in 0..ax.n {
            for ix in 0..ax.n {
                let exact = 4.0 * (k * ax.at(ix) + ax.at(it) / k).exp().atan();
                assert!((q.scalar_at(ix, it).re - exact).abs() < 1e-10, "s={s}");
            }
        }
    }
}

#[test]
fn vacuum_frames_are_normalized_at_the_origin() {
    for (id, h) in [("sl2-su2", Hierarchy::Flow { b: catalog("sl2-su2").unwrap().a, j: 2 }), ("o4-grassmann", Hierarchy::Uu0)] {
        let ctx = Arc::new(catalog(id).unwrap());
        let e = vacuum(&ctx, h);
        assert!(dist(&e.eval(0.0, 0.0, c(0.3, 0.9)).unwrap(), &identity(ctx.dim)) < 1e-15);
        let dressed = DressedFrame::new(e, Dressing::Simple(if id == "sl2-su2" {
            g_element(c(0.3, 0.5), &[re(1.0), re(1.0)])
        } else {
            h_element()
        }))
        .unwrap();
        assert!(dist(&dressed.eval(0.0, 0.0, c(0.3, 0.9)).unwrap(), &identity(ctx.dim)) < 1e-12);
    }
}

#[test]
fn every_family_satisfies_its_reality_condition() {
    let su2 = catalog("sl2-su2").unwrap();
    let f = SimplePoleDressing::new(Family::FAlphaPi, c(1.8, 0.3), vec![vec_of(&[re(1.0), c(0.2, 0.5)])], RealityTag::GTau)
        .unwrap();
    let o4 = catalog("o4-grassmann").unwrap();
    let tz = catalog("sl3-tzitzeica").unwrap();
    let rational = RationalDressing::tzitzeica(&tz, 1.0, &vec_of(&[re(1.0), re(1.05), re(0.95)])).unwrap();
    let checks: Vec<(&AlgebraContext, Dressing)> = vec![
        (&su2, Dressing::Simple(g_element(c(0.3, 0.5), &[re(1.0), c(0.0, 2.0)]))),
        (&su2, Dressing::Simple(f)),
        (&o4, Dressing::Simple(h_element())),
        (&tz, Dressing::Rational(rational)),
    ];
    for (ctx, el) in checks {
        assert!(el.reality_defect(ctx).unwrap() < 1e-10, "{:?}", el.family());
    }
}

#[test]
fn updated_projections_are_projections() {
    let ctx = Arc::new(catalog("sl2-su2").unwrap());
    let b = ctx.a.clone();
    let frame = DressedFrame::new(
        vacuum(&ctx, Hierarchy::Flow { b, j: 2 }),
        Dressing::Simple(g_element(c(0.3, 0.5), &[re(1.0), c(0.4, -1.0)])),
    )
    .unwrap();
    for (x, t) in [(0.0, 0.0), (0.7, -0.3), (-1.2, 0.9)] {
        let p = frame.projection(x, t).unwrap();
        assert!(dist(&(&p * &p), &p) < 1e-12);
        assert!(dist(&p.adjoint(), &p) < 1e-12);
        assert!(frame.projection_defect(x, t).unwrap() < 1e-10);
    }
}

#[test]
fn rank_one_rational_element_agrees_with_the_simple_pole_element() {
    // g = π + (λ−z)/(λ−z̄)π^⊥ = I + (z̄−z)/(λ−z̄)·ww*/|w|² with w ⟂ V: a pole at z̄ with
    // row w*, and a zero at z with kernel w.
    let ctx = Arc::new(catalog("sl2-su2").unwrap());
    let z = c(0.3, 0.5);
    let v = [re(1.0), c(0.4, -1.0)];
    let w = vec_of(&[-v[1].conj(), v[0].conj()]);
    let rational = RationalDressing::new(vec![(z.conj(), w.map(|e| e.conj()))], vec![(z, w.clone())]).unwrap();
    let h = Hierarchy::Flow { b: ctx.a.clone(), j: 2 };
    let simple = DressedFrame::new(vacuum(&ctx, h.clone()), Dressing::Simple(g_element(z, &v))).unwrap();
    let other = DressedFrame::new(vacuum(&ctx, h), Dressing::Rational(rational)).unwrap();
    for (x, t) in [(0.0, 0.0), (0.4, -0.2), (-0.9, 0.6)] {
        let (a, b) = (simple.fields(x, t).unwrap(), other.fields(x, t).unwrap());
        assert!(dist(&a.u, &b.u) < 1e-10, "({x}, {t})");
        let lam = c(1.1, -0.4);
        assert!(dist(&simple.eval(x, t, lam).unwrap(), &other.eval(x, t, lam).unwrap()) < 1e-10);
    }
}

#[test]
fn two_soliton_chain_solves_nls() {
    let ctx = Arc::new(catalog("sl2-su2").unwrap());
    let ax = Axis::linspace(-0.25, 0.25, 65).unwrap();
    let els = vec![
        Dressing::Simple(g_element(c(0.3, 0.5), &[re(1.0), re(1.0)])),
        Dressing::Simple(g_element(c(-0.2, 0.4), &[re(1.0), re(-0.5)])),
    ];
    let sol = multi_dress(els, vacuum(&ctx, Hierarchy::Flow { b: ctx.a.clone(), j: 2 }), ax, ax).unwrap();
    assert!(sol.singular.is_empty());
    let q = readout::q_from_u(&sol.u);
    assert!(pde_residual(&Equation::Nls, &ctx, &[&q]).unwrap() < 1e-4);
}

#[test]
fn grassmann_readout_matches_the_closed_form_update() {
    let ctx = Arc::new(catalog("o4-grassmann").unwrap());
    let ax = Axis::linspace(-0.25, 0.25, 9).unwrap();
    let el = h_element();
    let frame = DressedFrame::new(vacuum(&ctx, Hierarchy::Uu0), Dressing::Simple(el.clone())).unwrap();
    let sol = dress(Dressing::Simple(el), vacuum(&ctx, Hierarchy::Uu0), ax, ax).unwrap();
    let f = readout::grassmann_f(&sol.v);
    for (ix, it) in [(0, 0), (4, 4), (8, 2)] {
        let p = frame.projection(ax.at(ix), ax.at(it)).unwrap();
        assert!(dist(&h_update_f(&zeros(2), 0.7, &p), f.get(ix, it)) < 1e-12);
    }
}

#[test]
fn invalid_elements_are_rejected() {
    let one = [re(1.0), re(1.0)];
    assert!(SimplePoleDressing::new(Family::GIsPi, re(0.5), vec![vec_of(&one)], RealityTag::U).is_err());
    assert!(SimplePoleDressing::new(Family::GIsPi, c(0.0, 0.5), vec![vec_of(&one)], RealityTag::GTau).is_err());
    assert!(SimplePoleDressing::new(Family::FAlphaPi, C64::from_polar(1.0, 0.3), vec![vec_of(&one)], RealityTag::GTau).is_err());
    // Not isotropic.
    let bad = vec_of(&[re(1.0), re(0.0), re(0.0), re(0.0)]);
    assert!(SimplePoleDressing::new(Family::HIsPi, c(0.0, 0.7), vec![bad], RealityTag::GTauSigma).is_err());
    assert!(SimplePoleDressing::new(Family::GIsPi, c(0.0, 0.5), vec![vec_of(&[re(0.0), re(0.0)])], RealityTag::U).is_err());
    let tz = catalog("sl3-tzitzeica").unwrap();
    assert!(RationalDressing::tzitzeica(&tz, 0.0, &vec_of(&[re(1.0), re(1.0), re(1.0)])).is_err());
    assert!(RationalDressing::tzitzeica(&tz, 1.0, &vec_of(&[c(1.0, 1.0), re(1.0), re(1.0)])).is_err());
    assert!(RationalDressing::tzitzeica(&catalog("sl2-su2").unwrap(), 1.0, &vec_of(&one)).is_err());
}

#[test]
fn repeated_poles_are_rejected() {
    let ctx = Arc::new(catalog("sl2-su2").unwrap());
    let el = Dressing::Simple(g_element(c(0.3, 0.5), &[re(1.0), re(1.0)]));
    let h = Hierarchy::Flow { b: ctx.a.clone(), j: 2 };
    assert!(matches!(chain_frame(&[el.clone(), el], vacuum(&ctx, h)), Err(Error::Dressing(_))));
}

#[test]
fn chains_parse_from_json() {
    let text = r#"[{"family": "g-is-pi", "pole": [0.3, 0.5], "V": [[1.0, [0.0, 1.0]]], "reality_tag": "u"}]"#;
    let specs = parse_chain_str(text).unwrap();
    assert_eq!(specs.len(), 1);
    let el = specs[0].build(&catalog("sl2-su2").unwrap()).unwrap();
    assert_eq!(el.poles(), vec![c(0.3, 0.5)]);
    let again = serde_json::to_string(&specs).unwrap();
    assert_eq!(parse_chain_str(&again).unwrap()[0].pole, specs[0].pole);
    for bad in ["", "{}", r#"[{"family": "k-pi"}]"#, r#"[{"family": "g-is-pi", "pole": 1, "V": [], "reality_tag": "u", "x": 0}]"#] {
        assert!(parse_chain_str(bad).is_err(), "{bad}");
    }
    let wrong_len = r#"[{"family": "g-is-pi", "pole": [0.3, 0.5], "V": [[1.0]], "reality_tag": "u"}]"#;
    assert!(parse_chain_str(wrong_len).unwrap()[0].build(&catalog("sl2-su2").unwrap()).is_err());
}
