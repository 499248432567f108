use std::sync::Arc;

use loopsol::algebra::{catalog, eigenspace_project};
use loopsol::elliptic::*;
use loopsol::grid::{Axis, SolutionGrid};
use loopsol::laurent::LaurentLoop;
use loopsol::matrix::*;
use loopsol::Error;

fn su2_potential() -> LaurentLoop {
    let m = |r: [[(f64, f64); 2]; 2]| from_rows(&r.iter().map(|row| row.iter().map(|&(a, b)| c(a, b)).collect()).collect::<Vec<_>>());
    LaurentLoop::new(
        2,
        -1,
        vec![
            m([[(-0.18, 0.06), (0.24, 0.18)], [(-0.3, -0.12), (0.18, -0.06)]]),
            m([[(0.0, 0.2), (0.0, 0.0)], [(0.0, 0.0), (0.0, -0.2)]]),
            m([[(0.18, 0.06), (0.3, -0.12)], [(-0.24, 0.18), (-0.18, -0.06)]]),
        ],
    )
}

fn su2() -> EllipticContext {
    EllipticContext::new(Arc::new(catalog("sl2-su2").unwrap()), 1, 1, Splitting::Normalized).unwrap()
}

#[test]
fn contexts_are_validated() {
    let base = Arc::new(catalog("sl2-su2").unwrap());
    assert!(EllipticContext::new(base.clone(), 0, 1, Splitting::Normalized).is_err());
    assert!(EllipticContext::new(base, 1, 0, Splitting::Normalized).is_err());
    // τ = conjugation has no Iwasawa splitting here.
    let tz = Arc::new(catalog("sl3-tzitzeica").unwrap());
    assert!(matches!(EllipticContext::new(tz, 1, 1, Splitting::Iwasawa), Err(Error::Context(_))));
}

#[test]
fn potentials_are_validated() {
    let ec = su2();
    ec.validate_potential(&su2_potential()).unwrap();
    let mut broken = su2_potential();
    broken.set_coeff(1, broken.coeff(1) * re(2.0));
    assert!(ec.validate_potential(&broken).is_err());
    let mut wide = su2_potential();
    wide.set_coeff(2, unit(2, 0, 1));
    assert!(ec.validate_potential(&wide).is_err());
    assert!(ec.validate_potential(&LaurentLoop::identity(3)).is_err());
}

#[test]
fn iwasawa_part_splits_off_a_borel_element() {
    let x = from_rows(&[vec![c(0.3, 0.2), c(1.0, -0.5)], vec![c(-0.7, 0.1), c(-0.3, -0.2)]]);
    let u = iwasawa_unitary_part(&x);
    assert!(dist(&u.adjoint(), &-u.clone()) < 1e-15);
    let b = &x - &u;
    assert!(b[(1, 0)].norm() < 1e-15);
    assert!(b[(0, 0)].im.abs() < 1e-15 && b[(1, 1)].im.abs() < 1e-15);
}

#[test]
fn normalized_projection_is_real_and_vanishes_at_one() {
    let ctx = catalog("sl2-su2").unwrap();
    let xi = su2_potential().shift(-1);
    let p1 = project_p1(&ctx, &xi);
    for j in 1..=2 {
        assert!(dist(&p1.coeff(-j), &ctx.tau.apply(&p1.coeff(j))) < 1e-15);
    }
    assert!(norm(&p1.eval(re(1.0))) < 1e-14);
    let p2 = project_p2(&ctx, &xi);
    assert!(p2.min >= 0);
}

#[test]
fn finite_type_run_is_isospectral_and_second_order() {
    let ec = su2();
    let v = su2_potential();
    let mut system = Vec::new();
    for n in [33, 65] {
        let ax = Axis::linspace(-0.25, 0.25, n).unwrap();
        let field = finite_type_integrate(&ec, &v, ax, ax).unwrap();
        let circle = [c(0.6, 0.8), c(-1.0, 0.0), c(0.0, -1.0)];
        assert!(isospectral_drift(&field, &v, &circle) < 1e-10);
        assert!(reality_defect(&ec.base, &field) < 1e-10);
        system.push(gtau_residual(&ec.base, &slots(&ec, &field), true).unwrap());
    }
    let order = (system[0] / system[1]).log2();
    assert!(order > 1.8, "order {order}");
}

#[test]
fn finite_type_grids_must_be_square_and_contain_the_origin() {
    let ec = su2();
    let v = su2_potential();
    let a = Axis::linspace(-0.25, 0.25, 9).unwrap();
    let b = Axis::linspace(-0.25, 0.25, 17).unwrap();
    assert!(matches!(finite_type_integrate(&ec, &v, a, b), Err(Error::Grid(_))));
    let shifted = Axis::linspace(0.1, 0.3, 9).unwrap();
    assert!(matches!(finite_type_integrate(&ec, &v, shifted, shifted), Err(Error::Grid(_))));
}

#[test]
fn iwasawa_run_on_the_flag_manifold_is_primitive() {
    let ctx = Arc::new(catalog("sl3-flag").unwrap());
    let sigma = ctx.sigma.clone().unwrap();
    let x = from_rows(&[
        vec![c(0.1, 0.3), c(0.2, -0.4), c(0.3, 0.1)],
        vec![c(-0.2, 0.2), c(0.0, 0.1), c(0.25, 0.05)],
        vec![c(0.15, -0.3), c(-0.1, 0.2), c(-0.1, -0.4)],
    ]);
    let vm = eigenspace_project(&sigma, -1, &x).unwrap();
    let v0 = diag(&[c(0.0, 0.2), c(0.0, -0.1), c(0.0, -0.1)]);
    let v = LaurentLoop::new(3, -1, vec![vm.clone(), v0, ctx.tau.apply(&vm)]);
    let ec = EllipticContext::new(ctx.clone(), 1, 1, Splitting::Iwasawa).unwrap();
    let ax = Axis::linspace(-0.2, 0.2, 33).unwrap();
    let field = finite_type_integrate(&ec, &v, ax, ax).unwrap();
    let s = slots(&ec, &field);
    assert_eq!(s.len(), 2);
    assert!(primitive_defect(&ctx, &s[0], &s[1]).unwrap() < 1e-10);
    assert!(gtau_residual(&ctx, &s, false).unwrap() < 1e-3);
}

#[test]
fn geodesics_are_harmonic() {
    // s = exp(xX) with X ∈ su(2): A = −X/4 is constant and commutes with τ(A) = A.
    let ctx = catalog("sl2-su2").unwrap();
    let x_gen = from_rows(&[vec![c(0.0, 0.4), c(0.3, 0.2)], vec![c(-0.3, 0.2), c(0.0, -0.4)]]);
    let y_gen = from_rows(&[vec![c(0.0, 0.0), c(0.5, 0.0)], vec![c(-0.5, 0.0), c(0.0, 0.0)]]);
    let ax = Axis::linspace(-0.5, 0.5, 65).unwrap();
    let geodesic = SolutionGrid::from_fn(ax, ax, "s", "sl2-su2", 2, |x, _| expm(&(&x_gen * re(x))));
    assert!(harmonic_residual(&ctx, &geodesic).unwrap() < 1e-4);
    let bent = SolutionGrid::from_fn(ax, ax, "s", "sl2-su2", 2, |x, y| expm(&(&x_gen * re(x * x * y) + &y_gen * re(y * x))));
    assert!(harmonic_residual(&ctx, &bent).unwrap() > 1e-2);
}
