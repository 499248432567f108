//! Truncated Birkhoff factorization g = g₊g₋ on the unit circle, and the
//! characteristic initial value solver for the −1-flow built on it.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::algebra::{centralizer_split, AlgebraContext};
use crate::error::{Error, Result};
use crate::grid::{Axis, SolutionGrid};
use crate::matrix::*;

pub use crate::laurent::{fourier_coeffs, root_of_unity, FourierPlan, LaurentLoop};

/// Toeplitz condition numbers above this mean the loop is outside the big cell.
pub const BIG_CELL_CONDITION: f64 = 1e10;
/// Floor on min |det g(λ)| over the circle.
pub const DET_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorOptions {
    /// Number of λ⁻¹ coefficients solved for. `None` starts at twice the
    /// negative window of the input and doubles until the reconstruction
    /// residual is negligible or the Toeplitz system reaches its size cap.
    pub minus_window: Option<usize>,
    pub condition_limit: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self { minus_window: None, condition_limit: BIG_CELL_CONDITION }
    }
}

#[derive(Clone, Debug)]
pub struct FactorReport {
    pub g_plus: LaurentLoop,
    pub g_minus: LaurentLoop,
    /// g₋⁻¹ = I + Σ c_k λ^{−k}, the solution of the Toeplitz system.
    pub g_minus_inv: LaurentLoop,
    pub reconstruction_residual: f64,
    /// Estimated 1-norm condition number of the block-Toeplitz matrix.
    pub solve_condition: f64,
}

pub fn birkhoff_factor(g: &LaurentLoop) -> Result<FactorReport> {
    birkhoff_factor_with(g, &FactorOptions::default())
}

/// Reconstruction residual, relative to the loop's size, at which the adaptive window stops growing.
const ADAPTIVE_TARGET: f64 = 1e-13;
/// Largest Toeplitz system (rows) the adaptive window may build.
const MAX_TOEPLITZ_ROWS: usize = 2048;

pub fn birkhoff_factor_with(g: &LaurentLoop, opts: &FactorOptions) -> Result<FactorReport> {
    if !g.is_finite() {
        return Err(Error::InvalidData("loop has non-finite coefficients".into()));
    }
    let neg = (-g.min).max(0) as usize;
    if let Some(m) = opts.minus_window {
        return factor_window(g, m.max(neg), opts);
    }
    let scale = 1.0 + g.coeffs.iter().map(norm).fold(0.0, f64::max);
    let mut m = 2 * neg.max(1);
    loop {
        let rep = factor_window(g, m, opts)?;
        if rep.reconstruction_residual <= ADAPTIVE_TARGET * scale || 2 * m * g.dim > MAX_TOEPLITZ_ROWS {
            return Ok(rep);
        }
        m *= 2;
    }
}

fn factor_window(g: &LaurentLoop, m: usize, opts: &FactorOptions) -> Result<FactorReport> {
    let d = g.dim;
    let neg = (-g.min).max(0) as usize;
    let pos = g.max().max(0);

    let checks = check_points(m as i32 + pos);
    let min_det = checks.iter().map(|&l| g.eval(l).determinant().norm()).fold(f64::INFINITY, f64::min);
    if !(min_det > DET_FLOOR) {
        return Err(Error::SingularLoop(min_det));
    }

    let (h, cond) = if neg == 0 {
        (LaurentLoop::identity(d), 1.0)
    } else {
        let n = m * d;
        let mut t = DMatrix::<C64>::zeros(n, n);
        let mut rhs = DMatrix::<C64>::zeros(n, d);
        for r in 0..m {
            for k in 0..m {
                if let Some(blk) = g.coeff_ref(k as i32 - r as i32) {
                    t.view_mut((r * d, k * d), (d, d)).copy_from(blk);
                }
            }
            if let Some(blk) = g.coeff_ref(-(r as i32) - 1) {
                rhs.view_mut((r * d, 0), (d, d)).copy_from(&(-blk));
            }
        }
        let tnorm = one_norm(&t);
        let lu = t.lu();
        let sol = lu.solve(&rhs).ok_or(Error::BigCell(f64::INFINITY))?;
        let cond = tnorm * inverse_one_norm_estimate(&lu).ok_or(Error::BigCell(f64::INFINITY))?;
        if !(cond <= opts.condition_limit) {
            return Err(Error::BigCell(cond));
        }
        let mut coeffs = Vec::with_capacity(m + 1);
        for k in (1..=m).rev() {
            coeffs.push(sol.view(((k - 1) * d, 0), (d, d)).into_owned());
        }
        coeffs.push(identity(d));
        (LaurentLoop::new(d, -(m as i32), coeffs), cond)
    };

    let (g_plus, _) = g.mul(&h).truncate(0, pos);
    let g_minus = series_inverse_minus(&h, m);
    let reconstruction_residual =
        checks.iter().map(|&l| dist(&g.eval(l), &(g_plus.eval(l) * g_minus.eval(l)))).fold(0.0, f64::max);
    Ok(FactorReport { g_plus, g_minus, g_minus_inv: h, reconstruction_residual, solve_condition: cond })
}

/// Refactor g₋ and report max(‖g₊′ − I‖, ‖g₋′ − g₋‖) on the check circle; a
/// minus loop must factor as (I, itself).
pub fn refactor_defect(rep: &FactorReport) -> Result<f64> {
    let again = birkhoff_factor(&rep.g_minus)?;
    let d = rep.g_minus.dim;
    let span = (-rep.g_minus.min).max(1);
    Ok(check_points(span)
        .iter()
        .map(|&l| dist(&again.g_plus.eval(l), &identity(d)).max(dist(&again.g_minus.eval(l), &rep.g_minus.eval(l))))
        .fold(0.0, f64::max))
}

/// Inverse of I + Σ_{k≥1} c_k λ^{−k} as a power series in λ⁻¹, truncated at λ^{−m}.
fn series_inverse_minus(h: &LaurentLoop, m: usize) -> LaurentLoop {
    let d = h.dim;
    let mut out: Vec<ComplexMatrix> = vec![identity(d)];
    for n in 1..=m {
        let mut acc = zeros(d);
        for k in 1..=n {
            if let Some(ck) = h.coeff_ref(-(k as i32)) {
                acc -= ck * &out[n - k];
            }
        }
        out.push(acc);
    }
    out.reverse();
    LaurentLoop::new(d, -(m as i32), out)
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Hager's estimate of ‖T⁻¹‖₁ from an LU factorization of T.
fn inverse_one_norm_estimate(lu: &nalgebra::linalg::LU<C64, nalgebra::Dyn, nalgebra::Dyn>) -> Option<f64> {
    let n = lu.l().nrows();
    let (l, u, p) = (lu.l(), lu.u(), lu.p());
    // Tᴴ = Uᴴ Lᴴ P, so Tᴴ z = w is solved by forward then backward substitution and an inverse permutation.
    let solve_adjoint = |w: &DMatrix<C64>| -> Option<DMatrix<C64>> {
        let y = u.ad_solve_upper_triangular(w)?;
        let mut z = l.ad_solve_lower_triangular(&y)?;
        p.inv_permute_rows(&mut z);
        Some(z)
    };
    let mut x = DMatrix::<C64>::from_element(n, 1, re(1.0 / n as f64));
    let mut est = 0.0;
    for iter in 0..5 {
        let y = lu.solve(&x)?;
        let ynorm: f64 = y.iter().map(|z| z.norm()).sum();
        if !ynorm.is_finite() {
            return None;
        }
        if iter > 0 && ynorm <= est {
            break;
        }
        est = ynorm;
        let sgn = y.map(|z| if z.norm() > 0.0 { z / z.norm() } else { re(1.0) });
        let z = solve_adjoint(&sgn)?;
        let (j, zj) = z.iter().enumerate().map(|(j, v)| (j, v.norm())).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let zx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        if iter > 0 && zj <= zx {
            break;
        }
        x.fill(re(0.0));
        x[(j, 0)] = re(1.0);
    }
    Some(est)
}

/// Half-offset circle points, so they never coincide with DFT nodes.
fn check_points(span: i32) -> Vec<C64> {
    let n = (2 * span.max(1) as usize + 2).max(64);
    (0..n).map(|k| C64::from_polar(1.0, std::f64::consts::TAU * (k as f64 + 0.5) / n as f64)).collect()
}

/// I + amplitude·Σ_{|k|≤K} R_k λ^k 2^{−|k|} with entries of R_k uniform in the unit square.
pub fn random_near_identity_loop<R: Rng + ?Sized>(rng: &mut R, dim: usize, k: usize, amplitude: f64) -> LaurentLoop {
    let kk = k as i32;
    let coeffs = (-kk..=kk)
        .map(|p| {
            let decay = amplitude * 0.5f64.powi(p.abs());
            let r = ComplexMatrix::from_fn(dim, dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let base = if p == 0 { identity(dim) } else { zeros(dim) };
            base + r * re(decay)
        })
        .collect();
    LaurentLoop::new(dim, -kk, coeffs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoursatOptions {
    /// Samples on the λ-circle.
    pub n: usize,
    /// Fourier window [−K, K].
    pub k: usize,
    /// Allowed Fourier tail mass before a point is rejected as aliased.
    pub tail_tol: f64,
    /// Allowed spectrum mismatch between η(t) and b.
    pub spectrum_tol: f64,
}

impl Default for GoursatOptions {
    fn default() -> Self {
        Self { n: 64, k: 16, tail_tol: 1e-8, spectrum_tol: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct GoursatSolution {
    pub u: SolutionGrid,
    pub v: SolutionGrid,
    /// Grid points where factorization failed; they are masked in `u` and `v`.
    pub failures: Vec<(usize, usize, Error)>,
    pub max_condition: f64,
    pub max_reconstruction: f64,
}

/// Solve u_t = [a, v], v_x = −[u, v] from characteristic data u(x, 0) = ξ(x),
/// v(0, t) = η(t). Both axes must contain 0 as a node.
pub fn goursat_solve(
    ctx: &AlgebraContext,
    xi: &(dyn Fn(f64) -> ComplexMatrix + Sync),
    eta: &(dyn Fn(f64) -> ComplexMatrix + Sync),
    x: Axis,
    t: Axis,
    opts: &GoursatOptions,
) -> Result<GoursatSolution> {
    let d = ctx.dim;
    let ix0 = x.node(0.0).ok_or_else(|| Error::Grid("x-axis must contain 0".into()))?;
    let it0 = t.node(0.0).ok_or_else(|| Error::Grid("t-axis must contain 0".into()))?;
    validate_data(ctx, xi, eta, &x, &t, opts)?;

    let plan = FourierPlan::new(opts.n);
    let lambdas: Vec<C64> = (0..opts.n).map(|m| root_of_unity(m, opts.n)).collect();
    // Per λ-sample: L₊ along x and L₋⁻¹ along t.
    let lplus: Vec<Vec<ComplexMatrix>> = lambdas
        .par_iter()
        .map(|&l| {
            let a_l = &ctx.a * l;
            sweep(&x, ix0, d, &|s: f64| &a_l + xi(s), false)
        })
        .collect();
    let lminus_inv: Vec<Vec<ComplexMatrix>> = lambdas
        .par_iter()
        .map(|&l| {
            let li = l.inv();
            sweep(&t, it0, d, &|s: f64| eta(s) * li, true)
        })
        .collect();
    for (cols, name) in [(&lplus, "L+"), (&lminus_inv, "L-")] {
        if cols.iter().flatten().any(|m| !is_finite(m)) {
            return Err(Error::Unstable(format!("{name} integration blew up")));
        }
    }

    let points: Vec<(usize, usize)> = (0..t.n).flat_map(|it| (0..x.n).map(move |ix| (ix, it))).collect();
    type PointResult = std::result::Result<(ComplexMatrix, ComplexMatrix, f64, f64), Error>;
    let results: Vec<PointResult> = points
        .par_iter()
        .map(|&(ix, it)| {
            let samples: Vec<ComplexMatrix> =
                (0..opts.n).map(|m| &lminus_inv[m][it] * &lplus[m][ix]).collect();
            let g = plan.coeffs(&samples, opts.k, opts.tail_tol)?;
            let rep = birkhoff_factor(&g)?;
            let m1 = rep.g_minus_inv.coeff(-1);
            let g0 = rep.g_plus.coeff(0);
            let u = xi(x.at(ix)) + bracket(&ctx.a, &m1);
            let v = inverse(&g0)? * eta(t.at(it)) * &g0;
            Ok((u, v, rep.solve_condition, rep.reconstruction_residual))
        })
        .collect();

    let mut uvals = Vec::with_capacity(points.len());
    let mut vvals = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    let (mut max_condition, mut max_reconstruction) = (0.0f64, 0.0f64);
    for (&(ix, it), r) in points.iter().zip(results) {
        match r {
            Ok((u, v, cond, rec)) => {
                max_condition = max_condition.max(cond);
                max_reconstruction = max_reconstruction.max(rec);
                uvals.push(u);
                vvals.push(v);
            }
            Err(e) => {
                failures.push((ix, it, e));
                uvals.push(nan_matrix(d));
                vvals.push(nan_matrix(d));
            }
        }
    }
    Ok(GoursatSolution {
        u: SolutionGrid::from_values(x, t, "minus1-u", &ctx.id, d, uvals)?,
        v: SolutionGrid::from_values(x, t, "minus1-v", &ctx.id, d, vvals)?,
        failures,
        max_condition,
        max_reconstruction,
    })
}

fn validate_data(
    ctx: &AlgebraContext,
    xi: &(dyn Fn(f64) -> ComplexMatrix + Sync),
    eta: &(dyn Fn(f64) -> ComplexMatrix + Sync),
    x: &Axis,
    t: &Axis,
    opts: &GoursatOptions,
) -> Result<()> {
    let spec_b = eigenvalues(&ctx.b);
    for i in 0..x.n {
        let v = xi(x.at(i));
        if v.shape() != (ctx.dim, ctx.dim) || !is_finite(&v) {
            return Err(Error::InvalidData(format!("ξ({}) malformed", x.at(i))));
        }
        let (cent, _) = centralizer_split(ctx, &v)?;
        if norm(&cent) > 1e-8 * (1.0 + norm(&v)) {
            return Err(Error::InvalidData(format!("ξ({}) has a centralizer component", x.at(i))));
        }
    }
    for i in 0..t.n {
        let v = eta(t.at(i));
        if v.shape() != (ctx.dim, ctx.dim) || !is_finite(&v) {
            return Err(Error::InvalidData(format!("η({}) malformed", t.at(i))));
        }
        let drift = spectrum_distance(&eigenvalues(&v), &spec_b);
        if drift > opts.spectrum_tol {
            return Err(Error::InvalidData(format!("η({}) is not conjugate to b (drift {drift:.2e})", t.at(i))));
        }
    }
    Ok(())
}

/// RK4 sweep of Y' = Y·A(s) (or Y' = −A(s)·Y for the inverse frame) outward
/// from the node `i0`, where Y(i0) = I.
fn sweep(
    ax: &Axis,
    i0: usize,
    d: usize,
    a: &dyn Fn(f64) -> ComplexMatrix,
    inverse_frame: bool,
) -> Vec<ComplexMatrix> {
    let f = |y: &ComplexMatrix, s: f64| if inverse_frame { -(a(s) * y) } else { y * a(s) };
    let step = |y: &ComplexMatrix, s: f64, h: f64| {
        let k1 = f(y, s);
        let k2 = f(&(y + &k1 * re(h / 2.0)), s + h / 2.0);
        let k3 = f(&(y + &k2 * re(h / 2.0)), s + h / 2.0);
        let k4 = f(&(y + &k3 * re(h)), s + h);
        y + (k1 + k2 * re(2.0) + k3 * re(2.0) + k4) * re(h / 6.0)
    };
    let mut out = vec![identity(d); ax.n];
    for i in i0 + 1..ax.n {
        out[i] = step(&out[i - 1], ax.at(i - 1), ax.step);
    }
    for i in (0..i0).rev() {
        out[i] = step(&out[i + 1], ax.at(i + 1), -ax.step);
    }
    out
}
