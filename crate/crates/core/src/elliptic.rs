//! Finite-type solutions of elliptic (G,τ)-systems and their residuals.
//!
//! Conventions: z = x + iy, ∂_z = (∂x − i∂y)/2, and the grid's second axis is y.
//! A finite-type run integrates η_x = [η, p1(λ^{d−m}η)], η_y = [η, p1(iλ^{d−m}η)]
//! from η(0, 0) = V, then recovers the frame from F⁻¹dF = p1(λ^{d−m}η dz).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{eigenspace_project, AlgebraContext, InvolutionKind};
use crate::dressing::FrameEvaluator;
use crate::error::{Error, Result};
use crate::grid::{Axis, SolutionGrid};
use crate::laurent::LaurentLoop;
use crate::laxflow::{derivative, integrate_frame_gated, ConnectionField, Dir, FrameGrid, FLATNESS_GATE};
use crate::matrix::*;

/// Reality defect allowed in an initial potential.
pub const REALITY_TOL: f64 = 1e-10;

/// Which complement of the unitary loops is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// 𝓛ₑ(𝒰) ⊕ 𝓛₊(𝒢): frames normalized by F(1) = I, giving the normalized system.
    #[default]
    Normalized,
    /// 𝓛(𝒰) ⊕ 𝓛₊ with constant term in the Borel subalgebra 𝔟 (upper triangular, real
    /// diagonal). Frames solve the plain system; only for τ(X) = −X̄ᵗ.
    Iwasawa,
}

#[derive(Clone, Debug)]
pub struct EllipticContext {
    pub base: Arc<AlgebraContext>,
    pub m: usize,
    pub d: usize,
    pub splitting: Splitting,
    /// Largest |power| allowed after multiplying by λ^{d−m}.
    pub buffer: usize,
}

impl EllipticContext {
    pub fn new(base: Arc<AlgebraContext>, m: usize, d: usize, splitting: Splitting) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::Context("m and d must be positive".into()));
        }
        if splitting == Splitting::Iwasawa && base.tau.kind != InvolutionKind::NegConjTranspose {
            return Err(Error::Context("the Iwasawa splitting needs τ(X) = −X̄ᵗ".into()));
        }
        if let Some(sigma) = &base.sigma {
            let defect = base
                .basis_perp
                .iter()
                .chain(&base.basis_cent)
                .map(|x| dist(&sigma.apply(&base.tau.apply(x)), &base.tau.apply(&sigma.apply(x))))
                .fold(0.0, f64::max);
            if defect > 1e-10 {
                return Err(Error::Context(format!("σ and τ do not commute (defect {defect:.2e})")));
            }
        }
        Ok(Self { base, m, d, splitting, buffer: 2 * d + m })
    }

    fn shift(&self) -> i32 {
        self.d as i32 - self.m as i32
    }

    fn p1(&self, xi: &LaurentLoop) -> LaurentLoop {
        match self.splitting {
            Splitting::Normalized => project_p1(&self.base, xi),
            Splitting::Iwasawa => project_p1_iwasawa(&self.base, xi),
        }
    }

    /// Check that V lies in the window, satisfies V₋ⱼ = τ(Vⱼ), and with σ present Vⱼ ∈ 𝒢ⱼ.
    pub fn validate_potential(&self, v: &LaurentLoop) -> Result<()> {
        let d = self.d as i32;
        if v.dim != self.base.dim || !v.is_finite() {
            return Err(Error::InvalidData("V must be a finite loop of the context's size".into()));
        }
        let (_, outside) = v.truncate(-d, d);
        if outside > 0.0 {
            return Err(Error::InvalidData(format!("V has mass {outside:.2e} outside [−{d}, {d}]")));
        }
        let scale = 1.0 + (-d..=d).map(|p| norm(&v.coeff(p))).fold(0.0, f64::max);
        for p in 0..=d {
            let defect = dist(&v.coeff(-p), &self.base.tau.apply(&v.coeff(p)));
            if defect > REALITY_TOL * scale {
                return Err(Error::InvalidData(format!("V₋{p} ≠ τ(V{p}) (defect {defect:.2e})")));
            }
        }
        for p in -d..=d {
            let c = v.coeff(p);
            if self.base.ambient.membership_defect(&c) > REALITY_TOL * scale {
                return Err(Error::InvalidData(format!("coefficient {p} is outside the algebra")));
            }
            if let Some(sigma) = &self.base.sigma {
                if !sigma.antilinear && dist(&eigenspace_project(sigma, p as i64, &c)?, &c) > REALITY_TOL * scale {
                    return Err(Error::InvalidData(format!("coefficient {p} is not in its σ-eigenspace")));
                }
            }
        }
        let extent = (self.shift() - d).unsigned_abs().max((self.shift() + d).unsigned_abs()) as usize;
        if extent > self.buffer {
            return Err(Error::WindowOverflow(extent as f64));
        }
        Ok(())
    }
}

/// η = Σ_{j≥1} ξ₋ⱼ(λ^{−j} − 1) + τ(ξ₋ⱼ)(λ^j − 1), the 𝓛ₑ(𝒰)-component of ξ.
pub fn project_p1(ctx: &AlgebraContext, xi: &LaurentLoop) -> LaurentLoop {
    let lo = xi.min.min(0);
    let mut out = LaurentLoop::zero(xi.dim, lo, -lo);
    let mut constant = zeros(xi.dim);
    for j in 1..=-lo {
        let c = xi.coeff(-j);
        let t = ctx.tau.apply(&c);
        constant -= &c + &t;
        out.set_coeff(-j, c);
        out.set_coeff(j, t);
    }
    out.set_coeff(0, constant);
    out
}

/// ζ = ξ − p1(ξ) = b₀ + Σ_{j≥1}(ξⱼ − τ(ξ₋ⱼ))λ^j.
pub fn project_p2(ctx: &AlgebraContext, xi: &LaurentLoop) -> LaurentLoop {
    let p1 = project_p1(ctx, xi);
    let lo = xi.min.min(0);
    let hi = xi.max().max(-lo);
    let (full, _) = xi.sub(&p1).truncate(0, hi);
    full
}

/// 𝒰-part of X under 𝒢 = 𝔲 ⊕ 𝔟 (anti-Hermitian plus upper triangular with real diagonal).
pub fn iwasawa_unitary_part(x: &ComplexMatrix) -> ComplexMatrix {
    let n = x.nrows();
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i > j {
            x[(i, j)]
        } else if i < j {
            -x[(j, i)].conj()
        } else {
            c(0.0, x[(i, i)].im)
        }
    })
}

/// Projection onto 𝓛(𝒰) along 𝓛₊ with constant term in 𝔟.
pub fn project_p1_iwasawa(ctx: &AlgebraContext, xi: &LaurentLoop) -> LaurentLoop {
    let lo = xi.min.min(0);
    let mut out = LaurentLoop::zero(xi.dim, lo, -lo);
    for j in 1..=-lo {
        let c = xi.coeff(-j);
        out.set_coeff(j, ctx.tau.apply(&c));
        out.set_coeff(-j, c);
    }
    out.set_coeff(0, iwasawa_unitary_part(&xi.coeff(0)));
    out
}

/// η on a grid.
#[derive(Clone, Debug)]
pub struct FiniteTypeField {
    pub x: Axis,
    pub y: Axis,
    pub eta: Vec<LaurentLoop>,
}

impl FiniteTypeField {
    pub fn get(&self, ix: usize, iy: usize) -> &LaurentLoop {
        &self.eta[iy * self.x.n + ix]
    }
}

/// RK4 substeps per grid step.
pub const DEFAULT_SUBSTEPS: usize = 4;

fn rhs(ec: &EllipticContext, eta: &LaurentLoop, dir: Dir) -> Result<LaurentLoop> {
    let mut xi = eta.shift(ec.shift());
    if dir == Dir::T {
        xi = xi.scale(I);
    }
    let d = ec.d as i32;
    let (out, lost) = eta.bracket(&ec.p1(&xi)).truncate(-d, d);
    let scale = 1.0 + eta.coeffs.iter().map(norm).fold(0.0, f64::max).powi(2);
    if lost > 1e-8 * scale {
        return Err(Error::WindowOverflow(lost));
    }
    Ok(out)
}

fn rk4(ec: &EllipticContext, eta: &LaurentLoop, dir: Dir, h: f64, substeps: usize) -> Result<LaurentLoop> {
    let h = h / substeps as f64;
    let mut y = eta.clone();
    for _ in 0..substeps {
        let k1 = rhs(ec, &y, dir)?;
        let k2 = rhs(ec, &y.add(&k1.scale(re(h / 2.0))), dir)?;
        let k3 = rhs(ec, &y.add(&k2.scale(re(h / 2.0))), dir)?;
        let k4 = rhs(ec, &y.add(&k3.scale(re(h))), dir)?;
        let inc = k1.add(&k2.scale(re(2.0))).add(&k3.scale(re(2.0))).add(&k4);
        y = y.add(&inc.scale(re(h / 6.0)));
        let (t, _) = y.truncate(-(ec.d as i32), ec.d as i32);
        y = t;
    }
    if !y.is_finite() || y.coeffs.iter().any(|c| norm(c) > 1e8) {
        return Err(Error::Unstable("finite-type state exceeded 1e8".into()));
    }
    Ok(y)
}

/// Integrate along x through y = 0, then along each y-line (columns run in parallel).
pub fn finite_type_integrate(ec: &EllipticContext, v: &LaurentLoop, x: Axis, y: Axis) -> Result<FiniteTypeField> {
    finite_type_integrate_with(ec, v, x, y, DEFAULT_SUBSTEPS)
}

pub fn finite_type_integrate_with(
    ec: &EllipticContext,
    v: &LaurentLoop,
    x: Axis,
    y: Axis,
    substeps: usize,
) -> Result<FiniteTypeField> {
    ec.validate_potential(v)?;
    if (x.step - y.step).abs() > 1e-12 * x.step {
        return Err(Error::Grid("finite-type grids must be square with equal spacing".into()));
    }
    let (ix0, iy0) = match (x.node(0.0), y.node(0.0)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Grid("the origin must be a grid node".into())),
    };
    let d = ec.d as i32;
    let (v, _) = v.truncate(-d, d);
    let substeps = substeps.max(1);
    let line = |start: LaurentLoop, i0: usize, n: usize, h: f64, dir: Dir| -> Result<Vec<LaurentLoop>> {
        let mut out = vec![start.clone(); n];
        for i in i0 + 1..n {
            out[i] = rk4(ec, &out[i - 1], dir, h, substeps)?;
        }
        for i in (0..i0).rev() {
            out[i] = rk4(ec, &out[i + 1], dir, -h, substeps)?;
        }
        Ok(out)
    };
    let row = line(v, ix0, x.n, x.step, Dir::X)?;
    let cols: Vec<Vec<LaurentLoop>> =
        row.into_par_iter().map(|e| line(e, iy0, y.n, y.step, Dir::T)).collect::<Result<_>>()?;
    let mut eta = Vec::with_capacity(x.n * y.n);
    for iy in 0..y.n {
        for col in &cols {
            eta.push(col[iy].clone());
        }
    }
    Ok(FiniteTypeField { x, y, eta })
}

/// Max over grid points and unit-circle λ₀ of the eigenvalue drift of η(λ₀) from V(λ₀).
pub fn isospectral_drift(field: &FiniteTypeField, v: &LaurentLoop, lambdas: &[C64]) -> f64 {
    let refs: Vec<Vec<C64>> = lambdas.iter().map(|&l| eigenvalues(&v.eval(l))).collect();
    field
        .eta
        .par_iter()
        .map(|eta| {
            lambdas
                .iter()
                .zip(&refs)
                .map(|(&l, r)| spectrum_distance(&eigenvalues(&eta.eval(l)), r))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Max defect of ξ₋ⱼ = τ(ξⱼ) over the field.
pub fn reality_defect(ctx: &AlgebraContext, field: &FiniteTypeField) -> f64 {
    field
        .eta
        .iter()
        .map(|eta| {
            let top = eta.min.unsigned_abs().max(eta.max().unsigned_abs()) as i32;
            (0..=top).map(|p| dist(&eta.coeff(-p), &ctx.tau.apply(&eta.coeff(p)))).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// The Lax connection (p1(λ^{d−m}η), p1(iλ^{d−m}η)) on the grid; the t-axis is y.
pub fn connection(ec: &EllipticContext, field: &FiniteTypeField) -> ConnectionField {
    ConnectionField::from_fn(field.x, field.y, ec.base.dim, "finite-type", |ix, iy| {
        let xi = field.get(ix, iy).shift(ec.shift());
        (ec.p1(&xi), ec.p1(&xi.scale(I)))
    })
}

/// Frames and extracted slots of a finite-type run.
#[derive(Clone, Debug)]
pub struct RecoveredFrame {
    pub frames: Vec<FrameGrid>,
    /// v₁..v_m for the normalized splitting, u₀..u_m for the Iwasawa splitting.
    pub slots: Vec<SolutionGrid>,
}

pub fn recover_frame(ec: &EllipticContext, field: &FiniteTypeField, lambdas: &[C64]) -> Result<RecoveredFrame> {
    let theta = connection(ec, field);
    let frames = lambdas
        .par_iter()
        .map(|&l| integrate_frame_gated(&theta, l, FLATNESS_GATE))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecoveredFrame { frames, slots: slots(ec, field) })
}

/// Coefficients of F⁻¹F_z read off from η.
pub fn slots(ec: &EllipticContext, field: &FiniteTypeField) -> Vec<SolutionGrid> {
    let id = &ec.base.id;
    let n = ec.base.dim;
    let coeff = |j: i32| {
        SolutionGrid::from_indexed(field.x, field.y, &format!("slot{j}"), id, |ix, iy| {
            field.get(ix, iy).shift(ec.shift()).coeff(-j)
        })
    };
    match ec.splitting {
        Splitting::Normalized => (1..=ec.m as i32).map(coeff).collect(),
        Splitting::Iwasawa => {
            let u0 = SolutionGrid::from_indexed(field.x, field.y, "slot0", id, |ix, iy| {
                let x0 = field.get(ix, iy).shift(ec.shift()).coeff(0);
                (iwasawa_unitary_part(&x0) - iwasawa_unitary_part(&(&x0 * I)) * I) * re(0.5)
            });
            debug_assert_eq!(u0.dim, n);
            std::iter::once(u0).chain((1..=ec.m as i32).map(coeff)).collect()
        }
    }
}

/// Residual of the m-th (G,τ)-system (slots u₀..u_m) or of its normalized form
/// (slots v₁..v_m). With σ present, the 𝒢₋ᵢ-membership defect of slot i is
/// folded into the plain residual.
pub fn gtau_residual(ctx: &AlgebraContext, slots: &[SolutionGrid], normalized: bool) -> Result<f64> {
    if slots.is_empty() {
        return Err(Error::InvalidData("no slots".into()));
    }
    let g0 = &slots[0];
    if slots.iter().any(|s| s.dim != ctx.dim || s.x != g0.x || s.t != g0.t) {
        return Err(Error::Dimension("slots must share the grid and the context size".into()));
    }
    let tau = |m: &ComplexMatrix| ctx.tau.apply(m);
    let zbar: Vec<SolutionGrid> = slots.iter().map(dzbar).collect();
    if normalized {
        let m = slots.len();
        return max_finite(g0, |ix, it| {
            let v: Vec<&ComplexMatrix> = slots.iter().map(|s| s.get(ix, it)).collect();
            let tv: Vec<ComplexMatrix> = v.iter().map(|m| tau(m)).collect();
            let mut worst: f64 = 0.0;
            for j in 1..=m {
                let mut r = zbar[j - 1].get(ix, it).clone();
                for i in 1..=m - j {
                    r -= bracket(v[i + j - 1], &tv[i - 1]);
                }
                for tvi in &tv {
                    r += bracket(v[j - 1], tvi);
                }
                worst = worst.max(norm(&r));
            }
            worst
        });
    }
    let m = slots.len() - 1;
    let tau_u0 = g0.map(&g0.tag, |u| tau(u));
    let tau_u0_z = dz(&tau_u0);
    let sigma = ctx.sigma.as_ref().filter(|s| !s.antilinear);
    max_finite(g0, |ix, it| {
        let u: Vec<&ComplexMatrix> = slots.iter().map(|s| s.get(ix, it)).collect();
        let tu: Vec<ComplexMatrix> = u.iter().map(|m| tau(m)).collect();
        let mut worst: f64 = 0.0;
        for j in 1..=m {
            let mut r = zbar[j].get(ix, it).clone();
            for i in 0..=m - j {
                r -= bracket(u[i + j], &tu[i]);
            }
            worst = worst.max(norm(&r));
        }
        let mut r0 = zbar[0].get(ix, it) - tau_u0_z.get(ix, it);
        for i in 0..=m {
            r0 -= bracket(u[i], &tu[i]);
        }
        worst = worst.max(norm(&r0));
        if let Some(s) = sigma {
            for (i, ui) in u.iter().enumerate() {
                if let Ok(p) = eigenspace_project(s, -(i as i64), ui) {
                    if is_finite(ui) {
                        worst = worst.max(dist(&p, ui));
                    }
                }
            }
        }
        worst
    })
}

/// Max defect of u₀ ∈ 𝒢₀ and u₁ ∈ 𝒢₋₁ over the grid (primitive maps have E⁻¹E_z ∈ 𝒢₀ + 𝒢₋₁λ⁻¹).
pub fn primitive_defect(ctx: &AlgebraContext, u0: &SolutionGrid, u1: &SolutionGrid) -> Result<f64> {
    let sigma = ctx.sigma.as_ref().ok_or_else(|| Error::Context("needs σ".into()))?;
    let mut worst: f64 = 0.0;
    for (a, b) in u0.values().iter().zip(u1.values()) {
        worst = worst.max(dist(&eigenspace_project(sigma, 0, a)?, a));
        worst = worst.max(dist(&eigenspace_project(sigma, -1, b)?, b));
    }
    Ok(worst)
}

/// s = E(−1)E(1)⁻¹ sampled from a closed-form frame.
pub fn harmonic_map(frame: &dyn FrameEvaluator, x: Axis, y: Axis) -> SolutionGrid {
    let n = frame.dim();
    SolutionGrid::from_fn(x, y, "harmonic", &frame.ctx().id, n, |xv, yv| {
        let em = frame.eval(xv, yv, re(-1.0));
        let ep = frame.eval(xv, yv, re(1.0)).and_then(|e| inverse(&e));
        match (em, ep) {
            (Ok(a), Ok(b)) => a * b,
            _ => nan_matrix(n),
        }
    })
}

/// ∂_z = (∂x − i∂y)/2 on a grid whose second axis is y.
pub fn dz(g: &SolutionGrid) -> SolutionGrid {
    let (gx, gy) = (derivative(g, Dir::X, 1), derivative(g, Dir::T, 1));
    g.map_indexed(|ix, it| (gx.get(ix, it) - gy.get(ix, it) * I) * re(0.5))
}

/// ∂_z̄ = (∂x + i∂y)/2.
pub fn dzbar(g: &SolutionGrid) -> SolutionGrid {
    let (gx, gy) = (derivative(g, Dir::X, 1), derivative(g, Dir::T, 1));
    g.map_indexed(|ix, it| (gx.get(ix, it) + gy.get(ix, it) * I) * re(0.5))
}

/// Residual of A_z̄ = −[A, τ(A)] with A = −½ s⁻¹ s_z.
pub fn harmonic_residual(ctx: &AlgebraContext, s: &SolutionGrid) -> Result<f64> {
    if s.dim != ctx.dim {
        return Err(Error::Dimension("map and context sizes differ".into()));
    }
    let sz = dz(s);
    let mut a = s.clone();
    for it in 0..s.t.n {
        for ix in 0..s.x.n {
            let v = s.get(ix, it);
            if !is_finite(v) {
                continue;
            }
            let inv = inverse(v).map_err(|_| Error::Singular(format!("s at ({ix}, {it})")))?;
            a.set(ix, it, inv * sz.get(ix, it) * re(-0.5));
        }
    }
    let azb = dzbar(&a);
    max_finite(s, |ix, it| {
        let av = a.get(ix, it);
        norm(&(azb.get(ix, it) + bracket(av, &ctx.tau.apply(av))))
    })
}

pub(crate) fn max_finite(g: &SolutionGrid, f: impl Fn(usize, usize) -> f64) -> Result<f64> {
    let mut worst: Option<f64> = None;
    for it in 0..g.t.n {
        for ix in 0..g.x.n {
            let v = f(ix, it);
            if v.is_finite() {
                worst = Some(worst.map_or(v, |w: f64| w.max(v)));
            }
        }
    }
    worst.ok_or_else(|| Error::Grid("no interior points to evaluate".into()))
}
