//! Lax connections on grids: assembly from solutions, zero-curvature and
//! named-equation residuals, and frame integration.
//!
//! Derivatives are centered, second-order accurate differences. A point whose
//! stencil leaves the grid or touches a masked value is itself masked (NaN), so
//! every residual is a maximum over the points where it is defined.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::ComplexFloat;

use crate::algebra::AlgebraContext;
use crate::error::{Error, Result};
use crate::grid::{Axis, SolutionGrid};
use crate::jetcalc::{compute_q_sequence, flow_rhs, DiffPolyMatrix, JetVar};
use crate::laurent::LaurentLoop;
use crate::matrix::*;

/// Default flatness gate checked before integrating a frame.
pub const FLATNESS_GATE: f64 = 1e-4;

/// Default spectral parameters for flatness checks; closed under conjugation.
pub fn default_lambdas() -> Vec<C64> {
    vec![re(1.0), re(-1.0), I, -I, re(2.0), re(0.5), c(FRAC_1_SQRT_2, FRAC_1_SQRT_2), c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    X,
    T,
}

/// Fornberg's weights for the m-th derivative at `z` from nodes `xs`.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Half-width and unit-spacing weights of the narrowest second-order centered stencil.
pub fn centered_stencil(order: usize) -> (usize, Vec<f64>) {
    let half = order.div_ceil(2).max(1);
    let nodes: Vec<f64> = (-(half as i64)..=half as i64).map(|k| k as f64).collect();
    (half, fornberg_weights(0.0, &nodes, order))
}

/// The `order`-th derivative along one axis; masked where the stencil does not fit.
pub fn derivative(g: &SolutionGrid, dir: Dir, order: usize) -> SolutionGrid {
    if order == 0 {
        return g.clone();
    }
    let (half, w) = centered_stencil(order);
    let (ax, n_along) = match dir {
        Dir::X => (g.x, g.x.n),
        Dir::T => (g.t, g.t.n),
    };
    let scale = re(ax.step.powi(order as i32).recip());
    let d = g.dim;
    g.map_indexed(|ix, it| {
        let pos = if dir == Dir::X { ix } else { it };
        if pos < half || pos + half >= n_along {
            return nan_matrix(d);
        }
        let mut acc = zeros(d);
        for (k, wk) in w.iter().enumerate() {
            if *wk == 0.0 {
                continue;
            }
            let p = pos + k - half;
            let v = if dir == Dir::X { g.get(p, it) } else { g.get(ix, p) };
            acc += v * re(*wk);
        }
        acc * scale
    })
}

/// Max of a pointwise norm over the points where it is finite.
fn finite_max(vals: impl Iterator<Item = f64>) -> Result<f64> {
    let mut any = false;
    let mut m: f64 = 0.0;
    for v in vals {
        if v.is_finite() {
            any = true;
            m = m.max(v);
        }
    }
    if any {
        Ok(m)
    } else {
        Err(Error::Grid("no interior points to evaluate".into()))
    }
}

/// Per-point (A_x(λ), A_t(λ)) pair of Laurent polynomials.
#[derive(Clone, Debug)]
pub struct ConnectionField {
    pub x: Axis,
    pub t: Axis,
    pub dim: usize,
    pub tag: String,
    pub ax: Vec<LaurentLoop>,
    pub at: Vec<LaurentLoop>,
}

impl ConnectionField {
    pub fn from_fn(
        x: Axis,
        t: Axis,
        dim: usize,
        tag: &str,
        mut f: impl FnMut(usize, usize) -> (LaurentLoop, LaurentLoop),
    ) -> Self {
        let mut ax = Vec::with_capacity(x.n * t.n);
        let mut at = Vec::with_capacity(x.n * t.n);
        for it in 0..t.n {
            for ix in 0..x.n {
                let (a, b) = f(ix, it);
                ax.push(a);
                at.push(b);
            }
        }
        Self { x, t, dim, tag: tag.into(), ax, at }
    }

    fn idx(&self, ix: usize, it: usize) -> usize {
        it * self.x.n + ix
    }

    pub fn eval(&self, ix: usize, it: usize, lambda: C64) -> (ComplexMatrix, ComplexMatrix) {
        let k = self.idx(ix, it);
        (self.ax[k].eval(lambda), self.at[k].eval(lambda))
    }

    /// Both components at a fixed λ, as grids.
    pub fn sample(&self, lambda: C64) -> (SolutionGrid, SolutionGrid) {
        (
            SolutionGrid::from_indexed(self.x, self.t, &self.tag, "", |ix, it| self.ax[self.idx(ix, it)].eval(lambda)),
            SolutionGrid::from_indexed(self.x, self.t, &self.tag, "", |ix, it| self.at[self.idx(ix, it)].eval(lambda)),
        )
    }
}

fn masked_loop(dim: usize) -> LaurentLoop {
    LaurentLoop::constant(nan_matrix(dim))
}

/// Numeric form of a differential polynomial matrix for fast pointwise evaluation.
struct CompiledMatrix {
    dim: usize,
    entries: Vec<Vec<(Vec<JetVar>, C64)>>,
}

impl CompiledMatrix {
    fn new(m: &DiffPolyMatrix) -> Self {
        let entries = m
            .entries
            .iter()
            .map(|p| p.terms().map(|(vars, coef)| (vars.to_vec(), coef.to_c64())).collect())
            .collect();
        Self { dim: m.dim, entries }
    }

    fn eval(&self, jets: &dyn Fn(&JetVar) -> C64) -> ComplexMatrix {
        let n = self.dim;
        ComplexMatrix::from_fn(n, n, |i, j| {
            self.entries[i * n + j]
                .iter()
                .map(|(vars, coef)| vars.iter().fold(*coef, |acc, v| acc * jets(v)))
                .sum()
        })
    }
}

/// Jet values of u's perp coordinates, from grid derivatives up to `max_order`.
struct GridJets {
    coords: Vec<Vec<Vec<C64>>>,
}

impl GridJets {
    fn new(ctx: &AlgebraContext, u: &SolutionGrid, max_order: usize) -> Result<Self> {
        let mut coords = Vec::new();
        for k in 0..=max_order {
            let dk = derivative(u, Dir::X, k);
            let per_point = dk
                .values()
                .iter()
                .map(|m| {
                    if is_finite(m) {
                        ctx.perp_coordinates(m)
                    } else {
                        Ok(vec![c(f64::NAN, f64::NAN); ctx.basis_perp.len()])
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            coords.push(per_point);
        }
        Ok(Self { coords })
    }

    fn value(&self, point: usize, v: &JetVar) -> C64 {
        let z = self.coords[v.order as usize][point][v.component as usize];
        if v.conj {
            z.conj()
        } else {
            z
        }
    }
}

fn check_grid(ctx: &AlgebraContext, g: &SolutionGrid) -> Result<()> {
    if g.dim != ctx.dim {
        return Err(Error::Dimension(format!("grid is {0}x{0}, context is {1}x{1}", g.dim, ctx.dim)));
    }
    Ok(())
}

/// Lax pair of the (b, j)-flow: A_x = aλ + u, A_t = Σ_{i=0}^{j} Q_{b,j−i}(u) λ^i.
pub fn assemble_lax(ctx: &AlgebraContext, b: &ComplexMatrix, j: usize, u: &SolutionGrid) -> Result<ConnectionField> {
    check_grid(ctx, u)?;
    let qs: Vec<CompiledMatrix> = compute_q_sequence(ctx, b, j)?.iter().map(CompiledMatrix::new).collect();
    let needed = j.saturating_sub(1);
    let (half, _) = centered_stencil(needed.max(1));
    if u.x.n < 2 * half + 1 {
        return Err(Error::Grid(format!("{} x-points cannot resolve derivatives of order {needed}", u.x.n)));
    }
    let jets = GridJets::new(ctx, u, needed)?;
    let d = ctx.dim;
    Ok(ConnectionField::from_fn(u.x, u.t, d, &format!("lax-{j}"), |ix, it| {
        let p = u.idx(ix, it);
        let val = |v: &JetVar| jets.value(p, v);
        let ux = u.get(ix, it);
        if (0..=needed).any(|k| jets.coords[k][p].iter().any(|z| !z.is_finite())) {
            return (masked_loop(d), masked_loop(d));
        }
        let ax = LaurentLoop::new(d, 0, vec![ux.clone(), ctx.a.clone()]);
        let at = LaurentLoop::new(d, 0, (0..=j).map(|i| qs[j - i].eval(&val)).collect());
        (ax, at)
    }))
}

/// Lax pair of the −1-flow: A_x = aλ + u, A_t = λ⁻¹v.
pub fn assemble_minus1(ctx: &AlgebraContext, u: &SolutionGrid, v: &SolutionGrid) -> Result<ConnectionField> {
    check_grid(ctx, u)?;
    check_grid(ctx, v)?;
    if u.x != v.x || u.t != v.t {
        return Err(Error::Grid("u and v live on different grids".into()));
    }
    let d = ctx.dim;
    Ok(ConnectionField::from_fn(u.x, u.t, d, "minus1", |ix, it| {
        (
            LaurentLoop::new(d, 0, vec![u.get(ix, it).clone(), ctx.a.clone()]),
            LaurentLoop::monomial(v.get(ix, it).clone(), -1),
        )
    }))
}

/// Lax pair of the U/U₀-system in two variables with a₁ = ctx.a, a₂ = ctx.b:
/// θ = Σ (a_i λ + [a_i, v]) dx_i.
pub fn assemble_uu0(ctx: &AlgebraContext, v: &SolutionGrid) -> Result<ConnectionField> {
    check_grid(ctx, v)?;
    let d = ctx.dim;
    Ok(ConnectionField::from_fn(v.x, v.t, d, "uu0", |ix, it| {
        let vv = v.get(ix, it);
        (
            LaurentLoop::new(d, 0, vec![bracket(&ctx.a, vv), ctx.a.clone()]),
            LaurentLoop::new(d, 0, vec![bracket(&ctx.b, vv), ctx.b.clone()]),
        )
    }))
}

/// Zero-curvature defect A_t − B_x − [A, B] for E_x = EA, E_t = EB, maximized over
/// the points where it is defined and over the λ-samples.
pub fn flatness_residual(theta: &ConnectionField, lambdas: &[C64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        worst = worst.max(flatness_residual_at(theta, l)?);
    }
    Ok(worst)
}

fn flatness_residual_at(theta: &ConnectionField, lambda: C64) -> Result<f64> {
    if theta.x.n < 3 || theta.t.n < 3 {
        return Err(Error::Grid("flatness needs at least a 3x3 grid".into()));
    }
    let (a, b) = theta.sample(lambda);
    let at = derivative(&a, Dir::T, 1);
    let bx = derivative(&b, Dir::X, 1);
    finite_max((0..theta.t.n).flat_map(|it| (0..theta.x.n).map(move |ix| (ix, it))).map(|(ix, it)| {
        let (av, bv) = (a.get(ix, it), b.get(ix, it));
        norm(&(at.get(ix, it) - bx.get(ix, it) - bracket(av, bv)))
    }))
}

/// Frame E(x, t, λ) with E = I at the grid point nearest the origin.
#[derive(Clone, Debug)]
pub struct FrameGrid {
    pub lambda: C64,
    pub base: (usize, usize),
    pub frames: SolutionGrid,
}

impl FrameGrid {
    pub fn get(&self, ix: usize, it: usize) -> &ComplexMatrix {
        self.frames.get(ix, it)
    }
}

pub fn integrate_frame(theta: &ConnectionField, lambda: C64) -> Result<FrameGrid> {
    integrate_frame_gated(theta, lambda, FLATNESS_GATE)
}

/// RK4 along the x-axis through the base point, then along every t-line. Values of
/// the connection between grid nodes come from four-point cubic interpolation.
pub fn integrate_frame_gated(theta: &ConnectionField, lambda: C64, gate: f64) -> Result<FrameGrid> {
    let residual = flatness_residual_at(theta, lambda)?;
    if !(residual <= gate) {
        return Err(Error::FlatnessGate { residual, gate });
    }
    let (a, b) = theta.sample(lambda);
    let d = theta.dim;
    let ix0 = theta.x.nearest(0.0);
    let it0 = theta.t.nearest(0.0);
    let mut frames = a.map_indexed(|_, _| nan_matrix(d));
    frames.tag = "frame".into();

    let row: Vec<ComplexMatrix> = (0..theta.x.n).map(|ix| a.get(ix, it0).clone()).collect();
    let along_x = rk4_line(&row, theta.x.step, ix0, identity(d))?;
    for (ix, e0) in along_x.into_iter().enumerate() {
        let col: Vec<ComplexMatrix> = (0..theta.t.n).map(|it| b.get(ix, it).clone()).collect();
        let line = rk4_line(&col, theta.t.step, it0, e0)?;
        for (it, e) in line.into_iter().enumerate() {
            frames.set(ix, it, e);
        }
    }
    Ok(FrameGrid { lambda, base: (ix0, it0), frames })
}

/// Solve Y' = Y·A along a line of node values, outward from node `i0` with Y(i0) = y0.
fn rk4_line(a: &[ComplexMatrix], h: f64, i0: usize, y0: ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    let n = a.len();
    let d = y0.nrows();
    let mut out = vec![nan_matrix(d); n];
    out[i0] = y0;
    // Value at the midpoint between nodes i and i+1.
    let mid = |i: usize| -> ComplexMatrix {
        if n < 4 {
            return (&a[i] + &a[i + 1]) * re(0.5);
        }
        let w = |k: usize, c: f64| &a[k] * re(c / 16.0);
        if i == 0 {
            w(0, 5.0) + w(1, 15.0) + w(2, -5.0) + w(3, 1.0)
        } else if i + 2 >= n {
            w(n - 4, 1.0) + w(n - 3, -5.0) + w(n - 2, 15.0) + w(n - 1, 5.0)
        } else {
            w(i - 1, -1.0) + w(i, 9.0) + w(i + 1, 9.0) + w(i + 2, -1.0)
        }
    };
    let step = |y: &ComplexMatrix, a0: &ComplexMatrix, am: &ComplexMatrix, a1: &ComplexMatrix, h: f64| {
        let k1 = y * a0;
        let k2 = (y + &k1 * re(h / 2.0)) * am;
        let k3 = (y + &k2 * re(h / 2.0)) * am;
        let k4 = (y + &k3 * re(h)) * a1;
        y + (k1 + k2 * re(2.0) + k3 * re(2.0) + k4) * re(h / 6.0)
    };
    for i in i0 + 1..n {
        out[i] = step(&out[i - 1], &a[i - 1], &mid(i - 1), &a[i], h);
    }
    for i in (0..i0).rev() {
        out[i] = step(&out[i + 1], &a[i + 1], &mid(i), &a[i], -h);
    }
    if out.iter().any(|m| m.iter().any(|z| z.norm() > 1e12)) {
        return Err(Error::Unstable("frame norm exceeded 1e12".into()));
    }
    Ok(out)
}

/// Numerical logarithmic derivatives (E⁻¹E_x, E⁻¹E_t) of a grid of frames.
pub fn log_derivative(frames: &SolutionGrid) -> (SolutionGrid, SolutionGrid) {
    let ex = derivative(frames, Dir::X, 1);
    let et = derivative(frames, Dir::T, 1);
    let apply = |dg: &SolutionGrid| {
        frames.map_indexed(|ix, it| match inverse(frames.get(ix, it)) {
            Ok(inv) => inv * dg.get(ix, it),
            Err(_) => nan_matrix(frames.dim),
        })
    };
    (apply(&ex), apply(&et))
}

/// Equations with a residual evaluator. Scalar equations take one 1×1 grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Equation {
    /// q_t = (i/2)(q_xx + 2|q|²q).
    Nls,
    /// q_t = −¼(q_xxx + 6q²q_x).
    Mkdv,
    /// q_xt = sin q.
    Sge,
    /// w_xt = e^w − e^{−2w}.
    Tzitzeica,
    /// u_t = [a, v], v_x = −[u, v]; fields (u, v).
    Minus1,
    /// [a₁, v_t] − [a₂, v_x] = [[a₁, v], [a₂, v]] with a₁ = ctx.a, a₂ = ctx.b.
    Uu0,
    /// The O(2n)/O(n)×O(n)-system for n = 2 written in F.
    Grassmann,
    /// u_t = (Q_{b,j})_x + [u, Q_{b,j}].
    Flow { b: ComplexMatrix, j: usize },
    /// A_z̄ = −[A, τ(A)] with A = −½ s⁻¹ s_z.
    Harmonic,
}

impl Equation {
    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "nls" => Self::Nls,
            "mkdv" => Self::Mkdv,
            "sge" => Self::Sge,
            "tzitzeica" => Self::Tzitzeica,
            "minus1" => Self::Minus1,
            "uu0" => Self::Uu0,
            "grassmann" => Self::Grassmann,
            "harmonic" => Self::Harmonic,
            _ => return Err(Error::UnknownTag(tag.into())),
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Nls => "nls",
            Self::Mkdv => "mkdv",
            Self::Sge => "sge",
            Self::Tzitzeica => "tzitzeica",
            Self::Minus1 => "minus1",
            Self::Uu0 => "uu0",
            Self::Grassmann => "grassmann",
            Self::Flow { .. } => "flow",
            Self::Harmonic => "harmonic",
        }
    }

    pub fn arity(&self) -> usize {
        if *self == Self::Minus1 {
            2
        } else {
            1
        }
    }
}

/// Max-norm residual of `eq` over the points where all derivatives are defined.
pub fn pde_residual(eq: &Equation, ctx: &AlgebraContext, fields: &[&SolutionGrid]) -> Result<f64> {
    if fields.len() != eq.arity() {
        return Err(Error::Dimension(format!("{} expects {} field(s)", eq.tag(), eq.arity())));
    }
    let g = fields[0];
    let scalar = |g: &SolutionGrid| -> Result<()> {
        if g.dim != 1 {
            return Err(Error::Dimension(format!("{} takes a scalar grid", eq.tag())));
        }
        Ok(())
    };
    let pts = || (0..g.t.n).flat_map(move |it| (0..g.x.n).map(move |ix| (ix, it)));
    match eq {
        Equation::Nls => {
            scalar(g)?;
            let (qt, qxx) = (derivative(g, Dir::T, 1), derivative(g, Dir::X, 2));
            finite_max(pts().map(|(ix, it)| {
                let q = g.scalar_at(ix, it);
                (qt.scalar_at(ix, it) - I * 0.5 * (qxx.scalar_at(ix, it) + 2.0 * q.norm_sqr() * q)).norm()
            }))
        }
        Equation::Mkdv => {
            scalar(g)?;
            let (qt, qx, qxxx) = (derivative(g, Dir::T, 1), derivative(g, Dir::X, 1), derivative(g, Dir::X, 3));
            finite_max(pts().map(|(ix, it)| {
                let q = g.scalar_at(ix, it);
                (qt.scalar_at(ix, it) + 0.25 * (qxxx.scalar_at(ix, it) + 6.0 * q * q * qx.scalar_at(ix, it))).norm()
            }))
        }
        Equation::Sge | Equation::Tzitzeica => {
            scalar(g)?;
            let qxt = derivative(&derivative(g, Dir::X, 1), Dir::T, 1);
            let sge = *eq == Equation::Sge;
            finite_max(pts().map(|(ix, it)| {
                let q = g.scalar_at(ix, it);
                let rhs = if sge { q.sin() } else { q.exp() - (-2.0 * q).exp() };
                (qxt.scalar_at(ix, it) - rhs).norm()
            }))
        }
        Equation::Minus1 => {
            let v = fields[1];
            check_grid(ctx, g)?;
            check_grid(ctx, v)?;
            let (ut, vx) = (derivative(g, Dir::T, 1), derivative(v, Dir::X, 1));
            finite_max(pts().map(|(ix, it)| {
                let (uu, vv) = (g.get(ix, it), v.get(ix, it));
                let r1 = norm(&(ut.get(ix, it) - bracket(&ctx.a, vv)));
                let r2 = norm(&(vx.get(ix, it) + bracket(uu, vv)));
                if r1.is_finite() && r2.is_finite() {
                    r1.max(r2)
                } else {
                    f64::NAN
                }
            }))
        }
        Equation::Uu0 => {
            check_grid(ctx, g)?;
            let (vx, vt) = (derivative(g, Dir::X, 1), derivative(g, Dir::T, 1));
            let (a1, a2) = (&ctx.a, &ctx.b);
            finite_max(pts().map(|(ix, it)| {
                let v = g.get(ix, it);
                let lhs = bracket(a1, vt.get(ix, it)) - bracket(a2, vx.get(ix, it));
                norm(&(lhs - bracket(&bracket(a1, v), &bracket(a2, v))))
            }))
        }
        Equation::Grassmann => {
            if g.dim != 2 {
                return Err(Error::Dimension("the two-variable Grassmannian system takes a 2x2 F".into()));
            }
            let d = [derivative(g, Dir::X, 1), derivative(g, Dir::T, 1)];
            finite_max(pts().map(|(ix, it)| {
                let f = g.get(ix, it);
                let df = |k: usize, i: usize, j: usize| d[k].get(ix, it)[(i, j)];
                let mut worst: f64 = 0.0;
                for (i, j) in [(0usize, 1usize), (1, 0)] {
                    let s1: C64 = (0..2).map(|k| f[(k, i)] * f[(k, j)]).sum();
                    let s2: C64 = (0..2).map(|k| f[(i, k)] * f[(j, k)]).sum();
                    let e1 = df(i, i, j) + df(j, j, i) + s1;
                    let e2 = df(j, i, j) + df(i, j, i) + s2;
                    worst = worst.max(e1.norm()).max(e2.norm());
                }
                let diag = f[(0, 0)].norm().max(f[(1, 1)].norm());
                worst.max(diag)
            }))
        }
        Equation::Flow { b, j } => {
            check_grid(ctx, g)?;
            let rhs = CompiledMatrix::new(&flow_rhs(ctx, b, *j)?);
            let jets = GridJets::new(ctx, g, *j)?;
            let ut = derivative(g, Dir::T, 1);
            finite_max(pts().map(|(ix, it)| {
                let p = g.idx(ix, it);
                let val = |v: &JetVar| jets.value(p, v);
                norm(&(ut.get(ix, it) - rhs.eval(&val)))
            }))
        }
        Equation::Harmonic => crate::elliptic::harmonic_residual(ctx, g),
    }
}

/// Matrix fields behind a scalar or block solution, in the form the Lax pair of
/// `eq` consumes: u for the flows, (u, v) for the −1-flows and v for the
/// U/U₀-systems. Derivatives needed by the lift are taken on the grid.
pub fn lift(eq: &Equation, ctx: &AlgebraContext, g: &SolutionGrid) -> Result<Vec<SolutionGrid>> {
    let tagged = |mut s: SolutionGrid, tag: &str| {
        s.tag = tag.into();
        s.ctx = ctx.id.clone();
        s
    };
    let two = |m: [[C64; 2]; 2]| from_rows(&[vec![m[0][0], m[0][1]], vec![m[1][0], m[1][1]]]);
    let zero = re(0.0);
    match eq {
        Equation::Nls | Equation::Mkdv => {
            if g.dim != 1 || ctx.dim != 2 {
                return Err(Error::Dimension("scalar flows lift into sl(2)".into()));
            }
            let nls = *eq == Equation::Nls;
            Ok(vec![tagged(
                g.map_indexed(|ix, it| {
                    let q = g.scalar_at(ix, it);
                    let r = if nls { -q.conj() } else { -q };
                    two([[zero, q], [r, zero]])
                }),
                "u",
            )])
        }
        Equation::Sge => {
            if g.dim != 1 || ctx.dim != 2 {
                return Err(Error::Dimension("SGE lifts into sl(2)".into()));
            }
            let qx = derivative(g, Dir::X, 1);
            let u = g.map_indexed(|ix, it| {
                let h = qx.scalar_at(ix, it) * 0.5;
                two([[zero, h], [-h, zero]])
            });
            let v = g.map_indexed(|ix, it| {
                let half = g.scalar_at(ix, it) * 0.5;
                let (cs, sn) = (half.cos(), half.sin());
                let rot = two([[cs, sn], [-sn, cs]]);
                rot.transpose() * &ctx.b * rot
            });
            Ok(vec![tagged(u, "u"), tagged(v, "v")])
        }
        Equation::Tzitzeica => {
            if g.dim != 1 || ctx.dim != 3 {
                return Err(Error::Dimension("Tzitzeica lifts into sl(3)".into()));
            }
            let wx = derivative(g, Dir::X, 1);
            let u = g.map_indexed(|ix, it| {
                let h = wx.scalar_at(ix, it);
                diag(&[h, -h, zero])
            });
            let v = g.map_indexed(|ix, it| {
                let w = g.scalar_at(ix, it);
                let gm = diag(&[w.exp(), (-w).exp(), re(1.0)]);
                let gi = diag(&[(-w).exp(), w.exp(), re(1.0)]);
                gi * &ctx.b * gm
            });
            Ok(vec![tagged(u, "u"), tagged(v, "v")])
        }
        Equation::Grassmann => {
            let n = g.dim;
            if ctx.dim != 2 * n {
                return Err(Error::Dimension("F must be n x n in an o(2n) context".into()));
            }
            Ok(vec![tagged(
                g.map_indexed(|ix, it| {
                    let f = g.get(ix, it);
                    let mut v = zeros(2 * n);
                    v.view_mut((0, n), (n, n)).copy_from(f);
                    v.view_mut((n, 0), (n, n)).copy_from(&(-f.transpose()));
                    v
                }),
                "v",
            )])
        }
        Equation::Minus1 | Equation::Uu0 | Equation::Flow { .. } | Equation::Harmonic => Ok(vec![g.clone()]),
    }
}

/// The Lax pair whose flatness is equivalent to `eq`, built from the lifted fields.
pub fn assemble_for(eq: &Equation, ctx: &AlgebraContext, fields: &[SolutionGrid]) -> Result<ConnectionField> {
    let one = || fields.first().ok_or_else(|| Error::Dimension("missing field".into()));
    match eq {
        Equation::Nls => assemble_lax(ctx, &ctx.a, 2, one()?),
        Equation::Mkdv => assemble_lax(ctx, &ctx.a, 3, one()?),
        Equation::Flow { b, j } => assemble_lax(ctx, b, *j, one()?),
        Equation::Sge | Equation::Tzitzeica | Equation::Minus1 => {
            if fields.len() != 2 {
                return Err(Error::Dimension("the −1-flow needs (u, v)".into()));
            }
            assemble_minus1(ctx, &fields[0], &fields[1])
        }
        Equation::Uu0 | Equation::Grassmann => assemble_uu0(ctx, one()?),
        Equation::Harmonic => Err(Error::UnknownTag("harmonic maps carry no (x, t) Lax pair here".into())),
    }
}
