//! Geometric objects read off from frames: curved flats in 𝒰₁, their Cartan
//! images in U/U₀, and Lorentz-harmonic maps from −1-flow frames.

use serde::{Deserialize, Serialize};

use crate::algebra::{Ambient, AlgebraContext, InvolutionKind};
use crate::dressing::FrameEvaluator;
use crate::error::{Error, Result};
use crate::grid::{Axis, SolutionGrid};
use crate::laxflow::{derivative, fornberg_weights, Dir};
use crate::matrix::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImmersionKind {
    /// Y = ∂E/∂λ·E⁻¹ at λ = 0, algebra-valued.
    CurvedFlat,
    /// ψ = E(1)E(−1)⁻¹, group-valued.
    Cartan,
    /// s = E(−1)E(1)⁻¹, group-valued.
    Harmonic,
}

#[derive(Clone, Debug)]
pub struct ImmersionGrid {
    pub kind: ImmersionKind,
    pub values: SolutionGrid,
    /// How the values were obtained from the frame.
    pub recipe: String,
}

impl ImmersionGrid {
    pub fn is_group_valued(&self) -> bool {
        self.kind != ImmersionKind::CurvedFlat
    }

    /// Max ‖gg* − I‖, the distance from the compact real form.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.values.dim;
        self.values
            .values()
            .iter()
            .filter(|g| is_finite(g))
            .map(|g| dist(&(g * g.adjoint()), &identity(n)))
            .fold(0.0, f64::max)
    }

    /// Point cloud `x,t,re_i_j,im_i_j,...`.
    pub fn to_csv(&self) -> Result<String> {
        self.values.to_csv()
    }
}

/// Whether the group of τ-fixed points is compact for this context.
pub fn is_compact(ctx: &AlgebraContext) -> bool {
    match ctx.tau.kind {
        InvolutionKind::NegConjTranspose => true,
        InvolutionKind::Conjugate => matches!(ctx.ambient, Ambient::So(_)),
        _ => false,
    }
}

/// First derivative with fourth-order centered differences; NaN within two nodes of the edge.
pub fn derivative4(g: &SolutionGrid, dir: Dir) -> SolutionGrid {
    let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let w = fornberg_weights(0.0, &xs, 1);
    let (n, h) = match dir {
        Dir::X => (g.x.n, g.x.step),
        Dir::T => (g.t.n, g.t.step),
    };
    g.map_indexed(|ix, it| {
        let i = if dir == Dir::X { ix } else { it };
        if i < 2 || i + 2 >= n {
            return nan_matrix(g.dim);
        }
        let mut acc = zeros(g.dim);
        for (k, wk) in w.iter().enumerate() {
            let j = i + k - 2;
            let (jx, jt) = if dir == Dir::X { (j, it) } else { (ix, j) };
            acc += g.get(jx, jt) * re(wk / h);
        }
        acc
    })
}

fn sample(frame: &dyn FrameEvaluator, x: Axis, t: Axis, tag: &str, f: impl Fn(f64, f64) -> Result<ComplexMatrix>) -> SolutionGrid {
    let n = frame.dim();
    SolutionGrid::from_fn(x, t, tag, &frame.ctx().id, n, |xv, tv| f(xv, tv).unwrap_or_else(|_| nan_matrix(n)))
}

/// Y = ∂E/∂λ·E⁻¹ at λ = 0, using the evaluator's exact λ-derivative.
pub fn curved_flat_tangent(frame: &dyn FrameEvaluator, x: Axis, t: Axis) -> Result<ImmersionGrid> {
    if frame.singular_lambdas().iter().any(|l| l.norm() < 1e-12) {
        return Err(Error::Singular("the frame has a pole at λ = 0".into()));
    }
    let zero = re(0.0);
    let values = sample(frame, x, t, "curved-flat", |xv, tv| {
        Ok(frame.d_lambda(xv, tv, zero)? * inverse(&frame.eval(xv, tv, zero)?)?)
    });
    Ok(ImmersionGrid { kind: ImmersionKind::CurvedFlat, values, recipe: "dE/dλ·E⁻¹ at λ=0".into() })
}

/// Max over the grid of |⟨Y_{xᵢ}, Y_{xⱼ}⟩ − ⟨aᵢ, aⱼ⟩| for the trace form, with
/// a₁ = a, a₂ = b the directions of the two grid axes.
pub fn gram_drift(ctx: &AlgebraContext, y: &ImmersionGrid) -> Result<f64> {
    let d = [derivative4(&y.values, Dir::X), derivative4(&y.values, Dir::T)];
    let dirs = [&ctx.a, &ctx.b];
    let mut worst: f64 = 0.0;
    let mut any = false;
    for it in 0..y.values.t.n {
        for ix in 0..y.values.x.n {
            for i in 0..2 {
                for j in 0..2 {
                    let g = trace_form(d[i].get(ix, it), d[j].get(ix, it));
                    let r = (g - trace_form(dirs[i], dirs[j])).norm();
                    if r.is_finite() {
                        any = true;
                        worst = worst.max(r);
                    }
                }
            }
        }
    }
    if any {
        Ok(worst)
    } else {
        Err(Error::Grid("grid too small for fourth-order differences".into()))
    }
}

/// ψ = E(1)E(−1)⁻¹.
pub fn cartan_map(frame: &dyn FrameEvaluator, x: Axis, t: Axis) -> Result<ImmersionGrid> {
    let values = sample(frame, x, t, "cartan", |xv, tv| {
        let em = inverse(&frame.eval(xv, tv, re(-1.0))?).map_err(|_| Error::Singular("E(−1)".into()))?;
        Ok(frame.eval(xv, tv, re(1.0))? * em)
    });
    if values.masked_count() == values.x.n * values.t.n {
        return Err(Error::Singular("no point with invertible E(−1)".into()));
    }
    Ok(ImmersionGrid { kind: ImmersionKind::Cartan, values, recipe: "E(1)E(−1)⁻¹".into() })
}

/// Max ‖σ(ψ)ψ − I‖: points of the Cartan embedding {gσ(g)⁻¹} satisfy σ(ψ) = ψ⁻¹.
pub fn cartan_membership_defect(ctx: &AlgebraContext, psi: &ImmersionGrid) -> Result<f64> {
    let sigma = ctx.sigma.as_ref().ok_or_else(|| Error::Context("the Cartan map needs σ".into()))?;
    let n = ctx.dim;
    let mut worst: f64 = 0.0;
    for g in psi.values.values().iter().filter(|g| is_finite(g)) {
        worst = worst.max(dist(&(sigma.apply_group(g)? * g), &identity(n)));
    }
    Ok(worst)
}

/// Max over the grid of ‖ψ⁻¹ψ_{xᵢ} − 2E(−1)aᵢE(−1)⁻¹‖.
pub fn cartan_derivative_defect(frame: &dyn FrameEvaluator, psi: &ImmersionGrid) -> Result<f64> {
    let g = &psi.values;
    let ctx = frame.ctx();
    let d = [derivative4(g, Dir::X), derivative4(g, Dir::T)];
    let dirs = [&ctx.a, &ctx.b];
    let mut worst: f64 = 0.0;
    for it in 0..g.t.n {
        for ix in 0..g.x.n {
            if !is_finite(d[0].get(ix, it)) || !is_finite(d[1].get(ix, it)) {
                continue;
            }
            let em = frame.eval(g.x.at(ix), g.t.at(it), re(-1.0))?;
            let emi = inverse(&em)?;
            let pinv = inverse(g.get(ix, it))?;
            for k in 0..2 {
                let lhs = &pinv * d[k].get(ix, it);
                let rhs = &em * dirs[k] * &emi * re(2.0);
                worst = worst.max(dist(&lhs, &rhs));
            }
        }
    }
    Ok(worst)
}

/// s = E(−1)E(1)⁻¹ for a −1-flow frame.
pub fn harmonic_from_minus1(frame: &dyn FrameEvaluator, x: Axis, t: Axis) -> Result<ImmersionGrid> {
    let values = sample(frame, x, t, "harmonic", |xv, tv| {
        let ep = inverse(&frame.eval(xv, tv, re(1.0))?).map_err(|_| Error::Singular("E(1)".into()))?;
        Ok(frame.eval(xv, tv, re(-1.0))? * ep)
    });
    if values.masked_count() == values.x.n * values.t.n {
        return Err(Error::Singular("no point with invertible E(1)".into()));
    }
    Ok(ImmersionGrid { kind: ImmersionKind::Harmonic, values, recipe: "E(−1)E(1)⁻¹".into() })
}

fn half_log_derivative(s: &SolutionGrid, d: &SolutionGrid) -> SolutionGrid {
    s.map_indexed(|ix, it| match inverse(s.get(ix, it)) {
        Ok(inv) => inv * d.get(ix, it) * re(0.5),
        Err(_) => nan_matrix(s.dim),
    })
}

/// Residual of A_t = −B_x = [A, B] with A = ½s⁻¹s_x, B = ½s⁻¹s_t.
pub fn lorentz_harmonic_residual(s: &ImmersionGrid) -> Result<f64> {
    let g = &s.values;
    let a = half_log_derivative(g, &derivative(g, Dir::X, 1));
    let b = half_log_derivative(g, &derivative(g, Dir::T, 1));
    let (at, bx) = (derivative(&a, Dir::T, 1), derivative(&b, Dir::X, 1));
    let mut worst: Option<f64> = None;
    for it in 0..g.t.n {
        for ix in 0..g.x.n {
            let br = bracket(a.get(ix, it), b.get(ix, it));
            let r = dist(at.get(ix, it), &br).max(dist(&-bx.get(ix, it), &br));
            if r.is_finite() {
                worst = Some(worst.map_or(r, |w: f64| w.max(r)));
            }
        }
    }
    worst.ok_or_else(|| Error::Grid("no interior points to evaluate".into()))
}

/// Max distance between the spectra of s⁻¹s_x, s⁻¹s_t and those of 2a, 2b.
pub fn harmonic_spectrum_drift(ctx: &AlgebraContext, s: &ImmersionGrid) -> f64 {
    let g = &s.values;
    let d = [derivative4(g, Dir::X), derivative4(g, Dir::T)];
    let refs = [eigenvalues(&(&ctx.a * re(2.0))), eigenvalues(&(&ctx.b * re(2.0)))];
    let mut worst: f64 = 0.0;
    for it in 0..g.t.n {
        for ix in 0..g.x.n {
            let Ok(inv) = inverse(g.get(ix, it)) else { continue };
            for k in 0..2 {
                let m = &inv * d[k].get(ix, it);
                if is_finite(&m) {
                    worst = worst.max(spectrum_distance(&eigenvalues(&m), &refs[k]));
                }
            }
        }
    }
    worst
}
