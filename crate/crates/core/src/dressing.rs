//! Dressing by rational loops with simple poles.
//!
//! A dressed frame is Ẽ(λ) = g(λ) E(λ) g̃(λ)⁻¹, where g̃ has the shape of g but
//! carries the projection π̃(x, t) read off from E at the pole. Since E = I at
//! the origin, g̃ = g there and Ẽ stays normalized. Frames are closed-form
//! compositions, so they can be evaluated at any λ off the pole set.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::{centralizer_split, check_reality, AlgebraContext, Level, RealityCondition};
use crate::error::{Error, Result};
use crate::grid::{Axis, SolutionGrid};
use crate::matrix::*;

/// Norm floor below which a transformed span counts as degenerate.
pub const SPAN_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// π + ζ_α(λ)π^⊥ with ζ_α(λ) = (λ−α)(ᾱ−1)/((ᾱλ−1)(1−α)).
    FAlphaPi,
    /// π + (λ−z)/(λ−z̄) π^⊥.
    GIsPi,
    /// g_{is,π} g_{−is,π̄}.
    HIsPi,
    /// Rank-one poles at μ, β²μ, β⁴μ with the sixfold symmetry of the Tzitzeica context.
    TzitzeicaTriple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealityTag {
    #[serde(rename = "g-tau")]
    GTau,
    U,
    #[serde(rename = "g-tau-sigma")]
    GTauSigma,
}

impl Family {
    pub fn reality(self) -> RealityTag {
        match self {
            Family::FAlphaPi => RealityTag::GTau,
            Family::GIsPi => RealityTag::U,
            Family::HIsPi | Family::TzitzeicaTriple => RealityTag::GTauSigma,
        }
    }
}

/// Simple-pole element with its projection data; `pi` is the Hermitian projection onto span V.
#[derive(Clone, Debug)]
pub struct SimplePoleDressing {
    pub family: Family,
    pub pole: C64,
    pub v: Vec<ComplexVector>,
    pub reality: RealityTag,
    pub pi: ComplexMatrix,
}

impl SimplePoleDressing {
    pub fn new(family: Family, pole: C64, v: Vec<ComplexVector>, reality: RealityTag) -> Result<Self> {
        if family == Family::TzitzeicaTriple {
            return Err(Error::Dressing("use RationalDressing::tzitzeica for this family".into()));
        }
        if reality != family.reality() {
            return Err(Error::Dressing(format!("{family:?} carries the {:?} reality condition", family.reality())));
        }
        if v.is_empty() || v.iter().any(|w| w.len() != v[0].len()) {
            return Err(Error::Dressing("V must be a nonempty list of equal-length vectors".into()));
        }
        if !pole.is_finite() {
            return Err(Error::Dressing("pole must be finite".into()));
        }
        match family {
            Family::FAlphaPi => {
                if (pole.norm() - 1.0).abs() < 1e-9 || pole.norm() < 1e-9 {
                    return Err(Error::Dressing("α must lie off the unit circle and away from 0".into()));
                }
            }
            Family::GIsPi => {
                if pole.im.abs() < 1e-9 {
                    return Err(Error::Dressing("pole must be off the real axis".into()));
                }
            }
            Family::HIsPi => {
                if pole.re.abs() > 1e-12 || pole.im.abs() < 1e-9 {
                    return Err(Error::Dressing("pole must be is with s real and nonzero".into()));
                }
                for w in &v {
                    let iso: C64 = w.iter().map(|z| z * z).sum();
                    if iso.norm() > 1e-10 * w.norm_squared().max(1.0) {
                        return Err(Error::Dressing("V must be isotropic (|W| = |Z| for V = (W, iZ))".into()));
                    }
                }
            }
            Family::TzitzeicaTriple => unreachable!(),
        }
        let pi = hermitian_projection(&v, SPAN_FLOOR)?;
        if family == Family::HIsPi && norm(&(&pi * conj(&pi))) > 1e-10 {
            return Err(Error::Dressing("π and π̄ must be orthogonal".into()));
        }
        Ok(Self { family, pole, v, reality, pi })
    }

    /// Where the base frame is evaluated to update the projection.
    pub fn frame_point(&self) -> C64 {
        match self.family {
            Family::FAlphaPi => self.pole,
            _ => self.pole.conj(),
        }
    }

    fn zeta(&self, lambda: C64) -> C64 {
        let z = self.pole;
        match self.family {
            Family::FAlphaPi => (lambda - z) * (z.conj() - 1.0) / ((z.conj() * lambda - 1.0) * (1.0 - z)),
            _ => (lambda - z) / (lambda - z.conj()),
        }
    }

    fn zeta_prime(&self, lambda: C64) -> C64 {
        let z = self.pole;
        match self.family {
            Family::FAlphaPi => {
                let k = (z.conj() - 1.0) / (1.0 - z);
                let den = z.conj() * lambda - 1.0;
                k * (den - (lambda - z) * z.conj()) / (den * den)
            }
            _ => {
                let den = lambda - z.conj();
                (z - z.conj()) / (den * den)
            }
        }
    }

    /// The element at λ with projection p (π itself or a transformed π̃).
    pub fn element(&self, lambda: C64, p: &ComplexMatrix) -> ComplexMatrix {
        let n = p.nrows();
        let basic = |zeta: C64, p: &ComplexMatrix| p + (identity(n) - p) * zeta;
        match self.family {
            Family::HIsPi => {
                let z = self.pole;
                let other = (lambda + z) / (lambda - z);
                basic(self.zeta(lambda), p) * basic(other, &conj(p))
            }
            _ => basic(self.zeta(lambda), p),
        }
    }

    pub fn element_inverse(&self, lambda: C64, p: &ComplexMatrix) -> ComplexMatrix {
        let n = p.nrows();
        let basic = |zeta: C64, p: &ComplexMatrix| p + (identity(n) - p) * zeta.inv();
        match self.family {
            Family::HIsPi => {
                let z = self.pole;
                let other = (lambda + z) / (lambda - z);
                basic(other, &conj(p)) * basic(self.zeta(lambda), p)
            }
            _ => basic(self.zeta(lambda), p),
        }
    }

    pub fn element_dlambda(&self, lambda: C64, p: &ComplexMatrix) -> ComplexMatrix {
        let n = p.nrows();
        let perp = identity(n) - p;
        match self.family {
            Family::HIsPi => {
                let z = self.pole;
                let pb = conj(p);
                let pbperp = identity(n) - &pb;
                let other = (lambda + z) / (lambda - z);
                let other_d = -(z + z) / ((lambda - z) * (lambda - z));
                let first = p + &perp * self.zeta(lambda);
                let second = &pb + &pbperp * other;
                &perp * self.zeta_prime(lambda) * second + first * pbperp * other_d
            }
            _ => perp * self.zeta_prime(lambda),
        }
    }

    /// Coefficient of λ⁻¹ in the expansion at ∞ (g and h are normalized to I there).
    pub fn coefficient_minus1(&self, p: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = p.nrows();
        let z = self.pole;
        match self.family {
            Family::GIsPi => Ok((identity(n) - p) * (z.conj() - z)),
            Family::HIsPi => Ok((p - conj(p)) * (z - z.conj())),
            _ => Err(Error::Dressing("f_{α,π} is normalized at λ = 1, not at ∞".into())),
        }
    }

    /// Projection onto the transformed span, from the base frame at [`frame_point`](Self::frame_point).
    pub fn update_projection(&self, frame_at_pole: &ComplexMatrix) -> Result<ComplexMatrix> {
        update_projection(self, frame_at_pole)
    }
}

/// π̃ for `el` given the base frame at the family's evaluation point:
/// E(α)ᴴV for f_{α,π}, and E(z̄)⁻¹V for g and h.
pub fn update_projection(el: &SimplePoleDressing, frame_at_pole: &ComplexMatrix) -> Result<ComplexMatrix> {
    let map = match el.family {
        Family::FAlphaPi => frame_at_pole.adjoint(),
        _ => inverse(frame_at_pole)?,
    };
    let vs: Vec<ComplexVector> = el.v.iter().map(|w| &map * w).collect();
    if let Some(nw) = vs.iter().map(|w| w.norm()).find(|&nw| !(nw > SPAN_FLOOR)) {
        return Err(Error::DegenerateSpan(nw));
    }
    hermitian_projection(&vs, SPAN_FLOOR)
}

/// χ(λ) = I + Σ p_k q_k /(λ − μ_k) fixed by rank-one kernel data: row vectors q_k
/// at the poles μ_k and column vectors r_j with χ(ν_j) r_j = 0 at the zeros ν_j.
#[derive(Clone, Debug)]
pub struct RationalDressing {
    pub poles: Vec<(C64, ComplexVector)>,
    pub zeros: Vec<(C64, ComplexVector)>,
}

/// Per-point data of a rational element.
#[derive(Clone, Debug)]
pub struct RationalPoint {
    poles: Vec<C64>,
    residues: Vec<ComplexMatrix>,
}

impl RationalPoint {
    pub fn eval(&self, lambda: C64) -> ComplexMatrix {
        let n = self.residues[0].nrows();
        let mut m = identity(n);
        for (mu, a) in self.poles.iter().zip(&self.residues) {
            m += a / (lambda - mu);
        }
        m
    }

    pub fn dlambda(&self, lambda: C64) -> ComplexMatrix {
        let n = self.residues[0].nrows();
        let mut m = zeros(n);
        for (mu, a) in self.poles.iter().zip(&self.residues) {
            m -= a / ((lambda - mu) * (lambda - mu));
        }
        m
    }

    /// Σ residues, the λ⁻¹ coefficient at ∞.
    pub fn coefficient_minus1(&self) -> ComplexMatrix {
        self.residues.iter().fold(zeros(self.residues[0].nrows()), |acc, a| acc + a)
    }
}

impl RationalDressing {
    pub fn new(poles: Vec<(C64, ComplexVector)>, zeros: Vec<(C64, ComplexVector)>) -> Result<Self> {
        if poles.is_empty() || poles.len() != zeros.len() {
            return Err(Error::Dressing("need as many zeros as poles".into()));
        }
        let all: Vec<C64> = poles.iter().chain(&zeros).map(|p| p.0).collect();
        for (i, a) in all.iter().enumerate() {
            if all[..i].iter().any(|b| (a - b).norm() < 1e-9) {
                return Err(Error::Dressing("poles and zeros must be pairwise distinct".into()));
            }
        }
        Ok(Self { poles, zeros })
    }

    /// Sixfold-symmetric data for the Tzitzeica context from a real pole μ and a
    /// real row vector q at μ. The symmetry λ ↦ βλ, β = e^{iπ/3}, sends the
    /// kernel row at μ_k to the kernel column Cᵀq_kᵀ at μ_k/β and Cq_kᵀ at βμ_k.
    pub fn tzitzeica(ctx: &AlgebraContext, mu: f64, q: &ComplexVector) -> Result<Self> {
        let sigma = ctx.sigma.as_ref().ok_or_else(|| Error::Context("Tzitzeica dressing needs σ".into()))?;
        let cmat = sigma.c.clone().ok_or_else(|| Error::Context("σ must be given by a matrix C".into()))?;
        if ctx.dim != 3 || sigma.order != 6 || mu == 0.0 || !mu.is_finite() {
            return Err(Error::Dressing("needs the order-6 sl(3) context and a nonzero real pole".into()));
        }
        if q.len() != 3 || q.iter().any(|z| z.im != 0.0) || q.norm() < SPAN_FLOOR {
            return Err(Error::Dressing("q must be a nonzero real 3-vector".into()));
        }
        let beta = C64::from_polar(1.0, std::f64::consts::PI / 3.0);
        let step = inverse(&cmat.transpose())? * &cmat;
        let q1 = &step * q;
        let q2 = &step * &q1;
        let back = &step * &q2;
        let scale = back.dotc(q) / q.norm_squared();
        if (&back - q * scale).norm() > 1e-9 * back.norm() {
            return Err(Error::Dressing("kernel data is not closed under the symmetry".into()));
        }
        let mus = [re(mu), beta.powi(2) * mu, beta.powi(4) * mu];
        let qs = [q.clone(), q1, q2];
        let poles: Vec<_> = mus.iter().zip(&qs).map(|(m, v)| (*m, v.clone())).collect();
        let zeros: Vec<_> = mus.iter().zip(&qs).map(|(m, v)| (*m / beta, cmat.transpose() * v)).collect();
        Self::new(poles, zeros)
    }

    /// Solve for the residues given the base frame E at the poles and zeros.
    pub fn at_point(&self, frames_at_poles: &[ComplexMatrix], frames_at_zeros: &[ComplexMatrix]) -> Result<RationalPoint> {
        let k = self.poles.len();
        let n = self.poles[0].1.len();
        let qs: Vec<ComplexVector> =
            self.poles.iter().zip(frames_at_poles).map(|((_, q0), e)| e.transpose() * q0).collect();
        let rs: Vec<ComplexVector> = self
            .zeros
            .iter()
            .zip(frames_at_zeros)
            .map(|((_, r0), e)| Ok(inverse(e)? * r0))
            .collect::<Result<_>>()?;
        let m = ComplexMatrix::from_fn(k, k, |a, b| {
            qs[a].iter().zip(rs[b].iter()).map(|(x, y)| x * y).sum::<C64>() / (self.zeros[b].0 - self.poles[a].0)
        });
        let minv = inverse(&m).map_err(|_| Error::DegenerateSpan(m.determinant().norm()))?;
        let rmat = ComplexMatrix::from_fn(n, k, |i, j| rs[j][i]);
        let p = -(rmat * minv);
        let residues = (0..k).map(|a| p.column(a) * qs[a].transpose()).collect();
        Ok(RationalPoint { poles: self.poles.iter().map(|p| p.0).collect(), residues })
    }

    pub fn evaluation_points(&self) -> Vec<C64> {
        self.poles.iter().chain(&self.zeros).map(|p| p.0).collect()
    }
}

/// A dressing step in a chain.
#[derive(Clone, Debug)]
pub enum Dressing {
    Simple(SimplePoleDressing),
    Rational(RationalDressing),
}

impl Dressing {
    pub fn family(&self) -> Family {
        match self {
            Dressing::Simple(s) => s.family,
            Dressing::Rational(_) => Family::TzitzeicaTriple,
        }
    }

    pub fn poles(&self) -> Vec<C64> {
        match self {
            Dressing::Simple(s) => vec![s.pole],
            Dressing::Rational(r) => r.evaluation_points(),
        }
    }

    /// Sample the element at λ-values closed under its reality symmetries and return
    /// the worst defect of the reality identity.
    pub fn reality_defect(&self, ctx: &AlgebraContext) -> Result<f64> {
        let base = [c(0.3, 0.4), c(-1.7, 0.2), c(2.5, -0.6), c(0.1, -2.2)];
        let (cond, lams) = reality_samples(ctx, self.family().reality(), &base)?;
        let samples: Vec<(C64, ComplexMatrix)> = match self {
            Dressing::Simple(s) => lams.iter().map(|&l| (l, s.element(l, &s.pi))).collect(),
            Dressing::Rational(r) => {
                let n = ctx.dim;
                let pts = r.at_point(&vec![identity(n); r.poles.len()], &vec![identity(n); r.zeros.len()])?;
                lams.iter().map(|&l| (l, pts.eval(l))).collect()
            }
        };
        check_reality(&samples, cond, Level::Group, ctx)
    }
}

/// λ-samples closed under the symmetries of a reality tag, with the matching condition.
pub fn reality_samples(ctx: &AlgebraContext, tag: RealityTag, base: &[C64]) -> Result<(RealityCondition, Vec<C64>)> {
    let mut out: Vec<C64> = Vec::new();
    let push = |out: &mut Vec<C64>, l: C64| {
        if !out.iter().any(|m| (m - l).norm() < 1e-12) {
            out.push(l);
        }
    };
    let cond = match tag {
        RealityTag::U => RealityCondition::U,
        RealityTag::GTau => RealityCondition::GTau,
        RealityTag::GTauSigma => {
            let k = ctx.sigma.as_ref().ok_or_else(|| Error::Context("tag needs σ".into()))?.order;
            if k == 2 {
                RealityCondition::UU0
            } else {
                RealityCondition::GTauSigma
            }
        }
    };
    for &l in base {
        match cond {
            RealityCondition::U => {
                push(&mut out, l);
                push(&mut out, l.conj());
            }
            RealityCondition::GTau => {
                push(&mut out, l);
                push(&mut out, l.conj().inv());
            }
            _ => {
                let k = ctx.sigma.as_ref().map(|s| s.order).unwrap_or(2);
                let rot = C64::from_polar(1.0, std::f64::consts::TAU / k as f64);
                for j in 0..k {
                    let m = l * rot.powi(j as i32);
                    push(&mut out, m);
                    push(&mut out, m.conj());
                }
            }
        }
    }
    Ok((cond, out))
}

/// How the fields of a solution are updated by a dressing step.
#[derive(Clone, Debug, PartialEq)]
pub enum Hierarchy {
    /// (b, j)-flow: E⁰ = exp(aλx + bλʲt).
    Flow { b: ComplexMatrix, j: i32 },
    /// −1-flow: E⁰ = exp(aλx + bλ⁻¹t).
    Minus1,
    /// U/U₀-system in two variables: E⁰ = exp(aλx + bλt).
    Uu0,
    /// Constant solution of the first (G,τ)-system: E⁰ = exp(aλ⁻¹z + aλz̄), z = x + iy.
    Elliptic,
}

/// Values of the solution at a point: u for flows and the −1-flow, v for the
/// −1-flow and the U/U₀-system (zero where unused).
#[derive(Clone, Debug, PartialEq)]
pub struct Fields {
    pub u: ComplexMatrix,
    pub v: ComplexMatrix,
}

/// Closed-form frame E(x, t, λ) of a solution, with E(0, 0, λ) = I.
pub trait FrameEvaluator: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;
    fn ctx(&self) -> &AlgebraContext;
    fn hierarchy(&self) -> &Hierarchy;
    fn eval(&self, x: f64, t: f64, lambda: C64) -> Result<ComplexMatrix>;
    /// Exact ∂E/∂λ.
    fn d_lambda(&self, x: f64, t: f64, lambda: C64) -> Result<ComplexMatrix>;
    fn fields(&self, x: f64, t: f64) -> Result<Fields>;
    /// λ-values where the frame is not defined.
    fn singular_lambdas(&self) -> Vec<C64>;
}

#[derive(Clone, Debug)]
pub struct VacuumFrame {
    ctx: Arc<AlgebraContext>,
    hierarchy: Hierarchy,
}

impl VacuumFrame {
    pub fn new(ctx: Arc<AlgebraContext>, hierarchy: Hierarchy) -> Result<Self> {
        if let Hierarchy::Flow { b, .. } = &hierarchy {
            if b.shape() != (ctx.dim, ctx.dim) || !ctx.centralizes(b) {
                return Err(Error::Context("b must commute with a".into()));
            }
        }
        Ok(Self { ctx, hierarchy })
    }

    /// Exponent X(λ) and its λ-derivative.
    fn exponent(&self, x: f64, t: f64, lambda: C64) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let (a, b) = (&self.ctx.a, &self.ctx.b);
        let needs_inverse = matches!(self.hierarchy, Hierarchy::Minus1 | Hierarchy::Elliptic)
            || matches!(self.hierarchy, Hierarchy::Flow { j, .. } if j < 0);
        if needs_inverse && lambda.norm() == 0.0 {
            return Err(Error::Dressing("vacuum frame is singular at λ = 0".into()));
        }
        Ok(match &self.hierarchy {
            Hierarchy::Flow { b, j } => {
                let (xc, tc) = (re(x), re(t));
                let jf = re(*j as f64);
                (a * (lambda * xc) + b * (lambda.powi(*j) * tc), a * xc + b * (lambda.powi(*j - 1) * jf * tc))
            }
            Hierarchy::Minus1 => {
                let (xc, tc) = (re(x), re(t));
                (a * (lambda * xc) + b * (tc / lambda), a * xc - b * (tc / (lambda * lambda)))
            }
            Hierarchy::Uu0 => {
                let (xc, tc) = (re(x), re(t));
                (a * (lambda * xc) + b * (lambda * tc), a * xc + b * tc)
            }
            Hierarchy::Elliptic => {
                let z = c(x, t);
                (a * (z / lambda + lambda * z.conj()), a * (z.conj() - z / (lambda * lambda)))
            }
        })
    }
}

impl FrameEvaluator for VacuumFrame {
    fn dim(&self) -> usize {
        self.ctx.dim
    }

    fn ctx(&self) -> &AlgebraContext {
        &self.ctx
    }

    fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    fn eval(&self, x: f64, t: f64, lambda: C64) -> Result<ComplexMatrix> {
        Ok(expm(&self.exponent(x, t, lambda)?.0))
    }

    fn d_lambda(&self, x: f64, t: f64, lambda: C64) -> Result<ComplexMatrix> {
        // The exponents at different λ commute, so d/dλ exp X = X'·exp X.
        let (e, d) = self.exponent(x, t, lambda)?;
        Ok(d * expm(&e))
    }

    fn fields(&self, _x: f64, _t: f64) -> Result<Fields> {
        let n = self.ctx.dim;
        let v = if self.hierarchy == Hierarchy::Minus1 { self.ctx.b.clone() } else { zeros(n) };
        Ok(Fields { u: zeros(n), v })
    }

    fn singular_lambdas(&self) -> Vec<C64> {
        match self.hierarchy {
            Hierarchy::Minus1 | Hierarchy::Elliptic => vec![re(0.0)],
            Hierarchy::Flow { j, .. } if j < 0 => vec![re(0.0)],
            _ => vec![],
        }
    }
}

/// Per-point state of one dressing step.
enum PointElement {
    Simple(ComplexMatrix),
    Rational(RationalPoint),
}

/// Ẽ = g E g̃⁻¹ over a base frame.
#[derive(Debug, Clone)]
pub struct DressedFrame {
    base: Arc<dyn FrameEvaluator>,
    element: Dressing,
    /// The element at the origin (where E = I), used on the left.
    origin: Option<RationalPoint>,
}

impl DressedFrame {
    pub fn new(base: Arc<dyn FrameEvaluator>, element: Dressing) -> Result<Self> {
        let n = base.dim();
        match &element {
            Dressing::Simple(s) => {
                if s.pi.nrows() != n {
                    return Err(Error::Dimension(format!("V has length {}, frame is {n}x{n}", s.pi.nrows())));
                }
                if s.family == Family::FAlphaPi && base.hierarchy() != &Hierarchy::Elliptic {
                    return Err(Error::Dressing("f_{α,π} acts on elliptic frames".into()));
                }
                if s.family != Family::FAlphaPi && base.hierarchy() == &Hierarchy::Elliptic {
                    return Err(Error::Dressing("elliptic frames are dressed by f_{α,π}".into()));
                }
            }
            Dressing::Rational(r) => {
                if r.poles[0].1.len() != n {
                    return Err(Error::Dimension("kernel vectors do not match the frame".into()));
                }
            }
        }
        for p in element.poles() {
            if base.singular_lambdas().iter().any(|s| (s - p).norm() < 1e-9) {
                return Err(Error::Dressing(format!("pole {p} hits a singularity of the base frame")));
            }
        }
        let origin = match &element {
            Dressing::Rational(r) => {
                Some(r.at_point(&vec![identity(n); r.poles.len()], &vec![identity(n); r.zeros.len()])?)
            }
            _ => None,
        };
        Ok(Self { base, element, origin })
    }

    pub fn element(&self) -> &Dressing {
        &self.element
    }

    pub fn base(&self) -> &Arc<dyn FrameEvaluator> {
        &self.base
    }

    fn point(&self, x: f64, t: f64) -> Result<PointElement> {
        match &self.element {
            Dressing::Simple(s) => {
                let e = self.base.eval(x, t, s.frame_point())?;
                Ok(PointElement::Simple(update_projection(s, &e)?))
            }
            Dressing::Rational(r) => {
                let ep: Vec<_> = r.poles.iter().map(|p| self.base.eval(x, t, p.0)).collect::<Result<_>>()?;
                let ez: Vec<_> = r.zeros.iter().map(|p| self.base.eval(x, t, p.0)).collect::<Result<_>>()?;
                Ok(PointElement::Rational(r.at_point(&ep, &ez)?))
            }
        }
    }

    /// The transformed projection π̃(x, t) of a simple-pole step.
    pub fn projection(&self, x: f64, t: f64) -> Result<ComplexMatrix> {
        match self.point(x, t)? {
            PointElement::Simple(p) => Ok(p),
            PointElement::Rational(_) => Err(Error::Dressing("rational steps carry no single projection".into())),
        }
    }

    /// Defect of π̃(x, t) as the Hermitian projection onto the transformed span:
    /// idempotence, self-adjointness, capture of the span, and π̃π̃̄ = 0 for h.
    pub fn projection_defect(&self, x: f64, t: f64) -> Result<f64> {
        let Dressing::Simple(s) = &self.element else {
            return Err(Error::Dressing("rational steps carry no single projection".into()));
        };
        let e = self.base.eval(x, t, s.frame_point())?;
        let p = update_projection(s, &e)?;
        let map = match s.family {
            Family::FAlphaPi => e.adjoint(),
            _ => inverse(&e)?,
        };
        let mut worst = dist(&(&p * &p), &p).max(dist(&p.adjoint(), &p));
        for w in &s.v {
            let w = &map * w;
            worst = worst.max((&w - &p * &w).norm() / w.norm());
        }
        if s.family == Family::HIsPi {
            worst = worst.max(norm(&(&p * conj(&p))));
        }
        Ok(worst)
    }

    fn left(&self, lambda: C64) -> (ComplexMatrix, ComplexMatrix) {
        match &self.element {
            Dressing::Simple(s) => (s.element(lambda, &s.pi), s.element_dlambda(lambda, &s.pi)),
            Dressing::Rational(_) => {
                let o = self.origin.as_ref().expect("origin data exists for rational steps");
                (o.eval(lambda), o.dlambda(lambda))
            }
        }
    }

    fn right_inverse(&self, pe: &PointElement, lambda: C64) -> Result<(ComplexMatrix, ComplexMatrix)> {
        Ok(match (pe, &self.element) {
            (PointElement::Simple(p), Dressing::Simple(s)) => {
                let inv = s.element_inverse(lambda, p);
                let d = s.element_dlambda(lambda, p);
                let dinv = -(&inv * d * &inv);
                (inv, dinv)
            }
            (PointElement::Rational(r), _) => {
                let inv = inverse(&r.eval(lambda))?;
                let dinv = -(&inv * r.dlambda(lambda) * &inv);
                (inv, dinv)
            }
            _ => unreachable!("point data matches the element"),
        })
    }
}

impl FrameEvaluator for DressedFrame {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn ctx(&self) -> &AlgebraContext {
        self.base.ctx()
    }

    fn hierarchy(&self) -> &Hierarchy {
        self.base.hierarchy()
    }

    fn eval(&self, x: f64, t: f64, lambda: C64) -> Result<ComplexMatrix> {
        let pe = self.point(x, t)?;
        let (g, _) = self.left(lambda);
        let (ginv, _) = self.right_inverse(&pe, lambda)?;
        Ok(g * self.base.eval(x, t, lambda)? * ginv)
    }

    fn d_lambda(&self, x: f64, t: f64, lambda: C64) -> Result<ComplexMatrix> {
        let pe = self.point(x, t)?;
        let (g, dg) = self.left(lambda);
        let (ginv, dginv) = self.right_inverse(&pe, lambda)?;
        let e = self.base.eval(x, t, lambda)?;
        let de = self.base.d_lambda(x, t, lambda)?;
        Ok(dg * &e * &ginv + &g * de * &ginv + g * e * dginv)
    }

    fn fields(&self, x: f64, t: f64) -> Result<Fields> {
        let base = self.base.fields(x, t)?;
        let ctx = self.base.ctx();
        let pe = self.point(x, t)?;
        let (g1, g0) = match (&pe, &self.element) {
            (PointElement::Simple(p), Dressing::Simple(s)) => {
                if s.family == Family::FAlphaPi {
                    return Ok(base);
                }
                (s.coefficient_minus1(p)?, s.element(re(0.0), p))
            }
            (PointElement::Rational(r), _) => (r.coefficient_minus1(), r.eval(re(0.0))),
            _ => unreachable!("point data matches the element"),
        };
        Ok(match self.base.hierarchy() {
            Hierarchy::Flow { .. } => Fields { u: base.u + bracket(&g1, &ctx.a), v: base.v },
            Hierarchy::Minus1 => {
                let g0inv = inverse(&g0)?;
                Fields { u: base.u + bracket(&g1, &ctx.a), v: &g0 * base.v * g0inv }
            }
            Hierarchy::Uu0 => {
                let (_, perp) = centralizer_split(ctx, &(base.v - g1))?;
                Fields { u: base.u, v: perp }
            }
            Hierarchy::Elliptic => base,
        })
    }

    fn singular_lambdas(&self) -> Vec<C64> {
        let mut s = self.base.singular_lambdas();
        match &self.element {
            Dressing::Simple(el) => {
                s.push(el.pole);
                match el.family {
                    Family::FAlphaPi => s.push(el.pole.conj().inv()),
                    Family::GIsPi => s.push(el.pole.conj()),
                    Family::HIsPi => s.push(-el.pole),
                    Family::TzitzeicaTriple => {}
                }
            }
            Dressing::Rational(r) => s.extend(r.evaluation_points()),
        }
        s
    }
}

/// A dressed solution sampled on a grid. Points where the transformed span
/// degenerates are masked and listed in `singular`.
#[derive(Debug, Clone)]
pub struct DressedSolution {
    pub frame: Arc<dyn FrameEvaluator>,
    pub poles: Vec<C64>,
    pub u: SolutionGrid,
    pub v: SolutionGrid,
    pub singular: Vec<(usize, usize)>,
}

impl DressedSolution {
    pub fn sample(frame: Arc<dyn FrameEvaluator>, poles: Vec<C64>, x: Axis, t: Axis) -> Self {
        let n = frame.dim();
        let id = frame.ctx().id.clone();
        let mut singular = Vec::new();
        let mut us = Vec::with_capacity(x.n * t.n);
        let mut vs = Vec::with_capacity(x.n * t.n);
        for it in 0..t.n {
            for ix in 0..x.n {
                match frame.fields(x.at(ix), t.at(it)) {
                    Ok(f) if is_finite(&f.u) && is_finite(&f.v) => {
                        us.push(f.u);
                        vs.push(f.v);
                    }
                    _ => {
                        singular.push((ix, it));
                        us.push(nan_matrix(n));
                        vs.push(nan_matrix(n));
                    }
                }
            }
        }
        let u = SolutionGrid::from_values(x, t, "u", &id, n, us).expect("sizes match");
        let v = SolutionGrid::from_values(x, t, "v", &id, n, vs).expect("sizes match");
        Self { frame, poles, u, v, singular }
    }

    /// Frames at a fixed λ on the solution grid.
    pub fn frames(&self, lambda: C64) -> SolutionGrid {
        let n = self.frame.dim();
        self.u.map_indexed(|ix, it| self.frame.eval(self.u.x.at(ix), self.u.t.at(it), lambda).unwrap_or_else(|_| nan_matrix(n)))
    }
}

/// Dress `base` by one element.
pub fn dress(el: Dressing, base: Arc<dyn FrameEvaluator>, x: Axis, t: Axis) -> Result<DressedSolution> {
    let poles = el.poles();
    let frame: Arc<dyn FrameEvaluator> = Arc::new(DressedFrame::new(base, el)?);
    Ok(DressedSolution::sample(frame, poles, x, t))
}

/// Left fold of [`dress`] over a chain with pairwise distinct poles.
pub fn multi_dress(els: Vec<Dressing>, base: Arc<dyn FrameEvaluator>, x: Axis, t: Axis) -> Result<DressedSolution> {
    let frame = chain_frame(&els, base)?;
    let poles = els.iter().flat_map(|e| e.poles()).collect();
    Ok(DressedSolution::sample(frame, poles, x, t))
}

/// The frame of a dressing chain, without sampling.
pub fn chain_frame(els: &[Dressing], base: Arc<dyn FrameEvaluator>) -> Result<Arc<dyn FrameEvaluator>> {
    let all: Vec<C64> = els.iter().flat_map(|e| e.poles()).collect();
    for (i, p) in all.iter().enumerate() {
        if all[..i].iter().any(|q| (p - q).norm() < 1e-9) {
            return Err(Error::Dressing(format!("repeated pole {p}")));
        }
    }
    let mut frame = base;
    for el in els {
        frame = Arc::new(DressedFrame::new(frame, el.clone())?);
    }
    Ok(frame)
}

/// Diagonal-zeroing map φ(ξ) = ξ − Σ ξᵢᵢ eᵢᵢ.
pub fn phi(m: &ComplexMatrix) -> ComplexMatrix {
    let mut out = m.clone();
    for i in 0..m.nrows().min(m.ncols()) {
        out[(i, i)] = re(0.0);
    }
    out
}

/// F̃ = F − 2s·φ(2i π̃₁₂) for h_{is,π}, with π̃₁₂ the upper-right n×n block of π̃.
pub fn h_update_f(f: &ComplexMatrix, s: f64, pi_tilde: &ComplexMatrix) -> ComplexMatrix {
    let n = f.nrows();
    let block = pi_tilde.view((0, n), (n, n)).into_owned();
    f - phi(&(block * c(0.0, 2.0))) * re(2.0 * s)
}

/// Scalar read-outs of dressed fields for the named equations.
pub mod readout {
    use super::*;

    /// NLS/mKdV amplitude q = u₁₂.
    pub fn q_from_u(u: &SolutionGrid) -> SolutionGrid {
        u.map(u.tag.as_str(), |m| ComplexMatrix::from_element(1, 1, m[(0, 1)]))
    }

    /// SGE angle from v = −(i/4)[[cos q, sin q], [sin q, −cos q]], unwrapped along the grid.
    pub fn sge_angle(v: &SolutionGrid) -> SolutionGrid {
        let raw = v.map("sge", |m| {
            let x = m * c(0.0, 4.0);
            ComplexMatrix::from_element(1, 1, re(x[(0, 1)].re.atan2(x[(0, 0)].re)))
        });
        let mut q = unwrap_phase(&raw);
        // Put the base value in [0, 2π).
        let base = q.scalar_at(q.x.nearest(0.0), q.t.nearest(0.0)).re;
        if base.is_finite() {
            let shift = std::f64::consts::TAU * (base / std::f64::consts::TAU).floor();
            q = q.map("sge", |m| m.map(|z| z - shift));
        }
        q
    }

    /// Tzitzeica w from v₂₃ = e^w.
    pub fn tzitzeica_w(v: &SolutionGrid) -> SolutionGrid {
        v.map("tzitzeica", |m| ComplexMatrix::from_element(1, 1, m[(1, 2)].ln()))
    }

    /// F from v = [[0, F], [−Fᵗ, 0]].
    pub fn grassmann_f(v: &SolutionGrid) -> SolutionGrid {
        let n = v.dim / 2;
        v.map("grassmann", |m| m.view((0, n), (n, n)).into_owned())
    }

    /// Remove 2π jumps, first along the x-row through the base point, then along t-columns.
    pub fn unwrap_phase(g: &SolutionGrid) -> SolutionGrid {
        let mut out = g.clone();
        let it0 = g.t.nearest(0.0);
        let ix0 = g.x.nearest(0.0);
        let fix = |prev: f64, cur: f64| {
            if !prev.is_finite() || !cur.is_finite() {
                return cur;
            }
            cur - std::f64::consts::TAU * ((cur - prev) / std::f64::consts::TAU).round()
        };
        let get = |o: &SolutionGrid, ix: usize, it: usize| o.scalar_at(ix, it).re;
        let set = |o: &mut SolutionGrid, ix: usize, it: usize, v: f64| o.set(ix, it, ComplexMatrix::from_element(1, 1, re(v)));
        for ix in ix0 + 1..g.x.n {
            let v = fix(get(&out, ix - 1, it0), get(&out, ix, it0));
            set(&mut out, ix, it0, v);
        }
        for ix in (0..ix0).rev() {
            let v = fix(get(&out, ix + 1, it0), get(&out, ix, it0));
            set(&mut out, ix, it0, v);
        }
        for ix in 0..g.x.n {
            for it in it0 + 1..g.t.n {
                let v = fix(get(&out, ix, it - 1), get(&out, ix, it));
                set(&mut out, ix, it, v);
            }
            for it in (0..it0).rev() {
                let v = fix(get(&out, ix, it + 1), get(&out, ix, it));
                set(&mut out, ix, it, v);
            }
        }
        out
    }
}

/// One entry of a dressing chain in JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DressingSpec {
    pub family: Family,
    pub pole: JsonComplex,
    #[serde(rename = "V")]
    pub v: Vec<Vec<JsonComplex>>,
    pub reality_tag: RealityTag,
}

/// A complex number written as a bare real or as `[re, im]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum JsonComplex {
    Real(f64),
    Pair([f64; 2]),
}

impl JsonComplex {
    pub fn value(self) -> C64 {
        match self {
            JsonComplex::Real(r) => re(r),
            JsonComplex::Pair([a, b]) => c(a, b),
        }
    }
}

impl From<C64> for JsonComplex {
    fn from(z: C64) -> Self {
        if z.im == 0.0 {
            JsonComplex::Real(z.re)
        } else {
            JsonComplex::Pair([z.re, z.im])
        }
    }
}

impl DressingSpec {
    pub fn build(&self, ctx: &AlgebraContext) -> Result<Dressing> {
        let vs: Vec<ComplexVector> = self
            .v
            .iter()
            .map(|w| ComplexVector::from_iterator(w.len(), w.iter().map(|z| z.value())))
            .collect();
        if vs.iter().flatten().any(|z| !z.is_finite()) {
            return Err(Error::Dressing("V has non-finite entries".into()));
        }
        if vs.iter().any(|w| w.len() != ctx.dim) {
            return Err(Error::Dimension(format!("vectors in V must have length {}", ctx.dim)));
        }
        let pole = self.pole.value();
        match self.family {
            Family::TzitzeicaTriple => {
                if self.reality_tag != RealityTag::GTauSigma || vs.len() != 1 || pole.im != 0.0 {
                    return Err(Error::Dressing("tzitzeica-triple takes a real pole, one vector and g-tau-sigma".into()));
                }
                Ok(Dressing::Rational(RationalDressing::tzitzeica(ctx, pole.re, &vs[0])?))
            }
            fam => Ok(Dressing::Simple(SimplePoleDressing::new(fam, pole, vs, self.reality_tag)?)),
        }
    }
}

/// Parse a JSON dressing chain `[{family, pole, V, reality_tag}, ...]`.
pub fn parse_chain(v: &Value) -> Result<Vec<DressingSpec>> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_chain_str(text: &str) -> Result<Vec<DressingSpec>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    parse_chain(&v)
}
