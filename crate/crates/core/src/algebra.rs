//! Matrix Lie algebra contexts: involutions, eigenspaces of σ, the centralizer
//! splitting along `a`, and reality-condition checks on λ-samples.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::*;

/// Largest condition number of ad(a) on the perp space accepted as regular.
pub const AD_CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvolutionKind {
    /// ξ ↦ ξ̄
    Conjugate,
    /// ξ ↦ −ξ̄ᵗ
    NegConjTranspose,
    /// ξ ↦ −ξᵗ
    NegTranspose,
    /// ξ ↦ CξC⁻¹
    ConjugationByC,
    /// ξ ↦ −CξᵗC⁻¹
    NegTransposeByC,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvolutionSpec {
    pub kind: InvolutionKind,
    pub c: Option<ComplexMatrix>,
    c_inv: Option<ComplexMatrix>,
    pub antilinear: bool,
    pub order: usize,
}

impl InvolutionSpec {
    pub fn new(kind: InvolutionKind, c: Option<ComplexMatrix>, order: usize) -> Result<Self> {
        let needs_c = matches!(kind, InvolutionKind::ConjugationByC | InvolutionKind::NegTransposeByC);
        if needs_c && c.is_none() {
            return Err(Error::Involution(format!("{kind:?} requires a matrix C")));
        }
        if order == 0 {
            return Err(Error::Involution("order must be positive".into()));
        }
        let c_inv = match &c {
            Some(m) if needs_c => Some(inverse(m).map_err(|_| Error::Involution("C is singular".into()))?),
            _ => None,
        };
        let antilinear = matches!(kind, InvolutionKind::Conjugate | InvolutionKind::NegConjTranspose);
        Ok(Self { kind, c: if needs_c { c } else { None }, c_inv, antilinear, order })
    }

    pub fn conjugate() -> Self {
        Self::new(InvolutionKind::Conjugate, None, 2).expect("static spec")
    }

    pub fn neg_conj_transpose() -> Self {
        Self::new(InvolutionKind::NegConjTranspose, None, 2).expect("static spec")
    }

    pub fn neg_transpose() -> Self {
        Self::new(InvolutionKind::NegTranspose, None, 2).expect("static spec")
    }

    pub fn conjugation_by(c: ComplexMatrix, order: usize) -> Result<Self> {
        Self::new(InvolutionKind::ConjugationByC, Some(c), order)
    }

    pub fn neg_transpose_by(c: ComplexMatrix, order: usize) -> Result<Self> {
        Self::new(InvolutionKind::NegTransposeByC, Some(c), order)
    }

    /// Primitive root α = e^{2πi/k}.
    pub fn alpha(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * PI / self.order as f64)
    }

    /// The map on the Lie algebra.
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        match self.kind {
            InvolutionKind::Conjugate => conj(x),
            InvolutionKind::NegConjTranspose => -x.adjoint(),
            InvolutionKind::NegTranspose => -x.transpose(),
            InvolutionKind::ConjugationByC => self.cm() * x * self.cm_inv(),
            InvolutionKind::NegTransposeByC => -(self.cm() * x.transpose() * self.cm_inv()),
        }
    }

    /// The induced map on the group, whose differential is [`Self::apply`].
    pub fn apply_group(&self, g: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(match self.kind {
            InvolutionKind::Conjugate => conj(g),
            InvolutionKind::NegConjTranspose => inverse(&g.adjoint())?,
            InvolutionKind::NegTranspose => inverse(&g.transpose())?,
            InvolutionKind::ConjugationByC => self.cm() * g * self.cm_inv(),
            InvolutionKind::NegTransposeByC => self.cm() * inverse(&g.transpose())? * self.cm_inv(),
        })
    }

    /// ‖σᵏ(X) − X‖ for the declared order k.
    pub fn order_defect(&self, x: &ComplexMatrix) -> f64 {
        let mut y = x.clone();
        for _ in 0..self.order {
            y = self.apply(&y);
        }
        dist(&y, x)
    }

    fn cm(&self) -> &ComplexMatrix {
        self.c.as_ref().expect("validated at construction")
    }

    fn cm_inv(&self) -> &ComplexMatrix {
        self.c_inv.as_ref().expect("validated at construction")
    }
}

pub fn apply_involution(spec: &InvolutionSpec, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    if let Some(c) = &spec.c {
        if c.shape() != x.shape() {
            return Err(Error::Dimension(format!("C is {:?}, X is {:?}", c.shape(), x.shape())));
        }
    }
    Ok(spec.apply(x))
}

/// Component of X in the eigenspace 𝒢_j of a linear σ of order k.
pub fn eigenspace_project(sigma: &InvolutionSpec, j: i64, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    if sigma.antilinear {
        return Err(Error::Involution("eigenspaces need a linear σ".into()));
    }
    let k = sigma.order as i64;
    let alpha = sigma.alpha();
    let mut acc = zeros(x.nrows());
    let mut y = x.clone();
    for l in 0..k {
        acc += &y * alpha.powi((-(j * l)).rem_euclid(k) as i32);
        y = sigma.apply(&y);
    }
    Ok(acc / re(k as f64))
}

/// The ambient matrix algebra of a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ambient {
    Sl(usize),
    Gl(usize),
    So(usize),
}

impl Ambient {
    pub fn n(&self) -> usize {
        match *self {
            Ambient::Sl(n) | Ambient::Gl(n) | Ambient::So(n) => n,
        }
    }

    /// Standard basis with integer entries.
    pub fn basis(&self) -> Vec<ComplexMatrix> {
        let n = self.n();
        let mut out = Vec::new();
        match self {
            Ambient::Gl(_) => {
                for i in 0..n {
                    for j in 0..n {
                        out.push(unit(n, i, j));
                    }
                }
            }
            Ambient::Sl(_) => {
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            out.push(unit(n, i, j));
                        }
                    }
                }
                for i in 0..n - 1 {
                    out.push(unit(n, i, i) - unit(n, n - 1, n - 1));
                }
            }
            Ambient::So(_) => {
                for i in 0..n {
                    for j in i + 1..n {
                        out.push(unit(n, i, j) - unit(n, j, i));
                    }
                }
            }
        }
        out
    }

    /// Distance from X to the ambient algebra.
    pub fn membership_defect(&self, x: &ComplexMatrix) -> f64 {
        match self {
            Ambient::Gl(_) => 0.0,
            Ambient::Sl(n) => x.trace().norm() / (*n as f64).sqrt(),
            Ambient::So(_) => norm(&(x + x.transpose())) / 2.0,
        }
    }
}

/// A matrix Lie algebra with τ, optional σ, commuting a and b, and the
/// splitting 𝒢 = 𝒢ₐ ⊕ 𝒢ₐ^⊥ with ad(a)⁻¹ on the second summand.
#[derive(Debug, Clone)]
pub struct AlgebraContext {
    pub id: String,
    pub dim: usize,
    pub ambient: Ambient,
    pub tau: InvolutionSpec,
    pub sigma: Option<InvolutionSpec>,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub basis_cent: Vec<ComplexMatrix>,
    pub basis_perp: Vec<ComplexMatrix>,
    /// Pseudo-inverse mapping vec(X) to coordinates in [cent | perp].
    coord_map: ComplexMatrix,
    /// Matrix of ad(a)⁻¹ in perp coordinates.
    ad_inv: ComplexMatrix,
    pub ad_condition: f64,
}

impl AlgebraContext {
    pub fn new(
        id: impl Into<String>,
        ambient: Ambient,
        tau: InvolutionSpec,
        sigma: Option<InvolutionSpec>,
        a: ComplexMatrix,
        b: ComplexMatrix,
    ) -> Result<Self> {
        let n = ambient.n();
        for (name, m) in [("a", &a), ("b", &b)] {
            if m.shape() != (n, n) || !is_finite(m) {
                return Err(Error::Context(format!("{name} must be a finite {n}x{n} matrix")));
            }
            if ambient.membership_defect(m) > SYMBOLIC_ZERO {
                return Err(Error::Context(format!("{name} is not in {ambient:?}")));
            }
        }
        if !tau.antilinear || tau.order != 2 {
            return Err(Error::Context("τ must be antilinear of order 2".into()));
        }
        if norm(&bracket(&a, &b)) > SYMBOLIC_ZERO {
            return Err(Error::Context("[a, b] ≠ 0".into()));
        }
        if let Some(s) = &sigma {
            if s.antilinear {
                return Err(Error::Context("σ must be linear".into()));
            }
            let a1 = eigenspace_project(s, 1, &a)?;
            if dist(&a1, &a) > SYMBOLIC_ZERO * (1.0 + norm(&a)) {
                return Err(Error::Context("a is not in the σ-eigenspace 𝒢₁".into()));
            }
        }
        let amb = ambient.basis();
        let m = amb.len();
        let vec_row = |x: &ComplexMatrix| -> Vec<C64> { (0..n * n).map(|p| x[(p / n, p % n)]).collect() };
        // Rows vec(ad(a) B_k): their row space is the image of ad(a).
        let img = DMatrix::from_fn(m, n * n, |k, p| {
            let y = bracket(&a, &amb[k]);
            y[(p / n, p % n)]
        });
        let (r, pivots) = rref(&img, 1e-9);
        let basis_perp: Vec<ComplexMatrix> = (0..pivots.len())
            .map(|row| ComplexMatrix::from_fn(n, n, |i, j| clean(r[(row, i * n + j)])))
            .collect();
        // Null space of the map coordinates ↦ vec(ad(a) Σ c_k B_k).
        let (rn, piv_n) = rref(&img.transpose(), 1e-9);
        let free: Vec<usize> = (0..m).filter(|c| !piv_n.contains(c)).collect();
        let mut basis_cent = Vec::new();
        for &f in &free {
            let mut coeffs = vec![C64::new(0.0, 0.0); m];
            coeffs[f] = re(1.0);
            for (row, &pc) in piv_n.iter().enumerate() {
                coeffs[pc] = -rn[(row, f)];
            }
            let mut x = zeros(n);
            for (k, ck) in coeffs.iter().enumerate() {
                x += &amb[k] * *ck;
            }
            basis_cent.push(x.map(clean));
        }
        let all: Vec<&ComplexMatrix> = basis_cent.iter().chain(basis_perp.iter()).collect();
        let big = DMatrix::from_fn(n * n, all.len(), |p, k| all[k][(p / n, p % n)]);
        let coord_map = big
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Context(format!("basis pseudo-inverse failed: {e}")))?;
        let np = basis_perp.len();
        let nc = basis_cent.len();
        let _ = vec_row;
        let mut ad_mat = ComplexMatrix::zeros(np, np);
        for (k, p) in basis_perp.iter().enumerate() {
            let y = bracket(&a, p);
            let v = coords_with(&coord_map, &y);
            for i in 0..np {
                ad_mat[(i, k)] = v[nc + i];
            }
        }
        let sv = ad_mat.clone().singular_values();
        let (mx, mn) = sv.iter().fold((0.0f64, f64::INFINITY), |(mx, mn), &s| (mx.max(s), mn.min(s)));
        let ad_condition = if np == 0 { 1.0 } else if mn == 0.0 { f64::INFINITY } else { mx / mn };
        if ad_condition > AD_CONDITION_LIMIT {
            return Err(Error::NonRegular(ad_condition));
        }
        let ad_inv = if np == 0 { ad_mat.clone() } else { inverse(&ad_mat)? };
        Ok(Self {
            id: id.into(),
            dim: n,
            ambient,
            tau,
            sigma,
            a,
            b,
            basis_cent,
            basis_perp,
            coord_map,
            ad_inv,
            ad_condition,
        })
    }

    /// Replace `b` (must commute with `a`).
    pub fn with_b(&self, b: ComplexMatrix) -> Result<Self> {
        Self::new(self.id.clone(), self.ambient, self.tau.clone(), self.sigma.clone(), self.a.clone(), b)
    }

    /// Coordinates of X in the concatenated basis [cent | perp].
    pub fn coordinates(&self, x: &ComplexMatrix) -> Result<Vec<C64>> {
        if x.shape() != (self.dim, self.dim) {
            return Err(Error::Dimension(format!("expected {0}x{0}", self.dim)));
        }
        let v = coords_with(&self.coord_map, x);
        let back = self.from_coordinates(&v);
        if dist(&back, x) > SYMBOLIC_ZERO * (1.0 + norm(x)) {
            return Err(Error::Context(format!("matrix is not in {:?}", self.ambient)));
        }
        Ok(v)
    }

    pub fn from_coordinates(&self, v: &[C64]) -> ComplexMatrix {
        let mut x = zeros(self.dim);
        for (k, b) in self.basis_cent.iter().chain(self.basis_perp.iter()).enumerate() {
            x += b * v[k];
        }
        x
    }

    /// Perp-basis coordinates of a perp element.
    pub fn perp_coordinates(&self, x: &ComplexMatrix) -> Result<Vec<C64>> {
        Ok(self.coordinates(x)?[self.basis_cent.len()..].to_vec())
    }

    pub fn from_perp_coordinates(&self, v: &[C64]) -> ComplexMatrix {
        let mut x = zeros(self.dim);
        for (b, c) in self.basis_perp.iter().zip(v) {
            x += b * *c;
        }
        x
    }

    /// ad(a)⁻¹ applied to the perp part of X.
    pub fn ad_inverse(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (_, xp) = centralizer_split(self, x)?;
        let v = self.perp_coordinates(&xp)?;
        let w = &self.ad_inv * nalgebra::DVector::from_vec(v);
        Ok(self.from_perp_coordinates(w.as_slice()))
    }

    /// Whether 𝒢_b equals 𝒢ₐ, checked as [b, basis_cent] = 0 with b regular on the perp space.
    pub fn centralizes(&self, b: &ComplexMatrix) -> bool {
        self.basis_cent.iter().all(|c| norm(&bracket(b, c)) <= SYMBOLIC_ZERO)
    }

    /// Spectral radius scale used for relative tolerances.
    pub fn scale(&self) -> f64 {
        1.0 + norm(&self.a)
    }
}

fn coords_with(map: &ComplexMatrix, x: &ComplexMatrix) -> Vec<C64> {
    let n = x.nrows();
    let v = nalgebra::DVector::from_fn(n * n, |p, _| x[(p / n, p % n)]);
    (map * v).iter().copied().collect()
}

fn clean(z: C64) -> C64 {
    let f = |x: f64| if x.abs() < 1e-14 { 0.0 } else { x };
    C64::new(f(z.re), f(z.im))
}

/// Reduced row echelon form with partial pivoting; returns (R, pivot columns).
pub fn rref(m: &ComplexMatrix, tol: f64) -> (ComplexMatrix, Vec<usize>) {
    let mut r = m.clone();
    let (rows, cols) = r.shape();
    let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let (best, val) = (row..rows).map(|i| (i, r[(i, col)].norm())).fold((row, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if val <= tol * scale {
            continue;
        }
        r.swap_rows(row, best);
        let p = r[(row, col)];
        for j in 0..cols {
            r[(row, j)] /= p;
        }
        for i in 0..rows {
            if i != row {
                let f = r[(i, col)];
                if f.norm() > 0.0 {
                    for j in 0..cols {
                        let v = r[(row, j)];
                        r[(i, j)] -= f * v;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    (r, pivots)
}

/// X = X_cent + X_perp along 𝒢ₐ ⊕ 𝒢ₐ^⊥.
pub fn centralizer_split(ctx: &AlgebraContext, x: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if ctx.ad_condition > AD_CONDITION_LIMIT {
        return Err(Error::NonRegular(ctx.ad_condition));
    }
    let v = ctx.coordinates(x)?;
    let nc = ctx.basis_cent.len();
    let mut xc = zeros(ctx.dim);
    for (b, c) in ctx.basis_cent.iter().zip(&v[..nc]) {
        xc += b * *c;
    }
    let xp = x - &xc;
    Ok((xc, xp))
}

/// Which reality identity to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealityCondition {
    /// τ(ξ(λ̄)) = ξ(λ)
    U,
    /// τ(ξ(λ̄)) = ξ(λ) and σ(ξ(−λ)) = ξ(λ)
    UU0,
    /// τ(ξ(1/λ̄)) = ξ(λ)
    GTau,
    /// τ(ξ(λ̄)) = ξ(λ) and σ(ξ(e^{−2πi/k}λ)) = ξ(λ)
    GTauSigma,
}

/// Whether samples are Lie-algebra values (Lax forms) or group values (frames, dressing elements).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Algebra,
    Group,
}

/// Max over samples of ‖lhs − rhs‖ for the chosen reality identity.
pub fn check_reality(
    samples: &[(C64, ComplexMatrix)],
    condition: RealityCondition,
    level: Level,
    ctx: &AlgebraContext,
) -> Result<f64> {
    const PAIR_TOL: f64 = 1e-9;
    let find = |mu: C64, what: &str| -> Result<&ComplexMatrix> {
        samples
            .iter()
            .find(|(l, _)| (l - mu).norm() <= PAIR_TOL * (1.0 + mu.norm()))
            .map(|(_, m)| m)
            .ok_or_else(|| Error::NotClosed(format!("{what} (missing image of a sample at {mu})")))
    };
    let act = |spec: &InvolutionSpec, m: &ComplexMatrix| -> Result<ComplexMatrix> {
        match level {
            Level::Algebra => Ok(spec.apply(m)),
            Level::Group => spec.apply_group(m),
        }
    };
    let sigma = || ctx.sigma.as_ref().ok_or_else(|| Error::Context("condition needs σ".into()));
    let mut worst: f64 = 0.0;
    for (lam, m) in samples {
        match condition {
            RealityCondition::U => {
                let partner = find(lam.conj(), "λ ↦ λ̄")?;
                worst = worst.max(dist(&act(&ctx.tau, partner)?, m));
            }
            RealityCondition::GTau => {
                let partner = find(C64::new(1.0, 0.0) / lam.conj(), "λ ↦ 1/λ̄")?;
                worst = worst.max(dist(&act(&ctx.tau, partner)?, m));
            }
            RealityCondition::UU0 | RealityCondition::GTauSigma => {
                let s = sigma()?;
                let partner = find(lam.conj(), "λ ↦ λ̄")?;
                worst = worst.max(dist(&act(&ctx.tau, partner)?, m));
                let rot = if condition == RealityCondition::UU0 { re(-1.0) } else { s.alpha().conj() };
                let p2 = find(rot * lam, "λ ↦ e^{-2πi/k}λ")?;
                worst = worst.max(dist(&act(s, p2)?, m));
            }
        }
    }
    Ok(worst)
}

/// Named contexts with the matrices of the standard examples. Dimensioned
/// families accept a suffix `:n` (for instance `sln-toda:4`); the default is n = 3.
pub fn catalog(id: &str) -> Result<AlgebraContext> {
    let (base, n) = match id.split_once(':') {
        Some((b, k)) => (b, k.parse::<usize>().map_err(|_| Error::Context(format!("bad size in `{id}`")))?),
        None => (id, 3),
    };
    let i = I;
    match base {
        "sl2-su2" => {
            let a = diag(&[i, -i]);
            AlgebraContext::new(id, Ambient::Sl(2), InvolutionSpec::neg_conj_transpose(), None, a.clone(), a)
        }
        "sl2-su2/so2" => {
            let a = diag(&[i, -i]);
            let b = &a * re(-0.25);
            AlgebraContext::new(id, Ambient::Sl(2), InvolutionSpec::neg_conj_transpose(), Some(InvolutionSpec::neg_transpose()), a, b)
        }
        "sl3-tzitzeica" => {
            let al = C64::from_polar(1.0, 2.0 * PI / 3.0);
            let cm = from_rows(&[
                vec![re(0.0), al * al, re(0.0)],
                vec![al, re(0.0), re(0.0)],
                vec![re(0.0), re(0.0), re(1.0)],
            ]);
            let a = from_real_rows(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
            let b = from_real_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
            let sigma = InvolutionSpec::neg_transpose_by(cm, 6)?;
            AlgebraContext::new(id, Ambient::Sl(3), InvolutionSpec::conjugate(), Some(sigma), a, b)
        }
        "o4-grassmann" => {
            let k = if id.contains(':') { n } else { 2 };
            grassmann(id, k)
        }
        "sln-toda" => {
            check_n(n)?;
            let al = C64::from_polar(1.0, 2.0 * PI / n as f64);
            let cm = diag(&(0..n).map(|k| al.powi(k as i32)).collect::<Vec<_>>());
            let mut a = unit(n, 0, n - 1);
            let mut b = unit(n, n - 1, 0);
            for k in 0..n - 1 {
                a += unit(n, k + 1, k);
                b += unit(n, k, k + 1);
            }
            let sigma = InvolutionSpec::conjugation_by(cm, n)?;
            AlgebraContext::new(id, Ambient::Sl(n), InvolutionSpec::conjugate(), Some(sigma), a, b)
        }
        "sln-kw" => {
            check_n(n)?;
            let al = C64::from_polar(1.0, 2.0 * PI / n as f64);
            let mut perm = zeros(n);
            for k in 0..n {
                perm[(k, (k + 1) % n)] = re(1.0);
            }
            // σ(g) = C⁻¹gC with C the cyclic shift oriented so that a ∈ 𝒢₁.
            let sigma = InvolutionSpec::conjugation_by(perm, n)?;
            let a = diag(&(0..n).map(|k| al.powi(k as i32)).collect::<Vec<_>>());
            let a = a.map(clean);
            AlgebraContext::new(id, Ambient::Sl(n), InvolutionSpec::conjugate(), Some(sigma), a.clone(), a)
        }
        "sl3-diag" => {
            let a = diag(&[i, re(0.0), -i]);
            AlgebraContext::new(id, Ambient::Sl(3), InvolutionSpec::neg_conj_transpose(), None, a.clone(), a)
        }
        "sl3-flag" => {
            let al = C64::from_polar(1.0, 2.0 * PI / 3.0);
            let cm = diag(&[re(1.0), al, al * al]);
            let a = from_real_rows(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
            let sigma = InvolutionSpec::conjugation_by(cm, 3)?;
            AlgebraContext::new(id, Ambient::Sl(3), InvolutionSpec::neg_conj_transpose(), Some(sigma), a.clone(), a)
        }
        _ => Err(Error::Context(format!("unknown catalog id `{id}`"))),
    }
}

/// Catalog ids accepted by [`catalog`].
pub const CATALOG_IDS: &[&str] =
    &["sl2-su2", "sl2-su2/so2", "sl3-tzitzeica", "o4-grassmann", "sln-toda", "sln-kw", "sl3-diag", "sl3-flag"];

fn check_n(n: usize) -> Result<()> {
    if (2..=8).contains(&n) {
        Ok(())
    } else {
        Err(Error::Context(format!("size {n} outside 2..=8")))
    }
}

/// O(2n)/O(n)×O(n): τ = conjugation, σ = conjugation by I_{n,n}, a = a₁, b = a₂.
fn grassmann(id: &str, n: usize) -> Result<AlgebraContext> {
    if n != 2 {
        return Err(Error::Context("the grassmann context is two-dimensional (n = 2)".into()));
    }
    let a = grassmann_generator(n, 0);
    let b = grassmann_generator(n, 1);
    let inn = diag(&(0..2 * n).map(|k| if k < n { re(1.0) } else { re(-1.0) }).collect::<Vec<_>>());
    let sigma = InvolutionSpec::conjugation_by(inn, 2)?;
    AlgebraContext::new(id, Ambient::So(2 * n), InvolutionSpec::conjugate(), Some(sigma), a, b)
}

/// a_i = −e_{i,n+i} + e_{n+i,i} in o(2n).
pub fn grassmann_generator(n: usize, i: usize) -> ComplexMatrix {
    unit(2 * n, n + i, i) - unit(2 * n, i, n + i)
}
