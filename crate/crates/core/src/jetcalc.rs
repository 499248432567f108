//! Exact differential polynomials in the jets of u and the Q_{b,j} recursion.
//!
//! The unknown u is written u = Σ_k u_k e_k over the perp basis of the context,
//! and `JetVar { component: k, order: n, .. }` stands for ∂ₓⁿ u_k. Coefficients
//! are Gaussian rationals, so every identity here is checked with exact equality.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::AlgebraContext;
use crate::error::{Error, Result};
use crate::gaussrat::{ExactMatrix, GaussRational};
use crate::matrix::{ComplexMatrix, C64};

/// Default largest j accepted by [`compute_q`].
pub const MAX_J: usize = 6;

/// Hard cap on the number of terms of any single polynomial.
const MAX_TERMS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JetVar {
    pub component: u32,
    pub order: u32,
    /// Stands for the complex conjugate of the jet.
    pub conj: bool,
}

impl JetVar {
    pub fn new(component: u32, order: u32) -> Self {
        Self { component, order, conj: false }
    }

    pub fn conjugate(component: u32, order: u32) -> Self {
        Self { component, order, conj: true }
    }

    fn bumped(self) -> Self {
        Self { order: self.order + 1, ..self }
    }

    fn at_order(self, order: u32) -> Self {
        Self { order, ..self }
    }
}

type Monomial = Vec<JetVar>;

/// Sparse polynomial in jet variables with canonical (sorted) monomials.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DiffPoly {
    terms: BTreeMap<Monomial, GaussRational>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: GaussRational) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(v: JetVar) -> Self {
        let mut p = Self::zero();
        p.add_term(vec![v], GaussRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[JetVar], &GaussRational)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), c))
    }

    fn add_term(&mut self, mut mono: Monomial, c: GaussRational) {
        if c.is_zero() {
            return;
        }
        mono.sort();
        match self.terms.get_mut(&mono) {
            Some(v) => {
                *v += &c;
                if v.is_zero() {
                    self.terms.remove(&mono);
                }
            }
            None => {
                self.terms.insert(mono, c);
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&-GaussRational::one())
    }

    pub fn scale(&self, c: &GaussRational) -> Self {
        let mut out = Self::zero();
        if c.is_zero() {
            return out;
        }
        for (m, v) in &self.terms {
            out.terms.insert(m.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let mut m = m1.clone();
                m.extend_from_slice(m2);
                out.add_term(m, c1 * c2);
            }
        }
        out
    }

    fn checked_mul(&self, o: &Self) -> Result<Self> {
        if self.len().saturating_mul(o.len()) > MAX_TERMS {
            return Err(Error::Parse(format!("product would exceed {MAX_TERMS} terms")));
        }
        Ok(self.mul(o))
    }

    /// Highest derivative order among all variables (None for constants).
    pub fn max_order(&self) -> Option<u32> {
        self.terms.keys().flat_map(|m| m.iter().map(|v| v.order)).max()
    }

    /// ∂p/∂v treating jets as independent variables.
    pub fn partial(&self, v: JetVar) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.iter().filter(|w| **w == v).count();
            if e == 0 {
                continue;
            }
            let mut rest = m.clone();
            let pos = rest.iter().position(|w| *w == v).expect("present");
            rest.remove(pos);
            out.add_term(rest, c * &GaussRational::from_ints(e as i64, 0));
        }
        out
    }

    /// Total derivative Dₓ by the Leibniz rule.
    pub fn total_x_derivative(&self, max_order: u32) -> Result<Self> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for i in 0..m.len() {
                let nv = m[i].bumped();
                if nv.order > max_order {
                    return Err(Error::OrderExceeded(nv.order, max_order));
                }
                let mut mm = m.clone();
                mm[i] = nv;
                out.add_term(mm, c.clone());
            }
        }
        Ok(out)
    }

    fn dx(&self) -> Self {
        self.total_x_derivative(u32::MAX - 1).expect("unbounded order")
    }

    /// The polynomial q with Dₓq = p and zero constant term.
    ///
    /// Uses the homotopy operator on each homogeneous component, then checks the
    /// result by differentiation; anything that fails the check is `NotExact`.
    pub fn formal_integrate(&self) -> Result<Self> {
        let mut by_degree: BTreeMap<usize, DiffPoly> = BTreeMap::new();
        for (m, c) in &self.terms {
            if m.is_empty() {
                return Err(Error::NotExact("nonzero constant term".into()));
            }
            by_degree.entry(m.len()).or_default().add_term(m.clone(), c.clone());
        }
        let mut result = Self::zero();
        for (d, p) in by_degree {
            let mut acc = Self::zero();
            let mut families: Vec<JetVar> =
                p.terms.keys().flat_map(|m| m.iter().map(|v| v.at_order(0))).collect();
            families.sort();
            families.dedup();
            let top = p.max_order().unwrap_or(0);
            for fam in families {
                for k in 1..=top {
                    let dp = p.partial(fam.at_order(k));
                    if dp.is_zero() {
                        continue;
                    }
                    // Σ_{i<k} u_i (−D)^{k−1−i} ∂p/∂u_k
                    let mut powers = vec![dp];
                    for _ in 1..k {
                        let next = powers.last().expect("nonempty").dx().neg();
                        powers.push(next);
                    }
                    for i in 0..k {
                        let term = DiffPoly::var(fam.at_order(i)).mul(&powers[(k - 1 - i) as usize]);
                        acc = acc.add(&term);
                    }
                }
            }
            result = result.add(&acc.scale(&GaussRational::from_fracs(1, d as i64, 0, 1)));
        }
        if result.dx() != *self {
            return Err(Error::NotExact(format!("{} terms do not form a total derivative", self.len())));
        }
        Ok(result)
    }

    pub fn evaluate(&self, jets: &dyn Fn(JetVar) -> Option<C64>) -> Result<C64> {
        let mut s = C64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut t = c.to_c64();
            for v in m {
                let val = jets(*v).ok_or_else(|| Error::MissingJet(format!("{v:?}")))?;
                t *= val;
            }
            s += t;
        }
        Ok(s)
    }

    /// Replace variables by polynomials; unmatched variables are kept.
    pub fn substitute(&self, rule: &dyn Fn(JetVar) -> Option<DiffPoly>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut t = DiffPoly::constant(c.clone());
            for v in m {
                let r = rule(*v).unwrap_or_else(|| DiffPoly::var(*v));
                t = t.mul(&r);
            }
            out = out.add(&t);
        }
        out
    }

    /// Human-readable form with component names such as `q`, `r`.
    pub fn pretty(&self, names: &[&str]) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let vars: Vec<String> = m.iter().map(|v| jet_name(*v, names)).collect();
                if vars.is_empty() {
                    c.to_string()
                } else if *c == GaussRational::one() {
                    vars.join("*")
                } else {
                    format!("{}*{}", c, vars.join("*"))
                }
            })
            .collect();
        parts.join(" + ")
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut args = vec![const_json(c)];
                args.extend(m.iter().map(|v| json!({"op": "jet", "component": v.component, "order": v.order, "conj": v.conj})));
                json!({"op": "mul", "args": args})
            })
            .collect();
        json!({"op": "add", "args": terms})
    }

    /// Decode an expression tree (add, sub, mul, neg, const, jet, dx).
    pub fn from_json(v: &Value) -> Result<Self> {
        parse_expr(v, 0)
    }
}

fn jet_name(v: JetVar, names: &[&str]) -> String {
    let base = names.get(v.component as usize).map(|s| s.to_string()).unwrap_or_else(|| format!("u{}", v.component));
    let d = if v.order == 0 { String::new() } else { format!("_{}", "x".repeat(v.order as usize)) };
    if v.conj {
        format!("conj({base}{d})")
    } else {
        format!("{base}{d}")
    }
}

fn const_json(c: &GaussRational) -> Value {
    json!({"op": "const", "re": c.re_string(), "im": c.im_string()})
}

const MAX_DEPTH: usize = 64;
const MAX_ORDER_PARSE: u32 = 64;

fn parse_expr(v: &Value, depth: usize) -> Result<DiffPoly> {
    if depth > MAX_DEPTH {
        return Err(Error::Parse("expression nested too deeply".into()));
    }
    let obj = v.as_object().ok_or_else(|| Error::Parse("node must be an object".into()))?;
    let op = obj.get("op").and_then(Value::as_str).ok_or_else(|| Error::Parse("missing `op`".into()))?;
    let args = || -> Result<Vec<DiffPoly>> {
        obj.get("args")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse(format!("`{op}` needs `args`")))?
            .iter()
            .map(|a| parse_expr(a, depth + 1))
            .collect()
    };
    let allowed: &[&str] = match op {
        "const" => &["op", "re", "im"],
        "jet" => &["op", "component", "order", "conj"],
        _ => &["op", "args"],
    };
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Parse(format!("unknown key `{k}` in `{op}`")));
    }
    match op {
        "const" => {
            let get = |k: &str| -> Result<BigRational> {
                match obj.get(k) {
                    None => Ok(BigRational::from_integer(BigInt::from(0))),
                    Some(Value::String(s)) => GaussRational::parse_rational(s),
                    Some(Value::Number(n)) if n.is_i64() => Ok(BigRational::from_integer(BigInt::from(n.as_i64().expect("i64")))),
                    Some(_) => Err(Error::Parse(format!("`{k}` must be a rational string"))),
                }
            };
            Ok(DiffPoly::constant(GaussRational::new(get("re")?, get("im")?)))
        }
        "jet" => {
            let num = |k: &str, lim: u64| -> Result<u32> {
                let n = obj.get(k).and_then(Value::as_u64).ok_or_else(|| Error::Parse(format!("jet needs integer `{k}`")))?;
                if n > lim {
                    return Err(Error::Parse(format!("jet `{k}` = {n} exceeds {lim}")));
                }
                Ok(n as u32)
            };
            let conj = match obj.get("conj") {
                None => false,
                Some(Value::Bool(b)) => *b,
                Some(_) => return Err(Error::Parse("`conj` must be boolean".into())),
            };
            Ok(DiffPoly::var(JetVar { component: num("component", 1024)?, order: num("order", MAX_ORDER_PARSE as u64)?, conj }))
        }
        "add" => Ok(args()?.iter().fold(DiffPoly::zero(), |a, b| a.add(b))),
        "sub" => {
            let a = args()?;
            match a.split_first() {
                Some((first, rest)) => Ok(rest.iter().fold(first.clone(), |x, y| x.sub(y))),
                None => Err(Error::Parse("`sub` needs arguments".into())),
            }
        }
        "neg" => {
            let a = args()?;
            if a.len() != 1 {
                return Err(Error::Parse("`neg` takes one argument".into()));
            }
            Ok(a[0].neg())
        }
        "mul" => {
            let mut acc = DiffPoly::constant(GaussRational::one());
            for x in args()? {
                acc = acc.checked_mul(&x)?;
            }
            Ok(acc)
        }
        "dx" => {
            let a = args()?;
            if a.len() != 1 {
                return Err(Error::Parse("`dx` takes one argument".into()));
            }
            a[0].total_x_derivative(MAX_ORDER_PARSE)
        }
        other => Err(Error::Parse(format!("unknown op `{other}`"))),
    }
}

/// A square matrix of differential polynomials, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffPolyMatrix {
    pub dim: usize,
    pub entries: Vec<DiffPoly>,
}

impl DiffPolyMatrix {
    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: vec![DiffPoly::zero(); dim * dim] }
    }

    pub fn constant(m: &ExactMatrix) -> Self {
        Self { dim: m.rows, entries: m.data.iter().map(|c| DiffPoly::constant(c.clone())).collect() }
    }

    pub fn get(&self, i: usize, j: usize) -> &DiffPoly {
        &self.entries[i * self.dim + j]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(DiffPoly::is_zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().zip(&o.entries).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().zip(&o.entries).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn scale(&self, c: &GaussRational) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|a| a.scale(c)).collect() }
    }

    pub fn matmul(&self, o: &Self) -> Self {
        let n = self.dim;
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = DiffPoly::zero();
                for k in 0..n {
                    let (a, b) = (self.get(i, k), o.get(k, j));
                    if !a.is_zero() && !b.is_zero() {
                        s = s.add(&a.mul(b));
                    }
                }
                out.entries[i * n + j] = s;
            }
        }
        out
    }

    pub fn bracket(&self, o: &Self) -> Self {
        self.matmul(o).sub(&o.matmul(self))
    }

    pub fn total_x_derivative(&self, max_order: u32) -> Result<Self> {
        Ok(Self { dim: self.dim, entries: self.entries.iter().map(|p| p.total_x_derivative(max_order)).collect::<Result<_>>()? })
    }

    pub fn substitute(&self, rule: &dyn Fn(JetVar) -> Option<DiffPoly>) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|p| p.substitute(rule)).collect() }
    }

    pub fn evaluate(&self, jets: &dyn Fn(JetVar) -> Option<C64>) -> Result<ComplexMatrix> {
        let n = self.dim;
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.get(i, j).evaluate(jets)?;
            }
        }
        Ok(m)
    }

    /// Evaluate from a map of jet assignments.
    pub fn evaluate_map(&self, jets: &BTreeMap<JetVar, C64>) -> Result<ComplexMatrix> {
        self.evaluate(&|v| jets.get(&v).copied())
    }

    /// All jet variables that occur.
    pub fn variables(&self) -> Vec<JetVar> {
        let mut vs: Vec<JetVar> = self.entries.iter().flat_map(|p| p.terms.keys().flatten().copied()).collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn to_json(&self) -> Value {
        json!({"op": "matrix", "dim": self.dim, "args": self.entries.iter().map(DiffPoly::to_json).collect::<Vec<_>>()})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("matrix node must be an object".into()))?;
        if obj.get("op").and_then(Value::as_str) != Some("matrix") {
            return Err(Error::Parse("expected op `matrix`".into()));
        }
        if let Some(k) = obj.keys().find(|k| !["op", "dim", "args"].contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown key `{k}` in `matrix`")));
        }
        let dim = obj.get("dim").and_then(Value::as_u64).ok_or_else(|| Error::Parse("matrix needs `dim`".into()))?;
        if dim == 0 || dim > 16 {
            return Err(Error::Parse(format!("matrix dim {dim} outside 1..=16")));
        }
        let dim = dim as usize;
        let args = obj.get("args").and_then(Value::as_array).ok_or_else(|| Error::Parse("matrix needs `args`".into()))?;
        if args.len() != dim * dim {
            return Err(Error::Parse(format!("matrix of dim {dim} needs {} entries", dim * dim)));
        }
        Ok(Self { dim, entries: args.iter().map(DiffPoly::from_json).collect::<Result<_>>()? })
    }

    /// Decode from JSON text.
    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn pretty(&self, names: &[&str]) -> String {
        let n = self.dim;
        let rows: Vec<String> = (0..n)
            .map(|i| format!("[{}]", (0..n).map(|j| self.get(i, j).pretty(names)).collect::<Vec<_>>().join(", ")))
            .collect();
        format!("[{}]", rows.join(", "))
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pretty(&[]))
    }
}

/// Exact images of the context data used by the recursion.
#[derive(Clone, Debug)]
pub struct JetContext {
    pub dim: usize,
    pub a: ExactMatrix,
    pub cent: Vec<ExactMatrix>,
    pub perp: Vec<ExactMatrix>,
    coord_rows: Vec<usize>,
    coord_inv: ExactMatrix,
    ad_inv: ExactMatrix,
}

impl JetContext {
    /// Rationalize a numeric context; fails when an entry is irrational.
    pub fn from_context(ctx: &AlgebraContext) -> Result<Self> {
        let n = ctx.dim;
        let a = ExactMatrix::recognize(&ctx.a)?;
        let cent: Vec<ExactMatrix> = ctx.basis_cent.iter().map(ExactMatrix::recognize).collect::<Result<_>>()?;
        let perp: Vec<ExactMatrix> = ctx.basis_perp.iter().map(ExactMatrix::recognize).collect::<Result<_>>()?;
        let all: Vec<&ExactMatrix> = cent.iter().chain(perp.iter()).collect();
        let m = all.len();
        let mut big = ExactMatrix::zeros(n * n, m);
        for (k, b) in all.iter().enumerate() {
            for p in 0..n * n {
                big.set(p, k, b.data[p].clone());
            }
        }
        let coord_rows = big.independent_rows();
        if coord_rows.len() != m {
            return Err(Error::Context("exact basis is linearly dependent".into()));
        }
        let mut sq = ExactMatrix::zeros(m, m);
        for (r, &p) in coord_rows.iter().enumerate() {
            for k in 0..m {
                sq.set(r, k, big.get(p, k).clone());
            }
        }
        let coord_inv = sq.inverse().ok_or_else(|| Error::Context("exact basis is singular".into()))?;
        let mut me = Self { dim: n, a, cent, perp, coord_rows, coord_inv, ad_inv: ExactMatrix::zeros(0, 0) };
        let np = me.perp.len();
        let nc = me.cent.len();
        let mut ad = ExactMatrix::zeros(np, np);
        for k in 0..np {
            let y = exact_bracket(&me.a, &me.perp[k]);
            let c = me.exact_coordinates(&y);
            for i in 0..np {
                ad.set(i, k, c[nc + i].clone());
            }
        }
        me.ad_inv = if np == 0 { ad } else { ad.inverse().ok_or(Error::NonRegular(f64::INFINITY))? };
        Ok(me)
    }

    fn exact_coordinates(&self, x: &ExactMatrix) -> Vec<GaussRational> {
        let m = self.coord_rows.len();
        (0..m)
            .map(|i| {
                let mut s = GaussRational::zero();
                for (r, &p) in self.coord_rows.iter().enumerate() {
                    s += &(self.coord_inv.get(i, r) * &x.data[p]);
                }
                s
            })
            .collect()
    }

    /// Coordinates [cent | perp] of a polynomial matrix lying in the algebra.
    fn coordinates(&self, x: &DiffPolyMatrix) -> Vec<DiffPoly> {
        let m = self.coord_rows.len();
        (0..m)
            .map(|i| {
                let mut s = DiffPoly::zero();
                for (r, &p) in self.coord_rows.iter().enumerate() {
                    let c = self.coord_inv.get(i, r);
                    if !c.is_zero() && !x.entries[p].is_zero() {
                        s = s.add(&x.entries[p].scale(c));
                    }
                }
                s
            })
            .collect()
    }

    fn combine(&self, basis: &[ExactMatrix], coeffs: &[DiffPoly]) -> DiffPolyMatrix {
        let n = self.dim;
        let mut out = DiffPolyMatrix::zero(n);
        for (b, c) in basis.iter().zip(coeffs) {
            if c.is_zero() {
                continue;
            }
            for p in 0..n * n {
                if !b.data[p].is_zero() {
                    out.entries[p] = out.entries[p].add(&c.scale(&b.data[p]));
                }
            }
        }
        out
    }

    /// The symbol u = Σ_k u_k e_k.
    pub fn u_symbol(&self) -> DiffPolyMatrix {
        let coeffs: Vec<DiffPoly> = (0..self.perp.len()).map(|k| DiffPoly::var(JetVar::new(k as u32, 0))).collect();
        self.combine(&self.perp, &coeffs)
    }
}

fn exact_bracket(a: &ExactMatrix, b: &ExactMatrix) -> ExactMatrix {
    let ab = a.mul(b);
    let ba = b.mul(a);
    ExactMatrix { rows: a.rows, cols: a.cols, data: ab.data.iter().zip(&ba.data).map(|(x, y)| x - y).collect() }
}

/// Q_{b,0}, …, Q_{b,j} for the context, with the recursion identity re-checked at each step.
pub fn compute_q_sequence(ctx: &AlgebraContext, b: &ComplexMatrix, j: usize) -> Result<Vec<DiffPolyMatrix>> {
    compute_q_sequence_with(ctx, b, j, MAX_J)
}

pub fn compute_q_sequence_with(ctx: &AlgebraContext, b: &ComplexMatrix, j: usize, max_j: usize) -> Result<Vec<DiffPolyMatrix>> {
    if j > max_j {
        return Err(Error::OrderExceeded(j as u32, max_j as u32));
    }
    if !ctx.centralizes(b) {
        return Err(Error::Context("b must commute with the centralizer of a".into()));
    }
    let jc = JetContext::from_context(ctx)?;
    let bq = ExactMatrix::recognize(b)?;
    let max_order = max_j as u32 + 1;
    let u = jc.u_symbol();
    let a = DiffPolyMatrix::constant(&jc.a);
    let nc = jc.cent.len();
    let mut qs = vec![DiffPolyMatrix::constant(&bq)];
    for step in 0..j {
        let q = &qs[step];
        let r = q.total_x_derivative(max_order)?.add(&u.bracket(q));
        let rc = jc.coordinates(&r);
        if rc[..nc].iter().any(|p| !p.is_zero()) {
            return Err(Error::NotExact(format!("centralizer part of step {step} does not vanish")));
        }
        let perp_coeffs: Vec<DiffPoly> = (0..jc.perp.len())
            .map(|i| {
                let mut s = DiffPoly::zero();
                for (k, p) in rc[nc..].iter().enumerate() {
                    let c = jc.ad_inv.get(i, k);
                    if !c.is_zero() && !p.is_zero() {
                        s = s.sub(&p.scale(c));
                    }
                }
                s
            })
            .collect();
        let q_perp = jc.combine(&jc.perp, &perp_coeffs);
        let sc = jc.coordinates(&u.bracket(&q_perp));
        let cent_coeffs: Vec<DiffPoly> = sc[..nc].iter().map(|p| p.formal_integrate().map(|x| x.neg())).collect::<Result<_>>()?;
        let next = jc.combine(&jc.cent, &cent_coeffs).add(&q_perp);
        let identity = r.sub(&next.bracket(&a));
        if !identity.is_zero() {
            return Err(Error::NotExact(format!("recursion identity fails at step {step}")));
        }
        qs.push(next);
    }
    Ok(qs)
}

/// Q_{b,j}(u).
pub fn compute_q(ctx: &AlgebraContext, b: &ComplexMatrix, j: usize) -> Result<DiffPolyMatrix> {
    Ok(compute_q_sequence(ctx, b, j)?.pop().expect("nonempty"))
}

/// Right-hand side (Q_{b,j})ₓ + [u, Q_{b,j}] of the (b, j)-flow.
pub fn flow_rhs(ctx: &AlgebraContext, b: &ComplexMatrix, j: usize) -> Result<DiffPolyMatrix> {
    let q = compute_q(ctx, b, j)?;
    let jc = JetContext::from_context(ctx)?;
    Ok(q.total_x_derivative(MAX_J as u32 + 1)?.add(&jc.u_symbol().bracket(&q)))
}

/// Symbolic residual (Q_j)ₓ + [u, Q_j] − [Q_{j+1}, a] for j = 0..=jmax.
pub fn recursion_residuals(ctx: &AlgebraContext, b: &ComplexMatrix, jmax: usize) -> Result<Vec<DiffPolyMatrix>> {
    let qs = compute_q_sequence(ctx, b, jmax + 1)?;
    let jc = JetContext::from_context(ctx)?;
    let u = jc.u_symbol();
    let a = DiffPolyMatrix::constant(&jc.a);
    (0..=jmax)
        .map(|j| Ok(qs[j].total_x_derivative(MAX_J as u32 + 1)?.add(&u.bracket(&qs[j])).sub(&qs[j + 1].bracket(&a))))
        .collect()
}

/// Linear reality restriction on the components of u, applied after the complex computation.
#[derive(Clone, Debug, Default)]
pub struct Substitution {
    /// component ↦ Σ coeff · (target component, conjugated?)
    pub rules: BTreeMap<u32, Vec<(GaussRational, u32, bool)>>,
    /// Components declared real: their conjugate jets become the plain jets.
    pub real: Vec<u32>,
}

impl Substitution {
    /// su(2): r = −q̄.
    pub fn su2() -> Self {
        let mut s = Self::default();
        s.rules.insert(1, vec![(-GaussRational::one(), 0, true)]);
        s
    }

    /// su(2)/so(2): r = −q with q real.
    pub fn so2() -> Self {
        let mut s = Self::default();
        s.rules.insert(1, vec![(-GaussRational::one(), 0, false)]);
        s.real.push(0);
        s
    }

    /// Rule as a closure on jet variables.
    pub fn rule(&self) -> impl Fn(JetVar) -> Option<DiffPoly> + '_ {
        move |v: JetVar| {
            if let Some(terms) = self.rules.get(&v.component) {
                let mut p = DiffPoly::zero();
                for (c, target, flip) in terms {
                    let conj = v.conj ^ flip;
                    let coef = if v.conj { c.conj() } else { c.clone() };
                    let w = JetVar { component: *target, order: v.order, conj };
                    let w = if conj && self.real.contains(target) { JetVar { conj: false, ..w } } else { w };
                    p = p.add(&DiffPoly::var(w).scale(&coef));
                }
                Some(p)
            } else if v.conj && self.real.contains(&v.component) {
                Some(DiffPoly::var(JetVar { conj: false, ..v }))
            } else {
                None
            }
        }
    }

    pub fn apply(&self, m: &DiffPolyMatrix) -> DiffPolyMatrix {
        m.substitute(&self.rule())
    }
}
