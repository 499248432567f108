//! Exact Gaussian rationals p + q·i with p, q ∈ ℚ.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::matrix::C64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct GaussRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        Self::new(BigRational::from_integer(re.into()), BigRational::from_integer(im.into()))
    }

    /// (rn/rd) + (in/id)·i
    pub fn from_fracs(rn: i64, rd: i64, inum: i64, id: i64) -> Self {
        Self::new(BigRational::new(rn.into(), rd.into()), BigRational::new(inum.into(), id.into()))
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_ints(1, 0)
    }

    pub fn i() -> Self {
        Self::from_ints(0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn to_c64(&self) -> C64 {
        C64::new(self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }

    pub fn inv(&self) -> Option<Self> {
        let d = &self.re * &self.re + &self.im * &self.im;
        if d.is_zero() {
            return None;
        }
        Some(Self::new(&self.re / &d, -(&self.im / &d)))
    }

    /// Recognize a double as a small-denominator Gaussian rational.
    pub fn recognize(z: C64) -> Result<Self> {
        Ok(Self::new(recognize_real(z.re)?, recognize_real(z.im)?))
    }

    /// Parse a rational written as `p` or `p/q`.
    pub fn parse_rational(s: &str) -> Result<BigRational> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid rational `{s}`"));
        if s.is_empty() || s.len() > 256 {
            return Err(bad());
        }
        match s.split_once('/') {
            Some((p, q)) => {
                let p: BigInt = p.trim().parse().map_err(|_| bad())?;
                let q: BigInt = q.trim().parse().map_err(|_| bad())?;
                if q.is_zero() {
                    return Err(bad());
                }
                Ok(BigRational::new(p, q))
            }
            None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
        }
    }
}

fn recognize_real(x: f64) -> Result<BigRational> {
    const MAX_DEN: i64 = 1_000_000;
    if !x.is_finite() {
        return Err(Error::Context(format!("non-finite entry {x}")));
    }
    if x.abs() < 1e-14 {
        return Ok(BigRational::zero());
    }
    // Continued-fraction convergents.
    let (mut h0, mut h1, mut k0, mut k1) = (0i128, 1i128, 1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > MAX_DEN as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let approx = h1 as f64 / k1 as f64;
        // Genuine small fractions round-trip to within an ulp or two.
        if (approx - x).abs() <= 1e-14 * x.abs().max(1.0) {
            return Ok(BigRational::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    Err(Error::Context(format!("entry {x} is not a small-denominator rational")))
}

fn fmt_rat(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl GaussRational {
    pub fn re_string(&self) -> String {
        fmt_rat(&self.re)
    }

    pub fn im_string(&self) -> String {
        fmt_rat(&self.im)
    }
}

impl fmt::Display for GaussRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", fmt_rat(&self.re)),
            (true, false) => write!(f, "{}i", fmt_rat(&self.im)),
            (false, false) => {
                let sign = if self.im.is_negative() { "-" } else { "+" };
                write!(f, "({}{}{}i)", fmt_rat(&self.re), sign, fmt_rat(&self.im.abs()))
            }
        }
    }
}

impl Add for &GaussRational {
    type Output = GaussRational;
    fn add(self, o: &GaussRational) -> GaussRational {
        GaussRational::new(&self.re + &o.re, &self.im + &o.im)
    }
}

impl Sub for &GaussRational {
    type Output = GaussRational;
    fn sub(self, o: &GaussRational) -> GaussRational {
        GaussRational::new(&self.re - &o.re, &self.im - &o.im)
    }
}

impl Mul for &GaussRational {
    type Output = GaussRational;
    fn mul(self, o: &GaussRational) -> GaussRational {
        GaussRational::new(&self.re * &o.re - &self.im * &o.im, &self.re * &o.im + &self.im * &o.re)
    }
}

impl Div for &GaussRational {
    type Output = GaussRational;
    fn div(self, o: &GaussRational) -> GaussRational {
        self * &o.inv().expect("division by zero Gaussian rational")
    }
}

impl Neg for &GaussRational {
    type Output = GaussRational;
    fn neg(self) -> GaussRational {
        GaussRational::new(-self.re.clone(), -self.im.clone())
    }
}

impl Neg for GaussRational {
    type Output = GaussRational;
    fn neg(self) -> GaussRational {
        -&self
    }
}

impl AddAssign<&GaussRational> for GaussRational {
    fn add_assign(&mut self, o: &GaussRational) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

/// Dense exact matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<GaussRational>,
}

impl ExactMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![GaussRational::zero(); rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> &GaussRational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: GaussRational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn recognize(m: &crate::matrix::ComplexMatrix) -> Result<Self> {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, GaussRational::recognize(m[(i, j)])?);
            }
        }
        Ok(out)
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows);
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        let v = out.get(i, j) + &(a * b);
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    /// Inverse of a square matrix by Gauss–Jordan elimination.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.rows;
        if n != self.cols {
            return None;
        }
        let mut a = self.clone();
        let mut inv = Self::zeros(n, n);
        for i in 0..n {
            inv.set(i, i, GaussRational::one());
        }
        for col in 0..n {
            let piv = (col..n).find(|&r| !a.get(r, col).is_zero())?;
            a.swap_rows(col, piv);
            inv.swap_rows(col, piv);
            let p = a.get(col, col).inv()?;
            a.scale_row(col, &p);
            inv.scale_row(col, &p);
            for r in 0..n {
                if r != col && !a.get(r, col).is_zero() {
                    let f = a.get(r, col).clone();
                    a.axpy_row(r, col, &f);
                    inv.axpy_row(r, col, &f);
                }
            }
        }
        Some(inv)
    }

    /// Indices of a maximal set of linearly independent rows.
    pub fn independent_rows(&self) -> Vec<usize> {
        let mut basis: Vec<Vec<GaussRational>> = Vec::new();
        let mut pivots: Vec<usize> = Vec::new();
        let mut chosen = Vec::new();
        for r in 0..self.rows {
            let mut v: Vec<GaussRational> = self.data[r * self.cols..(r + 1) * self.cols].to_vec();
            for (b, &pc) in basis.iter().zip(&pivots) {
                if !v[pc].is_zero() {
                    let f = v[pc].clone();
                    for (x, y) in v.iter_mut().zip(b) {
                        *x = &*x - &(&f * y);
                    }
                }
            }
            if let Some(pc) = v.iter().position(|x| !x.is_zero()) {
                let p = v[pc].inv().expect("nonzero");
                for x in v.iter_mut() {
                    *x = &*x * &p;
                }
                basis.push(v);
                pivots.push(pc);
                chosen.push(r);
            }
        }
        chosen
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn scale_row(&mut self, r: usize, f: &GaussRational) {
        for j in 0..self.cols {
            let v = self.get(r, j) * f;
            self.set(r, j, v);
        }
    }

    /// row_r ← row_r − f·row_s
    fn axpy_row(&mut self, r: usize, s: usize, f: &GaussRational) {
        for j in 0..self.cols {
            let v = self.get(r, j) - &(f * self.get(s, j));
            self.set(r, j, v);
        }
    }
}
