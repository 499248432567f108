//! Uniform rectangular grids carrying matrix-valued fields.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::matrix::*;

/// Uniform axis `start + i·step`, `i = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, n: usize) -> Result<Self> {
        if n == 0 || !(step > 0.0) || !start.is_finite() || !step.is_finite() {
            return Err(Error::Grid(format!("bad axis start={start} step={step} n={n}")));
        }
        Ok(Self { start, step, n })
    }

    /// `n` points spanning `[lo, hi]` inclusive.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::Grid(format!("bad linspace [{lo}, {hi}] with {n} points")));
        }
        Self::new(lo, (hi - lo) / (n - 1) as f64, n)
    }

    /// Rebuild an axis from sampled coordinates, checking uniform spacing.
    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() == 1 {
            return Self::new(v[0], 1.0, 1);
        }
        if v.len() < 2 {
            return Err(Error::Grid("empty axis".into()));
        }
        let step = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
        let ax = Self::new(v[0], step, v.len())?;
        for (i, &x) in v.iter().enumerate() {
            if (x - ax.at(i)).abs() > 1e-9 * (1.0 + x.abs()) {
                return Err(Error::Grid("axis is not uniformly spaced".into()));
            }
        }
        Ok(ax)
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.at(self.n - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.at(i)).collect()
    }

    /// Index of the grid point nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        (((x - self.start) / self.step).round().max(0.0) as usize).min(self.n - 1)
    }

    /// Index of an exact grid node at `x`, if there is one.
    pub fn node(&self, x: f64) -> Option<usize> {
        let i = self.nearest(x);
        ((self.at(i) - x).abs() <= 1e-9 * self.step).then_some(i)
    }

    /// Same interval with twice the resolution.
    pub fn refined(&self) -> Self {
        Self { start: self.start, step: self.step / 2.0, n: 2 * self.n - 1 }
    }
}

/// A matrix-valued field sampled on a rectangular grid. Scalar equations use 1×1 matrices.
/// Masked points (e.g. dressing singularities) hold NaN and are skipped by residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionGrid {
    pub x: Axis,
    pub t: Axis,
    pub tag: String,
    pub ctx: String,
    pub dim: usize,
    values: Vec<ComplexMatrix>,
}

impl SolutionGrid {
    pub fn from_fn(
        x: Axis,
        t: Axis,
        tag: &str,
        ctx: &str,
        dim: usize,
        mut f: impl FnMut(f64, f64) -> ComplexMatrix,
    ) -> Self {
        let mut values = Vec::with_capacity(x.n * t.n);
        for it in 0..t.n {
            for ix in 0..x.n {
                values.push(f(x.at(ix), t.at(it)));
            }
        }
        Self { x, t, tag: tag.into(), ctx: ctx.into(), dim, values }
    }

    /// Field computed from grid indices; the matrix size is taken from the values.
    pub fn from_indexed(x: Axis, t: Axis, tag: &str, ctx: &str, mut f: impl FnMut(usize, usize) -> ComplexMatrix) -> Self {
        let mut values = Vec::with_capacity(x.n * t.n);
        for it in 0..t.n {
            for ix in 0..x.n {
                values.push(f(ix, it));
            }
        }
        let dim = values[0].nrows();
        Self { x, t, tag: tag.into(), ctx: ctx.into(), dim, values }
    }

    /// Same axes and labels, values computed from grid indices.
    pub fn map_indexed(&self, f: impl FnMut(usize, usize) -> ComplexMatrix) -> Self {
        Self::from_indexed(self.x, self.t, &self.tag, &self.ctx, f)
    }

    /// Scalar field stored as 1×1 matrices.
    pub fn scalar(x: Axis, t: Axis, tag: &str, ctx: &str, mut f: impl FnMut(f64, f64) -> C64) -> Self {
        Self::from_fn(x, t, tag, ctx, 1, |a, b| ComplexMatrix::from_element(1, 1, f(a, b)))
    }

    pub fn from_values(x: Axis, t: Axis, tag: &str, ctx: &str, dim: usize, values: Vec<ComplexMatrix>) -> Result<Self> {
        if Some(values.len()) != x.n.checked_mul(t.n) || values.iter().any(|v| v.shape() != (dim, dim)) {
            return Err(Error::Dimension("grid values do not match the axes".into()));
        }
        Ok(Self { x, t, tag: tag.into(), ctx: ctx.into(), dim, values })
    }

    pub fn idx(&self, ix: usize, it: usize) -> usize {
        it * self.x.n + ix
    }

    pub fn get(&self, ix: usize, it: usize) -> &ComplexMatrix {
        &self.values[self.idx(ix, it)]
    }

    pub fn set(&mut self, ix: usize, it: usize, m: ComplexMatrix) {
        let k = self.idx(ix, it);
        self.values[k] = m;
    }

    pub fn scalar_at(&self, ix: usize, it: usize) -> C64 {
        self.get(ix, it)[(0, 0)]
    }

    pub fn values(&self) -> &[ComplexMatrix] {
        &self.values
    }

    pub fn is_masked(&self, ix: usize, it: usize) -> bool {
        !is_finite(self.get(ix, it))
    }

    pub fn mask(&mut self, ix: usize, it: usize) {
        let d = self.dim;
        self.set(ix, it, nan_matrix(d));
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| !is_finite(v)).count()
    }

    pub fn map(&self, tag: &str, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let values: Vec<_> = self.values.iter().map(f).collect();
        let dim = values.first().map_or(self.dim, |v| v.nrows());
        Self { x: self.x, t: self.t, tag: tag.into(), ctx: self.ctx.clone(), dim, values }
    }

    /// Every other point along both axes.
    pub fn coarsened(&self) -> Result<Self> {
        if self.x.n.is_multiple_of(2) || self.t.n.is_multiple_of(2) {
            return Err(Error::Grid("coarsening needs odd point counts".into()));
        }
        let x = Axis::new(self.x.start, 2.0 * self.x.step, self.x.n.div_ceil(2))?;
        let t = Axis::new(self.t.start, 2.0 * self.t.step, self.t.n.div_ceil(2))?;
        Self::from_values(
            x,
            t,
            &self.tag,
            &self.ctx,
            self.dim,
            (0..t.n).flat_map(|it| (0..x.n).map(move |ix| (ix, it))).map(|(ix, it)| self.get(2 * ix, 2 * it).clone()).collect(),
        )
    }

    /// Max distance over jointly unmasked points.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if self.x != other.x || self.t != other.t || self.dim != other.dim {
            return Err(Error::Dimension("grids differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| is_finite(a) && is_finite(b))
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max))
    }

    /// CSV with columns `x,t,re_i_j,im_i_j,...` in row-major entry order.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["x".to_string(), "t".to_string()];
        for i in 0..self.dim {
            for j in 0..self.dim {
                header.push(format!("re_{i}_{j}"));
                header.push(format!("im_{i}_{j}"));
            }
        }
        w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
        for it in 0..self.t.n {
            for ix in 0..self.x.n {
                let m = self.get(ix, it);
                let mut rec = vec![fmt(self.x.at(ix)), fmt(self.t.at(it))];
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        rec.push(fmt(m[(i, j)].re));
                        rec.push(fmt(m[(i, j)].im));
                    }
                }
                w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
    }

    /// Inverse of [`to_csv`](Self::to_csv). Rows must be in x-fastest order.
    pub fn from_csv(text: &str, tag: &str, ctx: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if header.len() < 4 || &header[0] != "x" || &header[1] != "t" || header.len() % 2 != 0 {
            return Err(Error::Parse("expected header x,t,re_0_0,im_0_0,...".into()));
        }
        let entries = (header.len() - 2) / 2;
        let dim = (entries as f64).sqrt().round() as usize;
        if dim * dim != entries || dim == 0 {
            return Err(Error::Parse(format!("{entries} entries is not a square matrix")));
        }
        for i in 0..dim {
            for j in 0..dim {
                let k = 2 + 2 * (i * dim + j);
                if header[k] != format!("re_{i}_{j}") || header[k + 1] != format!("im_{i}_{j}") {
                    return Err(Error::Parse(format!("unexpected column `{}`", &header[k])));
                }
            }
        }
        let mut xs = Vec::new();
        let mut ts = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let nums: Vec<f64> = rec
                .iter()
                .map(parse_num)
                .collect::<Result<_>>()?;
            if nums.len() != header.len() {
                return Err(Error::Parse("ragged row".into()));
            }
            if !nums[0].is_finite() || !nums[1].is_finite() {
                return Err(Error::Parse("non-finite coordinate".into()));
            }
            xs.push(nums[0]);
            ts.push(nums[1]);
            values.push(ComplexMatrix::from_fn(dim, dim, |i, j| {
                let k = 2 + 2 * (i * dim + j);
                c(nums[k], nums[k + 1])
            }));
        }
        if values.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        let nx = ts.iter().position(|&t| t != ts[0]).unwrap_or(ts.len());
        if nx == 0 || values.len() % nx != 0 {
            return Err(Error::Parse("rows do not form a rectangle".into()));
        }
        let nt = values.len() / nx;
        let x = Axis::from_values(&xs[..nx])?;
        let t = Axis::from_values(&(0..nt).map(|k| ts[k * nx]).collect::<Vec<_>>())?;
        for it in 0..nt {
            for ix in 0..nx {
                let k = it * nx + ix;
                if (xs[k] - x.at(ix)).abs() > 1e-9 * (1.0 + xs[k].abs())
                    || (ts[k] - t.at(it)).abs() > 1e-9 * (1.0 + ts[k].abs())
                {
                    return Err(Error::Parse(format!("row {k} is off the grid")));
                }
            }
        }
        Self::from_values(x, t, tag, ctx, dim, values)
    }

    /// Full JSON form; masked points serialize as `null`.
    pub fn to_json(&self) -> Value {
        let vals: Vec<Value> = self
            .values
            .iter()
            .map(|m| {
                if is_finite(m) {
                    Value::Array(m.transpose().iter().flat_map(|z| [json!(z.re), json!(z.im)]).collect())
                } else {
                    Value::Null
                }
            })
            .collect();
        json!({"x": self.x, "t": self.t, "tag": self.tag, "ctx": self.ctx, "dim": self.dim, "values": vals})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            x: Axis,
            t: Axis,
            tag: String,
            ctx: String,
            dim: usize,
            values: Vec<Option<Vec<f64>>>,
        }
        let raw: Raw = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        let x = Axis::new(raw.x.start, raw.x.step, raw.x.n)?;
        let t = Axis::new(raw.t.start, raw.t.step, raw.t.n)?;
        let d = raw.dim;
        if !(1..=16).contains(&d) || Some(raw.values.len()) != x.n.checked_mul(t.n) {
            return Err(Error::Parse("dim or value count does not match the axes".into()));
        }
        let values = raw
            .values
            .into_iter()
            .map(|e| match e {
                None => Ok(nan_matrix(d)),
                Some(v) if v.len() == 2 * d * d => {
                    Ok(ComplexMatrix::from_fn(d, d, |i, j| c(v[2 * (i * d + j)], v[2 * (i * d + j) + 1])))
                }
                Some(_) => Err(Error::Parse("entry length does not match dim".into())),
            })
            .collect::<Result<_>>()?;
        Self::from_values(x, t, &raw.tag, &raw.ctx, d, values)
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

fn parse_num(s: &str) -> Result<f64> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}
