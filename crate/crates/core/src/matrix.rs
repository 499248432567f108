//! Dense complex matrices and the handful of helpers every module shares.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Frobenius-norm tolerance below which a validation quantity counts as zero.
pub const SYMBOLIC_ZERO: f64 = 1e-10;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn zeros(n: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(n, n)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Square matrix from row slices of complex entries.
pub fn from_rows(rows: &[Vec<C64>]) -> ComplexMatrix {
    let n = rows.len();
    ComplexMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Square matrix from real row slices.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    ComplexMatrix::from_fn(n, n, |i, j| re(rows[i][j]))
}

pub fn diag(entries: &[C64]) -> ComplexMatrix {
    let n = entries.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { C64::new(0.0, 0.0) })
}

/// Elementary matrix e_{ij}.
pub fn unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(n);
    m[(i, j)] = re(1.0);
    m
}

/// The bracket AB − BA.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(bracket(a, b))
}

/// Unchecked bracket for internal use where shapes are known to agree.
pub fn bracket(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn norm(m: &ComplexMatrix) -> f64 {
    m.norm()
}

pub fn dist(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).norm()
}

/// The trace form ⟨X, Y⟩ = tr(XY).
pub fn trace_form(x: &ComplexMatrix, y: &ComplexMatrix) -> C64 {
    let n = x.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            s += x[(i, k)] * y[(k, i)];
        }
    }
    s
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn conj(m: &ComplexMatrix) -> ComplexMatrix {
    m.map(|z| z.conj())
}

pub fn expm(m: &ComplexMatrix) -> ComplexMatrix {
    m.exp()
}

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    m.clone()
        .try_inverse()
        .filter(is_finite)
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix has no inverse", m.nrows(), m.ncols())))
}

pub fn nan_matrix(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_element(n, n, C64::new(f64::NAN, f64::NAN))
}

/// Eigenvalues via the complex Schur form.
pub fn eigenvalues(m: &ComplexMatrix) -> Vec<C64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let (_, t) = nalgebra::Schur::new(m.clone()).unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Max-distance between two spectra under the best matching of eigenvalues.
pub fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n <= 7 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let d = p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm()).fold(0.0, f64::max);
            if d < best {
                best = d;
            }
        });
        best
    } else {
        let mut used = vec![false; n];
        let mut worst: f64 = 0.0;
        for x in a {
            let (j, d) = (0..n)
                .filter(|&j| !used[j])
                .map(|j| (j, (x - b[j]).norm()))
                .fold((usize::MAX, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Hermitian projection onto the column span of `vs`, via modified Gram–Schmidt.
/// Fails when a vector is dependent on its predecessors to within `floor`.
pub fn hermitian_projection(vs: &[ComplexVector], floor: f64) -> Result<ComplexMatrix> {
    let n = vs.first().map(|v| v.len()).ok_or_else(|| Error::Dressing("empty span".into()))?;
    let mut basis: Vec<ComplexVector> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &basis {
                let coef = e.dotc(&w);
                w -= e * coef;
            }
        }
        let nw = w.norm();
        let scale = v.norm().max(1.0);
        if nw < floor * scale {
            return Err(Error::DegenerateSpan(nw));
        }
        basis.push(w / C64::new(nw, 0.0));
    }
    let mut p = zeros(n);
    for e in &basis {
        p += e * e.adjoint();
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_nilpotent_is_a_polynomial() {
        let n = from_real_rows(&[&[0.0, 2.0, 0.0], &[0.0, 0.0, 3.0], &[0.0, 0.0, 0.0]]);
        let want = identity(3) + &n + &n * &n * re(0.5);
        assert!(dist(&expm(&n), &want) < 1e-14);
    }

    #[test]
    fn spectra_match_up_to_order() {
        let a = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)];
        let b = [a[2], a[0], a[1] + c(1e-3, 0.0)];
        assert!((spectrum_distance(&a, &b) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn projection_onto_dependent_vectors_fails() {
        let v = ComplexVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let p = hermitian_projection(std::slice::from_ref(&v), 1e-12).unwrap();
        assert!(dist(&(&p * &p), &p) < 1e-15 && dist(&p.adjoint(), &p) < 1e-15);
        assert!(matches!(hermitian_projection(&[v.clone(), v * c(0.0, 2.0)], 1e-12), Err(Error::DegenerateSpan(_))));
    }
}
