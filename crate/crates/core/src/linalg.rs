//! Dense complex linear algebra on top of faer.

use faer::prelude::*;
use faer::{Mat, MatRef};

use crate::{c64, Error, Result};

/// Eigenpairs of a general complex matrix. Each eigenvector has unit
/// 2-norm and its largest-magnitude component real and positive.
pub fn eig(m: MatRef<'_, c64>) -> Result<Vec<(c64, Vec<c64>)>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let e = m.eigen().map_err(|_| Error::EigenFailed { digest: digest(m) })?;
    let s = e.S().column_vector();
    let u = e.U();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<c64> = (0..n).map(|i| u[(i, k)]).collect();
        gauge(&mut v);
        let lambda = s[k];
        if !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(Error::EigenFailed { digest: digest(m) });
        }
        out.push((lambda, v));
    }
    Ok(out)
}

/// Eigenvalues only.
pub fn eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<c64>> {
    m.eigenvalues().map_err(|_| Error::EigenFailed { digest: digest(m) })
}

/// Normalizes to unit 2-norm and rotates the largest component onto the
/// positive real axis.
pub fn gauge(v: &mut [c64]) {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, c) in v.iter().enumerate() {
        // Ties resolved toward the lowest index, with a relative margin so
        // that rounding noise does not flip the choice.
        let m = c.norm();
        if m > best_mag * (1.0 + 1e-9) {
            best = i;
            best_mag = m;
        }
    }
    let phase = v[best].conj() / best_mag;
    for c in v.iter_mut() {
        *c = *c * phase / norm;
    }
}

/// Solves m·x = b by LU with partial pivoting.
pub fn solve(m: MatRef<'_, c64>, b: &[c64]) -> Result<Vec<c64>> {
    let n = m.nrows();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let lu = m.partial_piv_lu();
    let x = lu.solve(&rhs);
    let out: Vec<c64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Singular(format!("{n}x{n} system")));
    }
    Ok(out)
}

/// Dense matrix-vector product y = m·x.
pub fn matvec(m: MatRef<'_, c64>, x: &[c64], y: &mut [c64]) {
    let n = m.nrows();
    for v in y.iter_mut() {
        *v = c64::new(0.0, 0.0);
    }
    for (j, &xj) in x.iter().enumerate() {
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        let col = m.col(j);
        for i in 0..n {
            y[i] += col[i] * xj;
        }
    }
}

/// Bilinear (unconjugated) product Σ aᵢbᵢ.
pub fn bilinear(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hermitian inner product Σ conj(aᵢ)bᵢ.
pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[c64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// FNV-1a over the raw bits of every entry; identifies a matrix in error reports.
pub fn digest(m: MatRef<'_, c64>) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let c = m[(i, j)];
            for bits in [c.re.to_bits(), c.im.to_bits()] {
                for byte in bits.to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
    }
    h
}
