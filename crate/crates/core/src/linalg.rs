//! Small dense helpers shared by the detectors and the test oracles.

use nalgebra::Cholesky;

use crate::{CMatrix, Error, Result, C64};

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`, falling back to the absolute error when `b` is zero.
pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = frobenius(&(a - b));
    let scale = frobenius(b);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Replace `m` by `(m + mᴴ)/2` in place.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Relative Hermitian defect `‖m − mᴴ‖_F / ‖m‖_F`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = frobenius(m);
    let d = frobenius(&(m - m.adjoint()));
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

/// Cholesky factor of a Hermitian positive definite matrix.
///
/// nalgebra's complex Cholesky takes complex square roots of the pivots, so
/// an indefinite input still "succeeds"; the pivots are checked here.
pub fn hpd_cholesky(m: &CMatrix) -> Option<Cholesky<C64, nalgebra::Dyn>> {
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || !d.re.is_finite() || d.im.abs() > 1e-12 * d.re {
            return None;
        }
    }
    Some(chol)
}

/// Inverse of a Hermitian positive definite matrix through Cholesky.
pub fn hpd_inverse(m: &CMatrix) -> Result<CMatrix> {
    let chol = hpd_cholesky(m).ok_or(Error::NotPositiveDefinite)?;
    let mut inv = chol.inverse();
    hermitize(&mut inv);
    Ok(inv)
}

/// `log|m|` and the Cholesky factor of a Hermitian positive definite matrix.
pub fn hpd_logdet(m: &CMatrix) -> Result<(f64, Cholesky<C64, nalgebra::Dyn>)> {
    let chol = hpd_cholesky(m).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let logdet = (0..m.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
    Ok((logdet, chol))
}

/// Real part of `tr(a · b)` without forming the product.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}
