//! Dense numerics delegated to nalgebra: Hermitian square roots and polynomial roots.

use crate::error::{domain, EquivError, Result};
use crate::scalar::C64;
use crate::tensor::ComplexMatrix;
use nalgebra::{DMatrix, DVector};

pub(crate) fn to_na(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.dim(), m.dim(), |i, j| *m.get(i, j))
}

pub(crate) fn from_na(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), |i, j| m[(i, j)])
}

/// Eigenvalues and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_hermitian(1e-10 * (1.0 + max_abs(m))) {
        return domain("matrix is not Hermitian");
    }
    let eig = to_na(m).symmetric_eigen();
    Ok((eig.eigenvalues.iter().copied().collect(), from_na(&eig.eigenvectors)))
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.data().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Positive square root of a Hermitian positive definite matrix.
pub fn hermitian_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = hermitian_eigen(m)?;
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    if let Some(v) = vals.iter().find(|&&v| v <= 1e-14 * scale) {
        return domain(format!("matrix is not positive definite (eigenvalue {v:e})"));
    }
    let root = ComplexMatrix::diag(vals.iter().map(|v| C64::new(v.sqrt(), 0.0)).collect());
    Ok(vecs.mul(&root).mul(&vecs.adjoint()))
}

/// Eigenvalues from the complex Schur form, with an iteration cap.
///
/// Some symmetric inputs with zero diagonal stall the shifted QR sweep, so a failed run is
/// retried on a fixed similarity transform of the input.
pub(crate) fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    let n = m.nrows();
    let diag = |t: DMatrix<C64>| (0..n).map(|i| t[(i, i)]).collect::<Vec<_>>();
    if let Some(s) = nalgebra::Schur::try_new(m.clone(), 1e-15, 10_000) {
        return Ok(diag(s.unpack().1));
    }
    // unit upper triangular, so its inverse is cheap and well conditioned
    let t = DMatrix::from_fn(n, n, |i, j| match j.cmp(&i) {
        std::cmp::Ordering::Equal => C64::new(1.0, 0.0),
        std::cmp::Ordering::Greater => C64::new(0.31, 0.17),
        std::cmp::Ordering::Less => C64::new(0.0, 0.0),
    });
    let t_inv = t.clone().try_inverse().ok_or_else(|| EquivError::Numeric("similarity not invertible".into()))?;
    let shifted = &t * m * &t_inv;
    nalgebra::Schur::try_new(shifted, 1e-15, 10_000)
        .map(|s| diag(s.unpack().1))
        .ok_or_else(|| EquivError::Numeric("Schur iteration did not converge".into()))
}

/// Roots of the monic polynomial `x^n + c_{n-1} x^{n-1} + … + c_0`, coefficients low to high.
///
/// Companion-matrix eigenvalues, then a few Newton steps on the polynomial itself.
pub fn monic_roots(coeffs_low: &[f64]) -> Result<Vec<C64>> {
    let n = coeffs_low.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let comp = DMatrix::from_fn(n, n, |i, j| {
        C64::new(
            if j == n - 1 {
                -coeffs_low[i]
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            },
            0.0,
        )
    });
    let mut roots = eigenvalues(&comp)?;
    let poly = |x: C64| -> (C64, C64) {
        let mut p = C64::new(1.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in coeffs_low.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    };
    for r in roots.iter_mut() {
        for _ in 0..8 {
            let (p, dp) = poly(*r);
            if dp.norm() < 1e-300 {
                break;
            }
            let step = p / dp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
            if step.norm() < 1e-16 * (1.0 + r.norm()) {
                break;
            }
        }
    }
    if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(EquivError::Numeric("companion eigenvalues did not converge".into()));
    }
    Ok(roots)
}

/// Solve `A x = b` for a small dense system.
pub fn solve(a: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    let lu = to_na(a).lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| EquivError::Domain("singular system".into()))
}
