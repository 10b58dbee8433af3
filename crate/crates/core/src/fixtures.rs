//! Seeded random inputs shared by tests, suites and the acceptance run.

use crate::linalg::{from_na, to_na};
use crate::scalar::{Scalar, C64};
use crate::tensor::{ComplexMatrix, ComplexOperator, ComplexTensor, Matrix, Tensor, TensorOperator};
use rand::Rng;
use rand_distr::StandardNormal;

fn normal_c64<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Entries with independent standard normal real and imaginary parts.
pub fn random_matrix<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| normal_c64(rng))
}

/// Gaussian integers `a + ib` with `|a|, |b| ≤ range`.
pub fn random_gaussian_int_matrix<S: Scalar, R: Rng>(rng: &mut R, dim: usize, range: i64) -> Matrix<S> {
    Matrix::from_fn(dim, |_, _| S::from_gaussian(rng.gen_range(-range..=range), rng.gen_range(-range..=range)))
}

/// Hermitian positive definite `A A†/dim + I`.
pub fn random_pd<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let a = random_matrix(rng, dim);
    let s = C64::new(1.0 / dim as f64, 0.0);
    a.mul(&a.adjoint()).scale(&s).add(&ComplexMatrix::identity(dim))
}

/// Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let qr = to_na(&random_matrix(rng, dim)).qr();
    from_na(&qr.q())
}

pub fn random_tensor<R: Rng>(rng: &mut R, order: usize, dim: usize) -> ComplexTensor {
    let len = dim.pow(order as u32);
    Tensor::new(order, dim, (0..len).map(|_| normal_c64(rng)).collect()).expect("shape")
}

pub fn random_operator<R: Rng>(rng: &mut R, order: usize, dim: usize) -> ComplexOperator {
    let len = dim.pow(order as u32);
    TensorOperator::from_matrix(order, dim, random_matrix(rng, len)).expect("shape")
}

/// Operator with Gaussian-integer entries in the chosen backend.
pub fn random_gaussian_int_operator<S: Scalar, R: Rng>(
    rng: &mut R,
    order: usize,
    dim: usize,
    range: i64,
) -> TensorOperator<S> {
    let len = dim.pow(order as u32);
    TensorOperator::from_matrix(order, dim, random_gaussian_int_matrix(rng, len, range)).expect("shape")
}
