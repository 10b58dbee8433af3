//! Dense complex matrices, tensors and tensor operators, with the trace invariants built on them.
//!
//! Storage is row-major. A multi-index `(a_0, …, a_{D-1})` with entries in `0..N` flattens to
//! `Σ_c a_c N^{D-1-c}`, so color 0 is the slowest. Operator entries `P^a_b` put the upper
//! multi-index `a` on the row.

use crate::error::{domain, input, resource, Result};
use crate::perm::{MultiPermutation, Odometer, Permutation};
use crate::scalar::{Scalar, C64};
#[cfg(test)]
use num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Largest `N^{nD}` the naive invariant sum will walk.
pub const NAIVE_INDEX_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    dim: usize,
    data: Vec<S>,
}

pub type ComplexMatrix = Matrix<C64>;

impl<S: Scalar> Matrix<S> {
    pub fn new(dim: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != dim * dim {
            return input(format!("a {dim}x{dim} matrix needs {} entries, got {}", dim * dim, data.len()));
        }
        Ok(Matrix { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, data: vec![S::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(vec![S::one(); dim])
    }

    pub fn diag(values: Vec<S>) -> Self {
        let dim = values.len();
        let mut m = Self::zeros(dim);
        for (i, v) in values.into_iter().enumerate() {
            m.data[i * dim + i] = v;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Matrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.dim + j] = v;
    }

    pub fn mul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.dim, other.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &other.data[k * n + j];
                    if !b.is_zero() {
                        out.data[i * n + j] = out.data[i * n + j].clone() + a.clone() * b;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix<S>) -> Matrix<S> {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b).collect();
        Matrix { dim: self.dim, data }
    }

    pub fn sub(&self, other: &Matrix<S>) -> Matrix<S> {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.clone() - b.clone()).collect();
        Matrix { dim: self.dim, data }
    }

    pub fn scale(&self, z: &S) -> Matrix<S> {
        Matrix { dim: self.dim, data: self.data.iter().map(|a| a.clone() * z).collect() }
    }

    pub fn trace(&self) -> S {
        (0..self.dim).fold(S::zero(), |acc, i| acc + &self.data[i * self.dim + i])
    }

    pub fn transpose(&self) -> Matrix<S> {
        Self::from_fn(self.dim, |i, j| self.get(j, i).clone())
    }

    pub fn adjoint(&self) -> Matrix<S> {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    /// `[Tr(M), Tr(M²), …, Tr(M^kmax)]`.
    pub fn power_traces(&self, kmax: usize) -> Vec<S> {
        let mut out = Vec::with_capacity(kmax);
        if kmax == 0 {
            return out;
        }
        let mut p = self.clone();
        out.push(p.trace());
        for _ in 1..kmax {
            p = p.mul(self);
            out.push(p.trace());
        }
        out
    }

    pub fn kron(&self, other: &Matrix<S>) -> Matrix<S> {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |r, c| {
            self.get(r / m, c / m).clone() * other.get(r % m, c % m)
        })
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Matrix<T> {
        Matrix { dim: self.dim, data: self.data.iter().map(f).collect() }
    }

    pub fn to_c64(&self) -> ComplexMatrix {
        self.map(|x| x.to_c64())
    }

    pub fn max_abs_diff(&self, other: &Matrix<S>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_c64() - b.to_c64()).norm())
            .fold(0.0, f64::max)
    }

    /// Determinant by Gaussian elimination. Float pivots on the largest modulus, exact on the first nonzero.
    pub fn det(&self) -> S {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = S::one();
        for col in 0..n {
            let pivot = if S::EXACT {
                (col..n).find(|&r| !a[r * n + col].is_zero())
            } else {
                (col..n)
                    .max_by(|&x, &y| {
                        a[x * n + col].to_c64().norm().total_cmp(&a[y * n + col].to_c64().norm())
                    })
                    .filter(|&r| !a[r * n + col].is_zero())
            };
            let Some(p) = pivot else {
                return S::zero();
            };
            if p != col {
                for j in 0..n {
                    a.swap(p * n + j, col * n + j);
                }
                det = -det;
            }
            let piv = a[col * n + col].clone();
            det = det * &piv;
            for r in col + 1..n {
                let f = a[r * n + col].clone() / piv.clone();
                if f.is_zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j].clone() * &f;
                    a[r * n + j] = a[r * n + j].clone() - v;
                }
            }
        }
        det
    }

    /// Gauss–Jordan inverse, `None` when singular. Same pivoting rule as `det`.
    pub fn inverse(&self) -> Option<Matrix<S>> {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let p = if S::EXACT {
                (col..n).find(|&r| !a[r * n + col].is_zero())
            } else {
                (col..n)
                    .max_by(|&x, &y| {
                        a[x * n + col].to_c64().norm().total_cmp(&a[y * n + col].to_c64().norm())
                    })
                    .filter(|&r| !a[r * n + col].is_zero())
            }?;
            if p != col {
                for j in 0..n {
                    a.swap(p * n + j, col * n + j);
                    inv.swap(p * n + j, col * n + j);
                }
            }
            let piv = a[col * n + col].clone();
            for j in 0..n {
                a[col * n + j] = a[col * n + j].clone() / piv.clone();
                inv[col * n + j] = inv[col * n + j].clone() / piv.clone();
            }
            for r in 0..n {
                if r == col || a[r * n + col].is_zero() {
                    continue;
                }
                let f = a[r * n + col].clone();
                for j in 0..n {
                    let v = a[col * n + j].clone() * &f;
                    a[r * n + j] = a[r * n + j].clone() - v;
                    let w = inv[col * n + j].clone() * &f;
                    inv[r * n + j] = inv[r * n + j].clone() - w;
                }
            }
        }
        Some(Matrix { dim: n, data: inv })
    }
}

impl ComplexMatrix {
    /// Whether `M M† = M† M` to the given entrywise tolerance.
    pub fn is_normal(&self, tol: f64) -> bool {
        let a = self.adjoint();
        self.mul(&a).max_abs_diff(&a.mul(self)) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Sum of principal logarithms of the LU pivots.
    ///
    /// The imaginary part is the running sum of pivot arguments, not reduced to `(-π, π]`.
    /// For matrices near the identity it agrees with the logarithm series.
    pub fn log_det(&self) -> Result<C64> {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut acc = C64::new(0.0, 0.0);
        let mut flips = 0usize;
        for col in 0..n {
            let p = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .unwrap();
            if a[p * n + col].norm() == 0.0 {
                return domain("singular matrix in log-determinant");
            }
            if p != col {
                for j in 0..n {
                    a.swap(p * n + j, col * n + j);
                }
                flips += 1;
            }
            let piv = a[col * n + col];
            acc += piv.ln();
            for r in col + 1..n {
                let f = a[r * n + col] / piv;
                for j in col..n {
                    let v = a[col * n + j] * f;
                    a[r * n + j] -= v;
                }
            }
        }
        if flips % 2 == 1 {
            acc += C64::new(0.0, std::f64::consts::PI);
        }
        Ok(acc)
    }

    /// Largest eigenvalue modulus, bounded through the Gelfand formula on `‖M^64‖^(1/64)`.
    pub fn spectral_radius_estimate(&self) -> f64 {
        let mut p = self.clone();
        let mut log_scale = 0.0f64;
        for _ in 0..6 {
            p = p.mul(&p);
            let norm = p.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            p = p.scale(&C64::new(1.0 / norm, 0.0));
            log_scale = 2.0 * log_scale + norm.ln();
        }
        (log_scale / 64.0).exp()
    }
}

/// Complex tensor `φ ∈ (ℂ^N)^{⊗D}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    order: usize,
    dim: usize,
    data: Vec<S>,
}

pub type ComplexTensor = Tensor<C64>;

impl<S: Scalar> Tensor<S> {
    pub fn new(order: usize, dim: usize, data: Vec<S>) -> Result<Self> {
        let len = checked_pow(dim, order)?;
        if data.len() != len {
            return input(format!("tensor of shape {dim}^{order} needs {len} entries, got {}", data.len()));
        }
        Ok(Tensor { order, dim, data })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn get(&self, idx: &[usize]) -> &S {
        &self.data[flatten(idx, self.dim)]
    }

    /// The operator `φψ†` with entries `φ^a conj(ψ_b)`.
    pub fn outer(&self, psi: &Tensor<S>) -> Result<TensorOperator<S>> {
        if self.order != psi.order || self.dim != psi.dim {
            return input("outer product needs tensors of one shape");
        }
        let len = self.data.len();
        let m = Matrix::from_fn(len, |a, b| self.data[a].clone() * psi.data[b].conj());
        TensorOperator::from_matrix(self.order, self.dim, m)
    }

    /// `ψ†φ`.
    pub fn inner(&self, phi: &Tensor<S>) -> S {
        self.data.iter().zip(&phi.data).fold(S::zero(), |acc, (a, b)| acc + a.conj() * b)
    }
}

/// Operator on `(ℂ^N)^{⊗D}` with upper (row) and lower (column) multi-indices.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorOperator<S> {
    order: usize,
    dim: usize,
    mat: Matrix<S>,
}

pub type ComplexOperator = TensorOperator<C64>;

impl<S: Scalar> TensorOperator<S> {
    pub fn from_matrix(order: usize, dim: usize, mat: Matrix<S>) -> Result<Self> {
        let len = checked_pow(dim, order)?;
        if mat.dim() != len {
            return input(format!("operator of order {order} over N={dim} needs a {len}x{len} matrix"));
        }
        Ok(TensorOperator { order, dim, mat })
    }

    pub fn identity(order: usize, dim: usize) -> Result<Self> {
        Self::from_matrix(order, dim, Matrix::identity(checked_pow(dim, order)?))
    }

    /// `R_0 ⊗ R_1 ⊗ …`, one factor per color.
    pub fn tensor_product(factors: &[Matrix<S>]) -> Result<Self> {
        let Some(first) = factors.first() else {
            return input("tensor product of no factors");
        };
        let dim = first.dim();
        if factors.iter().any(|f| f.dim() != dim) {
            return input("all tensor factors must share one dimension");
        }
        let mut m = first.clone();
        for f in &factors[1..] {
            m = m.kron(f);
        }
        Self::from_matrix(factors.len(), dim, m)
    }

    /// The swap `Σ^{ac}_{bd} = δ^a_d δ^c_b` on `ℂ^N ⊗ ℂ^N`.
    pub fn swap(dim: usize) -> Self {
        let m = Matrix::from_fn(dim * dim, |r, c| {
            let (a, cc) = (r / dim, r % dim);
            let (b, d) = (c / dim, c % dim);
            if a == d && cc == b {
                S::one()
            } else {
                S::zero()
            }
        });
        TensorOperator { order: 2, dim, mat: m }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix<S> {
        self.mat
    }

    /// `P^{upper}_{lower}`.
    pub fn entry(&self, upper: &[usize], lower: &[usize]) -> &S {
        self.mat.get(flatten(upper, self.dim), flatten(lower, self.dim))
    }

    pub fn trace(&self) -> S {
        self.mat.trace()
    }

    pub fn mul(&self, other: &TensorOperator<S>) -> TensorOperator<S> {
        TensorOperator { order: self.order, dim: self.dim, mat: self.mat.mul(&other.mat) }
    }

    pub fn adjoint(&self) -> TensorOperator<S> {
        TensorOperator { order: self.order, dim: self.dim, mat: self.mat.adjoint() }
    }

    pub fn to_c64(&self) -> ComplexOperator {
        TensorOperator { order: self.order, dim: self.dim, mat: self.mat.to_c64() }
    }

    /// `1 ⊗ X` with the identity on color 0.
    pub fn lift_color0(x: &TensorOperator<S>) -> Result<TensorOperator<S>> {
        let id = Matrix::identity(x.dim);
        Self::from_matrix(x.order + 1, x.dim, id.kron(&x.mat))
    }
}

fn checked_pow(dim: usize, order: usize) -> Result<usize> {
    let mut len: usize = 1;
    for _ in 0..order {
        len = match len.checked_mul(dim) {
            Some(v) if v <= 1 << 24 => v,
            _ => return resource(format!("dimension {dim}^{order} is too large")),
        };
    }
    Ok(len)
}

#[inline]
pub(crate) fn flatten(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &a| acc * dim + a)
}

pub(crate) fn unflatten(mut flat: usize, dim: usize, order: usize) -> Vec<usize> {
    let mut idx = vec![0; order];
    for c in (0..order).rev() {
        idx[c] = flat % dim;
        flat /= dim;
    }
    idx
}

/// `Tr_[σ](M) = Π_j Tr(M^{λ_j})` for `λ` the cycle type of `σ`.
pub fn multi_trace<S: Scalar>(sigma: &Permutation, m: &Matrix<S>) -> S {
    let lambda = sigma.cycle_type();
    let kmax = lambda.parts().first().copied().unwrap_or(0);
    let traces = m.power_traces(kmax);
    lambda.parts().iter().fold(S::one(), |acc, &p| acc * &traces[p - 1])
}

/// Defining sum `Σ_k Π_i M_{k_i, k_σ(i)}`, kept as an audit path for [`multi_trace`].
pub fn multi_trace_naive<S: Scalar>(sigma: &Permutation, m: &Matrix<S>) -> Result<S> {
    let n = sigma.degree();
    budget(m.dim(), n)?;
    let mut total = S::zero();
    let mut od = Odometer::new(n, m.dim());
    while let Some(k) = od.current() {
        let mut term = S::one();
        for i in 0..n {
            term = term * m.get(k[i], k[sigma.apply(i)]);
        }
        total = total + term;
        od.advance();
    }
    Ok(total)
}

fn budget(dim: usize, digits: usize) -> Result<()> {
    let size = (dim as u64).checked_pow(digits as u32).unwrap_or(u64::MAX);
    if size > NAIVE_INDEX_BUDGET {
        return resource(format!("index sum of size {dim}^{digits} exceeds the budget {NAIVE_INDEX_BUDGET}"));
    }
    Ok(())
}

/// Row (upper index) positions of `(α_* k)_i` for slot `i` and color `c` read row `α_c⁻¹(i)`.
fn source_rows(a: &MultiPermutation) -> Vec<Vec<usize>> {
    let inv: Vec<Permutation> = a.components().iter().map(|p| p.inverse()).collect();
    (0..a.degree()).map(|i| inv.iter().map(|p| p.apply(i)).collect()).collect()
}

/// `Tr_[α](P) = Σ_k Π_i P^{(α_* k)_i}_{k_i}`, summing over all `N^{nD}` index arrays.
pub fn trace_invariant_op<S: Scalar>(a: &MultiPermutation, p: &TensorOperator<S>) -> Result<S> {
    let (n, d, dim) = (a.degree(), a.colors(), p.dim());
    if d != p.order() {
        return input(format!("multi-permutation has {d} colors, operator has order {}", p.order()));
    }
    budget(dim, n * d)?;
    let src = source_rows(a);
    let strides: Vec<usize> = (0..d).map(|c| dim.pow((d - 1 - c) as u32)).collect();
    let mut total = S::zero();
    let mut od = Odometer::new(n * d, dim);
    while let Some(k) = od.current() {
        let mut term = S::one();
        for i in 0..n {
            let mut row = 0;
            for c in 0..d {
                row += k[src[i][c] * d + c] * strides[c];
            }
            let col = flatten(&k[i * d..(i + 1) * d], dim);
            let e = p.mat.get(row, col);
            if e.is_zero() {
                term = S::zero();
                break;
            }
            term = term * e;
        }
        if !term.is_zero() {
            total = total + term;
        }
        od.advance();
    }
    Ok(total)
}

/// Fast path for `P = R_0 ⊗ … ⊗ R_{D-1}`: the sum splits into `Π_c Tr_[α_c](R_c)`.
pub fn trace_invariant_factorized<S: Scalar>(a: &MultiPermutation, factors: &[Matrix<S>]) -> Result<S> {
    if a.colors() != factors.len() {
        return input("one factor per color is required");
    }
    Ok(a.components().iter().zip(factors).fold(S::one(), |acc, (p, r)| acc * multi_trace(p, r)))
}

/// `Tr_[α](ψ†, φ) = Σ_k Π_i φ^{(α_* k)_i} ψ†_{k_i}`.
pub fn trace_invariant_pair<S: Scalar>(a: &MultiPermutation, psi: &Tensor<S>, phi: &Tensor<S>) -> Result<S> {
    let (n, d, dim) = (a.degree(), a.colors(), phi.dim());
    if psi.order() != d || phi.order() != d || psi.dim() != dim {
        return input("tensor shapes do not match the multi-permutation");
    }
    budget(dim, n * d)?;
    let src = source_rows(a);
    let mut total = S::zero();
    let mut od = Odometer::new(n * d, dim);
    let mut up = vec![0; d];
    while let Some(k) = od.current() {
        let mut term = S::one();
        for i in 0..n {
            for c in 0..d {
                up[c] = k[src[i][c] * d + c];
            }
            term = term * phi.get(&up) * &psi.get(&k[i * d..(i + 1) * d]).conj();
        }
        total = total + term;
        od.advance();
    }
    Ok(total)
}

/// `[Tr_(c) P]^{a_ĉ}_{b_ĉ} = Σ_x P^{a_ĉ x}_{b_ĉ x}` with `x` in color `c` (0-based).
pub fn partial_trace<S: Scalar>(color: usize, p: &TensorOperator<S>) -> Result<TensorOperator<S>> {
    let (d, dim) = (p.order(), p.dim());
    if color >= d {
        return input(format!("color {color} out of range for order {d}"));
    }
    let out_len = checked_pow(dim, d - 1)?;
    let mut m = Matrix::zeros(out_len);
    for r in 0..out_len {
        let ra = unflatten(r, dim, d - 1);
        for c in 0..out_len {
            let cb = unflatten(c, dim, d - 1);
            let mut acc = S::zero();
            for x in 0..dim {
                let mut up = ra.clone();
                up.insert(color, x);
                let mut lo = cb.clone();
                lo.insert(color, x);
                acc = acc + p.entry(&up, &lo);
            }
            m.set(r, c, acc);
        }
    }
    TensorOperator::from_matrix(d - 1, dim, m)
}

/// `Y[P,Q](B) = -Tr ln(1⊗1 - i Q⊗(PB))`, through the log-determinant.
pub fn log_potential_eval(q: &ComplexMatrix, p: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    let x = q.kron(&p.mul(b)).scale(&C64::new(0.0, 1.0));
    let one = ComplexMatrix::identity(x.dim());
    Ok(-one.sub(&x).log_det()?)
}

/// Series form `Σ_{k≤kmax} (i^k/k) Tr(Q^k) Tr((PB)^k)`.
pub fn log_potential_series<S: Scalar>(q: &Matrix<S>, p: &Matrix<S>, b: &Matrix<S>, kmax: usize) -> S {
    let tq = q.power_traces(kmax);
    let tpb = p.mul(b).power_traces(kmax);
    (1..=kmax).fold(S::zero(), |acc, k| {
        acc + S::i_pow(k as i64) * S::from_frac(1, k as i64) * tq[k - 1].clone() * tpb[k - 1].clone()
    })
}

/// `Y[R](Ψ) = -Tr ln(1 - i R Ψ)` on the `N^D` space.
pub fn log_potential_tensor(r: &ComplexOperator, psi: &ComplexOperator) -> Result<C64> {
    if r.order() != psi.order() || r.dim() != psi.dim() {
        return input("R and Ψ must act on one space");
    }
    let x = r.matrix().mul(psi.matrix()).scale(&C64::new(0.0, 1.0));
    let one = ComplexMatrix::identity(x.dim());
    Ok(-one.sub(&x).log_det()?)
}

/// `Σ_{k≤kmax} (i^k/k) Tr((RΨ)^k)`.
pub fn log_potential_tensor_series<S: Scalar>(r: &TensorOperator<S>, psi: &TensorOperator<S>, kmax: usize) -> S {
    let t = r.matrix().mul(psi.matrix()).power_traces(kmax);
    (1..=kmax).fold(S::zero(), |acc, k| acc + S::i_pow(k as i64) * S::from_frac(1, k as i64) * t[k - 1].clone())
}

/// Whether every entry of `Φ - Φ†` is within `tol`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SelfAdjointFlag {
    pub tol: f64,
}

impl SelfAdjointFlag {
    pub fn holds(&self, phi: &ComplexOperator) -> bool {
        phi.matrix().is_hermitian(self.tol)
    }
}

#[cfg(test)]
pub(crate) fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{enumerate_sn, scalar_distribute, Side};
    use crate::scalar::{rel_err, CQ};
    use num_traits::Zero;
    use crate::fixtures::{random_matrix, random_operator, random_tensor, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn multi_trace_examples() {
        let e2 = Permutation::identity(2);
        assert_eq!(multi_trace(&e2, &ComplexMatrix::identity(3)), c64(9.0, 0.0));
        let m = ComplexMatrix::diag(vec![c64(1.0, 0.0), c64(2.0, 0.0)]);
        let t = Permutation::transposition(2, 0, 1).unwrap();
        assert_eq!(multi_trace(&t, &m), c64(5.0, 0.0));
        let z = c64(0.5, -1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 3);
        let s = Permutation::from_cycles(3, &[&[0, 2]]).unwrap();
        let lhs = multi_trace(&s, &a.scale(&z));
        let rhs = multi_trace(&s, &a) * z.powi(3);
        assert!(rel_err(lhs, rhs) < 1e-12);
    }

    #[test]
    fn multi_trace_matches_definition_and_is_a_class_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 3);
        for n in 1..=4 {
            for s in enumerate_sn(n).unwrap() {
                let naive = multi_trace_naive(&s, &m).unwrap();
                assert!(rel_err(naive, multi_trace(&s, &m)) < 1e-11, "{s}");
            }
        }
    }

    #[test]
    fn operator_invariant_reduces_to_multi_trace_at_one_color() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 3);
        let op = TensorOperator::from_matrix(1, 3, m.clone()).unwrap();
        for n in 1..=3 {
            for s in enumerate_sn(n).unwrap() {
                let a = MultiPermutation::new(vec![s.clone()]).unwrap();
                let lhs = trace_invariant_op(&a, &op).unwrap();
                assert!(rel_err(lhs, multi_trace(&s, &m)) < 1e-11);
            }
        }
        let id = MultiPermutation::identity(1, 2);
        let p = random_operator(&mut rng, 2, 2);
        assert!(rel_err(trace_invariant_op(&id, &p).unwrap(), p.trace()) < 1e-12);
    }

    #[test]
    fn factorized_path_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r0 = random_matrix(&mut rng, 2);
        let r1 = random_matrix(&mut rng, 2);
        let p = TensorOperator::tensor_product(&[r0.clone(), r1.clone()]).unwrap();
        let s2: Vec<_> = enumerate_sn(2).unwrap().collect();
        for x in &s2 {
            for y in &s2 {
                let a = MultiPermutation::new(vec![x.clone(), y.clone()]).unwrap();
                let naive = trace_invariant_op(&a, &p).unwrap();
                let fast = trace_invariant_factorized(&a, &[r0.clone(), r1.clone()]).unwrap();
                assert!(rel_err(naive, fast) < 1e-12);
            }
        }
    }

    #[test]
    fn operator_invariant_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_operator(&mut rng, 2, 2);
        let u = TensorOperator::tensor_product(&[random_unitary(&mut rng, 2), random_unitary(&mut rng, 2)]).unwrap();
        let rotated = u.mul(&p).mul(&u.adjoint());
        for n in 2..=3 {
            let sn: Vec<_> = enumerate_sn(n).unwrap().collect();
            for x in &sn {
                for y in &sn {
                    let a = MultiPermutation::new(vec![x.clone(), y.clone()]).unwrap();
                    let base = trace_invariant_op(&a, &p).unwrap();
                    for mu in &sn {
                        let conj = a.conjugate_by(mu).unwrap();
                        assert!(rel_err(base, trace_invariant_op(&conj, &p).unwrap()) < 1e-10);
                    }
                    assert!(rel_err(base, trace_invariant_op(&a, &rotated).unwrap()) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn pair_invariant_matches_operator_form_and_is_left_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = random_tensor(&mut rng, 2, 2);
        let psi = random_tensor(&mut rng, 2, 2);
        let op = phi.outer(&psi).unwrap();
        let id1 = MultiPermutation::identity(1, 2);
        assert!(rel_err(trace_invariant_pair(&id1, &psi, &phi).unwrap(), psi.inner(&phi)) < 1e-12);
        let s2: Vec<_> = enumerate_sn(2).unwrap().collect();
        for x in &s2 {
            for y in &s2 {
                let a = MultiPermutation::new(vec![x.clone(), y.clone()]).unwrap();
                let pair = trace_invariant_pair(&a, &psi, &phi).unwrap();
                assert!(rel_err(pair, trace_invariant_op(&a, &op).unwrap()) < 1e-12);
                for mu in &s2 {
                    let moved = scalar_distribute(mu, &a, Side::Left).unwrap();
                    let v = trace_invariant_pair(&moved, &phi, &phi).unwrap();
                    assert!(rel_err(v, trace_invariant_pair(&a, &phi, &phi).unwrap()) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pillow_bubble_matches_loop_nest() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 2;
        let phi = random_tensor(&mut rng, 3, n);
        let t = Permutation::transposition(2, 0, 1).unwrap();
        let e = Permutation::identity(2);
        for c in 0..3 {
            let mut comps = vec![e.clone(); 3];
            comps[c] = t.clone();
            let a = MultiPermutation::new(comps).unwrap();
            let lhs = trace_invariant_pair(&a, &phi, &phi).unwrap();
            // Σ_{a,b} φ†_a φ^{a_ĉ b} φ†_b φ^{b_ĉ a}
            let mut rhs = c64(0.0, 0.0);
            let mut od = Odometer::new(6, n);
            while let Some(k) = od.current() {
                let (ia, ib) = (&k[0..3], &k[3..6]);
                let mut x = ia.to_vec();
                x[c] = ib[c];
                let mut y = ib.to_vec();
                y[c] = ia[c];
                rhs += phi.get(ia).conj() * phi.get(&x) * phi.get(ib).conj() * phi.get(&y);
                od.advance();
            }
            assert!(rel_err(lhs, rhs) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_matrix(&mut rng, 2);
        let y = random_matrix(&mut rng, 2);
        let p = TensorOperator::tensor_product(&[x.clone(), y.clone()]).unwrap();
        let pt = partial_trace(0, &p).unwrap();
        assert!(pt.matrix().max_abs_diff(&y.scale(&x.trace())) < 1e-12);
        let single = TensorOperator::from_matrix(1, 2, x.clone()).unwrap();
        let full = partial_trace(0, &single).unwrap();
        assert_eq!(full.order(), 0);
        assert!(rel_err(full.trace(), x.trace()) < 1e-12);
        assert!(partial_trace(2, &p).is_err());
    }

    #[test]
    fn gauge_choice_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let phi = random_tensor(&mut rng, 2, 2);
        let rho = phi.outer(&phi).unwrap();
        for c in 0..2 {
            let reduced = partial_trace(c, &rho).unwrap();
            let s2: Vec<_> = enumerate_sn(2).unwrap().collect();
            for x in &s2 {
                for y in &s2 {
                    let a = MultiPermutation::new(vec![x.clone(), y.clone()]).unwrap();
                    let lhs = trace_invariant_pair(&a, &phi, &phi).unwrap();
                    let ac_inv = a.component(c).inverse();
                    let rest = a.without_color(c).unwrap();
                    let b = scalar_distribute(&ac_inv, &rest, Side::Left).unwrap();
                    let rhs = trace_invariant_op(&b, &reduced).unwrap();
                    assert!(rel_err(lhs, rhs) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn partial_trace_commutes_with_remaining_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = random_operator(&mut rng, 3, 2);
        let u1 = random_unitary(&mut rng, 2);
        let u2 = random_unitary(&mut rng, 2);
        let big = TensorOperator::tensor_product(&[ComplexMatrix::identity(2), u1.clone(), u2.clone()]).unwrap();
        let small = TensorOperator::tensor_product(&[u1, u2]).unwrap();
        let lhs = partial_trace(0, &big.mul(&p).mul(&big.adjoint())).unwrap();
        let pt = partial_trace(0, &p).unwrap();
        let rhs = small.mul(&pt).mul(&small.adjoint());
        assert!(lhs.matrix().max_abs_diff(rhs.matrix()) < 1e-10);
    }

    #[test]
    fn log_potential_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let q = random_matrix(&mut rng, 2);
        let p = random_matrix(&mut rng, 2);
        let b = random_matrix(&mut rng, 2).scale(&c64(0.002, 0.0));
        let zero = ComplexMatrix::zeros(2);
        assert_eq!(log_potential_eval(&q, &p, &zero).unwrap(), c64(0.0, 0.0));
        let exact = log_potential_eval(&q, &p, &b).unwrap();
        let series = log_potential_series(&q, &p, &b, 6);
        assert!(rel_err(exact, series) < 1e-10, "{exact} {series}");
    }

    #[test]
    fn log_potential_with_c2_keeps_only_the_quadratic_term() {
        let q: Matrix<CQ> = Matrix::diag(vec![CQ::from_i64(1), CQ::from_i64(-1)]);
        let p = Matrix::from_fn(2, |i, j| CQ::from_gaussian((i + 2 * j) as i64, 1));
        let b = Matrix::from_fn(2, |i, j| CQ::from_gaussian(1 + i as i64, j as i64 - 1));
        let pb2 = p.mul(&b).mul(&p.mul(&b)).trace();
        let want = CQ::from_frac(-2, 2) * pb2;
        let tq = q.power_traces(2);
        assert!(tq[0].is_zero());
        let quad = CQ::i_pow(2) * CQ::from_frac(1, 2) * tq[1].clone() * p.mul(&b).power_traces(2)[1].clone();
        assert_eq!(quad, want);
    }

    #[test]
    fn tensor_log_potential_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let q = random_matrix(&mut rng, 2);
        let phat = random_matrix(&mut rng, 2);
        let psihat = random_matrix(&mut rng, 2).scale(&c64(0.002, 0.0));
        let r = TensorOperator::tensor_product(&[q.clone(), phat.clone()]).unwrap();
        let psi = TensorOperator::tensor_product(&[ComplexMatrix::identity(2), psihat.clone()]).unwrap();
        let zero = TensorOperator::from_matrix(2, 2, ComplexMatrix::zeros(4)).unwrap();
        assert_eq!(log_potential_tensor(&r, &zero).unwrap(), c64(0.0, 0.0));
        let exact = log_potential_tensor(&r, &psi).unwrap();
        let series = log_potential_series(&q, &phat, &psihat, 6);
        assert!(rel_err(exact, series) < 1e-10);
        let direct = log_potential_eval(&q, &phat, &psihat).unwrap();
        assert!(rel_err(exact, direct) < 1e-12);
        assert!(rel_err(log_potential_tensor_series(&r, &psi, 6), series) < 1e-12);
    }

    #[test]
    fn determinants_agree_across_backends() {
        let m = Matrix::from_fn(3, |i, j| CQ::from_gaussian((i * 3 + j) as i64 % 5 - 2, (i + j) as i64 % 2));
        let exact = m.det().to_c64();
        let float = m.to_c64().det();
        assert!(rel_err(exact, float) < 1e-12);
        let ld = m.to_c64().log_det().unwrap().exp();
        assert!(rel_err(ld, float) < 1e-12);
    }

    #[test]
    fn swap_operator_squares_to_identity() {
        let s: TensorOperator<CQ> = TensorOperator::swap(3);
        assert_eq!(s.mul(&s), TensorOperator::identity(2, 3).unwrap());
    }
}
