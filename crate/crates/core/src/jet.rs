//! Truncated polynomials in the entries of the intermediate field, and the derivative
//! formulas that turn `e^Y` into self-adjoint-side expectation values.

use crate::covariance::CovariancePair;
use crate::error::{input, resource, Result};
use crate::perm::{MultiPermutation, Odometer, Permutation};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, TensorOperator};
use std::collections::BTreeMap;

/// Highest total degree a monomial key can hold.
pub const MAX_JET_DEGREE: usize = 7;
pub const MAX_JET_VARS: usize = 300;

/// Sorted variable ids, each stored as `id + 1` in a 16-bit slot, lowest slot first.
type Key = u128;

fn key_degree(key: Key) -> usize {
    (128 - key.leading_zeros() as usize).div_ceil(16)
}

fn unpack(key: Key) -> Vec<u16> {
    let mut out = Vec::with_capacity(key_degree(key));
    let mut k = key;
    while k != 0 {
        out.push((k & 0xffff) as u16 - 1);
        k >>= 16;
    }
    out
}

fn pack(vars: &[u16]) -> Key {
    vars.iter().rev().fold(0u128, |acc, &v| (acc << 16) | (v as u128 + 1))
}

fn merge(a: Key, b: Key) -> Key {
    let (x, y) = (unpack(a), unpack(b));
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        if j == y.len() || (i < x.len() && x[i] <= y[j]) {
            out.push(x[i]);
            i += 1;
        } else {
            out.push(y[j]);
            j += 1;
        }
    }
    pack(&out)
}

/// Polynomial over `nvars` independent variables, truncated above total degree `cap`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetPoly<S> {
    nvars: usize,
    cap: usize,
    terms: BTreeMap<Key, S>,
}

impl<S: Scalar> JetPoly<S> {
    pub fn zero(nvars: usize, cap: usize) -> Result<Self> {
        if cap > MAX_JET_DEGREE {
            return resource(format!("jet degree cap {cap} exceeds {MAX_JET_DEGREE}"));
        }
        if nvars > MAX_JET_VARS {
            return resource(format!("{nvars} jet variables exceed the limit {MAX_JET_VARS}"));
        }
        Ok(JetPoly { nvars, cap, terms: BTreeMap::new() })
    }

    pub fn constant(nvars: usize, cap: usize, c: S) -> Result<Self> {
        let mut j = Self::zero(nvars, cap)?;
        j.add_term(0, c);
        Ok(j)
    }

    pub fn variable(nvars: usize, cap: usize, var: usize) -> Result<Self> {
        let mut j = Self::zero(nvars, cap)?;
        if var >= nvars {
            return input(format!("variable {var} out of range {nvars}"));
        }
        if cap >= 1 {
            j.add_term(pack(&[var as u16]), S::one());
        }
        Ok(j)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn empty_like(&self) -> Self {
        JetPoly { nvars: self.nvars, cap: self.cap, terms: BTreeMap::new() }
    }

    fn add_term(&mut self, key: Key, c: S) {
        if c.is_zero() || key_degree(key) > self.cap {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(v) => {
                let sum = v.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&key);
                } else {
                    *v = sum;
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    /// Coefficient of the monomial `Π x_{vars[i]}` (order of `vars` irrelevant).
    pub fn coefficient(&self, vars: &[usize]) -> S {
        let mut v: Vec<u16> = vars.iter().map(|&x| x as u16).collect();
        v.sort_unstable();
        self.terms.get(&pack(&v)).cloned().unwrap_or_else(S::zero)
    }

    pub fn constant_term(&self) -> S {
        self.terms.get(&0).cloned().unwrap_or_else(S::zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (k, v) in &other.terms {
            self.add_term(*k, v.clone());
        }
    }

    /// `self += a * b`, without building the product separately.
    fn add_product(&mut self, a: &Self, b: &Self, factor: &S) {
        for (ka, va) in &a.terms {
            let da = key_degree(*ka);
            for (kb, vb) in &b.terms {
                if da + key_degree(*kb) > self.cap {
                    continue;
                }
                self.add_term(merge(*ka, *kb), va.clone() * vb * factor);
            }
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = self.empty_like();
        for (k, v) in &self.terms {
            out.add_term(*k, v.clone() * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.empty_like();
        out.add_product(self, other, &S::one());
        out
    }

    /// Homogeneous part of degree `d`.
    pub fn part(&self, d: usize) -> Self {
        let mut out = self.empty_like();
        for (k, v) in &self.terms {
            if key_degree(*k) == d {
                out.terms.insert(*k, v.clone());
            }
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|k| key_degree(*k)).max().unwrap_or(0)
    }

    /// `Π_i ∂/∂x_{vars[i]}` at the origin: coefficient times the product of multiplicity factorials.
    pub fn derivative_at_zero(&self, vars: &[usize]) -> Result<S> {
        if vars.len() > self.cap {
            return input(format!("{} derivatives exceed the jet cap {}", vars.len(), self.cap));
        }
        let mut v: Vec<u16> = vars.iter().map(|&x| x as u16).collect();
        v.sort_unstable();
        let Some(c) = self.terms.get(&pack(&v)) else {
            return Ok(S::zero());
        };
        let mut weight = 1i64;
        let mut run = 1i64;
        for w in v.windows(2) {
            if w[0] == w[1] {
                run += 1;
                weight *= run;
            } else {
                run = 1;
            }
        }
        Ok(c.clone() * S::from_i64(weight))
    }
}

/// Square matrix of jets.
struct JetMatrix<S> {
    dim: usize,
    entries: Vec<JetPoly<S>>,
}

impl<S: Scalar> JetMatrix<S> {
    fn mul(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = self.entries[0].empty_like();
                for k in 0..n {
                    let (a, b) = (&self.entries[i * n + k], &other.entries[k * n + j]);
                    acc.add_product(a, b, &S::one());
                }
                entries.push(acc);
            }
        }
        JetMatrix { dim: n, entries }
    }

    fn trace(&self) -> JetPoly<S> {
        (0..self.dim).fold(self.entries[0].empty_like(), |acc, i| acc.add(&self.entries[i * self.dim + i]))
    }
}

/// `Tr(X^k)` for `k = 1..=kmax`.
fn power_trace_jets<S: Scalar>(x: &JetMatrix<S>, kmax: usize) -> Vec<JetPoly<S>> {
    let mut out = Vec::with_capacity(kmax);
    if kmax == 0 {
        return out;
    }
    let mut cur = JetMatrix { dim: x.dim, entries: x.entries.clone() };
    out.push(cur.trace());
    for _ in 1..kmax {
        cur = cur.mul(x);
        out.push(cur.trace());
    }
    out
}

/// `X = L · F` where `L` is a constant matrix and `F` the matrix of variables `F_{zy} = var(z, y)`.
fn left_times_field<S: Scalar>(
    left: &Matrix<S>,
    nvars: usize,
    cap: usize,
    var: impl Fn(usize, usize) -> Option<usize>,
) -> Result<JetMatrix<S>> {
    let n = left.dim();
    let mut entries = Vec::with_capacity(n * n);
    for x in 0..n {
        for y in 0..n {
            let mut jet = JetPoly::zero(nvars, cap)?;
            for z in 0..n {
                let c = left.get(x, z);
                if c.is_zero() {
                    continue;
                }
                if let Some(v) = var(z, y) {
                    jet.add_term(pack(&[v as u16]), c.clone());
                }
            }
            entries.push(jet);
        }
    }
    Ok(JetMatrix { dim: n, entries })
}

/// Homogeneous pieces `Y_1..Y_cap` of a log potential `Σ_k (i^k/k) w_k Tr(X^k)`.
fn log_parts<S: Scalar>(x: &JetMatrix<S>, weights: &[S], cap: usize) -> Vec<JetPoly<S>> {
    power_trace_jets(x, cap)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let k = i + 1;
            t.scale(&(S::i_pow(k as i64) * S::from_frac(1, k as i64) * &weights[i]))
        })
        .collect()
}

/// Matrix model: `B_{ab}` is variable `a N + b`.
pub fn matrix_var(dim: usize, a: usize, b: usize) -> usize {
    a * dim + b
}

/// `Y[P,Q](B) = Σ_{k≤cap} (i^k/k) Tr(Q^k) Tr((PB)^k)` as a jet.
pub fn jet_from_log_potential<S: Scalar>(pair: &CovariancePair<S>, cap: usize) -> Result<JetPoly<S>> {
    let parts = matrix_log_parts(pair, cap)?;
    let zero = JetPoly::zero(pair.dim() * pair.dim(), cap)?;
    Ok(parts.iter().fold(zero, |acc, p| acc.add(p)))
}

fn matrix_log_parts<S: Scalar>(pair: &CovariancePair<S>, cap: usize) -> Result<Vec<JetPoly<S>>> {
    let n = pair.dim();
    let x = left_times_field(&pair.p, n * n, cap, |z, y| Some(matrix_var(n, z, y)))?;
    Ok(log_parts(&x, &pair.q.power_traces(cap), cap))
}

/// Tensor model: `Ψ^x_y` is variable `x N^D + y`.
pub fn tensor_var(space: usize, x: usize, y: usize) -> usize {
    x * space + y
}

/// `Y[R](Ψ) = Σ_{k≤cap} (i^k/k) Tr((RΨ)^k)` as a jet.
pub fn jet_from_log_potential_tensor<S: Scalar>(r: &TensorOperator<S>, cap: usize) -> Result<JetPoly<S>> {
    let parts = tensor_log_parts(r, cap)?;
    let m = r.matrix().dim();
    let zero = JetPoly::zero(m * m, cap)?;
    Ok(parts.iter().fold(zero, |acc, p| acc.add(p)))
}

fn tensor_log_parts<S: Scalar>(r: &TensorOperator<S>, cap: usize) -> Result<Vec<JetPoly<S>>> {
    let m = r.matrix().dim();
    let x = left_times_field(r.matrix(), m * m, cap, |z, y| Some(tensor_var(m, z, y)))?;
    Ok(log_parts(&x, &vec![S::one(); cap], cap))
}

/// Reduced potential `Σ_k (i^k/k) Tr((R (1 ⊗ Ψ̂))^k)` with `Ψ̂` acting on colors `1..D`.
fn reduced_log_parts<S: Scalar>(r: &TensorOperator<S>, cap: usize) -> Result<Vec<JetPoly<S>>> {
    if r.order() < 2 {
        return input("the reduced model needs order D >= 2");
    }
    let m = r.matrix().dim();
    let hat = m / r.dim();
    let x = left_times_field(r.matrix(), hat * hat, cap, |z, y| {
        // (1 ⊗ Ψ̂)_{(a,u),(b,v)} = δ_ab Ψ̂_{uv}; color 0 is the slowest digit
        let (a, u) = (z / hat, z % hat);
        let (b, v) = (y / hat, y % hat);
        (a == b).then(|| tensor_var(hat, u, v))
    })?;
    Ok(log_parts(&x, &vec![S::one(); cap], cap))
}

/// Homogeneous parts `E_0..E_cap` of `e^Y` from those of `Y`, via `n E_n = Σ_k k Y_k E_{n-k}`.
fn exp_parts<S: Scalar>(y_parts: &[JetPoly<S>], nvars: usize, cap: usize) -> Result<Vec<JetPoly<S>>> {
    let mut e = vec![JetPoly::constant(nvars, cap, S::one())?];
    for n in 1..=cap {
        let mut acc = JetPoly::zero(nvars, cap)?;
        for k in 1..=n.min(y_parts.len()) {
            if y_parts[k - 1].is_zero() || e[n - k].is_zero() {
                continue;
            }
            acc.add_product(&y_parts[k - 1], &e[n - k], &S::from_i64(k as i64));
        }
        e.push(acc.scale(&S::from_frac(1, n as i64)));
    }
    Ok(e)
}

/// Truncated `e^y`. The constant term of `y` must vanish.
pub fn jet_exp<S: Scalar>(y: &JetPoly<S>) -> Result<JetPoly<S>> {
    if !y.constant_term().is_zero() {
        return input("jet_exp needs a jet without constant term");
    }
    let parts: Vec<JetPoly<S>> = (1..=y.cap).map(|d| y.part(d)).collect();
    let e = exp_parts(&parts, y.nvars, y.cap)?;
    Ok(e.iter().fold(JetPoly::zero(y.nvars, y.cap)?, |acc, p| acc.add(p)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// `N × N` intermediate matrix `B`.
    Matrix { dim: usize },
    /// Operator `Ψ` on the order-`order` space, `order` being the number of colors it carries.
    Tensor { order: usize, dim: usize },
}

/// `e^Y` by homogeneous degree, ready for derivative evaluation.
#[derive(Clone, Debug)]
pub struct JetModel<S> {
    pub kind: FieldKind,
    pub exp_parts: Vec<JetPoly<S>>,
}

impl<S: Scalar> JetModel<S> {
    pub fn matrix(pair: &CovariancePair<S>, cap: usize) -> Result<Self> {
        let n = pair.dim();
        let y = matrix_log_parts(pair, cap)?;
        Ok(JetModel { kind: FieldKind::Matrix { dim: n }, exp_parts: exp_parts(&y, n * n, cap)? })
    }

    /// Gaussian reduction: only `Y_2 = -(1/2) Tr(Q^2) Tr((PB)^2)` is kept.
    pub fn matrix_gaussian(pair: &CovariancePair<S>, cap: usize) -> Result<Self> {
        let n = pair.dim();
        let mut y = matrix_log_parts(pair, cap.max(2))?;
        for (i, part) in y.iter_mut().enumerate() {
            if i != 1 {
                *part = JetPoly::zero(n * n, cap.max(2))?;
            }
        }
        Ok(JetModel { kind: FieldKind::Matrix { dim: n }, exp_parts: exp_parts(&y, n * n, cap.max(2))? })
    }

    pub fn tensor(r: &TensorOperator<S>, cap: usize) -> Result<Self> {
        let m = r.matrix().dim();
        let y = tensor_log_parts(r, cap)?;
        Ok(JetModel {
            kind: FieldKind::Tensor { order: r.order(), dim: r.dim() },
            exp_parts: exp_parts(&y, m * m, cap)?,
        })
    }

    /// Model for `Ψ̂` on colors `1..D` after fixing the gauge of color 0.
    pub fn reduced(r: &TensorOperator<S>, cap: usize) -> Result<Self> {
        let hat = r.matrix().dim() / r.dim();
        let y = reduced_log_parts(r, cap)?;
        Ok(JetModel {
            kind: FieldKind::Tensor { order: r.order() - 1, dim: r.dim() },
            exp_parts: exp_parts(&y, hat * hat, cap)?,
        })
    }

    pub fn cap(&self) -> usize {
        self.exp_parts.len() - 1
    }
}

/// `(iN)^{-n} Tr_[σ](∂/∂B) e^Y |_0` with `[∂/∂B]_{ab} = ∂/∂B_{ba}`,
/// i.e. `(iN)^{-n} Σ_k Π_i ∂/∂B_{k_σ(i), k_i}`.
pub fn hm_expect_with<S: Scalar>(model: &JetModel<S>, sigma: &Permutation) -> Result<S> {
    let FieldKind::Matrix { dim } = model.kind else {
        return input("hm_expect needs a matrix jet model");
    };
    let n = sigma.degree();
    if n > model.cap() {
        return input(format!("degree {n} exceeds the jet cap {}", model.cap()));
    }
    let e = &model.exp_parts[n];
    let mut total = S::zero();
    let mut od = Odometer::new(n, dim);
    let mut vars = vec![0; n];
    while let Some(k) = od.current() {
        for i in 0..n {
            vars[i] = matrix_var(dim, k[sigma.apply(i)], k[i]);
        }
        total = total + e.derivative_at_zero(&vars)?;
        od.advance();
    }
    let scale = (S::imag_unit() * S::from_i64(dim as i64)).pow(n as u32);
    Ok(total / scale)
}

/// `i^{-n} Σ_k Π_i ∂/∂Ψ^{k_i}_{(α_* k)_i} e^Y |_0`.
pub fn ht_expect_with<S: Scalar>(model: &JetModel<S>, a: &MultiPermutation) -> Result<S> {
    let FieldKind::Tensor { order, dim } = model.kind else {
        return input("ht_expect needs a tensor jet model");
    };
    let (n, d) = (a.degree(), a.colors());
    if d != order {
        return input(format!("multi-permutation has {d} colors, the field has {order}"));
    }
    if n > model.cap() {
        return input(format!("degree {n} exceeds the jet cap {}", model.cap()));
    }
    let space = dim.pow(d as u32);
    let inv: Vec<Permutation> = a.components().iter().map(|p| p.inverse()).collect();
    let strides: Vec<usize> = (0..d).map(|c| dim.pow((d - 1 - c) as u32)).collect();
    let e = &model.exp_parts[n];
    let mut total = S::zero();
    let mut od = Odometer::new(n * d, dim);
    let mut vars = vec![0; n];
    while let Some(k) = od.current() {
        for (i, var) in vars.iter_mut().enumerate() {
            let (mut up, mut lo) = (0, 0);
            for c in 0..d {
                up += k[i * d + c] * strides[c];
                lo += k[inv[c].apply(i) * d + c] * strides[c];
            }
            *var = tensor_var(space, up, lo);
        }
        total = total + e.derivative_at_zero(&vars)?;
        od.advance();
    }
    Ok(total / S::i_pow(n as i64))
}

/// Self-adjoint matrix expectation `⟨Tr_[σ](A)⟩` for the potential `Y[P,Q]`.
pub fn hm_expect<S: Scalar>(sigma: &Permutation, pair: &CovariancePair<S>) -> Result<S> {
    hm_expect_with(&JetModel::matrix(pair, sigma.degree())?, sigma)
}

/// Self-adjoint tensor expectation `⟨Tr_[α](Φ)⟩` for the potential `Y[R]`.
pub fn ht_expect<S: Scalar>(a: &MultiPermutation, r: &TensorOperator<S>) -> Result<S> {
    ht_expect_with(&JetModel::tensor(r, a.degree())?, a)
}

/// Two-point table `⟨A_ij A_kl⟩ = (iN)^{-2} ∂/∂B_ji ∂/∂B_lk e^Y |_0`, flattened as `[i][j][k][l]`.
pub fn two_point_matrix<S: Scalar>(model: &JetModel<S>) -> Result<Vec<S>> {
    let FieldKind::Matrix { dim } = model.kind else {
        return input("two_point_matrix needs a matrix jet model");
    };
    if model.cap() < 2 {
        return input("two-point extraction needs a jet cap of at least 2");
    }
    let e = &model.exp_parts[2];
    let scale = (S::imag_unit() * S::from_i64(dim as i64)).pow(2);
    let mut out = Vec::with_capacity(dim.pow(4));
    let mut od = Odometer::new(4, dim);
    while let Some(ix) = od.current() {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        out.push(e.derivative_at_zero(&[matrix_var(dim, j, i), matrix_var(dim, l, k)])? / scale.clone());
        od.advance();
    }
    Ok(out)
}

/// `⟨Φ^x_y Φ^z_w⟩ = i^{-2} ∂/∂Ψ^y_x ∂/∂Ψ^w_z e^Y |_0`, flattened as `[x][y][z][w]` on the `N^D` space.
pub fn two_point_tensor<S: Scalar>(model: &JetModel<S>) -> Result<Vec<S>> {
    let FieldKind::Tensor { order, dim } = model.kind else {
        return input("two_point_tensor needs a tensor jet model");
    };
    if model.cap() < 2 {
        return input("two-point extraction needs a jet cap of at least 2");
    }
    let space = dim.pow(order as u32);
    let e = &model.exp_parts[2];
    let mut out = Vec::with_capacity(space.pow(4));
    let mut od = Odometer::new(4, space);
    while let Some(ix) = od.current() {
        let (x, y, z, w) = (ix[0], ix[1], ix[2], ix[3]);
        out.push(-e.derivative_at_zero(&[tensor_var(space, y, x), tensor_var(space, w, z)])?);
        od.advance();
    }
    Ok(out)
}
