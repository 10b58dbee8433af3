//! Closed-form predictions: dually weighted permutation sums, `C_k` sums and the
//! exactly solvable quartic, pillow and tetrahedral partition functions.
//!
//! Partition functions appear only as ratios `ln Z(λ)/Z(0)`.

use crate::covariance::{CovariancePair, TensorCovariance};
use crate::error::{domain, input, Result};
use crate::linalg::hermitian_eigen;
use crate::perm::{enumerate_sn, scalar_distribute, MultiPermutation, Partition, Permutation, Side};
use crate::scalar::{Scalar, C64};
use crate::tensor::{multi_trace, trace_invariant_op, ComplexMatrix, Matrix, TensorOperator};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

/// `#{μ : type(μ) = λ, type(μσ) = κ}` keyed by `(λ, κ)`, for one class of `σ`.
pub type ClassPairCounts = BTreeMap<(Partition, Partition), u64>;

type PairCache = Mutex<HashMap<Partition, Arc<ClassPairCounts>>>;

/// Joint cycle-type counts of `(μ, μσ)` over `μ ∈ S_n`; depends only on the class of `σ`.
pub fn class_pair_counts(sigma: &Permutation) -> Result<Arc<ClassPairCounts>> {
    static CACHE: OnceLock<PairCache> = OnceLock::new();
    let key = sigma.cycle_type();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let mut counts = ClassPairCounts::new();
    for mu in enumerate_sn(sigma.degree())? {
        let ks = mu.compose_unchecked(sigma).cycle_type();
        *counts.entry((mu.cycle_type(), ks)).or_insert(0) += 1;
    }
    let counts = Arc::new(counts);
    cache.lock().expect("cache poisoned").insert(key, counts.clone());
    Ok(counts)
}

/// `Π_j Tr(M^{λ_j})` from precomputed power traces.
fn class_trace<S: Scalar>(lambda: &Partition, traces: &[S]) -> S {
    lambda.parts().iter().fold(S::one(), |acc, &p| acc * &traces[p - 1])
}

fn dim_power<S: Scalar>(dim: usize, exp: i64) -> S {
    let base = S::from_i64(dim as i64).pow(exp.unsigned_abs() as u32);
    if exp >= 0 {
        base
    } else {
        S::one() / base
    }
}

/// `N^{-n} Σ_μ Tr_[μ](Q) Tr_[μσ](P)`, grouped by the joint class of `(μ, μσ)`.
pub fn dual_weight_sum<S: Scalar>(sigma: &Permutation, pair: &CovariancePair<S>) -> Result<S> {
    let n = sigma.degree();
    let counts = class_pair_counts(sigma)?;
    let (tp, tq) = (pair.p.power_traces(n), pair.q.power_traces(n));
    let total = counts.iter().fold(S::zero(), |acc, ((lq, lp), &c)| {
        acc + class_trace(lq, &tq) * class_trace(lp, &tp) * S::from_i64(c as i64)
    });
    Ok(total * dim_power::<S>(pair.dim(), -(n as i64)))
}

/// Ungrouped form of [`dual_weight_sum`], one term per `μ`.
pub fn dual_weight_sum_naive<S: Scalar>(sigma: &Permutation, pair: &CovariancePair<S>) -> Result<S> {
    let n = sigma.degree();
    let mut total = S::zero();
    for mu in enumerate_sn(n)? {
        total = total + multi_trace(&mu, &pair.q) * multi_trace(&mu.compose_unchecked(sigma), &pair.p);
    }
    Ok(total * dim_power::<S>(pair.dim(), -(n as i64)))
}

pub const MAX_TENSOR_DUAL_DENSE_DEGREE: usize = 4;

/// `Σ_μ Tr_[μα](R)` with `μα` distributed from the left.
pub fn tensor_dual_weight_sum<S: Scalar>(a: &MultiPermutation, r: &TensorCovariance<S>) -> Result<S> {
    let n = a.degree();
    if a.colors() != r.order() {
        return input(format!("multi-permutation has {} colors, covariance has order {}", a.colors(), r.order()));
    }
    if r.factors.is_none() && n > MAX_TENSOR_DUAL_DENSE_DEGREE {
        return input(format!("dense tensor sums are limited to n <= {MAX_TENSOR_DUAL_DENSE_DEGREE}, got {n}"));
    }
    let mut total = S::zero();
    for mu in enumerate_sn(n)? {
        let b = scalar_distribute(&mu, a, Side::Left)?;
        let term = match &r.factors {
            Some(f) => b.components().iter().zip(f).fold(S::one(), |acc, (p, rc)| acc * multi_trace(p, rc)),
            None => trace_invariant_op(&b, &r.dense)?,
        };
        total = total + term;
    }
    Ok(total)
}

/// Dually weighted sum with `Q = C_k`: `N^{d-n} Σ_{γ ∈ [k^d]} Tr_[γσ](P)`, `d = n/k`.
///
/// Zero unless `k | n`. Only classes whose parts all equal `k` survive because
/// `Tr(C_k^p) = N δ_{p,k}` for `p ≤ N`, which needs `n ≤ N` to cover every part.
pub fn ck_expect<S: Scalar>(sigma: &Permutation, p: &Matrix<S>, k: usize) -> Result<S> {
    let n = sigma.degree();
    if k == 0 {
        return input("k must be at least 1");
    }
    if !n.is_multiple_of(k) {
        return Ok(S::zero());
    }
    let d = n / k;
    let target = Partition::new(vec![k; d])?;
    let counts = class_pair_counts(sigma)?;
    let tp = p.power_traces(n);
    let total = counts
        .iter()
        .filter(|((lq, _), _)| *lq == target)
        .fold(S::zero(), |acc, ((_, lp), &c)| acc + class_trace(lp, &tp) * S::from_i64(c as i64));
    Ok(total * dim_power::<S>(p.dim(), d as i64 - n as i64))
}

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn int_pow(base: i64, exp: usize) -> BigRational {
    BigRational::from_integer(num_traits::pow(BigInt::from(base), exp))
}

/// `ln Z(g)/Z(0) = -(N²/2) ln(1+g)` for the quartic complex matrix model with `C_2` rigidity.
pub fn quartic_cm_logz(g: f64, dim: usize) -> Result<f64> {
    if !(g > -1.0) {
        return domain(format!("quartic free energy needs g > -1, got {g}"));
    }
    Ok(-0.5 * (dim * dim) as f64 * g.ln_1p())
}

/// Coefficient of `g^k` in [`quartic_cm_logz`].
pub fn quartic_cm_taylor(k: usize, dim: usize) -> BigRational {
    let sign = if k % 2 == 1 { -1 } else { 1 };
    int_pow(dim as i64, 2) * rat(sign, 2 * k as i64)
}

/// Amplitude of the single connected graph with `k` quartic vertices: `(k-1)! 2^{k-1} N^{2-k}`.
pub fn quartic_connected_amplitude(k: usize, dim: usize) -> BigRational {
    let fact: BigInt = (1..k).map(BigInt::from).product();
    let n = BigRational::from_integer(BigInt::from(dim));
    let pow = if k <= 2 { num_traits::pow(n, 2 - k) } else { num_traits::pow(n, k - 2).recip() };
    BigRational::from_integer(fact * num_traits::pow(BigInt::from(2), k.saturating_sub(1))) * pow
}

/// Pillow ratio `(1-λ)^{-(N²-1)²/2} (1-(1+N)λ)^{-(N²-1)} (1-(1+2N)λ)^{-1/2}`, as a log.
pub fn pillow_logz(lambda: f64, dim: usize) -> Result<f64> {
    let n = dim as f64;
    if !(lambda < 1.0 / (1.0 + 2.0 * n)) {
        return domain(format!("pillow closed form needs λ < 1/(1+2N), got {lambda}"));
    }
    let m = n * n - 1.0;
    Ok(-0.5 * m * m * (-lambda).ln_1p() - m * (-(1.0 + n) * lambda).ln_1p() - 0.5 * (-(1.0 + 2.0 * n) * lambda).ln_1p())
}

/// Coefficient of `λ^v` in [`pillow_logz`], `v ≥ 1`.
pub fn pillow_taylor(v: usize, dim: usize) -> BigRational {
    let n = dim as i64;
    let m = BigRational::from_integer(BigInt::from(n * n - 1));
    let inv_v = rat(1, v as i64);
    let half = rat(1, 2);
    (half.clone() * &m * &m + m * int_pow(1 + n, v) + half * int_pow(1 + 2 * n, v)) * inv_v
}

fn pillow_range(lambda: f64, dim: usize) -> Result<()> {
    if dim == 0 || !(lambda < 1.0 / (1.0 + 2.0 * dim as f64)) {
        return domain(format!("pillow determinant needs N >= 1 and λ < 1/(1+2N), got N={dim}, λ={lambda}"));
    }
    Ok(())
}

fn real_log_det(m: &ComplexMatrix) -> Result<f64> {
    let ld = m.log_det()?;
    // positive definite inputs only; the phase is a pivot-sign artefact
    Ok(ld.re)
}

/// `-½ ln det C_λ` for the dense pillow operator on `N⁴` entries (`C_0 = 1`).
///
/// `C[(c2,c3,d2,d3),(a2,a3,b2,b3)] = (1-λ) δ_{c2a2} δ_{c3a3} δ_{d2b2} δ_{d3b3}
///  - λ δ_{c2a2} δ_{b3a3} δ_{d2b2} δ_{d3c3} - λ δ_{b2a2} δ_{c3a3} δ_{d2c2} δ_{d3b3}`.
pub fn pillow_det_dense(lambda: f64, dim: usize) -> Result<f64> {
    pillow_range(lambda, dim)?;
    let n = dim;
    let split = |x: usize| (x / (n * n * n), (x / (n * n)) % n, (x / n) % n, x % n);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let m = ComplexMatrix::from_fn(n.pow(4), |row, col| {
        let (c2, c3, d2, d3) = split(row);
        let (a2, a3, b2, b3) = split(col);
        let v = (1.0 - lambda) * d(c2, a2) * d(c3, a3) * d(d2, b2) * d(d3, b3)
            - lambda * d(c2, a2) * d(b3, a3) * d(d2, b2) * d(d3, c3)
            - lambda * d(b2, a2) * d(c3, a3) * d(d2, c2) * d(d3, b3);
        C64::new(v, 0.0)
    });
    Ok(-0.5 * real_log_det(&m)?)
}

/// Block route: split by whether `j = k` and `i = l`, with the all-ones matrix `J_N`
/// diagonalized numerically.
pub fn pillow_det_blocks(lambda: f64, dim: usize) -> Result<f64> {
    pillow_range(lambda, dim)?;
    let n = dim as f64;
    let ones = ComplexMatrix::from_fn(dim, |_, _| C64::new(1.0, 0.0));
    let (j, _) = hermitian_eigen(&ones)?;
    let log_or_fail = |x: f64| {
        if x > 0.0 {
            Ok(x.ln())
        } else {
            domain(format!("pillow block has non-positive eigenvalue {x}"))
        }
    };
    // (1-λ) I - λ J_N
    let mut single = 0.0;
    for &ji in &j {
        single += log_or_fail(1.0 - lambda - lambda * ji)?;
    }
    // (1-λ) I⊗I - I⊗λJ_N - λJ_N⊗I
    let mut double = 0.0;
    for &ji in &j {
        for &jk in &j {
            double += log_or_fail(1.0 - lambda - lambda * (ji + jk))?;
        }
    }
    let off = n * n * (n - 1.0) * (n - 1.0) * log_or_fail(1.0 - lambda)?;
    let mixed = 2.0 * n * (n - 1.0) * single;
    Ok(-0.5 * (off + mixed + double))
}

fn tetra_exponents(dim: usize) -> (f64, f64) {
    let n = dim as f64;
    (n * (n + 1.0) / 2.0, n * (n - 1.0) / 2.0)
}

/// Order-3 real tensor with `C_2` on one strand:
/// `(1+λ)^{-A²/2} (1-λ)^{-B²/2}`, `A = N(N+1)/2`, `B = N(N-1)/2`, as a log.
pub fn rt_logz(lambda: f64, dim: usize) -> Result<f64> {
    if !(lambda.abs() < 1.0) {
        return domain(format!("tetrahedral closed form needs |λ| < 1, got {lambda}"));
    }
    let (a, b) = tetra_exponents(dim);
    Ok(-0.5 * a * a * lambda.ln_1p() - 0.5 * b * b * (-lambda).ln_1p())
}

/// Order-4 self-transpose real tensor; the same closed form as [`rt_logz`].
pub fn st_logz(lambda: f64, dim: usize) -> Result<f64> {
    rt_logz(lambda, dim)
}

/// Coefficient of `λ^k` in [`rt_logz`], `k ≥ 1`.
pub fn rt_taylor(k: usize, dim: usize) -> BigRational {
    let n = dim as i64;
    let a = BigRational::from_integer(BigInt::from(n * (n + 1) / 2));
    let b = BigRational::from_integer(BigInt::from(n * (n - 1) / 2));
    let sign = if k % 2 == 1 { -1 } else { 1 };
    a.clone() * a * rat(sign, 2 * k as i64) + b.clone() * b * rat(1, 2 * k as i64)
}

type SparseColumn = Vec<(usize, f64)>;

/// Orthonormal basis of `Φ_ijkl = Φ_lkji` as sparse columns, plus each entry's owner.
fn self_transpose_basis(dim: usize) -> (Vec<SparseColumn>, SparseColumn) {
    let n = dim;
    let flat = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut basis = Vec::new();
    let mut owner = vec![(usize::MAX, 0.0); n.pow(4)];
    for x in 0..n.pow(4) {
        if owner[x].0 != usize::MAX {
            continue;
        }
        let (i, j, k, l) = (x / (n * n * n), (x / (n * n)) % n, (x / n) % n, x % n);
        let y = flat(l, k, j, i);
        let id = basis.len();
        if y == x {
            basis.push(vec![(x, 1.0)]);
            owner[x] = (id, 1.0);
        } else {
            let c = std::f64::consts::FRAC_1_SQRT_2;
            basis.push(vec![(x, c), (y, c)]);
            owner[x] = (id, c);
            owner[y] = (id, c);
        }
    }
    (basis, owner)
}

pub fn self_transpose_dim(dim: usize) -> usize {
    dim * dim * (dim * dim + 1) / 2
}

/// `-½ ln det(1 + λT)` restricted to self-transpose tensors, `(TΦ)_ijkl = Φ_ikjl`.
pub fn st_det(lambda: f64, dim: usize) -> Result<f64> {
    if dim == 0 || !(lambda.abs() < 1.0) {
        return domain(format!("self-transpose determinant needs N >= 1 and |λ| < 1, got N={dim}, λ={lambda}"));
    }
    let n = dim;
    let swap_mid = |x: usize| {
        let (i, j, k, l) = (x / (n * n * n), (x / (n * n)) % n, (x / n) % n, x % n);
        ((i * n + k) * n + j) * n + l
    };
    let (basis, owner) = self_transpose_basis(dim);
    let size = basis.len();
    let mut m = ComplexMatrix::identity(size);
    for (s, col) in basis.iter().enumerate() {
        // column s of E^T T E: T applied to basis vector s, projected back
        for &(x, c) in col {
            let (t, ct) = owner[swap_mid(x)];
            let v = *m.get(t, s) + C64::new(lambda * c * ct, 0.0);
            m.set(t, s, v);
        }
    }
    Ok(-0.5 * real_log_det(&m)?)
}

/// Block route for the self-transpose model: `i > l` pairs carry `1 + λΣ` on `(j,k)`,
/// `i = l` entries carry `1 + λ`.
pub fn st_det_blocks(lambda: f64, dim: usize) -> Result<f64> {
    if dim == 0 || !(lambda.abs() < 1.0) {
        return domain(format!("self-transpose determinant needs N >= 1 and |λ| < 1, got N={dim}, λ={lambda}"));
    }
    let n = dim as f64;
    let swap = TensorOperator::<C64>::swap(dim).into_matrix();
    let (s, _) = hermitian_eigen(&swap)?;
    let block: f64 = s.iter().map(|&e| (1.0 + lambda * e).ln()).sum();
    let gt = n * (n - 1.0) / 2.0 * block;
    let eq_gt = n * n * (n - 1.0) / 2.0 * lambda.ln_1p();
    let eq_eq = n * n * lambda.ln_1p();
    Ok(-0.5 * (gt + eq_gt + eq_eq))
}

/// Gaussian one-matrix action `½ c Tr((P⁻¹A)²)` written as a kernel on the entries of `A`.
#[derive(Clone, Debug)]
pub struct GaussianReduction<S> {
    /// Matrix side length `M` of the field `A`.
    pub size: usize,
    /// Coupling `c` in front of the trace; `N` in both the matrix and tensor reductions.
    pub coupling: usize,
    /// `K[(b,c),(d,a)] = c P⁻¹_ab P⁻¹_cd`, row-major over entry pairs.
    pub kernel: Matrix<S>,
    /// `⟨A_ij A_kl⟩ = K⁻¹[(i,j),(k,l)]`, flattened as `[i][j][k][l]`.
    pub two_point: Vec<S>,
}

fn reduce<S: Scalar>(p: &Matrix<S>, coupling: usize) -> Result<GaussianReduction<S>> {
    let m = p.dim();
    let Some(pinv) = p.inverse() else {
        return domain("Gaussian reduction needs an invertible P");
    };
    let c = S::from_i64(coupling as i64);
    let kernel = Matrix::from_fn(m * m, |x, y| {
        let (b, cc) = (x / m, x % m);
        let (d, a) = (y / m, y % m);
        c.clone() * pinv.get(a, b) * pinv.get(cc, d)
    });
    let Some(inv) = kernel.inverse() else {
        return domain("Gaussian kernel is singular");
    };
    Ok(GaussianReduction { size: m, coupling, kernel, two_point: inv.data().to_vec() })
}

/// Matrix reduction with `Q = C_2`: `½N Tr((P⁻¹A)²)`, expected `⟨A_ij A_kl⟩ = N⁻¹ P_il P_kj`.
pub fn gaussian_reduction_params<S: Scalar>(p: &Matrix<S>) -> Result<GaussianReduction<S>> {
    reduce(p, p.dim())
}

/// Tensor analog on the `N^{D-1}` space of `Ψ̂`, still with coupling `N`.
///
/// Matches the covariance `R = N⁻¹ C_2 ⊗ P̂`.
pub fn gaussian_reduction_tensor<S: Scalar>(p_hat: &TensorOperator<S>) -> Result<GaussianReduction<S>> {
    reduce(p_hat.matrix(), p_hat.dim())
}

/// One closed form, with a plain-language pointer to where it comes from.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct FormulaEntry {
    pub name: &'static str,
    pub anchor: &'static str,
}

pub fn formula_registry() -> &'static [FormulaEntry] {
    const REGISTRY: &[FormulaEntry] = &[
        FormulaEntry { name: "dual_weight_sum", anchor: "complex/self-adjoint matrix moments: N^{-n} Σ_μ Tr_[μ](Q) Tr_[μσ](P)" },
        FormulaEntry { name: "tensor_dual_weight_sum", anchor: "complex/self-adjoint tensor moments: Σ_μ Tr_[μα](R)" },
        FormulaEntry { name: "ck_expect", anchor: "C_k rigidity: sum restricted to the class [k^d]" },
        FormulaEntry { name: "quartic_cm_logz", anchor: "quartic complex matrix model with C_2: -(N²/2) ln(1+g)" },
        FormulaEntry { name: "pillow_logz", anchor: "order-3 pillow model after gauge fixing: product of three powers" },
        FormulaEntry { name: "pillow_det", anchor: "pillow quadratic operator, dense and block determinants" },
        FormulaEntry { name: "rt_logz", anchor: "order-3 real tetrahedral model with C_2 on one strand" },
        FormulaEntry { name: "st_logz", anchor: "order-4 self-transpose real tensor model" },
        FormulaEntry { name: "st_det", anchor: "self-transpose quadratic operator determinant" },
        FormulaEntry { name: "gaussian_reduction_params", anchor: "Gaussian Y_2 reduction to a one-matrix or one-tensor model" },
        FormulaEntry { name: "character_expectation", anchor: "character expectations n! N^{-n} χ_r(P) χ_r(Q) / χ^r(e)" },
    ];
    REGISTRY
}

/// Catalan number `Cat(m)`.
pub fn catalan(m: usize) -> BigRational {
    let mut c = BigInt::one();
    for i in 0..m {
        c = c * BigInt::from(2 * (2 * i + 1)) / BigInt::from(i + 2);
    }
    BigRational::from_integer(c)
}

/// `BigRational` to `f64`, lossy.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

impl<S: Scalar> GaussianReduction<S> {
    /// Largest gap between the two-point table and `N⁻¹ P_il P_kj`.
    pub fn two_point_residual(&self, p: &Matrix<S>) -> f64 {
        let p = p.to_c64();
        let m = self.size;
        let inv_c = 1.0 / self.coupling as f64;
        let mut worst = 0.0f64;
        for (x, v) in self.two_point.iter().enumerate() {
            let (i, j, k, l) = (x / (m * m * m), (x / (m * m)) % m, (x / m) % m, x % m);
            let want = *p.get(i, l) * *p.get(k, j) * inv_c;
            worst = worst.max((v.to_c64() - want).norm());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::build_ck;
    use crate::fixtures::{random_gaussian_int_matrix, random_gaussian_int_operator, random_matrix};
    use crate::jet::{two_point_matrix, two_point_tensor, JetModel};
    use crate::perm::{enumerate_class, partitions};
    use crate::scalar::{rel_err, CQ};
    use num_traits::Zero;
    use crate::wick::{cm_expect, ct_expect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(v: i64) -> CQ {
        CQ::from_i64(v)
    }

    fn qr(r: BigRational) -> CQ {
        CQ::new(r, BigRational::zero())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn dual_weight_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_matrix(&mut rng, 3);
        let qm = random_matrix(&mut rng, 3);
        let pair = CovariancePair::new(p.clone(), qm.clone()).unwrap();
        let v = dual_weight_sum(&Permutation::identity(1), &pair).unwrap();
        assert!(rel_err(v, p.trace() * qm.trace() / 3.0) < 1e-12);
        let s = Permutation::transposition(2, 0, 1).unwrap();
        let want = (qm.trace() * qm.trace() * p.mul(&p).trace() + qm.mul(&qm).trace() * p.trace() * p.trace()) / 9.0;
        assert!(rel_err(dual_weight_sum(&s, &pair).unwrap(), want) < 1e-12);
        let c2 = build_ck::<CQ>(2, 2).unwrap().matrix;
        let pair = CovariancePair::new(Matrix::identity(2), c2).unwrap();
        assert_eq!(dual_weight_sum(&s, &pair).unwrap(), q(2));
    }

    #[test]
    fn grouped_equals_naive_and_wick() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 2, 2);
        let qm: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 2, 2);
        let pair = CovariancePair::new(p, qm).unwrap();
        for n in 1..=4 {
            for lam in partitions(n) {
                let s = lam.representative();
                let grouped = dual_weight_sum(&s, &pair).unwrap();
                assert_eq!(grouped, dual_weight_sum_naive(&s, &pair).unwrap());
                assert_eq!(grouped, cm_expect(&s, &pair).unwrap(), "sigma={s}");
                assert_eq!(grouped, dual_weight_sum(&s, &pair.swapped()).unwrap());
            }
        }
    }

    #[test]
    fn grouping_handles_degree_eight() {
        let s = Permutation::long_cycle(8);
        let counts = class_pair_counts(&s).unwrap();
        assert_eq!(counts.values().sum::<u64>(), 40320);
        let pair = CovariancePair::new(Matrix::<CQ>::identity(2), Matrix::identity(2)).unwrap();
        assert_eq!(dual_weight_sum(&s, &pair).unwrap(), dual_weight_sum_naive(&s, &pair).unwrap());
    }

    #[test]
    fn tensor_sum_matches_wick() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let r: TensorOperator<CQ> = random_gaussian_int_operator(&mut rng, 2, 2, 2);
        let r = TensorCovariance::dense(r);
        let mp = MultiPermutation::new(vec![
            Permutation::transposition(3, 0, 1).unwrap(),
            Permutation::from_cycles(3, &[&[0, 1, 2]]).unwrap(),
        ])
        .unwrap();
        assert_eq!(tensor_dual_weight_sum(&mp, &r).unwrap(), ct_expect(&mp, &r).unwrap());
        assert_eq!(tensor_dual_weight_sum(&MultiPermutation::identity(1, 2), &r).unwrap(), r.dense.trace());
        let f: Vec<Matrix<CQ>> = (0..3).map(|_| random_gaussian_int_matrix(&mut rng, 2, 2)).collect();
        let fact = TensorCovariance::factorized(f).unwrap();
        let mp = MultiPermutation::new(vec![
            Permutation::from_cycles(4, &[&[0, 1], &[2, 3]]).unwrap(),
            Permutation::from_cycles(4, &[&[0, 2, 3]]).unwrap(),
            Permutation::identity(4),
        ])
        .unwrap();
        assert_eq!(tensor_dual_weight_sum(&mp, &fact).unwrap(), ct_expect(&mp, &fact).unwrap());
    }

    #[test]
    fn tensor_embedding_equals_matrix_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let p: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 2, 2);
        let qm: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 2, 2);
        let pair = CovariancePair::new(p.clone(), qm.clone()).unwrap();
        let r = TensorCovariance::factorized(vec![qm.scale(&CQ::from_frac(1, 2)), p.transpose()]).unwrap();
        for n in 1..=3 {
            for s in enumerate_sn(n).unwrap() {
                let a = MultiPermutation::new(vec![Permutation::identity(n), s.inverse()]).unwrap();
                assert_eq!(tensor_dual_weight_sum(&a, &r).unwrap(), dual_weight_sum(&s, &pair).unwrap());
            }
        }
    }

    #[test]
    fn ck_examples() {
        let id4: Matrix<CQ> = Matrix::identity(4);
        assert_eq!(ck_expect(&Permutation::identity(3), &id4, 2).unwrap(), q(0));
        assert_eq!(ck_expect(&Permutation::transposition(2, 0, 1).unwrap(), &id4, 2).unwrap(), q(4));
        // N^{-2}(2N³ + N) at N = 4
        assert_eq!(ck_expect(&Permutation::long_cycle(4), &id4, 2).unwrap(), CQ::from_frac(33, 4));
    }

    #[test]
    fn ck_equals_dual_weight_with_ck() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for (k, dim) in [(1, 4), (2, 4), (3, 6), (2, 6)] {
            let ck = build_ck::<CQ>(k, dim).unwrap().matrix;
            let p: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, dim, 1);
            let pair = CovariancePair::new(p.clone(), ck).unwrap();
            for n in 1..=(2 * k).min(4) {
                for lam in partitions(n) {
                    let s = lam.representative();
                    assert_eq!(ck_expect(&s, &p, k).unwrap(), dual_weight_sum(&s, &pair).unwrap(), "k={k} N={dim} σ={s}");
                }
            }
        }
    }

    #[test]
    fn catalan_limit() {
        let dim = 20;
        let id: Matrix<CQ> = Matrix::identity(dim);
        let bound = CQ::from_frac(2, (dim * dim) as i64);
        for n in [2usize, 4, 6] {
            let v = ck_expect(&Permutation::long_cycle(n), &id, 2).unwrap() / q(dim as i64);
            let ratio = v / qr(catalan(n / 2)) - q(1);
            assert!(ratio.re <= bound.re && ratio.re >= -bound.re.clone(), "n={n}");
        }
        assert_eq!(catalan(3), BigRational::from_integer(BigInt::from(5)));
    }

    #[test]
    fn ck_is_class_function() {
        let id: Matrix<CQ> = Matrix::identity(3);
        for lam in partitions(4) {
            let class = enumerate_class(&lam).unwrap();
            let first = ck_expect(&class[0], &id, 2).unwrap();
            assert!(class.iter().all(|s| ck_expect(s, &id, 2).unwrap() == first));
        }
    }

    #[test]
    fn quartic_closed_form() {
        assert_eq!(quartic_cm_logz(0.0, 3).unwrap(), 0.0);
        assert_eq!(quartic_cm_taylor(1, 2), rat(-2, 1));
        for dim in 1..5 {
            assert_eq!(quartic_connected_amplitude(2, dim), rat(2, 1));
            for k in 1..6 {
                // F_k = (-N/2)^k / k! × amplitude_k
                let fact: BigInt = (1..=k).map(BigInt::from).product();
                let lhs = num_traits::pow(rat(-(dim as i64), 2), k) / BigRational::from_integer(fact)
                    * quartic_connected_amplitude(k, dim);
                assert_eq!(lhs, quartic_cm_taylor(k, dim), "k={k} N={dim}");
            }
        }
        assert!(quartic_cm_logz(-1.5, 2).is_err());
        let g: f64 = 0.05;
        let series: f64 = (1..40).map(|k| rational_to_f64(&quartic_cm_taylor(k, 3)) * g.powi(k as i32)).sum();
        assert!(rel(series, quartic_cm_logz(g, 3).unwrap()) < 1e-12);
    }

    #[test]
    fn pillow_closed_form() {
        assert_eq!(pillow_logz(0.0, 2).unwrap(), 0.0);
        assert_eq!(pillow_taylor(1, 2), rat(16, 1));
        assert_eq!(pillow_taylor(2, 2), rat(22, 1));
        assert!(pillow_logz(0.3, 2).is_err());
        let l: f64 = 0.02;
        let series: f64 = (1..60).map(|v| rational_to_f64(&pillow_taylor(v, 2)) * l.powi(v as i32)).sum();
        assert!(rel(series, pillow_logz(l, 2).unwrap()) < 1e-12);
    }

    #[test]
    fn pillow_determinants() {
        for dim in [2, 3] {
            for l in [0.05, 0.1] {
                let closed = pillow_logz(l, dim).unwrap();
                assert!(rel(pillow_det_dense(l, dim).unwrap(), closed) < 1e-12, "dense N={dim} λ={l}");
                assert!(rel(pillow_det_blocks(l, dim).unwrap(), closed) < 1e-12, "blocks N={dim} λ={l}");
            }
        }
        assert!(rel(pillow_det_dense(-0.2, 2).unwrap(), pillow_logz(-0.2, 2).unwrap()) < 1e-12);
        assert_eq!(pillow_det_dense(0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn tetrahedral_closed_forms() {
        assert_eq!(rt_taylor(1, 2), rat(-4, 1));
        for dim in 1..6 {
            assert_eq!(rt_taylor(1, dim), rat(-((dim * dim * dim) as i64), 2));
        }
        let l: f64 = 0.2;
        assert!(rel(st_logz(l, 1).unwrap(), -0.5 * (1.0f64 + l).ln()) < 1e-15);
        assert_eq!(self_transpose_dim(3), 45);
        assert_eq!(self_transpose_basis(3).0.len(), 45);
        for dim in [2, 3] {
            for l in [0.05, 0.1, -0.3] {
                let closed = st_logz(l, dim).unwrap();
                assert!(rel(st_det(l, dim).unwrap(), closed) < 1e-12, "dense N={dim} λ={l}");
                assert!(rel(st_det_blocks(l, dim).unwrap(), closed) < 1e-12, "blocks N={dim} λ={l}");
            }
        }
        assert!(rel(st_det(0.2, 3).unwrap(), st_logz(0.2, 3).unwrap()) < 1e-12);
        assert!(rt_logz(1.0, 2).is_err());
        let series: f64 = (1..80).map(|k| rational_to_f64(&rt_taylor(k, 3)) * l.powi(k as i32)).sum();
        assert!(rel(series, rt_logz(l, 3).unwrap()) < 1e-12);
    }

    #[test]
    fn gaussian_reduction_matches_jets() {
        let c2 = build_ck::<CQ>(2, 2).unwrap().matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let p: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 2, 2);
        let red = gaussian_reduction_params(&p).unwrap();
        let pair = CovariancePair::new(p.clone(), c2.clone()).unwrap();
        let jet = two_point_matrix(&JetModel::matrix_gaussian(&pair, 2).unwrap()).unwrap();
        assert_eq!(red.two_point, jet);
        assert!(red.two_point_residual(&p) < 1e-12);
        // identity P gives the GUE-normalized kernel N δ δ
        let id = gaussian_reduction_params(&Matrix::<CQ>::identity(2)).unwrap();
        assert_eq!(*id.kernel.get(1, 2), q(2));
        assert_eq!(*id.kernel.get(1, 1), q(0));
        assert!(gaussian_reduction_params(&Matrix::<CQ>::zeros(2)).is_err());
    }

    #[test]
    fn tensor_gaussian_reduction_matches_jets() {
        let c2 = build_ck::<CQ>(2, 2).unwrap().matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p_hat: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 2, 2);
        // R = N⁻¹ C_2 ⊗ P̂; without the N⁻¹ the table is N² times larger
        let r = TensorOperator::tensor_product(&[c2.scale(&CQ::from_frac(1, 2)), p_hat.clone()]).unwrap();
        let jet = two_point_tensor(&JetModel::reduced(&r, 2).unwrap()).unwrap();
        let op = TensorOperator::from_matrix(1, 2, p_hat).unwrap();
        let red = gaussian_reduction_tensor(&op).unwrap();
        assert_eq!(red.two_point, jet);
        let unit = gaussian_reduction_tensor(&TensorOperator::<CQ>::identity(2, 2).unwrap()).unwrap();
        assert_eq!(unit.coupling, 2);
        assert_eq!(unit.size, 4);
    }

    #[test]
    fn registry_names_are_unique() {
        let mut names: Vec<_> = formula_registry().iter().map(|f| f.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), formula_registry().len());
    }
}
