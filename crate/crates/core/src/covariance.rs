//! Rigidity matrices `C_k`, covariance pairs, the convergence criterion and sampler square roots.

use crate::error::{domain, input, Result};
use crate::linalg::{eigenvalues, hermitian_sqrt, monic_roots, to_na};
use crate::report::{CaseRecord, VerdictReport};
use crate::scalar::{Backend, Scalar, C64, CQ};
use crate::tensor::{ComplexMatrix, Matrix, TensorOperator};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::json;

pub const MAX_CK_DIM: usize = 12;

/// A matrix whose power sums are `Tr(C^p) = N δ_{p,k}` for `p = 1..N`.
#[derive(Clone, Debug)]
pub struct CkMatrix<S> {
    pub k: usize,
    /// Eigenvalues to double precision, always available.
    pub eigenvalues: Vec<C64>,
    pub matrix: Matrix<S>,
    /// False when the exact backend had to fall back to the rational companion matrix.
    pub diagonal: bool,
}

impl<S: Scalar> CkMatrix<S> {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Elementary symmetric polynomials `e_0..e_N` of the target spectrum, by Newton's identities.
pub fn ck_elementary(k: usize, n: usize) -> Vec<BigRational> {
    let p = |i: usize| {
        if i == k {
            BigRational::from_integer(BigInt::from(n))
        } else {
            BigRational::zero()
        }
    };
    let mut e = vec![BigRational::one()];
    for j in 1..=n {
        let mut acc = BigRational::zero();
        for i in 1..=j {
            let term = e[j - i].clone() * p(i);
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e.push(acc / BigRational::from_integer(BigInt::from(j)));
    }
    e
}

/// Coefficients of `x^0..x^{N-1}` of the monic characteristic polynomial.
pub fn ck_polynomial(k: usize, n: usize) -> Vec<BigRational> {
    let e = ck_elementary(k, n);
    (0..n)
        .map(|m| {
            let v = e[n - m].clone();
            if (n - m) % 2 == 1 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Build `C_k` at dimension `N`.
///
/// Float: diagonal of companion-matrix eigenvalues. Exact: diagonal when every root is a
/// Gaussian integer, otherwise the rational companion matrix, which has the same power sums.
pub fn build_ck<S: Scalar>(k: usize, n: usize) -> Result<CkMatrix<S>> {
    if k < 1 || k > n || n > MAX_CK_DIM {
        return input(format!("C_k needs 1 <= k <= N <= {MAX_CK_DIM}, got k={k}, N={n}"));
    }
    let poly = ck_polynomial(k, n);
    let approx: Vec<f64> = poly.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
    let eigenvalues = monic_roots(&approx)?;
    if !S::EXACT {
        let matrix = Matrix::diag(eigenvalues.iter().map(|&z| S::from_c64(z)).collect());
        return Ok(CkMatrix { k, eigenvalues, matrix, diagonal: true });
    }
    if let Some(roots) = gaussian_integer_roots(&poly) {
        let matrix = Matrix::diag(roots.iter().map(|&(a, b)| S::from_gaussian(a, b)).collect());
        let eigenvalues = roots.iter().map(|&(a, b)| C64::new(a as f64, b as f64)).collect();
        return Ok(CkMatrix { k, eigenvalues, matrix, diagonal: true });
    }
    let matrix = Matrix::from_fn(n, |i, j| {
        if j == n - 1 {
            S::zero() - rational_scalar::<S>(&poly[i])
        } else if i == j + 1 {
            S::one()
        } else {
            S::zero()
        }
    });
    Ok(CkMatrix { k, eigenvalues, matrix, diagonal: false })
}

fn rational_scalar<S: Scalar>(q: &BigRational) -> S {
    let num = q.numer().to_i64().expect("small numerator");
    let den = q.denom().to_i64().expect("small denominator");
    S::from_frac(num, den)
}

/// All roots as Gaussian integers, if the polynomial splits that way.
fn gaussian_integer_roots(poly_low: &[BigRational]) -> Option<Vec<(i64, i64)>> {
    let n = poly_low.len();
    let bound = poly_low
        .iter()
        .map(|c| c.abs().ceil().to_integer().to_i64().unwrap_or(i64::MAX))
        .max()
        .unwrap_or(0)
        .saturating_add(1)
        .min(64);
    // coefficients high to low, leading 1
    let mut coeffs: Vec<CQ> = std::iter::once(CQ::one())
        .chain(poly_low.iter().rev().map(|c| CQ::new(c.clone(), BigRational::zero())))
        .collect();
    let mut roots = Vec::new();
    'outer: while roots.len() < n {
        for a in -bound..=bound {
            for b in -bound..=bound {
                let z = CQ::from_gaussian(a, b);
                let (quot, rem) = synthetic_division(&coeffs, &z);
                if rem.is_zero() {
                    roots.push((a, b));
                    coeffs = quot;
                    continue 'outer;
                }
            }
        }
        return None;
    }
    roots.sort();
    Some(roots)
}

fn synthetic_division(coeffs_high: &[CQ], z: &CQ) -> (Vec<CQ>, CQ) {
    let mut out = Vec::with_capacity(coeffs_high.len().saturating_sub(1));
    let mut acc = CQ::zero();
    for c in coeffs_high {
        acc = acc * z + c;
        out.push(acc.clone());
    }
    let rem = out.pop().unwrap_or_else(CQ::zero);
    (out, rem)
}

/// Residuals `|Tr(C^p) - N δ_{p,k}|` for `p = 1..N`.
pub fn verify_ck<S: Scalar>(c: &Matrix<S>, k: usize, tol: f64) -> VerdictReport {
    let n = c.dim();
    let backend = if S::EXACT { Backend::Exact } else { Backend::Float };
    let mut report = VerdictReport::new("verify-ck", &["rigidity-power-sums"], backend);
    let traces = c.power_traces(n);
    for (i, t) in traces.iter().enumerate() {
        let p = i + 1;
        let target = if p == k { S::from_i64(n as i64) } else { S::zero() };
        let case = CaseRecord::compare_abs(
            format!("Tr(C^{p})"),
            json!({"p": p, "k": k, "N": n}),
            t.to_c64(),
            target.to_c64(),
            tol,
        );
        let case = if S::EXACT { CaseRecord { pass: *t == target, ..case } } else { case };
        report.push(case);
    }
    report
}

/// Reject singular matrices before anything needs an inverse.
pub fn require_invertible<S: Scalar>(m: &Matrix<S>, what: &str) -> Result<()> {
    let det = m.det();
    let singular = if S::EXACT {
        det.is_zero()
    } else {
        let scale = m.data().iter().map(|z| z.to_c64().norm()).fold(0.0, f64::max).max(1e-300);
        det.to_c64().norm() <= 1e-12 * scale.powi(m.dim() as i32)
    };
    if singular {
        return domain(format!("{what} is singular (C_2 is singular at odd N); an inverse is required here"));
    }
    Ok(())
}

/// Fixed covariance data `(P, Q)` of the complex matrix model.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariancePair<S> {
    pub p: Matrix<S>,
    pub q: Matrix<S>,
}

impl<S: Scalar> CovariancePair<S> {
    pub fn new(p: Matrix<S>, q: Matrix<S>) -> Result<Self> {
        if p.dim() != q.dim() {
            return input("P and Q must share one dimension");
        }
        Ok(CovariancePair { p, q })
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    pub fn swapped(&self) -> Self {
        CovariancePair { p: self.q.clone(), q: self.p.clone() }
    }
}

/// Tensor covariance `R`, optionally remembered as `R_0 ⊗ … ⊗ R_{D-1}`.
#[derive(Clone, Debug)]
pub struct TensorCovariance<S> {
    pub dense: TensorOperator<S>,
    pub factors: Option<Vec<Matrix<S>>>,
}

impl<S: Scalar> TensorCovariance<S> {
    pub fn dense(r: TensorOperator<S>) -> Self {
        TensorCovariance { dense: r, factors: None }
    }

    pub fn factorized(factors: Vec<Matrix<S>>) -> Result<Self> {
        let dense = TensorOperator::tensor_product(&factors)?;
        Ok(TensorCovariance { dense, factors: Some(factors) })
    }

    pub fn order(&self) -> usize {
        self.dense.order()
    }

    pub fn dim(&self) -> usize {
        self.dense.dim()
    }

    /// Largest entry gap between the stored product form and the dense form.
    pub fn factorization_error(&self) -> f64 {
        match &self.factors {
            None => 0.0,
            Some(f) => {
                let rebuilt = TensorOperator::tensor_product(f).expect("checked at construction");
                rebuilt.matrix().max_abs_diff(self.dense.matrix())
            }
        }
    }
}

/// Result of the convergence test.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceVerdict {
    pub converges: bool,
    /// First offending `(q_k, p_l)` with `Re(q_k p_l) < 0`.
    pub witness: Option<(C64, C64)>,
}

fn normal_eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    eigenvalues(&to_na(m))
}

/// Convergent iff `Re(q_k p_l) >= 0` for every eigenvalue pair of the normal matrices `P`, `Q`.
pub fn convergence_check(pair: &CovariancePair<C64>) -> Result<ConvergenceVerdict> {
    let tol = 1e-10;
    for (name, m) in [("P", &pair.p), ("Q", &pair.q)] {
        let scale = 1.0 + m.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !m.is_normal(tol * scale * scale) {
            return input(format!("{name} is not normal"));
        }
    }
    let ps = normal_eigenvalues(&pair.p)?;
    let qs = normal_eigenvalues(&pair.q)?;
    for q in &qs {
        for p in &ps {
            let v = (q * p).re;
            if v < -1e-12 * (q.norm() * p.norm()).max(1e-300) {
                return Ok(ConvergenceVerdict { converges: false, witness: Some((*q, *p)) });
            }
        }
    }
    Ok(ConvergenceVerdict { converges: true, witness: None })
}

/// `A = Q^{1/2}`, `B = P^{1/2}` so that `Q = A A†` and `P = B† B`.
pub fn factorize_for_sampling(pair: &CovariancePair<C64>) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let a = hermitian_sqrt(&pair.q)?;
    let b = hermitian_sqrt(&pair.p)?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_matrix, random_pd, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn small_ck_spectra() {
        let c: CkMatrix<C64> = build_ck(2, 2).unwrap();
        let ev = sorted(c.eigenvalues.clone());
        assert!((ev[0] - C64::new(-1.0, 0.0)).norm() < 1e-12 && (ev[1] - C64::new(1.0, 0.0)).norm() < 1e-12);
        let c1: CkMatrix<C64> = build_ck(1, 2).unwrap();
        let ev = sorted(c1.eigenvalues.clone());
        assert!((ev[0] - C64::new(1.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - C64::new(1.0, 1.0)).norm() < 1e-12);
        let c3: CkMatrix<C64> = build_ck(2, 3).unwrap();
        let ev = sorted(c3.eigenvalues.clone());
        let r = (1.5f64).sqrt();
        assert!((ev[0].re + r).abs() < 1e-12 && ev[1].norm() < 1e-12 && (ev[2].re - r).abs() < 1e-12);
    }

    #[test]
    fn exact_ck_is_exact() {
        let c: CkMatrix<CQ> = build_ck(2, 2).unwrap();
        assert!(c.diagonal);
        assert!(verify_ck(&c.matrix, 2, 0.0).pass);
        let c1: CkMatrix<CQ> = build_ck(1, 2).unwrap();
        assert!(c1.diagonal);
        for (k, n) in [(2, 3), (2, 4), (3, 4), (1, 4)] {
            let c: CkMatrix<CQ> = build_ck(k, n).unwrap();
            assert!(verify_ck(&c.matrix, k, 0.0).pass, "k={k} N={n}");
        }
    }

    #[test]
    fn float_ck_residuals() {
        for n in 1..=8 {
            for k in 1..=n {
                let c: CkMatrix<C64> = build_ck(k, n).unwrap();
                let rep = verify_ck(&c.matrix, k, 1e-8);
                assert!(rep.pass, "k={k} N={n}: {:?}", rep.failures().next());
            }
        }
    }

    #[test]
    fn hand_made_counterexample_fails() {
        let m: Matrix<CQ> = Matrix::identity(2);
        let rep = verify_ck(&m, 2, 0.0);
        assert!(!rep.pass);
        assert!(!rep.cases[0].pass);
    }

    #[test]
    fn known_polynomials() {
        let q = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        assert_eq!(ck_polynomial(2, 4), vec![q(2, 1), q(0, 1), q(-2, 1), q(0, 1)]);
        assert_eq!(ck_polynomial(2, 3), vec![q(0, 1), q(-3, 2), q(0, 1)]);
    }

    #[test]
    fn odd_n_c2_is_rejected_by_the_inverse_gate() {
        let c: CkMatrix<CQ> = build_ck(2, 3).unwrap();
        assert!(require_invertible(&c.matrix, "C_2").is_err());
        let c: CkMatrix<CQ> = build_ck(2, 4).unwrap();
        assert!(require_invertible(&c.matrix, "C_2").is_ok());
    }

    #[test]
    fn convergence_examples() {
        let id = ComplexMatrix::identity(2);
        let ok = convergence_check(&CovariancePair::new(id.clone(), id.clone()).unwrap()).unwrap();
        assert!(ok.converges);
        let p = ComplexMatrix::identity(1);
        let q = ComplexMatrix::diag(vec![C64::new(-1.0, 0.0)]);
        let bad = convergence_check(&CovariancePair::new(p, q).unwrap()).unwrap();
        assert!(!bad.converges);
        assert_eq!(bad.witness, Some((C64::new(-1.0, 0.0), C64::new(1.0, 0.0))));
        let w = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let edge = ComplexMatrix::diag(vec![w, w]);
        assert!(convergence_check(&CovariancePair::new(edge.clone(), edge).unwrap()).unwrap().converges);
        let skew = random_matrix(&mut ChaCha8Rng::seed_from_u64(1), 2);
        assert!(convergence_check(&CovariancePair::new(skew.clone(), skew).unwrap()).is_err());
    }

    #[test]
    fn convergence_is_symmetric_in_p_and_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let mk = |rng: &mut ChaCha8Rng| {
                let u = random_unitary(rng, 3);
                let d = ComplexMatrix::diag(random_matrix(rng, 3).data()[..3].to_vec());
                u.mul(&d).mul(&u.adjoint())
            };
            let p = mk(&mut rng);
            let q = mk(&mut rng);
            let pair = CovariancePair::new(p, q).unwrap();
            let a = convergence_check(&pair).unwrap().converges;
            let b = convergence_check(&pair.swapped()).unwrap().converges;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sampling_factors_reconstruct() {
        let id = ComplexMatrix::identity(2);
        let (a, b) = factorize_for_sampling(&CovariancePair::new(id.clone(), id.clone()).unwrap()).unwrap();
        assert!(a.max_abs_diff(&id) < 1e-12 && b.max_abs_diff(&id) < 1e-12);
        let q = ComplexMatrix::diag(vec![C64::new(4.0, 0.0), C64::new(1.0, 0.0)]);
        let (a, _) = factorize_for_sampling(&CovariancePair::new(id.clone(), q).unwrap()).unwrap();
        assert!(a.max_abs_diff(&ComplexMatrix::diag(vec![C64::new(2.0, 0.0), C64::new(1.0, 0.0)])) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_pd(&mut rng, 4);
        let q = random_pd(&mut rng, 4);
        let pair = CovariancePair::new(p.clone(), q.clone()).unwrap();
        let (a, b) = factorize_for_sampling(&pair).unwrap();
        assert!(b.adjoint().mul(&b).max_abs_diff(&p) <= 1e-10);
        assert!(a.mul(&a.adjoint()).max_abs_diff(&q) <= 1e-10);
        let not_pd = ComplexMatrix::diag(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
        assert!(factorize_for_sampling(&CovariancePair::new(not_pd, id).unwrap()).is_err());
    }

    #[test]
    fn factorized_covariance_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = vec![random_matrix(&mut rng, 2), random_matrix(&mut rng, 2)];
        let r = TensorCovariance::factorized(f).unwrap();
        assert!(r.factorization_error() <= 1e-12);
        let _ = Signed::abs(&BigRational::one());
    }
}
