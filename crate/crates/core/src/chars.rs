//! Characters of the symmetric group and of GL(N), plus the character identities built on them.

use crate::covariance::build_ck;
use crate::error::{domain, input, Result};
use crate::perm::{factorial, partitions, Partition, Permutation};
use crate::report::{CaseRecord, VerdictReport};
use crate::scalar::{Backend, Scalar};
use crate::tensor::{multi_trace, Matrix};
use serde_json::json;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub const MAX_CHARACTER_DEGREE: usize = 8;

/// Integer character table of `S_n`, rows indexed by irreps, columns by classes.
#[derive(Clone, Debug, PartialEq)]
pub struct SnCharacterTable {
    pub n: usize,
    /// Both irreps and classes, in the order of [`partitions`].
    pub labels: Vec<Partition>,
    pub values: Vec<Vec<i64>>,
    pub dims: Vec<i64>,
}

impl SnCharacterTable {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_CHARACTER_DEGREE {
            return input(format!("character tables are limited to n <= {MAX_CHARACTER_DEGREE}, got {n}"));
        }
        let labels = partitions(n);
        let mut memo = HashMap::new();
        let values: Vec<Vec<i64>> = labels
            .iter()
            .map(|lam| labels.iter().map(|mu| mn_character(&beta_set(lam), mu.parts(), &mut memo)).collect())
            .collect();
        let id_col = labels.iter().position(|mu| mu.parts().iter().all(|&p| p == 1)).expect("identity class");
        let dims = values.iter().map(|row| row[id_col]).collect();
        Ok(SnCharacterTable { n, labels, values, dims })
    }

    pub fn index(&self, lambda: &Partition) -> Option<usize> {
        self.labels.iter().position(|l| l == lambda)
    }

    pub fn value(&self, lambda: &Partition, mu: &Partition) -> Result<i64> {
        match (self.index(lambda), self.index(mu)) {
            (Some(i), Some(j)) => Ok(self.values[i][j]),
            _ => input(format!("partitions {lambda} and {mu} must both have size {}", self.n)),
        }
    }

    pub fn dim(&self, lambda: &Partition) -> Result<i64> {
        self.index(lambda)
            .map(|i| self.dims[i])
            .ok_or_else(|| crate::error::EquivError::Input(format!("{lambda} is not a partition of {}", self.n)))
    }
}

/// Shared, lazily built tables.
pub fn character_table(n: usize) -> Result<Arc<SnCharacterTable>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SnCharacterTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache lock").get(&n) {
        return Ok(t.clone());
    }
    let table = Arc::new(SnCharacterTable::new(n)?);
    cache.lock().expect("cache lock").insert(n, table.clone());
    Ok(table)
}

fn beta_set(lambda: &Partition) -> Vec<usize> {
    let l = lambda.length();
    lambda.parts().iter().enumerate().map(|(i, &p)| p + l - 1 - i).collect()
}

/// Murnaghan–Nakayama on beta-sets: strip rim hooks of length `mu[0]`, then recurse.
fn mn_character(beta: &[usize], mu: &[usize], memo: &mut HashMap<(Vec<usize>, Vec<usize>), i64>) -> i64 {
    if mu.is_empty() {
        return 1;
    }
    let key = (beta.to_vec(), mu.to_vec());
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let r = mu[0];
    let mut total = 0;
    for (idx, &b) in beta.iter().enumerate() {
        if b < r || beta.contains(&(b - r)) {
            continue;
        }
        let target = b - r;
        let crossed = beta.iter().filter(|&&x| x > target && x < b).count();
        let sign = if crossed % 2 == 0 { 1 } else { -1 };
        let mut next = beta.to_vec();
        next[idx] = target;
        next.sort_unstable_by(|a, b| b.cmp(a));
        total += sign * mn_character(&next, &mu[1..], memo);
    }
    memo.insert(key, total);
    total
}

pub fn sn_character(lambda: &Partition, mu: &Partition) -> Result<i64> {
    if lambda.size() != mu.size() {
        return input(format!("size mismatch: {lambda} vs {mu}"));
    }
    character_table(lambda.size())?.value(lambda, mu)
}

/// `χ_λ(M) = Σ_μ χ^λ(μ) p_μ(M) / z_μ`, which is the average over `S_n` grouped by class.
pub fn gl_character<S: Scalar>(lambda: &Partition, m: &Matrix<S>) -> Result<S> {
    let n = lambda.size();
    let table = character_table(n)?;
    let li = table.index(lambda).expect("own partition");
    let mut acc = S::zero();
    for (j, mu) in table.labels.iter().enumerate() {
        let chi = table.values[li][j];
        if chi == 0 {
            continue;
        }
        let z = mu.z() as i64;
        acc = acc + multi_trace(&mu.representative(), m) * S::from_frac(chi, z);
    }
    Ok(acc)
}

/// Schur polynomial of the eigenvalues `x` by the bialternant formula. Needs distinct `x`.
pub fn schur_polynomial_bialternant<S: Scalar>(lambda: &Partition, x: &[S]) -> Result<S> {
    let n = x.len();
    if lambda.length() > n {
        return Ok(S::zero());
    }
    let mut parts = lambda.parts().to_vec();
    parts.resize(n, 0);
    let alt = |shift: &[usize]| {
        Matrix::from_fn(n, |i, j| x[i].pow((shift[j] + n - 1 - j) as u32)).det()
    };
    let vandermonde = alt(&vec![0; n]);
    if vandermonde.is_zero() {
        return domain("bialternant needs distinct eigenvalues");
    }
    Ok(alt(&parts) / vandermonde)
}

fn backend_of<S: Scalar>() -> Backend {
    if S::EXACT {
        Backend::Exact
    } else {
        Backend::Float
    }
}

/// Both sides of `Tr_[σ](M) = Σ_λ χ^λ(σ) χ_λ(M)`.
pub fn schur_weyl_check<S: Scalar>(sigma: &Permutation, m: &Matrix<S>, tol: f64) -> Result<VerdictReport> {
    let n = sigma.degree();
    if n > m.dim() {
        return input(format!("degree {n} exceeds the matrix dimension {}", m.dim()));
    }
    let table = character_table(n)?;
    let mu = sigma.cycle_type();
    let lhs = multi_trace(sigma, m);
    let mut rhs = S::zero();
    for lam in &table.labels {
        rhs = rhs + gl_character(lam, m)? * S::from_i64(table.value(lam, &mu)?);
    }
    let mut report = VerdictReport::new("schur-weyl", &["schur-weyl-duality"], backend_of::<S>());
    report.push(CaseRecord::compare(
        format!("sigma={sigma}"),
        json!({"sigma": sigma, "N": m.dim()}),
        &lhs,
        &rhs,
        tol,
    ));
    Ok(report)
}

/// `n! N^{-n} χ_r(P) χ_r(Q) / d^r`.
pub fn character_expectation<S: Scalar>(r: &Partition, p: &Matrix<S>, q: &Matrix<S>, dim: usize) -> Result<S> {
    let n = r.size();
    let d = character_table(n)?.dim(r)?;
    let nn = S::from_i64(dim as i64).pow(n as u32);
    Ok(gl_character(r, p)? * gl_character(r, q)? * S::from_i64(factorial(n) as i64) / (nn * S::from_i64(d)))
}

/// `χ_r(P) χ_r(Q) / χ_r(C_1)` against [`character_expectation`].
pub fn c1_form_check<S: Scalar>(r: &Partition, p: &Matrix<S>, q: &Matrix<S>, tol: f64) -> Result<VerdictReport> {
    let dim = p.dim();
    let n = r.size();
    if n > dim {
        return input(format!("the C_1 form needs n <= N, got n={n}, N={dim}"));
    }
    let c1 = build_ck::<S>(1, dim)?;
    let chi_c1 = gl_character(r, &c1.matrix)?;
    if chi_c1.to_c64().norm() < 1e-300 {
        return domain(format!("χ_{r}(C_1) vanishes"));
    }
    let lhs = gl_character(r, p)? * gl_character(r, q)? / chi_c1;
    let rhs = character_expectation(r, p, q, dim)?;
    let mut report = VerdictReport::new("c1-form", &["character-expectation-c1-form"], backend_of::<S>());
    report.push(CaseRecord::compare(format!("r={r}"), json!({"r": r, "N": dim}), &lhs, &rhs, tol));
    Ok(report)
}

/// Degree-by-degree comparison of `exp((N/m) Tr(A^m))` with `Σ_r χ_r(C_m) χ_r(A)`.
pub fn cauchy_cm_check<S: Scalar>(a: &Matrix<S>, m: usize, degree_cap: usize, tol: f64) -> Result<VerdictReport> {
    let dim = a.dim();
    if degree_cap > dim || degree_cap > 6 {
        return input(format!("degree cap {degree_cap} must be <= N={dim} and <= 6"));
    }
    let cm = build_ck::<S>(m, dim)?;
    let trace_am = a.power_traces(m).pop().unwrap_or_else(S::zero);
    let base = trace_am * S::from_frac(dim as i64, m as i64);
    let mut report = VerdictReport::new("cauchy-cm", &["cauchy-identity-cm"], backend_of::<S>());
    for n in 0..=degree_cap {
        let lhs = if n % m == 0 {
            let j = n / m;
            base.pow(j as u32) / S::from_i64(factorial(j) as i64)
        } else {
            S::zero()
        };
        let mut rhs = S::zero();
        for r in partitions(n) {
            rhs = rhs + gl_character(&r, &cm.matrix)? * gl_character(&r, a)?;
        }
        let case = if S::EXACT {
            CaseRecord::compare(format!("degree {n}"), json!({"m": m, "n": n, "N": dim}), &lhs, &rhs, tol)
        } else {
            // odd degrees vanish, so judge them on an absolute scale
            let scale = 1.0 + lhs.to_c64().norm();
            CaseRecord::compare_abs(
                format!("degree {n}"),
                json!({"m": m, "n": n, "N": dim}),
                lhs.to_c64(),
                rhs.to_c64(),
                tol * scale,
            )
        };
        report.push(case);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_gaussian_int_matrix, random_matrix, random_unitary};
    use crate::perm::enumerate_sn;
    use crate::scalar::{C64, CQ};
    use crate::tensor::ComplexMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn part(v: &[usize]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn small_characters() {
        assert_eq!(sn_character(&part(&[2, 1]), &part(&[1, 1, 1])).unwrap(), 2);
        assert_eq!(sn_character(&part(&[2, 1]), &part(&[2, 1])).unwrap(), 0);
        assert_eq!(sn_character(&part(&[2, 1]), &part(&[3])).unwrap(), -1);
        for n in 1..=6 {
            for mu in partitions(n) {
                assert_eq!(sn_character(&part(&[n]), &mu).unwrap(), 1);
                assert_eq!(sn_character(&part(&vec![1; n]), &mu).unwrap(), mu.sign());
            }
        }
        assert!(sn_character(&part(&[2]), &part(&[1])).is_err());
    }

    #[test]
    fn orthogonality() {
        for n in 0..=6 {
            let t = character_table(n).unwrap();
            let k = t.labels.len();
            let nf = factorial(n) as i128;
            for a in 0..k {
                for b in 0..k {
                    let row: i128 = (0..k)
                        .map(|j| t.labels[j].class_size() as i128 * (t.values[a][j] * t.values[b][j]) as i128)
                        .sum();
                    assert_eq!(row, if a == b { nf } else { 0 });
                    let col: i128 = (0..k).map(|i| (t.values[i][a] * t.values[i][b]) as i128).sum();
                    let expect = if a == b { t.labels[a].z() as i128 } else { 0 };
                    assert_eq!(col, expect);
                }
            }
            assert_eq!(t.dims.iter().map(|d| (d * d) as i128).sum::<i128>(), nf);
        }
        let t8 = character_table(8).unwrap();
        assert_eq!(t8.dims.iter().map(|d| d * d).sum::<i64>(), 40320);
    }

    #[test]
    fn gl_character_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_matrix(&mut rng, 3);
        let v = gl_character(&part(&[1]), &m).unwrap();
        assert!((v - m.trace()).norm() < 1e-12);
        let id2: Matrix<CQ> = Matrix::identity(2);
        assert_eq!(gl_character(&part(&[2]), &id2).unwrap(), CQ::from_i64(3));
        let m2 = random_matrix(&mut rng, 2);
        assert!(gl_character(&part(&[1, 1, 1]), &m2).unwrap().norm() < 1e-12);
    }

    #[test]
    fn gl_character_vanishes_beyond_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        for _ in 0..5 {
            let m: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 2, 3);
            for lam in [part(&[1, 1, 1]), part(&[2, 1, 1]), part(&[1, 1, 1, 1])] {
                assert_eq!(gl_character(&lam, &m).unwrap(), CQ::from_i64(0));
            }
        }
    }

    #[test]
    fn gl_character_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_matrix(&mut rng, 3);
        let u = random_unitary(&mut rng, 3);
        let conj = u.mul(&m).mul(&u.adjoint());
        for n in 1..=4 {
            for lam in partitions(n) {
                let a = gl_character(&lam, &m).unwrap();
                let b = gl_character(&lam, &conj).unwrap();
                assert!(crate::scalar::mixed_err(a, b, 1e-6) < 1e-10, "{lam}");
            }
        }
    }

    #[test]
    fn bialternant_agrees_with_class_sum() {
        let x: Vec<C64> = vec![C64::new(0.3, 0.1), C64::new(-1.2, 0.4), C64::new(0.9, -0.7)];
        let m = ComplexMatrix::diag(x.clone());
        for n in 1..=4 {
            for lam in partitions(n) {
                let a = gl_character(&lam, &m).unwrap();
                let b = schur_polynomial_bialternant(&lam, &x).unwrap();
                assert!(crate::scalar::mixed_err(a, b, 1e-6) < 1e-10, "{lam}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn schur_weyl_all_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_matrix(&mut rng, 3);
        for n in 1..=3 {
            for s in enumerate_sn(n).unwrap() {
                assert!(schur_weyl_check(&s, &m, 1e-12).unwrap().pass);
            }
        }
        let id: Matrix<CQ> = Matrix::identity(3);
        let rep = schur_weyl_check(&Permutation::identity(3), &id, 0.0).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.cases[0].exact.as_ref().unwrap().lhs, "27");
        let exact: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 3, 2);
        for s in enumerate_sn(3).unwrap() {
            assert!(schur_weyl_check(&s, &exact, 0.0).unwrap().pass);
        }
    }

    #[test]
    fn character_expectation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_matrix(&mut rng, 3);
        let q = random_matrix(&mut rng, 3);
        let v = character_expectation(&part(&[1]), &p, &q, 3).unwrap();
        assert!((v - p.trace() * q.trace() / 3.0).norm() < 1e-12);
        let id: Matrix<CQ> = Matrix::identity(4);
        let v = character_expectation(&part(&[1, 1]), &id, &id, 4).unwrap();
        // 2 * 4^-2 * 6^2
        assert_eq!(v, CQ::from_frac(9, 2));
    }

    #[test]
    fn c1_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_matrix(&mut rng, 2);
        let q = random_matrix(&mut rng, 2);
        assert!(c1_form_check(&part(&[1]), &p, &q, 1e-9).unwrap().pass);
        let id: Matrix<CQ> = Matrix::identity(4);
        assert!(c1_form_check(&part(&[2]), &id, &id, 0.0).unwrap().pass);
        assert!(c1_form_check(&part(&[1, 1, 1]), &p, &q, 1e-9).is_err());
        let p4 = random_matrix(&mut rng, 4);
        let q4 = random_matrix(&mut rng, 4);
        for n in 1..=4 {
            for r in partitions(n) {
                assert!(c1_form_check(&r, &p4, &q4, 1e-9).unwrap().pass, "{r}");
            }
        }
    }

    #[test]
    fn cauchy_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a: Matrix<CQ> = random_gaussian_int_matrix(&mut rng, 4, 2);
        let rep = cauchy_cm_check(&a, 2, 4, 0.0).unwrap();
        assert!(rep.pass, "{:?}", rep.failures().next());
        let af = random_matrix(&mut rng, 4);
        assert!(cauchy_cm_check(&af, 2, 4, 1e-9).unwrap().pass);
        assert!(cauchy_cm_check(&af, 3, 4, 1e-9).unwrap().pass);
        assert!(cauchy_cm_check(&af, 2, 5, 1e-9).is_err());
        let c2 = build_ck::<CQ>(2, 2).unwrap();
        assert_eq!(gl_character(&part(&[2]), &c2.matrix).unwrap(), CQ::from_i64(1));
        assert_eq!(gl_character(&part(&[1, 1]), &c2.matrix).unwrap(), CQ::from_i64(-1));
    }
}
