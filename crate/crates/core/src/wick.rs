//! Brute-force Gaussian expectations by enumerating Wick pairings and contracting indices.
//!
//! Nothing here calls the closed forms; every value comes from explicit pairings.

use crate::covariance::{CovariancePair, TensorCovariance};
use crate::error::{input, resource, Result};
use crate::perm::{enumerate_sn, MultiPermutation, Odometer, Permutation};
use crate::scalar::Scalar;
use crate::tensor::Matrix;
use rayon::prelude::*;

pub const MAX_CM_DEGREE: usize = 6;
pub const MAX_CT_DENSE_DEGREE: usize = 4;
pub const MAX_CT_FACTORIZED_DEGREE: usize = 6;
pub const MAX_RT_POWER: usize = 3;
pub const INDEX_BUDGET: u64 = 10_000_000;

fn check_budget(dim: usize, digits: usize) -> Result<()> {
    let size = (dim as u64).checked_pow(digits as u32).unwrap_or(u64::MAX);
    if size > INDEX_BUDGET {
        return resource(format!("Wick index sum of size {dim}^{digits} exceeds the budget {INDEX_BUDGET}"));
    }
    Ok(())
}

/// Sum of `f(π)` over `S_n`, evaluated in parallel and added in enumeration order.
fn sum_over_sn<S: Scalar>(n: usize, f: impl Fn(&Permutation) -> S + Sync) -> Result<S> {
    let perms: Vec<Permutation> = enumerate_sn(n)?.collect();
    let terms: Vec<S> = perms.par_iter().map(&f).collect();
    Ok(terms.into_iter().fold(S::zero(), |acc, t| acc + t))
}

/// `Σ_k Π_i m[k_{row(i)}][k_{col(i)}]` over all `k ∈ [N]^n`.
fn index_sum<S: Scalar>(m: &Matrix<S>, rows: &[usize], cols: &[usize]) -> S {
    let mut total = S::zero();
    let mut od = Odometer::new(rows.len(), m.dim());
    while let Some(k) = od.current() {
        let mut term = S::one();
        for (r, c) in rows.iter().zip(cols) {
            let e = m.get(k[*r], k[*c]);
            if e.is_zero() {
                term = S::zero();
                break;
            }
            term = term * e;
        }
        total = total + term;
        od.advance();
    }
    total
}

/// `⟨Tr_[σ](M†M)⟩` with propagator `⟨M_ab M†_dc⟩ = N^{-1} Q_ac P_db`.
///
/// Slot `i` of `M†` is paired with slot `π(i)` of `M`, for every bijection `π`.
pub fn cm_expect<S: Scalar>(sigma: &Permutation, pair: &CovariancePair<S>) -> Result<S> {
    let n = sigma.degree();
    if n > MAX_CM_DEGREE {
        return resource(format!("cm_expect is limited to n <= {MAX_CM_DEGREE}, got {n}"));
    }
    let dim = pair.dim();
    check_budget(dim, n)?;
    let ids: Vec<usize> = (0..n).collect();
    let total = sum_over_sn(n, |pi| {
        // P_{k_i, k_{σπ(i)}} and Q_{j_{π(i)}, j_i}
        let p_cols: Vec<usize> = ids.iter().map(|&i| sigma.apply(pi.apply(i))).collect();
        let q_rows: Vec<usize> = ids.iter().map(|&i| pi.apply(i)).collect();
        index_sum(&pair.p, &ids, &p_cols) * index_sum(&pair.q, &q_rows, &ids)
    })?;
    Ok(total / S::from_i64(dim as i64).pow(n as u32))
}

/// `⟨Tr_[α](φφ†)⟩` with `⟨φ^x φ†_y⟩ = R^x_y`: `Σ_π Σ_k Π_i R^{(α_* k)_{π(i)}}_{k_i}`.
///
/// Product covariances split color by color; dense ones sum over all `N^{nD}` index arrays.
pub fn ct_expect<S: Scalar>(a: &MultiPermutation, r: &TensorCovariance<S>) -> Result<S> {
    let (n, d, dim) = (a.degree(), a.colors(), r.dim());
    if d != r.order() {
        return input(format!("multi-permutation has {d} colors, covariance has order {}", r.order()));
    }
    let inverses: Vec<Permutation> = a.components().iter().map(|p| p.inverse()).collect();
    match &r.factors {
        Some(factors) => {
            if n > MAX_CT_FACTORIZED_DEGREE {
                return resource(format!("ct_expect is limited to n <= {MAX_CT_FACTORIZED_DEGREE} here, got {n}"));
            }
            check_budget(dim, n)?;
            let ids: Vec<usize> = (0..n).collect();
            sum_over_sn(n, |pi| {
                inverses.iter().zip(factors).fold(S::one(), |acc, (inv, rc)| {
                    let rows: Vec<usize> = ids.iter().map(|&i| inv.apply(pi.apply(i))).collect();
                    acc * index_sum(rc, &rows, &ids)
                })
            })
        }
        None => {
            if n > MAX_CT_DENSE_DEGREE {
                return resource(format!("ct_expect is limited to n <= {MAX_CT_DENSE_DEGREE} for dense R, got {n}"));
            }
            check_budget(dim, n * d)?;
            let strides: Vec<usize> = (0..d).map(|c| dim.pow((d - 1 - c) as u32)).collect();
            let mat = r.dense.matrix();
            sum_over_sn(n, |pi| {
                let mut total = S::zero();
                let mut od = Odometer::new(n * d, dim);
                while let Some(k) = od.current() {
                    let mut term = S::one();
                    for i in 0..n {
                        let slot = pi.apply(i);
                        let mut row = 0;
                        let mut col = 0;
                        for c in 0..d {
                            row += k[inverses[c].apply(slot) * d + c] * strides[c];
                            col += k[i * d + c] * strides[c];
                        }
                        let e = mat.get(row, col);
                        if e.is_zero() {
                            term = S::zero();
                            break;
                        }
                        term = term * e;
                    }
                    total = total + term;
                    od.advance();
                }
                total
            })
        }
    }
}

/// Per vertex, which of the two labels `(x, x')` each of the four fields carries, per color.
const RT_PATTERN: [[usize; 3]; 4] = [[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]];

/// All perfect matchings of `0..m`, as partner arrays.
fn perfect_matchings(m: usize) -> Vec<Vec<usize>> {
    fn go(partner: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let Some(first) = partner.iter().position(|&p| p == usize::MAX) else {
            out.push(partner.clone());
            return;
        };
        for second in first + 1..partner.len() {
            if partner[second] == usize::MAX {
                partner[first] = second;
                partner[second] = first;
                go(partner, out);
                partner[first] = usize::MAX;
                partner[second] = usize::MAX;
            }
        }
    }
    let mut out = Vec::new();
    if m.is_multiple_of(2) {
        go(&mut vec![usize::MAX; m], &mut out);
    }
    out
}

fn component_count(labels: usize, edges: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..labels).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    let mut count = labels;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            count -= 1;
        }
    }
    count
}

/// `⟨X^p⟩` for the real order-3 quartic `X = Σ φ_{ijk} φ_{ij'k'} φ_{i'jk'} φ_{i'j'k}`,
/// with `⟨φ_{ijk} φ_{i'j'k'}⟩ = N^{-1} C_{ii'} δ_{jj'} δ_{kk'}`, over all `(4p-1)!!` pairings.
pub fn rt_moment<S: Scalar>(power: usize, c: &Matrix<S>) -> Result<S> {
    if power > MAX_RT_POWER {
        return resource(format!("rt_moment is limited to p <= {MAX_RT_POWER}, got {power}"));
    }
    if power == 0 {
        return Ok(S::one());
    }
    let dim = c.dim();
    if c.transpose() != *c {
        return input("the real propagator needs a symmetric C");
    }
    let labels = 2 * power;
    check_budget(dim, labels)?;
    let fields = 4 * power;
    let label = |f: usize, color: usize| 2 * (f / 4) + RT_PATTERN[f % 4][color];
    let matchings = perfect_matchings(fields);
    let terms: Vec<S> = matchings
        .par_iter()
        .map(|partner| {
            let pairs: Vec<(usize, usize)> =
                (0..fields).filter(|&f| f < partner[f]).map(|f| (f, partner[f])).collect();
            let mut free = 1usize;
            for color in 1..3 {
                let edges: Vec<(usize, usize)> = pairs.iter().map(|&(x, y)| (label(x, color), label(y, color))).collect();
                free *= dim.pow(component_count(labels, &edges) as u32);
            }
            let rows: Vec<usize> = pairs.iter().map(|&(x, _)| label(x, 0)).collect();
            let cols: Vec<usize> = pairs.iter().map(|&(_, y)| label(y, 0)).collect();
            // labels not touched by any pair would be free; every label is touched here
            index_sum_over(c, labels, &rows, &cols) * S::from_i64(free as i64)
        })
        .collect();
    let total = terms.into_iter().fold(S::zero(), |acc, t| acc + t);
    Ok(total / S::from_i64(dim as i64).pow(fields as u32 / 2))
}

fn index_sum_over<S: Scalar>(m: &Matrix<S>, labels: usize, rows: &[usize], cols: &[usize]) -> S {
    let mut total = S::zero();
    let mut od = Odometer::new(labels, m.dim());
    while let Some(k) = od.current() {
        let mut term = S::one();
        for (r, c) in rows.iter().zip(cols) {
            let e = m.get(k[*r], k[*c]);
            if e.is_zero() {
                term = S::zero();
                break;
            }
            term = term * e;
        }
        total = total + term;
        od.advance();
    }
    total
}

/// Moments `m_1..m_K` of one observable.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSequence<S> {
    pub values: Vec<S>,
}

/// Cumulants from moments: `κ_n = m_n - Σ_{k<n} C(n-1, k-1) κ_k m_{n-k}`.
pub fn connected_from_moments<S: Scalar>(ms: &MomentSequence<S>) -> Vec<S> {
    let m = &ms.values;
    let mut kappa: Vec<S> = Vec::with_capacity(m.len());
    for n in 1..=m.len() {
        let mut acc = m[n - 1].clone();
        for k in 1..n {
            acc = acc - S::from_i64(binomial(n - 1, k - 1)) * kappa[k - 1].clone() * m[n - k - 1].clone();
        }
        kappa.push(acc);
    }
    kappa
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// `⟨(Tr_[σ](M†M))^p⟩` for `p = 1..=kmax`, through disjoint unions of `σ`.
pub fn cm_moments<S: Scalar>(sigma: &Permutation, pair: &CovariancePair<S>, kmax: usize) -> Result<MomentSequence<S>> {
    let mut values = Vec::with_capacity(kmax);
    let mut cur = sigma.clone();
    for p in 1..=kmax {
        if p > 1 {
            cur = cur.disjoint_union(sigma);
        }
        values.push(cm_expect(&cur, pair)?);
    }
    Ok(MomentSequence { values })
}

pub fn rt_moments<S: Scalar>(c: &Matrix<S>, kmax: usize) -> Result<MomentSequence<S>> {
    Ok(MomentSequence { values: (1..=kmax).map(|p| rt_moment(p, c)).collect::<Result<_>>()? })
}
