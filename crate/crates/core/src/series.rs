//! Coupling-graded expansions of `Z[V]/Z[0]` on the complex and self-adjoint sides.
//!
//! A potential is `V = t Σ_j c_j Tr_[α_j]`, linear in one coupling `t`. Its exponential is
//! expanded in the bubble basis, and each invariant is evaluated by the Wick oracle (complex
//! side) or the jet engine (self-adjoint side). Only coefficients are compared, never resummed.

use crate::covariance::{CovariancePair, TensorCovariance};
use crate::error::{input, Result};
use crate::jet::{hm_expect_with, ht_expect_with, JetModel};
use crate::perm::{scalar_distribute, MultiPermutation, Partition, Permutation, Side};
use crate::report::{CaseRecord, VerdictReport};
use crate::scalar::{Backend, Scalar};
use crate::wick::{cm_expect, connected_from_moments, ct_expect, MomentSequence};
use rayon::prelude::*;
use serde_json::json;
use std::collections::BTreeMap;

pub const MAX_SERIES_ORDER: usize = 3;
pub const MAX_SERIES_DEGREE: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct BubbleTerm<S> {
    pub bubble: MultiPermutation,
    pub coefficient: S,
}

/// `V = t Σ_j c_j Tr_[α_j]`. Matrix potentials use one color.
#[derive(Clone, Debug, PartialEq)]
pub struct BubblePotential<S> {
    pub name: String,
    pub anchor: String,
    pub order: usize,
    pub terms: Vec<BubbleTerm<S>>,
}

/// Sign convention for the quartic matrix coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuarticConvention {
    /// `V = -(N g/2) Tr((M†M)²)`, giving `-(N²/2) ln(1+g)`.
    Linear,
    /// `V = +(N t/2) Tr((M†M)²)` with `t = g²`, giving `-(N²/2) ln(1-t)`.
    Squared,
}

impl<S: Scalar> BubblePotential<S> {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>, order: usize, terms: Vec<BubbleTerm<S>>) -> Result<Self> {
        if order == 0 {
            return input("a potential needs at least one color");
        }
        if let Some(t) = terms.iter().find(|t| t.bubble.colors() != order) {
            return input(format!("bubble {} does not have {order} colors", t.bubble));
        }
        Ok(BubblePotential { name: name.into(), anchor: anchor.into(), order, terms })
    }

    pub fn zero(order: usize) -> Self {
        BubblePotential { name: "zero".into(), anchor: String::new(), order, terms: Vec::new() }
    }

    /// Matrix potential from `(σ, c)` pairs.
    pub fn matrix(name: &str, anchor: &str, terms: Vec<(Permutation, S)>) -> Result<Self> {
        let terms = terms
            .into_iter()
            .map(|(p, c)| Ok(BubbleTerm { bubble: MultiPermutation::new(vec![p])?, coefficient: c }))
            .collect::<Result<_>>()?;
        Self::new(name, anchor, 1, terms)
    }

    /// Quartic `Tr((M†M)²)` with the chosen coupling sign.
    pub fn quartic_matrix(dim: usize, convention: QuarticConvention) -> Self {
        let half_n = S::from_frac(dim as i64, 2);
        let (coefficient, anchor) = match convention {
            QuarticConvention::Linear => (-half_n, "quartic complex matrix model, coupling g"),
            QuarticConvention::Squared => (half_n, "quartic complex matrix model, coupling t = g²"),
        };
        let tau = Permutation::transposition(2, 0, 1).expect("valid transposition");
        Self::matrix("quartic", anchor, vec![(tau, coefficient)]).expect("one color")
    }

    /// `N λ/2 Σ_c` of the pillow that transposes color `c` between the two pairs.
    pub fn pillow(dim: usize, order: usize) -> Result<Self> {
        let tau = Permutation::transposition(2, 0, 1)?;
        let c = S::from_frac(dim as i64, 2);
        let terms = (0..order)
            .map(|color| {
                let comps = (0..order).map(|j| if j == color { tau.clone() } else { Permutation::identity(2) }).collect();
                Ok(BubbleTerm { bubble: MultiPermutation::new(comps)?, coefficient: c.clone() })
            })
            .collect::<Result<_>>()?;
        Self::new("pillow", "quartic pillow potential", order, terms)
    }

    /// The pillow written with color 0 split off; evaluated through partial traces of color 0.
    pub fn low_pillow(dim: usize, order: usize) -> Result<Self> {
        let mut v = Self::pillow(dim, order)?;
        v.name = "low-pillow".into();
        v.anchor = "pillow potential rewritten for the partial-trace reduction".into();
        Ok(v)
    }

    /// The seven order-3 sextic bubbles with `λ_j = j t`, coefficient `λ_j / 2`.
    pub fn sextic() -> Result<Self> {
        // Per bubble and color: which φ† slot feeds each φ slot, i.e. α_c⁻¹ as an image array.
        const SOURCES: [[[usize; 3]; 3]; 7] = [
            [[1, 2, 0], [0, 1, 2], [0, 1, 2]],
            [[0, 1, 2], [1, 2, 0], [0, 1, 2]],
            [[0, 1, 2], [0, 1, 2], [1, 2, 0]],
            [[1, 0, 2], [0, 1, 2], [1, 2, 0]],
            [[1, 2, 0], [1, 0, 2], [0, 1, 2]],
            [[0, 1, 2], [1, 2, 0], [1, 0, 2]],
            [[0, 1, 2], [1, 2, 0], [2, 0, 1]],
        ];
        let terms = SOURCES
            .iter()
            .enumerate()
            .map(|(j, src)| {
                let comps = src
                    .iter()
                    .map(|s| Ok(Permutation::from_images(s.to_vec())?.inverse()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(BubbleTerm { bubble: MultiPermutation::new(comps)?, coefficient: S::from_frac(j as i64 + 1, 2) })
            })
            .collect::<Result<_>>()?;
        Self::new("sextic", "order-3 sextic potential with seven couplings", 3, terms)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.iter().map(|t| t.bubble.degree()).max().unwrap_or(0)
    }

    /// Bubbles after fixing the gauge of color 0: `β = α_0⁻¹ (α_1, …, α_{D-1})`.
    pub fn partial_trace_form(&self) -> Result<Vec<BubbleTerm<S>>> {
        if self.order < 2 {
            return input("partial traces need at least two colors");
        }
        self.terms
            .iter()
            .map(|t| {
                let a = &t.bubble;
                let beta = scalar_distribute(&a.component(0).inverse(), &a.without_color(0)?, Side::Left)?;
                Ok(BubbleTerm { bubble: beta, coefficient: t.coefficient.clone() })
            })
            .collect()
    }
}

fn key(a: &MultiPermutation) -> Vec<Vec<usize>> {
    a.components().iter().map(|p| p.images().to_vec()).collect()
}

/// Coefficient of `t^k` in `e^{tV}` in the bubble basis: multisets of `k` terms, each weighted
/// by `Π c_j^{m_j} / m_j!`, joined by disjoint union. Identical invariants are merged.
pub fn exp_order_terms<S: Scalar>(v: &BubblePotential<S>, k: usize) -> Result<Vec<BubbleTerm<S>>> {
    if k == 0 {
        return Ok(vec![BubbleTerm { bubble: MultiPermutation::identity(0, v.order), coefficient: S::one() }]);
    }
    let mut merged: BTreeMap<Vec<Vec<usize>>, BubbleTerm<S>> = BTreeMap::new();
    let mut choice = vec![0usize; k];
    let t = v.terms.len();
    if t == 0 {
        return Ok(Vec::new());
    }
    loop {
        // nondecreasing choice = one multiset
        let mut bubble = v.terms[choice[0]].bubble.clone();
        let mut coef = v.terms[choice[0]].coefficient.clone();
        for &j in &choice[1..] {
            bubble = bubble.disjoint_union(&v.terms[j].bubble)?;
            coef = coef * &v.terms[j].coefficient;
        }
        let mut run = 1;
        for w in 1..=k {
            if w < k && choice[w] == choice[w - 1] {
                run += 1;
            } else {
                for r in 2..=run {
                    coef = coef / S::from_i64(r as i64);
                }
                run = 1;
            }
        }
        if !coef.is_zero() {
            merged
                .entry(key(&bubble))
                .and_modify(|e| e.coefficient = e.coefficient.clone() + &coef)
                .or_insert(BubbleTerm { bubble, coefficient: coef });
        }
        // next nondecreasing tuple
        let Some(pos) = (0..k).rev().find(|&i| choice[i] + 1 < t) else {
            break;
        };
        let next = choice[pos] + 1;
        for c in &mut choice[pos..] {
            *c = next;
        }
    }
    Ok(merged.into_values().filter(|b| !b.coefficient.is_zero()).collect())
}

/// Degree-`n` weights of `e^V = Σ_n (1/n!) Σ w_α Tr_[α]`, so that `V = c Tr` gives `w_[1^n] = c^n`.
pub fn exp_potential_terms<S: Scalar>(v: &BubblePotential<S>, n: usize) -> Result<Vec<BubbleTerm<S>>> {
    let fact = (1..=n as i64).fold(S::one(), |acc, j| acc * S::from_i64(j));
    let mut out: BTreeMap<Vec<Vec<usize>>, BubbleTerm<S>> = BTreeMap::new();
    for k in 0..=n {
        for term in exp_order_terms(v, k)? {
            if term.bubble.degree() != n {
                continue;
            }
            let c = term.coefficient.clone() * &fact;
            out.entry(key(&term.bubble))
                .and_modify(|e| e.coefficient = e.coefficient.clone() + &c)
                .or_insert(BubbleTerm { bubble: term.bubble, coefficient: c });
        }
    }
    Ok(out.into_values().filter(|b| !b.coefficient.is_zero()).collect())
}

/// Matrix form of [`exp_potential_terms`], grouped by cycle type.
pub fn exp_potential_weights<S: Scalar>(v: &BubblePotential<S>, n: usize) -> Result<BTreeMap<Partition, S>> {
    if v.order != 1 {
        return input("class weights are defined for matrix potentials only");
    }
    let mut out = BTreeMap::new();
    for t in exp_potential_terms(v, n)? {
        let lam = t.bubble.component(0).cycle_type();
        let e = out.entry(lam).or_insert_with(S::zero);
        *e = e.clone() + &t.coefficient;
    }
    out.retain(|_, w: &mut S| !w.is_zero());
    Ok(out)
}

/// Gaussian ensemble on either side of an equivalence.
#[derive(Clone, Debug)]
pub enum Ensemble<S> {
    Matrix(CovariancePair<S>),
    Tensor(TensorCovariance<S>),
}

/// Which expectation values feed the series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evaluation {
    /// Wick pairings on the complex field.
    Complex,
    /// Derivative jets of `e^Y` on the full intermediate field.
    SelfAdjoint,
    /// Derivative jets on `Ψ̂` after the color-0 gauge choice.
    SelfAdjointReduced,
}

/// Coefficients `c_0..c_K` of `Z[V]/Z[0]`, or of its logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioSeries<S> {
    pub coefficients: Vec<S>,
    pub log: bool,
}

impl<S: Scalar> RatioSeries<S> {
    /// Power-series logarithm of a ratio with `c_0 = 1`.
    pub fn ln(&self) -> Result<Self> {
        if self.log {
            return input("series is already a logarithm");
        }
        let z = &self.coefficients;
        if z.first() != Some(&S::one()) {
            return input("a ratio series must start with 1");
        }
        let mut f = vec![S::zero(); z.len()];
        for k in 1..z.len() {
            let mut acc = z[k].clone();
            for j in 1..k {
                acc = acc - f[j].clone() * S::from_frac(j as i64, k as i64) * &z[k - j];
            }
            f[k] = acc;
        }
        Ok(RatioSeries { coefficients: f, log: true })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }
}

/// `Z[V]/Z[0]` through order `kmax` in the coupling.
pub fn z_ratio_series<S: Scalar>(
    v: &BubblePotential<S>,
    ensemble: &Ensemble<S>,
    kmax: usize,
    eval: Evaluation,
) -> Result<RatioSeries<S>> {
    if kmax > MAX_SERIES_ORDER {
        return input(format!("series order is limited to {MAX_SERIES_ORDER}, got {kmax}"));
    }
    let orders: Vec<Vec<BubbleTerm<S>>> = (0..=kmax).map(|k| exp_order_terms(v, k)).collect::<Result<_>>()?;
    let cap = orders.iter().flatten().map(|t| t.bubble.degree()).max().unwrap_or(0);
    if cap > MAX_SERIES_DEGREE {
        return input(format!("total invariant degree {cap} exceeds {MAX_SERIES_DEGREE}"));
    }
    let expect = expectation(v.order, ensemble, eval, cap)?;
    let mut coefficients = Vec::with_capacity(kmax + 1);
    for terms in &orders {
        let values: Vec<S> = terms
            .par_iter()
            .map(|t| Ok(expect(&t.bubble)? * &t.coefficient))
            .collect::<Result<_>>()?;
        coefficients.push(values.into_iter().fold(S::zero(), |a, b| a + b));
    }
    Ok(RatioSeries { coefficients, log: false })
}

type Expectation<'a, S> = Box<dyn Fn(&MultiPermutation) -> Result<S> + Sync + 'a>;

fn expectation<'a, S: Scalar>(
    colors: usize,
    ensemble: &'a Ensemble<S>,
    eval: Evaluation,
    cap: usize,
) -> Result<Expectation<'a, S>> {
    let one = |a: &MultiPermutation| a.degree() == 0;
    Ok(match (ensemble, eval) {
        (Ensemble::Matrix(pair), _) if colors != 1 => {
            let _ = pair;
            return input("matrix ensembles take one-color potentials");
        }
        (Ensemble::Matrix(pair), Evaluation::Complex) => Box::new(move |a| {
            if one(a) {
                return Ok(S::one());
            }
            cm_expect(a.component(0), pair)
        }),
        (Ensemble::Matrix(pair), Evaluation::SelfAdjoint) => {
            let model = JetModel::matrix(pair, cap)?;
            Box::new(move |a| if one(a) { Ok(S::one()) } else { hm_expect_with(&model, a.component(0)) })
        }
        (Ensemble::Matrix(_), Evaluation::SelfAdjointReduced) => {
            return input("the reduced evaluation needs a tensor ensemble");
        }
        (Ensemble::Tensor(r), _) if r.order() != colors => {
            return input(format!("potential has {colors} colors, covariance has order {}", r.order()));
        }
        (Ensemble::Tensor(r), Evaluation::Complex) => {
            Box::new(move |a| if one(a) { Ok(S::one()) } else { ct_expect(a, r) })
        }
        (Ensemble::Tensor(r), Evaluation::SelfAdjoint) => {
            let model = JetModel::tensor(&r.dense, cap)?;
            Box::new(move |a| if one(a) { Ok(S::one()) } else { ht_expect_with(&model, a) })
        }
        (Ensemble::Tensor(r), Evaluation::SelfAdjointReduced) => {
            let model = JetModel::reduced(&r.dense, cap)?;
            Box::new(move |a| {
                if one(a) {
                    return Ok(S::one());
                }
                let beta = scalar_distribute(&a.component(0).inverse(), &a.without_color(0)?, Side::Left)?;
                ht_expect_with(&model, &beta)
            })
        }
    })
}

/// `ln⟨e^{c t X}⟩ = Σ_k κ_k c^k t^k / k!` from the moments of `X`.
pub fn free_energy_series<S: Scalar>(ms: &MomentSequence<S>, coupling: &S) -> RatioSeries<S> {
    let kappa = connected_from_moments(ms);
    let mut coefficients = vec![S::zero()];
    let mut scale = S::one();
    for (k, kap) in kappa.into_iter().enumerate() {
        scale = scale * coupling / S::from_i64(k as i64 + 1);
        coefficients.push(kap * &scale);
    }
    RatioSeries { coefficients, log: true }
}

/// Coefficient-wise comparison: exact equality in the rational backend, relative `tol` otherwise.
pub fn series_compare<S: Scalar>(label: &str, a: &RatioSeries<S>, b: &RatioSeries<S>, tol: f64) -> Result<VerdictReport> {
    if a.coefficients.len() != b.coefficients.len() {
        return input(format!(
            "series lengths differ: {} vs {}",
            a.coefficients.len(),
            b.coefficients.len()
        ));
    }
    if a.log != b.log {
        return input("cannot compare a ratio series with a log series");
    }
    let backend = if S::EXACT { Backend::Exact } else { Backend::Float };
    let mut report = VerdictReport::new("series_compare", &[], backend);
    for (k, (x, y)) in a.coefficients.iter().zip(&b.coefficients).enumerate() {
        report.push(CaseRecord::compare(
            format!("{label} coefficient {k}"),
            json!({"order": k, "log": a.log}),
            x,
            y,
            tol,
        ));
    }
    Ok(report)
}
