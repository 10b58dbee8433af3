//! Monte Carlo for the convergent complex ensembles: seeded sampling, streaming estimates
//! with error bars, reweighted partition ratios and the change-of-variables check.

use crate::covariance::{convergence_check, factorize_for_sampling, CovariancePair, TensorCovariance};
use crate::error::{domain, input, resource, Result};
use crate::linalg::hermitian_sqrt;
use crate::perm::{MultiPermutation, Permutation};
use crate::report::{complex_json, CaseRecord, VerdictReport};
use crate::scalar::{Backend, C64};
use crate::series::BubblePotential;
use crate::tensor::{multi_trace, trace_invariant_pair, ComplexMatrix, ComplexTensor, Matrix, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const MAX_MC_SAMPLES: u64 = 50_000_000;
/// Samples per substream. Fixed so results do not depend on the thread count.
pub const CHUNK: u64 = 4096;
pub const ALGORITHM: &str = "chacha20";

/// `(seed, stream)` names one reproducible draw sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededStream {
    pub seed: u64,
    pub stream: u32,
    pub algorithm: String,
}

impl SeededStream {
    pub fn new(seed: u64, stream: u32) -> Self {
        SeededStream { seed, stream, algorithm: ALGORITHM.into() }
    }

    /// An independent stream derived from this one.
    pub fn split(&self, index: u32) -> Self {
        let mixed = (self.stream as u64).wrapping_mul(0x9e37_79b9).wrapping_add(index as u64 + 1);
        SeededStream::new(self.seed, (mixed ^ (mixed >> 32)) as u32)
    }

    /// Generator for one chunk; chunks of a stream never overlap.
    pub fn chunk_rng(&self, chunk: u32) -> Result<ChaCha20Rng> {
        if self.algorithm != ALGORITHM {
            return input(format!("unknown generator '{}', only '{ALGORITHM}' is built in", self.algorithm));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.stream as u64) << 32) | chunk as u64);
        Ok(rng)
    }
}

/// Mean of complex samples with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: C64,
    pub stderr: f64,
    pub n_samples: u64,
}

impl Estimate {
    pub fn to_json(&self) -> Value {
        json!({"mean": complex_json(self.mean), "stderr": self.stderr, "n": self.n_samples})
    }
}

/// Single-pass mean and `Σ|x - mean|²`, mergeable across chunks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: C64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: C64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += (delta.conj() * (x - self.mean)).re;
    }

    pub fn merge(&self, other: &Welford) -> Welford {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (other.n as f64 / n as f64);
        let m2 = self.m2 + other.m2 + delta.norm_sqr() * (self.n as f64 * other.n as f64 / n as f64);
        Welford { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> Result<Estimate> {
        if self.n < 2 {
            return input("an estimate needs at least two samples");
        }
        let var = (self.m2 / (self.n - 1) as f64).max(0.0);
        Ok(Estimate { mean: self.mean, stderr: (var / self.n as f64).sqrt(), n_samples: self.n })
    }
}

fn normal_c64<R: rand::Rng>(rng: &mut R) -> C64 {
    // unit variance: E|g|² = 1
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A positive Gaussian measure that can be sampled directly.
#[derive(Clone, Debug)]
pub enum Sampler {
    /// `M = N^{-1/2} Q^{1/2} G P^{1/2}`.
    Matrix { left: ComplexMatrix, right: ComplexMatrix },
    /// `φ = R^{1/2} g` on the `N^D` space.
    Tensor { order: usize, dim: usize, root: ComplexMatrix },
}

/// One draw.
#[derive(Clone, Debug)]
pub enum Sample {
    Matrix(ComplexMatrix),
    Tensor(ComplexTensor),
}

impl Sampler {
    /// Requires Hermitian positive definite `P` and `Q`.
    pub fn matrix(pair: &CovariancePair<C64>) -> Result<Self> {
        if !convergence_check(pair)?.converges {
            return domain("covariance pair is outside the convergence region");
        }
        let (left, right) = factorize_for_sampling(pair)?;
        let scale = C64::new(1.0 / (pair.dim() as f64).sqrt(), 0.0);
        Ok(Sampler::Matrix { left: left.scale(&scale), right })
    }

    /// Requires a Hermitian positive definite `R`.
    pub fn tensor(r: &TensorCovariance<C64>) -> Result<Self> {
        let root = hermitian_sqrt(r.dense.matrix())?;
        Ok(Sampler::Tensor { order: r.order(), dim: r.dim(), root })
    }

    pub fn draw<R: rand::Rng>(&self, rng: &mut R) -> Sample {
        match self {
            Sampler::Matrix { left, right } => {
                let g = Matrix::from_fn(left.dim(), |_, _| normal_c64(rng));
                Sample::Matrix(left.mul(&g).mul(right))
            }
            Sampler::Tensor { order, dim, root } => {
                let m = root.dim();
                let g: Vec<C64> = (0..m).map(|_| normal_c64(rng)).collect();
                let phi = (0..m).map(|i| (0..m).map(|j| root.get(i, j) * g[j]).sum()).collect();
                Sample::Tensor(Tensor::new(*order, *dim, phi).expect("shape"))
            }
        }
    }
}

pub fn sample_complex_matrix(pair: &CovariancePair<C64>, stream: &SeededStream) -> Result<ComplexMatrix> {
    match Sampler::matrix(pair)?.draw(&mut stream.chunk_rng(0)?) {
        Sample::Matrix(m) => Ok(m),
        Sample::Tensor(_) => unreachable!("matrix sampler"),
    }
}

pub fn sample_complex_tensor(r: &TensorCovariance<C64>, stream: &SeededStream) -> Result<ComplexTensor> {
    match Sampler::tensor(r)?.draw(&mut stream.chunk_rng(0)?) {
        Sample::Tensor(t) => Ok(t),
        Sample::Matrix(_) => unreachable!("tensor sampler"),
    }
}

/// What to average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSpec {
    Constant([f64; 2]),
    /// `Tr_[σ](M†M)`.
    MatrixTrace(Permutation),
    /// `Tr_[α](φφ†)`.
    TensorTrace(MultiPermutation),
}

impl ObservableSpec {
    pub fn eval(&self, sample: &Sample) -> Result<C64> {
        match (self, sample) {
            (ObservableSpec::Constant([re, im]), _) => Ok(C64::new(*re, *im)),
            (ObservableSpec::MatrixTrace(sigma), Sample::Matrix(m)) => Ok(multi_trace(sigma, &m.adjoint().mul(m))),
            (ObservableSpec::TensorTrace(a), Sample::Tensor(phi)) => trace_invariant_pair(a, phi, phi),
            _ => input("observable does not match the ensemble"),
        }
    }
}

/// Streaming average of `f` over `n_samples` draws, chunked and merged in chunk order.
pub fn estimate_with<F>(sampler: &Sampler, n_samples: u64, stream: &SeededStream, f: F) -> Result<Estimate>
where
    F: Fn(&Sample) -> Result<C64> + Sync,
{
    if n_samples > MAX_MC_SAMPLES {
        return resource(format!("{n_samples} samples exceed the budget {MAX_MC_SAMPLES}"));
    }
    if n_samples < 2 {
        return input("an estimate needs at least two samples");
    }
    let chunks = n_samples.div_ceil(CHUNK);
    if chunks > u32::MAX as u64 {
        return resource("too many chunks");
    }
    let parts: Vec<Welford> = (0..chunks as u32)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.chunk_rng(c)?;
            let len = CHUNK.min(n_samples - c as u64 * CHUNK);
            let mut acc = Welford::default();
            for _ in 0..len {
                let x = f(&sampler.draw(&mut rng))?;
                if !x.re.is_finite() || !x.im.is_finite() {
                    return domain("observable overflowed on a sample");
                }
                acc.push(x);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    parts.iter().fold(Welford::default(), |a, b| a.merge(b)).estimate()
}

pub fn estimate_observable(obs: &ObservableSpec, sampler: &Sampler, n_samples: u64, stream: &SeededStream) -> Result<Estimate> {
    estimate_with(sampler, n_samples, stream, |s| obs.eval(s))
}

fn potential_parts(v: &BubblePotential<C64>, sample: &Sample) -> Result<(C64, C64)> {
    let top = v.max_degree();
    let (mut all, mut lead) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for t in &v.terms {
        let value = match sample {
            Sample::Matrix(_) if v.order == 1 => ObservableSpec::MatrixTrace(t.bubble.component(0).clone()).eval(sample)?,
            Sample::Tensor(_) => ObservableSpec::TensorTrace(t.bubble.clone()).eval(sample)?,
            _ => return input("potential does not match the ensemble"),
        } * t.coefficient;
        all += value;
        if t.bubble.degree() == top {
            lead += value;
        }
    }
    Ok((all, lead))
}

/// `Z[tV]/Z[0] = ⟨e^{tV}⟩`. The leading homogeneous part of `tV` must be real and
/// non-positive on every sample, otherwise the weights are unbounded and the run is rejected.
pub fn z_ratio_reweighted(
    v: &BubblePotential<C64>,
    coupling: f64,
    sampler: &Sampler,
    n_samples: u64,
    stream: &SeededStream,
) -> Result<Estimate> {
    estimate_with(sampler, n_samples, stream, |s| {
        let (all, lead) = potential_parts(v, s)?;
        let (all, lead) = (all * coupling, lead * coupling);
        let scale = 1.0 + all.norm();
        if all.im.abs() > 1e-9 * scale {
            return domain("potential is not real on a sample");
        }
        if lead.re > 1e-12 * scale {
            return domain("potential is not bounded above: its leading part is positive on a sample");
        }
        Ok(C64::new(all.re.exp(), 0.0))
    })
}

/// Both normalized sides of the change of variables that moves a diagonal `C` from the
/// quartic term into the propagator:
/// `⟨e^{-(Ng/2) Tr((C M'†M')²)}⟩` with `P = 2·1` against `⟨e^{-(Ng/2) Tr((M†M)²)}⟩` with `P = 2C`.
pub fn appendix_b_check(c: &[f64], g: f64, n_samples: u64, stream: &SeededStream) -> Result<VerdictReport> {
    let dim = c.len();
    if dim == 0 {
        return input("C must have at least one entry");
    }
    if c.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return domain("C must be positive definite");
    }
    if !(g >= 0.0 && g.is_finite()) {
        return domain("the coupling must be non-negative");
    }
    let eye = ComplexMatrix::identity(dim);
    let two = C64::new(2.0, 0.0);
    let cm = ComplexMatrix::diag(c.iter().map(|&x| C64::new(x, 0.0)).collect());
    let tau = Permutation::transposition(2, 0, 1)?;
    let weight = |x: C64| C64::new((-(dim as f64) * g / 2.0 * x.re).exp(), 0.0);

    let lhs_sampler = Sampler::matrix(&CovariancePair::new(eye.scale(&two), eye.clone())?)?;
    let lhs = estimate_with(&lhs_sampler, n_samples, &stream.split(0), |s| match s {
        Sample::Matrix(m) => Ok(weight(multi_trace(&tau, &cm.mul(&m.adjoint().mul(m))))),
        Sample::Tensor(_) => unreachable!("matrix sampler"),
    })?;
    let rhs_sampler = Sampler::matrix(&CovariancePair::new(cm.scale(&two), eye)?)?;
    let rhs = estimate_with(&rhs_sampler, n_samples, &stream.split(1), |s| match s {
        Sample::Matrix(m) => Ok(weight(multi_trace(&tau, &m.adjoint().mul(m)))),
        Sample::Tensor(_) => unreachable!("matrix sampler"),
    })?;

    let mut report = VerdictReport::new("appendix_b", &["change of variables moving C into the propagator"], Backend::Float);
    let sigma = (lhs.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
    report.push(CaseRecord::compare_sigma(
        format!("ratio N={dim} g={g}"),
        json!({"c": c, "g": g, "samples": n_samples, "seed": stream.seed, "stream": stream.stream}),
        lhs.to_json(),
        rhs.to_json(),
        (lhs.mean - rhs.mean).norm(),
        sigma,
        4.0,
    ));
    report.note("only positive definite diagonal C and small g are probed; decay at infinity is not checked");
    Ok(report)
}
