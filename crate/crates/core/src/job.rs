//! Job files, the suite catalog and the runner behind the `equiv` binary.
//!
//! One job names one suite. Every suite returns a [`VerdictReport`]; a report that ran to
//! completion but contains a failing case maps to exit code 1, errors map to 2 or 3.

use crate::chars::{c1_form_check, cauchy_cm_check, character_expectation, character_table, schur_weyl_check};
use crate::closed_forms::{
    catalan, ck_expect, dual_weight_sum, formula_registry, gaussian_reduction_params, gaussian_reduction_tensor,
    pillow_det_blocks, pillow_det_dense, pillow_logz, pillow_taylor, quartic_cm_taylor, rt_taylor, st_det,
    st_det_blocks, st_logz, tensor_dual_weight_sum,
};
use crate::covariance::{build_ck, convergence_check, CovariancePair, TensorCovariance};
use crate::error::{input, Result};
use crate::fixtures::{random_gaussian_int_matrix, random_gaussian_int_operator, random_matrix, random_pd};
use crate::jet::{hm_expect_with, ht_expect_with, two_point_matrix, two_point_tensor, JetModel};
use crate::mc::{appendix_b_check, estimate_observable, ObservableSpec, Sampler, SeededStream};
use crate::perm::{enumerate_sn, partitions, MultiPermutation, Permutation};
use crate::report::{complex_json, CaseRecord, VerdictReport};
use crate::scalar::{Backend, Scalar, C64, CQ};
use crate::series::{
    free_energy_series, series_compare, z_ratio_series, BubblePotential, Ensemble, Evaluation, QuarticConvention,
};
use crate::tensor::{ComplexMatrix, Matrix, TensorOperator};
use crate::wick::{cm_expect, cm_moments, connected_from_moments, ct_expect, rt_moments};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// One entry of the suite catalog.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SuiteInfo {
    pub name: &'static str,
    pub anchors: &'static [&'static str],
    /// Registry formulas the suite evaluates.
    pub formulas: &'static [&'static str],
}

const SUITES: &[SuiteInfo] = &[
    SuiteInfo {
        name: "prop41",
        anchors: &["complex matrix moments as a sum over dual weights"],
        formulas: &["dual_weight_sum"],
    },
    SuiteInfo {
        name: "prop42",
        anchors: &["self-adjoint matrix moments from derivatives of the log potential"],
        formulas: &["dual_weight_sum"],
    },
    SuiteInfo {
        name: "prop51",
        anchors: &["complex tensor moments as a sum over the diagonal action"],
        formulas: &["tensor_dual_weight_sum"],
    },
    SuiteInfo {
        name: "prop52",
        anchors: &["self-adjoint tensor moments from derivatives of the log potential"],
        formulas: &["tensor_dual_weight_sum"],
    },
    SuiteInfo {
        name: "thm43-series",
        anchors: &["complex/self-adjoint matrix equivalence, coupling by coupling", "Gaussian Y_2 reduction"],
        formulas: &["gaussian_reduction_params"],
    },
    SuiteInfo {
        name: "thm53-series",
        anchors: &["complex/self-adjoint tensor equivalence for pillow and sextic potentials"],
        formulas: &[],
    },
    SuiteInfo {
        name: "thm54-reduction",
        anchors: &["partial-trace reduction of the tensor equivalence", "order-2 tensors as matrices"],
        formulas: &["gaussian_reduction_params"],
    },
    SuiteInfo {
        name: "characters",
        anchors: &["character expectations", "Schur-Weyl duality", "C_1 form of character expectations"],
        formulas: &["character_expectation", "dual_weight_sum"],
    },
    SuiteInfo {
        name: "cauchy-cm",
        anchors: &["Cauchy identity expansion of exp((N/m) Tr A^m) through C_m"],
        formulas: &[],
    },
    SuiteInfo {
        name: "ck-catalan",
        anchors: &["C_k rigidity and the Catalan limit"],
        formulas: &["ck_expect"],
    },
    SuiteInfo {
        name: "appendix-e-quartic",
        anchors: &["quartic complex matrix model with C_2: closed-form free energy"],
        formulas: &["quartic_cm_logz"],
    },
    SuiteInfo {
        name: "appendix-e-pillow",
        anchors: &["pillow determinant and its resummation"],
        formulas: &["pillow_det", "pillow_logz"],
    },
    SuiteInfo {
        name: "sec55-real",
        anchors: &["order-3 real tensor with C_2 on one strand"],
        formulas: &["rt_logz"],
    },
    SuiteInfo {
        name: "sec55-selftranspose",
        anchors: &["order-4 self-transpose real tensor"],
        formulas: &["st_det", "st_logz"],
    },
    SuiteInfo {
        name: "appendix-b",
        anchors: &["change of variables moving C into the propagator"],
        formulas: &[],
    },
    SuiteInfo {
        name: "convergence",
        anchors: &["convergence region Re(q_k p_l) >= 0"],
        formulas: &[],
    },
    SuiteInfo {
        name: "mc-calibration",
        anchors: &["Monte Carlo calibration against dual weights"],
        formulas: &["dual_weight_sum"],
    },
];

pub fn list_suites() -> &'static [SuiteInfo] {
    SUITES
}

/// Registry formulas that no suite exercises; empty when coverage is complete.
pub fn uncovered_formulas() -> Vec<&'static str> {
    formula_registry()
        .iter()
        .map(|f| f.name)
        .filter(|name| !SUITES.iter().any(|s| s.formulas.contains(name)))
        .collect()
}

/// A single dimension or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dims {
    One(usize),
    Many(Vec<usize>),
}

impl Dims {
    fn list(&self) -> Vec<usize> {
        match self {
            Dims::One(n) => vec![*n],
            Dims::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rel: Option<f64>,
    pub sigma: Option<f64>,
}

/// Complex entries as `[re, im]`.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    /// Gaussian-integer entries in `[-range, range]`, drawn from the job seed.
    RandomInt { range: i64 },
    /// Hermitian positive definite `A A†/N + 1`.
    RandomPd,
    /// `P = C_k`, `Q = 1`.
    Ck { k: usize },
    Explicit { p: JsonMatrix, q: JsonMatrix },
    /// Diagonal `P`, `Q` with these eigenvalues.
    Spectra { p: Vec<[f64; 2]>, q: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub suite: String,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Dims>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Coupling order of series suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    /// Expected convergence verdict for the `convergence` suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<bool>,
}

impl JobSpec {
    pub fn new(suite: &str) -> Self {
        JobSpec {
            suite: suite.into(),
            dims: None,
            n_max: None,
            order: None,
            series_order: None,
            ensemble: None,
            couplings: None,
            seed: 0,
            samples: None,
            tolerances: Tolerances::default(),
            backend: None,
            expect: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let job: JobSpec = serde_json::from_str(text).map_err(|e| crate::error::EquivError::Input(e.to_string()))?;
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUITES.iter().any(|s| s.name == self.suite) {
            return input(format!("unknown suite '{}'", self.suite));
        }
        for (name, t) in [("rel", self.tolerances.rel), ("sigma", self.tolerances.sigma)] {
            if let Some(t) = t {
                if !(t > 0.0 && t.is_finite()) {
                    return input(format!("tolerance {name} must be positive, got {t}"));
                }
            }
        }
        if let Some(d) = &self.dims {
            let list = d.list();
            if list.is_empty() || list.contains(&0) {
                return input("N must be a positive integer or a non-empty list of them");
            }
        }
        if self.order == Some(0) {
            return input("D must be positive");
        }
        if self.samples.is_some_and(|s| s < 2) {
            return input("samples must be at least 2");
        }
        if let Some(c) = &self.couplings {
            if c.is_empty() || c.iter().any(|x| !x.is_finite()) {
                return input("couplings must be a non-empty list of finite numbers");
            }
        }
        Ok(())
    }

    fn dims_or(&self, default: &[usize]) -> Vec<usize> {
        self.dims.as_ref().map(Dims::list).unwrap_or_else(|| default.to_vec())
    }

    fn dim_or(&self, default: usize) -> Result<usize> {
        match self.dims_or(&[default]).as_slice() {
            [n] => Ok(*n),
            _ => input(format!("suite '{}' takes a single N", self.suite)),
        }
    }

    fn rel_or(&self, default: f64) -> f64 {
        self.tolerances.rel.unwrap_or(default)
    }

    fn sigma_or(&self, default: f64) -> f64 {
        self.tolerances.sigma.unwrap_or(default)
    }

    fn backend_or(&self, default: Backend) -> Backend {
        self.backend.unwrap_or(default)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Run one job. Suites parallelize internally; the report is assembled in a fixed order.
pub fn run_job(job: &JobSpec) -> Result<VerdictReport> {
    job.validate()?;
    let mut report = match job.suite.as_str() {
        "prop41" => by_backend(job, Backend::Exact, prop41::<CQ>, prop41::<C64>),
        "prop42" => by_backend(job, Backend::Exact, prop42::<CQ>, prop42::<C64>),
        "prop51" => by_backend(job, Backend::Float, prop51::<CQ>, prop51::<C64>),
        "prop52" => by_backend(job, Backend::Exact, prop52::<CQ>, prop52::<C64>),
        "thm43-series" => by_backend(job, Backend::Exact, thm43::<CQ>, thm43::<C64>),
        "thm53-series" => by_backend(job, Backend::Exact, thm53::<CQ>, thm53::<C64>),
        "thm54-reduction" => by_backend(job, Backend::Exact, thm54::<CQ>, thm54::<C64>),
        "characters" => by_backend(job, Backend::Float, characters::<CQ>, characters::<C64>),
        "cauchy-cm" => by_backend(job, Backend::Float, cauchy::<CQ>, cauchy::<C64>),
        "ck-catalan" => by_backend(job, Backend::Exact, ck_catalan::<CQ>, ck_catalan::<C64>),
        "appendix-e-quartic" => by_backend(job, Backend::Exact, quartic::<CQ>, quartic::<C64>),
        "appendix-e-pillow" => pillow(job),
        "sec55-real" => by_backend(job, Backend::Exact, real_tensor::<CQ>, real_tensor::<C64>),
        "sec55-selftranspose" => self_transpose(job),
        "appendix-b" => appendix_b(job),
        "convergence" => convergence(job),
        "mc-calibration" => mc_calibration(job),
        other => input(format!("unknown suite '{other}'")),
    }?;
    let info = SUITES.iter().find(|s| s.name == job.suite).expect("validated suite");
    report.suite = info.name.into();
    report.anchors = info.anchors.iter().map(|s| s.to_string()).collect();
    Ok(report)
}

fn by_backend(
    job: &JobSpec,
    default: Backend,
    exact: fn(&JobSpec) -> Result<VerdictReport>,
    float: fn(&JobSpec) -> Result<VerdictReport>,
) -> Result<VerdictReport> {
    match job.backend_or(default) {
        Backend::Exact => exact(job),
        Backend::Float => float(job),
    }
}

fn backend_of<S: Scalar>() -> Backend {
    if S::EXACT {
        Backend::Exact
    } else {
        Backend::Float
    }
}

fn new_report<S: Scalar>(job: &JobSpec) -> VerdictReport {
    VerdictReport::new(job.suite.clone(), &[], backend_of::<S>())
}

fn float_only(job: &JobSpec) -> Result<()> {
    if job.backend == Some(Backend::Exact) {
        return input(format!("suite '{}' runs in the float backend only", job.suite));
    }
    Ok(())
}

fn json_matrix<S: Scalar>(m: &JsonMatrix) -> Result<Matrix<S>> {
    let n = m.len();
    if n == 0 || m.iter().any(|row| row.len() != n) {
        return input("matrices must be square and non-empty");
    }
    Ok(Matrix::from_fn(n, |i, j| S::from_c64(C64::new(m[i][j][0], m[i][j][1]))))
}

fn spectrum<S: Scalar>(v: &[[f64; 2]]) -> Matrix<S> {
    Matrix::diag(v.iter().map(|z| S::from_c64(C64::new(z[0], z[1]))).collect())
}

/// Matrix covariance pair from the job, or random Gaussian integers by default.
fn matrix_pair<S: Scalar>(job: &JobSpec, dim: usize, rng: &mut ChaCha8Rng) -> Result<CovariancePair<S>> {
    match job.ensemble.clone().unwrap_or(EnsembleSpec::RandomInt { range: 2 }) {
        EnsembleSpec::RandomInt { range } => {
            if range <= 0 {
                return input("range must be positive");
            }
            let p = random_gaussian_int_matrix(rng, dim, range);
            let q = random_gaussian_int_matrix(rng, dim, range);
            CovariancePair::new(p, q)
        }
        EnsembleSpec::RandomPd => {
            let to = |m: ComplexMatrix| m.map(|z| S::from_c64(*z));
            let p = to(random_pd(rng, dim));
            let q = to(random_pd(rng, dim));
            CovariancePair::new(p, q)
        }
        EnsembleSpec::Ck { k } => CovariancePair::new(build_ck::<S>(k, dim)?.matrix, Matrix::identity(dim)),
        EnsembleSpec::Explicit { p, q } => {
            let pair = CovariancePair::new(json_matrix(&p)?, json_matrix(&q)?)?;
            if pair.dim() != dim {
                return input(format!("explicit matrices have size {}, job asks for N={dim}", pair.dim()));
            }
            Ok(pair)
        }
        EnsembleSpec::Spectra { p, q } => {
            if p.len() != dim || q.len() != dim {
                return input(format!("spectra must have N={dim} entries"));
            }
            CovariancePair::new(spectrum(&p), spectrum(&q))
        }
    }
}

fn random_operator<S: Scalar>(rng: &mut ChaCha8Rng, order: usize, dim: usize) -> TensorOperator<S> {
    random_gaussian_int_operator(rng, order, dim, 2)
}

/// Every `D`-tuple of permutations of degree `n`.
fn all_bubbles(n: usize, colors: usize) -> Result<Vec<MultiPermutation>> {
    let perms: Vec<Permutation> = enumerate_sn(n)?.collect();
    let mut out = vec![Vec::new()];
    for _ in 0..colors {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Permutation>| {
                perms.iter().map(move |p| {
                    let mut next = prefix.clone();
                    next.push(p.clone());
                    next
                })
            })
            .collect();
    }
    out.into_iter().map(MultiPermutation::new).collect()
}

fn prop41<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dim = job.dim_or(3)?;
    let pair = matrix_pair::<S>(job, dim, &mut job.rng())?;
    let tol = job.rel_or(1e-10);
    let mut report = new_report::<S>(job);
    for n in 1..=job.n_max.unwrap_or(4) {
        for lam in partitions(n) {
            let sigma = lam.representative();
            let lhs = cm_expect(&sigma, &pair)?;
            let rhs = dual_weight_sum(&sigma, &pair)?;
            report.push(CaseRecord::compare(
                format!("cycle type {lam}"),
                json!({"N": dim, "sigma": sigma, "cycle_type": lam}),
                &lhs,
                &rhs,
                tol,
            ));
        }
    }
    Ok(report)
}

fn prop42<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let top = job.dim_or(3)?;
    let n_max = job.n_max.unwrap_or(3);
    let tol = job.rel_or(1e-10);
    let mut rng = job.rng();
    let mut report = new_report::<S>(job);
    for dim in 1..=top {
        let pair = matrix_pair::<S>(job, dim, &mut rng)?;
        let model = JetModel::matrix(&pair, n_max)?;
        for n in 1..=n_max {
            for lam in partitions(n) {
                let sigma = lam.representative();
                let lhs = hm_expect_with(&model, &sigma)?;
                let rhs = dual_weight_sum(&sigma, &pair)?;
                report.push(CaseRecord::compare(
                    format!("N={dim} cycle type {lam}"),
                    json!({"N": dim, "sigma": sigma, "cycle_type": lam}),
                    &lhs,
                    &rhs,
                    tol,
                ));
            }
        }
    }
    Ok(report)
}

struct TensorJob<S> {
    dim: usize,
    colors: usize,
    n_max: usize,
    r: TensorCovariance<S>,
}

fn tensor_job<S: Scalar>(job: &JobSpec, defaults: (usize, usize, usize)) -> Result<TensorJob<S>> {
    let dim = job.dim_or(defaults.0)?;
    let colors = job.order.unwrap_or(defaults.1);
    let r = TensorCovariance::dense(random_operator::<S>(&mut job.rng(), colors, dim));
    Ok(TensorJob { dim, colors, n_max: job.n_max.unwrap_or(defaults.2), r })
}

fn tensor_cases<S: Scalar>(
    job: &JobSpec,
    t: &TensorJob<S>,
    lhs: impl Fn(&MultiPermutation) -> Result<S>,
) -> Result<VerdictReport> {
    let tol = job.rel_or(1e-10);
    let mut report = new_report::<S>(job);
    for n in 1..=t.n_max {
        for a in all_bubbles(n, t.colors)? {
            let left = lhs(&a)?;
            let right = tensor_dual_weight_sum(&a, &t.r)?;
            report.push(CaseRecord::compare(
                format!("alpha {a}"),
                json!({"N": t.dim, "D": t.colors, "alpha": a}),
                &left,
                &right,
                tol,
            ));
        }
    }
    Ok(report)
}

fn prop51<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let t = tensor_job::<S>(job, (2, 3, 3))?;
    tensor_cases(job, &t, |a| ct_expect(a, &t.r))
}

fn prop52<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let t = tensor_job::<S>(job, (2, 2, 2))?;
    let model = JetModel::tensor(&t.r.dense, t.n_max)?;
    tensor_cases(job, &t, |a| ht_expect_with(&model, a))
}

fn compare_sides<S: Scalar>(
    report: &mut VerdictReport,
    label: &str,
    v: &BubblePotential<S>,
    ens: &Ensemble<S>,
    order: usize,
    sides: (Evaluation, Evaluation),
    tol: f64,
) -> Result<()> {
    let a = z_ratio_series(v, ens, order, sides.0)?.ln()?;
    let b = z_ratio_series(v, ens, order, sides.1)?.ln()?;
    report.extend(series_compare(label, &a, &b, tol)?);
    Ok(())
}

fn thm43<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dim = job.dim_or(2)?;
    let order = job.series_order.unwrap_or(2);
    let tol = job.rel_or(1e-10);
    let mut report = new_report::<S>(job);
    let ck_job = JobSpec { ensemble: Some(job.ensemble.clone().unwrap_or(EnsembleSpec::Ck { k: 2 })), ..job.clone() };
    let pair = matrix_pair::<S>(&ck_job, dim, &mut job.rng())?;
    let ens = Ensemble::Matrix(pair.clone());
    let sides = (Evaluation::Complex, Evaluation::SelfAdjoint);
    for (name, conv) in [("quartic g", QuarticConvention::Linear), ("quartic t", QuarticConvention::Squared)] {
        compare_sides(&mut report, name, &BubblePotential::quartic_matrix(dim, conv), &ens, order, sides, tol)?;
    }
    let mixed = BubblePotential::matrix(
        "mixed",
        "single and double trace",
        vec![
            (Permutation::identity(1), S::from_gaussian(1, 1)),
            (Permutation::identity(2), S::from_frac(-1, 2)),
            (Permutation::transposition(2, 0, 1)?, S::from_i64(-2)),
        ],
    )?;
    compare_sides(&mut report, "mixed", &mixed, &ens, order, sides, tol)?;

    // Gaussian sector: Y_2 alone against the closed-form one-matrix propagator
    let gauss_pair = CovariancePair::new(pair.p.clone(), build_ck::<S>(2, dim)?.matrix)?;
    if let Ok(red) = gaussian_reduction_params(&gauss_pair.p) {
        let jet = two_point_matrix(&JetModel::matrix_gaussian(&gauss_pair, 2)?)?;
        for (idx, (x, y)) in jet.iter().zip(&red.two_point).enumerate() {
            report.push(CaseRecord::compare(format!("Gaussian two-point entry {idx}"), json!({"N": dim, "entry": idx}), x, y, tol));
        }
    } else {
        report.note("P is singular, the Gaussian reduction is skipped");
    }
    Ok(report)
}

/// `R = N⁻¹ C_2 ⊗ 1 ⊗ …` for the pillow family, `C_2 ⊗ 1 ⊗ 1` for the sextic.
fn c2_covariance<S: Scalar>(dim: usize, colors: usize, scaled: bool) -> Result<TensorCovariance<S>> {
    let mut c2 = build_ck::<S>(2, dim)?.matrix;
    if scaled {
        c2 = c2.scale(&S::from_frac(1, dim as i64));
    }
    let mut factors = vec![c2];
    factors.extend((1..colors).map(|_| Matrix::identity(dim)));
    TensorCovariance::factorized(factors)
}

fn thm53<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dim = job.dim_or(2)?;
    let colors = job.order.unwrap_or(3);
    let order = job.series_order.unwrap_or(2);
    let tol = job.rel_or(1e-10);
    let sides = (Evaluation::Complex, Evaluation::SelfAdjoint);
    let mut report = new_report::<S>(job);
    let pillow = BubblePotential::<S>::pillow(dim, colors)?;
    compare_sides(&mut report, "pillow", &pillow, &Ensemble::Tensor(c2_covariance(dim, colors, true)?), order, sides, tol)?;
    if colors == 3 {
        let sextic = BubblePotential::<S>::sextic()?;
        compare_sides(&mut report, "sextic", &sextic, &Ensemble::Tensor(c2_covariance(dim, 3, false)?), order, sides, tol)?;
    } else {
        report.note("the sextic potential is defined for D = 3 only");
    }
    Ok(report)
}

fn thm54<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dim = job.dim_or(2)?;
    let colors = job.order.unwrap_or(3);
    let order = job.series_order.unwrap_or(2);
    let tol = job.rel_or(1e-10);
    let sides = (Evaluation::Complex, Evaluation::SelfAdjointReduced);
    let mut report = new_report::<S>(job);
    let low = BubblePotential::<S>::low_pillow(dim, colors)?;
    compare_sides(&mut report, "low-pillow", &low, &Ensemble::Tensor(c2_covariance(dim, colors, true)?), order, sides, tol)?;
    if colors == 3 {
        let sextic = BubblePotential::<S>::sextic()?;
        compare_sides(&mut report, "sextic reduced", &sextic, &Ensemble::Tensor(c2_covariance(dim, 3, false)?), order, sides, tol)?;
    }

    let mut rng = job.rng();
    // Gaussian sector of Ψ̂ with R = N⁻¹ C_2 ⊗ P̂
    let p_hat: Matrix<S> = random_gaussian_int_matrix(&mut rng, dim, 2);
    let c2 = build_ck::<S>(2, dim)?.matrix.scale(&S::from_frac(1, dim as i64));
    let r = TensorOperator::tensor_product(&[c2, p_hat.clone()])?;
    let op = TensorOperator::from_matrix(1, dim, p_hat)?;
    match gaussian_reduction_tensor(&op) {
        Ok(red) => {
            let jet = two_point_tensor(&JetModel::reduced(&r, 2)?)?;
            for (idx, (x, y)) in jet.iter().zip(&red.two_point).enumerate() {
                report.push(CaseRecord::compare(format!("reduced two-point entry {idx}"), json!({"N": dim, "entry": idx}), x, y, tol));
            }
        }
        Err(_) => report.note("P̂ is singular, the Gaussian reduction is skipped"),
    }

    // order-2 tensors: R = N⁻¹ Q ⊗ Pᵀ reproduces the matrix model
    let p: Matrix<S> = random_gaussian_int_matrix(&mut rng, dim, 2);
    let q: Matrix<S> = random_gaussian_int_matrix(&mut rng, dim, 2);
    let pair = CovariancePair::new(p.clone(), q.clone())?;
    let r2 = TensorCovariance::factorized(vec![q.scale(&S::from_frac(1, dim as i64)), p.transpose()])?;
    for n in 1..=3 {
        for lam in partitions(n) {
            let sigma = lam.representative();
            let a = MultiPermutation::new(vec![Permutation::identity(n), sigma.clone()])?;
            report.push(CaseRecord::compare(
                format!("matrix as order-2 tensor, cycle type {lam}"),
                json!({"N": dim, "sigma": sigma}),
                &cm_expect(&sigma, &pair)?,
                &ct_expect(&a, &r2)?,
                tol,
            ));
        }
    }
    Ok(report)
}

fn characters<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dim = job.dim_or(4)?;
    let n_max = job.n_max.unwrap_or(4);
    let tol = job.rel_or(1e-9);
    let pair = matrix_pair::<S>(job, dim, &mut job.rng())?;
    let mut report = new_report::<S>(job);
    for n in 1..=n_max {
        let table = character_table(n)?;
        for r in partitions(n) {
            // ⟨χ_r(A)⟩ = Σ_μ χ^r(μ) ⟨Tr_[μ](A)⟩ / z_μ
            let mut via_moments = S::zero();
            for mu in partitions(n) {
                let chi = table.value(&r, &mu)?;
                let z = S::from_i64(mu.z() as i64);
                via_moments = via_moments + dual_weight_sum(&mu.representative(), &pair)? * S::from_i64(chi) / z;
            }
            let closed = character_expectation(&r, &pair.p, &pair.q, dim)?;
            report.push(CaseRecord::compare(format!("character {r}"), json!({"N": dim, "r": r}), &via_moments, &closed, tol));
            if n <= dim {
                report.extend(c1_form_check(&r, &pair.p, &pair.q, tol)?);
            }
        }
        if n <= dim {
            for mu in partitions(n) {
                report.extend(schur_weyl_check(&mu.representative(), &pair.p, tol)?);
            }
        }
    }
    Ok(report)
}

fn cauchy<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dim = job.dim_or(4)?;
    let m = job.order.unwrap_or(2);
    let cap = job.n_max.unwrap_or(4);
    let mut rng = job.rng();
    let a: Matrix<S> = if S::EXACT {
        random_gaussian_int_matrix(&mut rng, dim, 2)
    } else {
        random_matrix(&mut rng, dim).map(|z| S::from_c64(*z * 0.5))
    };
    cauchy_cm_check(&a, m, cap, job.rel_or(1e-9))
}

fn ck_catalan<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dim = job.dim_or(20)?;
    let n_max = job.n_max.unwrap_or(6);
    let bound = 2.0 / (dim * dim) as f64;
    let id: Matrix<S> = Matrix::identity(dim);
    let mut report = new_report::<S>(job);
    for n in (2..=n_max).step_by(2) {
        let value = ck_expect(&Permutation::long_cycle(n), &id, 2)? / S::from_i64(dim as i64);
        let cat = catalan(n / 2);
        let cat_s = S::from_c64(C64::new(crate::closed_forms::rational_to_f64(&cat), 0.0));
        let dev = (value.clone() / cat_s).to_c64() - C64::new(1.0, 0.0);
        let mut case = CaseRecord::compare_abs(
            format!("n={n}"),
            json!({"N": dim, "n": n, "catalan": crate::closed_forms::rational_to_f64(&cat)}),
            value.to_c64(),
            C64::new(crate::closed_forms::rational_to_f64(&cat), 0.0),
            f64::INFINITY,
        );
        case.pass = dev.norm() <= bound;
        case.tolerance = Some(bound);
        case.rel_err = Some(dev.norm());
        if let Some(exact) = value.exact_repr() {
            case = case.with_detail(format!("exact value {exact}"));
        }
        report.push(case);
    }
    Ok(report)
}

fn rational_as<S: Scalar>(r: &BigRational) -> S {
    let parse = |b: &num_bigint::BigInt| -> S {
        let digits = b.to_string();
        let neg = digits.starts_with('-');
        let mut acc = S::zero();
        for ch in digits.trim_start_matches('-').chars() {
            acc = acc * S::from_i64(10) + S::from_i64(ch.to_digit(10).expect("decimal digit") as i64);
        }
        if neg {
            -acc
        } else {
            acc
        }
    };
    parse(r.numer()) / parse(r.denom())
}

fn quartic<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dims = job.dims_or(&[2, 3, 4]);
    let order = job.series_order.unwrap_or(3);
    let tol = job.rel_or(1e-10);
    let tau = Permutation::transposition(2, 0, 1)?;
    let mut report = new_report::<S>(job);
    for &dim in &dims {
        let pair = CovariancePair::new(build_ck::<S>(2, dim)?.matrix, Matrix::identity(dim))?;
        let kmax = if dim % 2 == 0 { order.max(2) } else { 2 };
        let moments = cm_moments(&tau, &pair, kmax)?;
        let kappa = connected_from_moments(&moments);
        let closed = S::from_i64(2);
        report.push(CaseRecord::compare(
            format!("N={dim} connected amplitude k=2"),
            json!({"N": dim, "k": 2}),
            &kappa[1],
            &closed,
            tol,
        ));
        if dim % 2 == 0 {
            let f = free_energy_series(&moments, &S::from_frac(-(dim as i64), 2));
            for k in 1..=order {
                report.push(CaseRecord::compare(
                    format!("N={dim} free energy g^{k}"),
                    json!({"N": dim, "k": k}),
                    &f.coefficients[k],
                    &rational_as::<S>(&quartic_cm_taylor(k, dim)),
                    tol,
                ));
            }
        } else {
            report.note(format!("N={dim} is odd: the free-energy comparison is gated to even N"));
        }
    }
    Ok(report)
}

fn pillow(job: &JobSpec) -> Result<VerdictReport> {
    let dims = job.dims_or(&[2, 3]);
    let lambdas = job.couplings.clone().unwrap_or_else(|| vec![0.05, 0.1]);
    let tol = job.rel_or(1e-12);
    let mut report = VerdictReport::new(job.suite.clone(), &[], Backend::Float);
    for &dim in &dims {
        for &lambda in &lambdas {
            let closed = pillow_logz(lambda, dim)?;
            let inputs = json!({"N": dim, "lambda": lambda});
            let dense = C64::new(pillow_det_dense(lambda, dim)?, 0.0);
            let blocks = C64::new(pillow_det_blocks(lambda, dim)?, 0.0);
            let closed = C64::new(closed, 0.0);
            report.push(CaseRecord::compare(format!("N={dim} λ={lambda} dense determinant"), inputs.clone(), &dense, &closed, tol));
            report.push(CaseRecord::compare(format!("N={dim} λ={lambda} block determinant"), inputs, &blocks, &closed, tol));
        }
    }
    // complex-side series at the smallest N, exact
    let dim = dims.iter().copied().min().unwrap_or(2);
    let order = job.series_order.unwrap_or(2);
    let series = z_ratio_series(
        &BubblePotential::<CQ>::pillow(dim, 3)?,
        &Ensemble::Tensor(c2_covariance::<CQ>(dim, 3, true)?),
        order,
        Evaluation::Complex,
    )?
    .ln()?;
    for v in 1..=order {
        let closed = rational_as::<CQ>(&pillow_taylor(v, dim));
        report.push(CaseRecord::compare(
            format!("N={dim} series λ^{v}"),
            json!({"N": dim, "order": v}),
            &series.coefficients[v],
            &closed,
            0.0,
        ));
    }
    Ok(report)
}

fn real_tensor<S: Scalar>(job: &JobSpec) -> Result<VerdictReport> {
    let dim = job.dim_or(2)?;
    let order = job.series_order.unwrap_or(2);
    let tol = job.rel_or(1e-10);
    let c2 = build_ck::<S>(2, dim)?.matrix;
    let f = free_energy_series(&rt_moments(&c2, order)?, &S::from_frac(-(dim as i64), 4));
    let mut report = new_report::<S>(job);
    for k in 1..=order {
        report.push(CaseRecord::compare(
            format!("N={dim} log-ratio λ^{k}"),
            json!({"N": dim, "k": k}),
            &f.coefficients[k],
            &rational_as::<S>(&rt_taylor(k, dim)),
            tol,
        ));
    }
    Ok(report)
}

fn self_transpose(job: &JobSpec) -> Result<VerdictReport> {
    float_only(job)?;
    let dims = job.dims_or(&[2, 3]);
    let lambdas = job.couplings.clone().unwrap_or_else(|| vec![0.05, 0.1]);
    let tol = job.rel_or(1e-12);
    let mut report = VerdictReport::new(job.suite.clone(), &[], Backend::Float);
    for &dim in &dims {
        for &lambda in &lambdas {
            let inputs = json!({"N": dim, "lambda": lambda});
            let closed = C64::new(st_logz(lambda, dim)?, 0.0);
            let dense = C64::new(st_det(lambda, dim)?, 0.0);
            let blocks = C64::new(st_det_blocks(lambda, dim)?, 0.0);
            report.push(CaseRecord::compare(format!("N={dim} λ={lambda} dense determinant"), inputs.clone(), &dense, &closed, tol));
            report.push(CaseRecord::compare(format!("N={dim} λ={lambda} block determinant"), inputs, &blocks, &closed, tol));
        }
    }
    Ok(report)
}

fn appendix_b(job: &JobSpec) -> Result<VerdictReport> {
    float_only(job)?;
    let dims = job.dims_or(&[1, 2]);
    let spectrum: Vec<f64> = match &job.ensemble {
        None => (1..=dims.iter().copied().max().unwrap_or(1)).map(|x| x as f64).collect(),
        Some(EnsembleSpec::Spectra { p, .. }) => p.iter().map(|z| z[0]).collect(),
        Some(_) => return input("appendix-b takes C as a 'spectra' ensemble (the p entries)"),
    };
    let couplings = job.couplings.clone().unwrap_or_else(|| vec![0.1]);
    let samples = job.samples.unwrap_or(1_000_000);
    let mut report = VerdictReport::new(job.suite.clone(), &[], Backend::Float);
    for (i, &dim) in dims.iter().enumerate() {
        if dim > spectrum.len() {
            return input(format!("C has {} entries, N={dim} needs more", spectrum.len()));
        }
        for (j, &g) in couplings.iter().enumerate() {
            let stream = SeededStream::new(job.seed, (i * couplings.len() + j) as u32);
            let mut sub = appendix_b_check(&spectrum[..dim], g, samples, &stream)?;
            for case in &mut sub.cases {
                case.tolerance = Some(job.sigma_or(4.0));
                case.pass = case.sigma_distance.is_some_and(|d| d <= job.sigma_or(4.0));
            }
            report.extend(sub);
        }
    }
    report.notes.dedup();
    Ok(report)
}

fn convergence(job: &JobSpec) -> Result<VerdictReport> {
    float_only(job)?;
    let Some(ens) = &job.ensemble else {
        return input("convergence needs an explicit or spectra ensemble");
    };
    let dim = match ens {
        EnsembleSpec::Spectra { p, .. } => p.len(),
        EnsembleSpec::Explicit { p, .. } => p.len(),
        _ => job.dim_or(2)?,
    };
    let pair = matrix_pair::<C64>(job, dim, &mut job.rng())?;
    let verdict = convergence_check(&pair)?;
    let expected = job.expect.unwrap_or(true);
    let detail = match verdict.witness {
        Some((q, p)) => format!("Re(q p) < 0 for q = {q}, p = {p}"),
        None => "Re(q_k p_l) >= 0 for every pair".to_string(),
    };
    let mut case = CaseRecord::check("convergence", json!({"N": dim, "expect": expected}), verdict.converges == expected, detail);
    case.lhs = json!(verdict.converges);
    case.rhs = json!(expected);
    if let Some((q, p)) = verdict.witness {
        case.inputs["witness"] = json!({"q": complex_json(q), "p": complex_json(p)});
    }
    let mut report = VerdictReport::new(job.suite.clone(), &[], Backend::Float);
    report.push(case);
    Ok(report)
}

fn mc_calibration(job: &JobSpec) -> Result<VerdictReport> {
    float_only(job)?;
    let dim = job.dim_or(4)?;
    let samples = job.samples.unwrap_or(200_000);
    let max_sigma = job.sigma_or(4.0);
    let pd_job = JobSpec { ensemble: Some(job.ensemble.clone().unwrap_or(EnsembleSpec::RandomPd)), ..job.clone() };
    let pair = matrix_pair::<C64>(&pd_job, dim, &mut job.rng())?;
    let sampler = Sampler::matrix(&pair)?;
    let mut report = VerdictReport::new(job.suite.clone(), &[], Backend::Float);
    let observables = [Permutation::identity(1), Permutation::long_cycle(2)];
    for (i, sigma) in observables.iter().enumerate() {
        let stream = SeededStream::new(job.seed, i as u32);
        let est = estimate_observable(&ObservableSpec::MatrixTrace(sigma.clone()), &sampler, samples, &stream)?;
        let exact = dual_weight_sum(sigma, &pair)?;
        report.push(CaseRecord::compare_sigma(
            format!("Tr_[{sigma}](M†M)"),
            json!({"N": dim, "sigma": sigma, "samples": samples, "seed": job.seed, "stream": i}),
            est.to_json(),
            complex_json(exact),
            (est.mean - exact).norm(),
            est.stderr,
            max_sigma,
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_complete() {
        assert_eq!(list_suites().len(), 17);
        assert!(uncovered_formulas().is_empty(), "{:?}", uncovered_formulas());
        let pillow = list_suites().iter().find(|s| s.name == "appendix-e-pillow").unwrap();
        assert!(pillow.formulas.contains(&"pillow_det"));
    }

    #[test]
    fn malformed_jobs() {
        assert!(JobSpec::parse("{").is_err());
        assert!(JobSpec::parse(r#"{"suite":"nope"}"#).is_err());
        assert!(JobSpec::parse(r#"{"suite":"prop41","bogus":1}"#).is_err());
        assert!(JobSpec::parse(r#"{"suite":"prop41","tolerances":{"rel":-1}}"#).is_err());
        let e = JobSpec::parse(r#"{"suite":"prop41","N":0}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let job = JobSpec::parse(r#"{"suite":"prop41","N":[2,3],"backend":"exact"}"#).unwrap();
        assert!(run_job(&job).is_err());
    }

    #[test]
    fn small_exact_matrix_job() {
        let job = JobSpec::parse(r#"{"suite":"prop41","N":2,"n_max":3,"seed":4}"#).unwrap();
        let r = run_job(&job).unwrap();
        assert!(r.pass);
        assert_eq!(r.cases.len(), 1 + 2 + 3);
        assert!(r.cases[0].inputs.get("sigma").is_some());
        assert_eq!(r.anchors, vec!["complex matrix moments as a sum over dual weights".to_string()]);
    }

    #[test]
    fn deterministic_bytes() {
        let job = JobSpec::parse(r#"{"suite":"mc-calibration","N":2,"samples":5000,"seed":9}"#).unwrap();
        let a = run_job(&job).unwrap().to_canonical_json();
        let b = run_job(&job).unwrap().to_canonical_json();
        assert_eq!(a, b);
        let back = VerdictReport::from_json(&a).unwrap();
        assert_eq!(back.to_canonical_json(), a);
    }

    #[test]
    fn convergence_witness() {
        let job = JobSpec::parse(
            r#"{"suite":"convergence","ensemble":{"kind":"spectra","p":[[1,0],[-1,0]],"q":[[1,0],[1,0]]}}"#,
        )
        .unwrap();
        let r = run_job(&job).unwrap();
        assert!(!r.pass);
        assert!(r.cases[0].inputs.get("witness").is_some());
        let job = JobSpec { expect: Some(false), ..job };
        assert!(run_job(&job).unwrap().pass);
    }

    #[test]
    fn failing_case_names_its_inputs() {
        // odd-N amplitude does not match; the case records N and k
        let job = JobSpec::parse(r#"{"suite":"appendix-e-quartic","N":3}"#).unwrap();
        let r = run_job(&job).unwrap();
        let bad = r.failures().next().unwrap();
        assert_eq!(bad.inputs["N"], 3);
        assert_eq!(bad.inputs["k"], 2);
    }

    #[test]
    fn rational_conversion() {
        let r = BigRational::new((-7).into(), 3.into());
        assert_eq!(rational_as::<CQ>(&r), CQ::from_frac(-7, 3));
        assert!((rational_as::<C64>(&r).re + 7.0 / 3.0).abs() < 1e-15);
    }
}
