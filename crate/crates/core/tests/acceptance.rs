//! One check per acceptance criterion. Each prints a PASS/FAIL line; the test asserts that
//! the failing set is exactly the criteria documented as not reachable at finite N
//! (see README). A regression anywhere else, or an unexpected pass, fails the test.

use equiv_core::job::{run_job, JobSpec};
use equiv_core::report::VerdictReport;
use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

/// Criteria whose closed forms disagree with the computed finite-N series.
const KNOWN_UNATTAINABLE: [u32; 3] = [7, 8, 9];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(json: &str) -> (VerdictReport, Duration) {
    let job = JobSpec::parse(json).unwrap_or_else(|e| panic!("job {json}: {e}"));
    let start = Instant::now();
    let report = run_job(&job).unwrap_or_else(|e| panic!("job {json}: {e}"));
    (report, start.elapsed())
}

fn failures(r: &VerdictReport) -> Vec<String> {
    r.cases
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} [{}:{} vs {}]", c.label, r.suite, c.lhs, c.rhs))
        .collect()
}

/// Combine reports, requiring each to pass and to contain at least one case.
fn judge(reports: &[&VerdictReport], budget: Option<(Duration, Duration)>) -> Outcome {
    let mut bad: Vec<String> = Vec::new();
    let mut cases = 0;
    for r in reports {
        cases += r.cases.len();
        if r.cases.is_empty() {
            bad.push(format!("{}: no cases", r.suite));
        }
        bad.extend(failures(r));
    }
    if let Some((took, limit)) = budget {
        if took > limit {
            bad.push(format!("runtime {took:.2?} exceeds {limit:.0?}"));
        }
    }
    let pass = bad.is_empty();
    let detail = if pass { format!("{cases} cases") } else { bad.join("; ") };
    Outcome { pass, detail }
}

fn has_case(r: &VerdictReport, label: &str, value: f64) -> Result<(), String> {
    let case = r.cases.iter().find(|c| c.label == label).ok_or_else(|| format!("no case '{label}'"))?;
    let lhs = case.lhs.as_array().and_then(|a| a[0].as_f64()).ok_or("lhs is not a complex pair")?;
    if lhs == value {
        Ok(())
    } else {
        Err(format!("{label}: {lhs} != {value}"))
    }
}

fn criterion_1() -> Outcome {
    let (exact, took) = run(r#"{"suite":"prop41","N":3,"n_max":4,"backend":"exact"}"#);
    let (float, _) = run(r#"{"suite":"prop41","N":3,"n_max":4,"backend":"float","tolerances":{"rel":1e-10}}"#);
    judge(&[&exact, &float], Some((took, Duration::from_secs(10))))
}

fn criterion_2() -> Outcome {
    // N is the upper end of the sweep 1..=N
    let (r, took) = run(r#"{"suite":"prop42","N":3,"n_max":3,"backend":"exact"}"#);
    judge(&[&r], Some((took, Duration::from_secs(60))))
}

fn criterion_3() -> Outcome {
    let (r, _) = run(r#"{"suite":"prop51","N":2,"D":3,"n_max":3,"backend":"float","tolerances":{"rel":1e-10}}"#);
    judge(&[&r], None)
}

fn criterion_4() -> Outcome {
    let (r, _) = run(r#"{"suite":"prop52","N":2,"D":2,"n_max":2,"backend":"exact"}"#);
    judge(&[&r], None)
}

fn criterion_5() -> Outcome {
    let (quartic, _) = run(r#"{"suite":"thm43-series","N":2,"series_order":2,"backend":"exact"}"#);
    let (pillow, _) = run(r#"{"suite":"thm53-series","N":2,"D":3,"series_order":2,"backend":"exact"}"#);
    let (low, _) = run(r#"{"suite":"thm54-reduction","N":2,"D":3,"series_order":2,"backend":"exact"}"#);
    judge(&[&quartic, &pillow, &low], None)
}

fn criterion_6() -> Outcome {
    let (r, _) = run(r#"{"suite":"characters","N":4,"n_max":4,"backend":"float","tolerances":{"rel":1e-9}}"#);
    judge(&[&r], None)
}

fn criterion_7() -> Outcome {
    let (r, _) = run(r#"{"suite":"appendix-e-quartic","N":[2,3,4],"series_order":3,"backend":"exact"}"#);
    judge(&[&r], None)
}

fn criterion_8() -> Outcome {
    let (r, _) = run(r#"{"suite":"appendix-e-pillow","N":[2,3],"couplings":[0.05,0.1],"tolerances":{"rel":1e-12}}"#);
    let mut out = judge(&[&r], None);
    if let Err(e) = has_case(&r, "N=2 series λ^1", 16.0) {
        out.pass = false;
        out.detail = format!("{e}; {}", out.detail);
    }
    out
}

fn criterion_9() -> Outcome {
    let (real, _) = run(r#"{"suite":"sec55-real","N":2,"series_order":2,"backend":"exact"}"#);
    let (st, _) = run(r#"{"suite":"sec55-selftranspose","N":[2,3],"couplings":[0.05,0.1],"tolerances":{"rel":1e-12}}"#);
    let mut out = judge(&[&real, &st], None);
    if let Err(e) = has_case(&real, "N=2 log-ratio λ^1", -4.0) {
        out.pass = false;
        out.detail = format!("{e}; {}", out.detail);
    }
    out
}

fn criterion_10() -> Outcome {
    let (r, _) = run(r#"{"suite":"cauchy-cm","N":4,"D":2,"n_max":4,"tolerances":{"rel":1e-9}}"#);
    judge(&[&r], None)
}

fn criterion_11() -> Outcome {
    let (r, _) = run(r#"{"suite":"ck-catalan","N":20,"n_max":6}"#);
    judge(&[&r], None)
}

fn criterion_12() -> Outcome {
    let (r, took) = run(r#"{"suite":"mc-calibration","N":4,"samples":200000,"tolerances":{"sigma":4}}"#);
    judge(&[&r], Some((took, Duration::from_secs(30))))
}

fn criterion_13() -> Outcome {
    let (r, _) = run(r#"{"suite":"appendix-b","N":[1,2],"couplings":[0.1],"samples":1000000,"tolerances":{"sigma":4}}"#);
    judge(&[&r], None)
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 13] = [
        (1, "complex matrix oracle vs dual weight sum", criterion_1),
        (2, "self-adjoint matrix jets vs dual weight sum", criterion_2),
        (3, "complex tensor oracle vs tensor dual weight sum", criterion_3),
        (4, "self-adjoint tensor jets vs tensor dual weight sum", criterion_4),
        (5, "perturbative complex vs self-adjoint series", criterion_5),
        (6, "character expectations", criterion_6),
        (7, "quartic free energy and connected amplitude", criterion_7),
        (8, "pillow determinant and series", criterion_8),
        (9, "real and self-transpose tensors", criterion_9),
        (10, "Cauchy expansion with C_m", criterion_10),
        (11, "Catalan limit", criterion_11),
        (12, "Monte Carlo calibration", criterion_12),
        (13, "change-of-variables identity by Monte Carlo", criterion_13),
    ];
    let mut failed = BTreeSet::new();
    for (id, name, check) in criteria {
        let out = check();
        // straight to the handle so the lines survive libtest's output capture
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        writeln!(std::io::stderr(), "criterion {id:>2} {verdict} {name}: {}", out.detail).unwrap();
        if !out.pass {
            failed.insert(id);
        }
    }
    let known: BTreeSet<u32> = KNOWN_UNATTAINABLE.into_iter().collect();
    assert_eq!(failed, known, "failing criteria differ from the documented set");
}
