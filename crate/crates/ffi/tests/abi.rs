use equiv_core::closed_forms::dual_weight_sum_naive;
use equiv_core::covariance::CovariancePair;
use equiv_core::perm::Permutation;
use equiv_core::scalar::C64;
use equiv_core::tensor::Matrix;
use equiv_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    let p = equiv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_job_round_trip() {
    let job = CString::new(r#"{"suite":"prop41"}"#).unwrap();
    let mut report = ptr::null_mut();
    let code = unsafe { equiv_run_job_json(job.as_ptr(), &mut report) };
    assert_eq!(code, EQUIV_OK);
    assert!(!report.is_null());
    assert_eq!(unsafe { equiv_report_passed(report) }, 1);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { equiv_report_json(report, &mut json) }, EQUIV_OK);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["suite"], "prop41");
    assert_eq!(value["pass"], true);
    unsafe {
        equiv_string_free(json);
        equiv_report_free(report);
    }
}

#[test]
fn bad_json_is_input_error() {
    let job = CString::new("{not json").unwrap();
    let mut report = ptr::null_mut();
    let code = unsafe { equiv_run_job_json(job.as_ptr(), &mut report) };
    assert_eq!(code, EQUIV_ERR_INPUT);
    assert!(report.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn unknown_suite_is_input_error() {
    let job = CString::new(r#"{"suite":"nope"}"#).unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { equiv_run_job_json(job.as_ptr(), &mut report) }, EQUIV_ERR_INPUT);
}

#[test]
fn null_arguments() {
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { equiv_run_job_json(ptr::null(), &mut report) }, EQUIV_ERR_NULL);
    assert_eq!(unsafe { equiv_report_passed(ptr::null()) }, -EQUIV_ERR_NULL);
    assert_eq!(unsafe { equiv_build_ck(2, 3, ptr::null_mut()) }, EQUIV_ERR_NULL);
    unsafe {
        equiv_report_free(ptr::null_mut());
        equiv_string_free(ptr::null_mut());
    }
}

#[test]
fn dual_weight_sum_identity_covariance() {
    // P = Q = 1 in dimension 2: <Tr(M†M)> = Tr P Tr Q / N = 2.
    let dim = 2;
    let mut eye = vec![0.0; 2 * dim * dim];
    eye[0] = 1.0;
    eye[2 * (dim + 1)] = 1.0;
    let (mut re, mut im) = (0.0, 0.0);
    let sigma = [0usize];
    let code = unsafe { equiv_dual_weight_sum(sigma.as_ptr(), 1, eye.as_ptr(), eye.as_ptr(), dim, &mut re, &mut im) };
    assert_eq!(code, EQUIV_OK);
    assert!((re - 2.0).abs() < 1e-12 && im.abs() < 1e-12, "{re} {im}");

    let sigma = [1usize, 0];
    let code = unsafe { equiv_dual_weight_sum(sigma.as_ptr(), 2, eye.as_ptr(), eye.as_ptr(), dim, &mut re, &mut im) };
    assert_eq!(code, EQUIV_OK);
    let pair = CovariancePair::new(Matrix::identity(dim), Matrix::identity(dim)).unwrap();
    let expected: C64 = dual_weight_sum_naive(&Permutation::from_images(vec![1, 0]).unwrap(), &pair).unwrap();
    assert!((re - expected.re).abs() < 1e-12 && (im - expected.im).abs() < 1e-12);
}

#[test]
fn dual_weight_sum_rejects_bad_permutation() {
    let eye = [1.0, 0.0];
    let sigma = [0usize, 0];
    let (mut re, mut im) = (0.0, 0.0);
    let code = unsafe { equiv_dual_weight_sum(sigma.as_ptr(), 2, eye.as_ptr(), eye.as_ptr(), 1, &mut re, &mut im) };
    assert_eq!(code, EQUIV_ERR_INPUT);
    assert!(!last_error().is_empty());
}

#[test]
fn build_ck_power_sums() {
    let (k, n) = (2, 4);
    let mut buf = vec![f64::NAN; 2 * n * n];
    assert_eq!(unsafe { equiv_build_ck(k, n, buf.as_mut_ptr()) }, EQUIV_OK);
    // Tr C = 0 and Tr C^2 = n.
    let at = |i: usize, j: usize| (buf[2 * (i * n + j)], buf[2 * (i * n + j) + 1]);
    let trace: f64 = (0..n).map(|i| at(i, i).0).sum();
    assert!(trace.abs() < 1e-10);
    let mut tr2 = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = at(i, j);
            let (c, d) = at(j, i);
            tr2.0 += a * c - b * d;
            tr2.1 += a * d + b * c;
        }
    }
    assert!((tr2.0 - n as f64).abs() < 1e-10 && tr2.1.abs() < 1e-10, "{tr2:?}");
}

#[test]
fn header_declares_entry_points() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/equiv.h")).unwrap();
    for name in [
        "equiv_run_job_json",
        "equiv_report_passed",
        "equiv_report_json",
        "equiv_report_free",
        "equiv_string_free",
        "equiv_last_error",
        "equiv_dual_weight_sum",
        "equiv_build_ck",
        "typedef struct EquivReport EquivReport",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
