use std::ffi::{CStr, CString};
use std::ptr;

use multisecretary_ffi::*;

fn model(spec: &str) -> *mut MsModel {
    let c = CString::new(spec).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ms_model_parse(c.as_ptr(), &mut out) }, MsStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = ms_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn quantile_and_cdf() {
    let m = model("uniform");
    let (mut x, mut q) = (0.0, 0.0);
    unsafe {
        assert_eq!(ms_model_quantile(m, 0.3, &mut x), MsStatus::Ok);
        assert_eq!(ms_model_cdf(m, x, &mut q), MsStatus::Ok);
        assert!((x - 0.3).abs() < 1e-12);
        assert!((q - 0.3).abs() < 1e-12);
        assert_eq!(ms_model_quantile(m, 1.5, &mut x), MsStatus::Domain);
        ms_model_free(m);
    }
    assert!(!last_error().is_empty());
}

#[test]
fn bad_inputs_report_status() {
    let c = CString::new("normal").unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_ne!(ms_model_parse(c.as_ptr(), &mut out), MsStatus::Ok);
        assert!(out.is_null());
        assert_eq!(ms_model_parse(ptr::null(), &mut out), MsStatus::NullPointer);
        assert!(last_error().contains("spec"));
        let mut x = 0.0;
        assert_eq!(ms_model_cdf(ptr::null(), 0.5, &mut x), MsStatus::NullPointer);
        let m = model("uniform");
        let mut t = ptr::null_mut();
        let u = [0.5, 0.6];
        assert_eq!(ms_policy_run(m, 9, u.as_ptr(), 2, 1, &mut t), MsStatus::InvalidArgument);
        assert_eq!(ms_policy_run(m, 0, u.as_ptr(), 2, 3, &mut t), MsStatus::Domain);
        assert_eq!(ms_optimal_online_value(m, 1, 2, &mut x), MsStatus::UnsupportedModel);
        ms_model_free(m);
        ms_model_free(ptr::null_mut());
        ms_trace_free(ptr::null_mut());
        assert_eq!(ms_trace_horizon(ptr::null()), 0);
    }
}

#[test]
fn policy_trace_accessors() {
    let m = model("discrete:support=0.25,0.5,0.75;mass=0.4,0.2,0.4");
    let u = [0.9, 0.1, 0.5, 0.95, 0.2, 0.7, 0.3, 0.8];
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(
            ms_policy_run(m, MsPolicy::Offline as i32, u.as_ptr(), u.len(), 3, &mut t),
            MsStatus::Ok
        );
        assert_eq!(ms_trace_horizon(t), u.len());
        let mut hires = [0u8; 8];
        assert_eq!(ms_trace_decisions(t, hires.as_mut_ptr(), 8), MsStatus::Ok);
        assert_eq!(hires.iter().map(|&h| h as usize).sum::<usize>(), 3);
        assert_eq!(ms_trace_decisions(t, hires.as_mut_ptr(), 7), MsStatus::InvalidArgument);
        let mut thresholds = [0.0; 8];
        assert_eq!(ms_trace_thresholds(t, thresholds.as_mut_ptr(), 8), MsStatus::Ok);
        assert!(thresholds.iter().all(|p| (0.0..=1.0).contains(p)));

        let (mut online, mut offline) = (0.0, 0.0);
        assert_eq!(ms_trace_value(t, &mut online), MsStatus::Ok);
        assert_eq!(
            ms_offline_value(m, u.as_ptr(), u.len(), 3, &mut offline, ptr::null_mut(), ptr::null_mut()),
            MsStatus::Ok
        );
        // the three largest values are 0.75
        assert!((offline - 2.25).abs() < 1e-12);
        assert!((online - offline).abs() < 1e-12);
        ms_trace_free(t);
        ms_model_free(m);
    }
}

#[test]
fn residual_vanishes() {
    let m = model("fbeta:beta=0");
    let u: Vec<f64> = (1..=60).map(|i| ((i * 37) % 61) as f64 / 61.0).collect();
    for policy in [MsPolicy::Ce, MsPolicy::Cwg, MsPolicy::Static] {
        let mut r = f64::NAN;
        let status = unsafe { ms_decomposition_residual(m, policy as i32, u.as_ptr(), u.len(), 20, &mut r) };
        assert_eq!(status, MsStatus::Ok);
        assert!(r.abs() < 1e-9, "{policy:?}: {r}");
    }
    unsafe { ms_model_free(m) };
}

#[test]
fn dp_values() {
    let m = model("discrete:support=0.25,0.5,0.75;mass=0.3333333333333333,0.3333333333333334,0.3333333333333333");
    let (mut online, mut offline) = (0.0, 0.0);
    unsafe {
        assert_eq!(ms_optimal_online_value(m, 1, 1, &mut online), MsStatus::Ok);
        assert!((online - 0.5).abs() < 1e-12);
        assert_eq!(ms_optimal_online_value(m, 3, 20, &mut online), MsStatus::Ok);
        assert_eq!(ms_exact_offline_expectation(m, 3, 20, &mut offline), MsStatus::Ok);
        assert!(online <= offline + 1e-12);
        ms_model_free(m);
    }
}

#[test]
fn fit_through_abi() {
    let t = [100.0, 1000.0, 10000.0, 100000.0];
    let m: Vec<f64> = t.iter().map(|x: &f64| 2.0 * x.sqrt()).collect();
    let (mut s, mut a, mut r2) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(ms_fit_exponent(t.as_ptr(), m.as_ptr(), 4, &mut s, &mut a, &mut r2), MsStatus::Ok);
        assert!((s - 0.5).abs() < 1e-12);
        assert!((a - 2f64.ln()).abs() < 1e-9);
        assert_eq!(ms_fit_exponent(t.as_ptr(), m.as_ptr(), 3, &mut s, &mut a, &mut r2), MsStatus::Fit);
    }
}
