use std::ffi::CStr;
use std::ptr;

use interference_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(itf_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn linear_in_means_estimands_match_closed_form() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(itf_model_new_linear_in_means(40, 2, 1.0, 0.7, 0.3, &mut model), ItfStatus::Ok);
        assert_eq!(itf_model_units(model), 40);
        let mut design = ptr::null_mut();
        assert_eq!(itf_design_new_bernoulli_constant(40, 0.5, &mut design), ItfStatus::Ok);
        let mut out = std::mem::zeroed::<ItfEstimands>();
        assert_eq!(itf_estimands(model, design, ItfMethod::Auto as u32, 0, 0, &mut out), ItfStatus::Ok);
        assert_eq!(out.method, ItfMethod::Binomial as u32);
        assert!((out.ade - 0.7).abs() < 1e-12);
        assert!((out.aie - 0.3).abs() < 1e-12);
        assert!(out.has_inf);
        assert!((out.inf - 1.0).abs() < 1e-12);
        itf_design_free(design);
        itf_model_free(model);
    }
}

#[test]
fn diverging_model_exact() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(itf_model_new_diverging(8, 0.5, &mut model), ItfStatus::Ok);
        let mut design = ptr::null_mut();
        let pi = [0.5; 8];
        assert_eq!(itf_design_new_bernoulli(8, pi.as_ptr(), &mut design), ItfStatus::Ok);
        let mut out = std::mem::zeroed::<ItfEstimands>();
        assert_eq!(itf_estimands(model, design, ItfMethod::Exact as u32, 0, 0, &mut out), ItfStatus::Ok);
        let s = (8.0f64 * 0.25).sqrt();
        assert!((out.aie - 7.0 / s).abs() < 1e-10);
        itf_design_free(design);
        itf_model_free(model);
    }
}

#[test]
fn two_stage_has_no_inf_and_binomial_is_infeasible() {
    unsafe {
        let alpha = [0.0; 4];
        let beta = [1.0, 2.0, 3.0, 4.0];
        let mut nu = [0.0; 16];
        nu[1] = 0.5; // unit 0 responds to unit 1
        let mut model = ptr::null_mut();
        assert_eq!(
            itf_model_new_saturated_linear(4, alpha.as_ptr(), beta.as_ptr(), nu.as_ptr(), &mut model),
            ItfStatus::Ok
        );
        let mut design = ptr::null_mut();
        assert_eq!(itf_design_new_two_stage(4, 2, 0.5, &mut design), ItfStatus::Ok);
        let mut out = std::mem::zeroed::<ItfEstimands>();
        assert_eq!(itf_estimands(model, design, ItfMethod::Exact as u32, 0, 0, &mut out), ItfStatus::Ok);
        assert!(!out.has_inf);
        assert!((out.ade - 2.5).abs() < 1e-12);
        assert!((out.aie - 0.125).abs() < 1e-12);
        assert_eq!(
            itf_estimands(model, design, ItfMethod::Binomial as u32, 0, 0, &mut out),
            ItfStatus::Infeasible
        );
        assert!(!last_error().is_empty());
        itf_design_free(design);
        itf_model_free(model);
    }
}

#[test]
fn horvitz_thompson_by_substitution() {
    unsafe {
        let w = [1u8, 0];
        let y = [2.0, 4.0];
        let pi = [0.5, 0.5];
        let mut est = 0.0;
        assert_eq!(itf_ht_ade(2, w.as_ptr(), y.as_ptr(), pi.as_ptr(), &mut est), ItfStatus::Ok);
        assert_eq!(est, (2.0 / 0.5 - 4.0 / 0.5) / 2.0);
        let offsets = [0usize, 1, 2];
        let neighbors = [1usize, 0];
        assert_eq!(
            itf_ht_aie(2, w.as_ptr(), y.as_ptr(), pi.as_ptr(), offsets.as_ptr(), neighbors.as_ptr(), &mut est),
            ItfStatus::Ok
        );
        assert_eq!(est, 2.0);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut design = ptr::null_mut();
        assert_eq!(itf_design_new_bernoulli_constant(3, 1.5, &mut design), ItfStatus::InvalidArgument);
        assert!(design.is_null());
        assert!(last_error().contains("1.5"), "{}", last_error());
        assert_eq!(itf_design_new_two_stage(6, 2, 0.5, &mut design), ItfStatus::InvalidArgument);
        assert_eq!(itf_model_new_fig1(4, 10, 2, ptr::null_mut()), ItfStatus::InvalidArgument);
        let mut model = ptr::null_mut();
        assert_eq!(itf_model_new_fig1(2, 10, 2, ptr::null_mut()), ItfStatus::NullPointer);
        assert_eq!(itf_model_new_fig1(2, 10, 2, &mut model), ItfStatus::Ok);
        assert!(last_error().is_empty());
        let mut out = std::mem::zeroed::<ItfEstimands>();
        assert_eq!(itf_estimands(model, ptr::null(), 0, 0, 0, &mut out), ItfStatus::NullPointer);
        assert_eq!(itf_estimands(model, ptr::null(), 0, 0, 0, &mut out), ItfStatus::NullPointer);
        let bad_w = [2u8, 0];
        let y = [1.0, 1.0];
        let pi = [0.5, 0.5];
        let mut est = 0.0;
        assert_eq!(itf_ht_ade(2, bad_w.as_ptr(), y.as_ptr(), pi.as_ptr(), &mut est), ItfStatus::InvalidArgument);
        itf_model_free(model);
        itf_model_free(ptr::null_mut());
        itf_design_free(ptr::null_mut());
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(itf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/interference.h")).unwrap();
    for name in [
        "itf_last_error",
        "itf_version",
        "itf_model_new_linear_in_means",
        "itf_model_new_fig1",
        "itf_model_new_diverging",
        "itf_model_new_saturated_linear",
        "itf_model_units",
        "itf_model_free",
        "itf_design_new_bernoulli",
        "itf_design_new_bernoulli_constant",
        "itf_design_new_two_stage",
        "itf_design_free",
        "itf_estimands",
        "itf_ht_ade",
        "itf_ht_aie",
        "ITF_METHOD_MONTE_CARLO",
        "typedef struct ItfModel ItfModel",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
