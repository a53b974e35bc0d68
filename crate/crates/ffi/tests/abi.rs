use std::ffi::{CStr, CString};
use std::ptr;

use muntz_ffi::*;

fn last_error() -> String {
    let p = muntz_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn family_of_two_monomials() {
    unsafe {
        let mut e = ptr::null_mut();
        let vals = [1.0, 2.0];
        assert_eq!(muntz_exponents_from_values(vals.as_ptr(), 2, &mut e), MuntzStatus::Ok);
        assert_eq!(muntz_exponents_len(e), 2);
        let mut f = ptr::null_mut();
        assert_eq!(muntz_family_new(e, 2, 128, &mut f), MuntzStatus::Ok);
        assert_eq!(muntz_family_truncation(f), 2);

        let mut c = [0.0; 2];
        assert_eq!(muntz_family_dual_coefficients(f, 1, c.as_mut_ptr()), MuntzStatus::Ok);
        assert_eq!(c, [48.0, -60.0]);
        // D_1 = 1/(4√3), ‖r_1‖ = 1/D_1
        let (mut d, mut r) = (0.0, 0.0);
        assert_eq!(muntz_family_distance(f, 1, &mut d), MuntzStatus::Ok);
        assert_eq!(muntz_family_norm(f, 1, &mut r), MuntzStatus::Ok);
        assert!((d - 1.0 / (4.0 * 3f64.sqrt())).abs() < 1e-15);
        assert!((d * r - 1.0).abs() < 1e-15);

        // t³ has ⟨t³, r_1⟩ = 48/5 - 60/6, ⟨t³, r_2⟩ = -60/5 + 80/6
        let (ex, co) = ([3.0], [1.0]);
        let mut out = [0.0; 2];
        assert_eq!(muntz_family_recover(f, ex.as_ptr(), co.as_ptr(), 1, out.as_mut_ptr()), MuntzStatus::Ok);
        assert!((out[0] + 0.4).abs() < 1e-15 && (out[1] - 4.0 / 3.0).abs() < 1e-15);

        let mut json = ptr::null_mut();
        assert_eq!(muntz_certify_dilation(f, 0.5, 0, &mut json), MuntzStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        muntz_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["status"], "pass");
        let defect: f64 = v["normality"]["value"].as_str().unwrap().parse().unwrap();
        assert!((defect - 1.875f64.sqrt()).abs() < 1e-12);

        muntz_family_free(f);
        muntz_exponents_free(e);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut e = ptr::null_mut();
        let kind = CString::new("power").unwrap();
        assert_eq!(muntz_exponents_generate(kind.as_ptr(), 0.5, 3, &mut e), MuntzStatus::InvalidArgument);
        assert!(last_error().contains("p must exceed 1"));
        assert!(e.is_null());

        let bad = CString::new("fibonacci").unwrap();
        assert_eq!(muntz_exponents_generate(bad.as_ptr(), 2.0, 3, &mut e), MuntzStatus::InvalidArgument);

        assert_eq!(muntz_exponents_generate(kind.as_ptr(), 2.0, 4, &mut e), MuntzStatus::Ok);
        let mut f = ptr::null_mut();
        assert_eq!(muntz_family_new(e, 4, 128, &mut f), MuntzStatus::Ok);
        let mut x = 0.0;
        assert_eq!(muntz_family_norm(f, 5, &mut x), MuntzStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));
        assert_eq!(muntz_family_norm(ptr::null(), 1, &mut x), MuntzStatus::NullPointer);
        assert_eq!(muntz_family_truncation(ptr::null()), 0);
        muntz_family_free(f);
        muntz_exponents_free(e);
        muntz_family_free(ptr::null_mut());
        muntz_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/muntz.h");
    for name in [
        "muntz_last_error",
        "muntz_string_free",
        "muntz_exponents_generate",
        "muntz_exponents_from_values",
        "muntz_exponents_len",
        "muntz_exponents_free",
        "muntz_family_new",
        "muntz_family_free",
        "muntz_family_truncation",
        "muntz_family_norm",
        "muntz_family_distance",
        "muntz_family_dual_coefficients",
        "muntz_family_recover",
        "muntz_certify_dilation",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("MUNTZ_STATUS_OK = 0"));
}
