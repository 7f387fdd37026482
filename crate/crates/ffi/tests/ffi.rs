use std::ffi::{CStr, CString};
use std::ptr;

use biharmonic_ieti_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bih_last_error_message()).to_string_lossy().into_owned() }
}

fn builtin(name: &str, splits: u32) -> *mut BihDomain {
    let name = CString::new(name).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { bih_domain_builtin(name.as_ptr(), splits, &mut d) }, BihStatus::Ok);
    assert!(!d.is_null());
    d
}

#[test]
fn run_two_squares_with_oracle() {
    let d = builtin("two_squares", 0);
    let mut n = 0usize;
    assert_eq!(unsafe { bih_domain_num_patches(d, &mut n) }, BihStatus::Ok);
    assert_eq!(n, 2);

    let opts = BihRunOptions { oracle: 1, tol: 1e-12, ..bih_default_run_options() };
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { bih_run(d, &opts, &mut r) }, BihStatus::Ok);
    let mut s = BihSummary::default();
    assert_eq!(unsafe { bih_result_summary(r, &mut s) }, BihStatus::Ok);
    assert_eq!(s.converged, 1);
    assert_eq!(s.patches, 2);
    assert!(s.n_lambda > 0 && s.kappa >= 1.0);
    assert!(s.oracle_discrepancy < 1e-8);
    assert!(s.h2_error.is_nan());

    let mut len = 0usize;
    assert_eq!(unsafe { bih_result_patch_coeffs(r, 1, ptr::null_mut(), 0, &mut len) }, BihStatus::Ok);
    assert_eq!(len, 100); // (2^3 + 2)^2 at p = 2, r = 3
    let mut buf = vec![0.0; len];
    assert_eq!(unsafe { bih_result_patch_coeffs(r, 1, buf.as_mut_ptr(), len, &mut len) }, BihStatus::Ok);
    assert!(buf.iter().any(|v| *v != 0.0));
    assert_eq!(unsafe { bih_result_patch_coeffs(r, 1, buf.as_mut_ptr(), 3, &mut len) }, BihStatus::InvalidArgument);
    assert_eq!(unsafe { bih_result_patch_coeffs(r, 2, buf.as_mut_ptr(), len, &mut len) }, BihStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));

    unsafe {
        bih_result_free(r);
        bih_domain_free(d);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("moon").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { bih_domain_builtin(bad.as_ptr(), 1, &mut d) }, BihStatus::Geometry);
    assert!(d.is_null());
    assert!(last_error().contains("moon"));

    assert_eq!(unsafe { bih_domain_builtin(ptr::null(), 1, &mut d) }, BihStatus::NullPointer);
    assert_eq!(unsafe { bih_domain_num_patches(ptr::null(), ptr::null_mut()) }, BihStatus::NullPointer);

    let d = builtin("unit_square", 2);
    let opts = BihRunOptions { degree: 1, ..bih_default_run_options() };
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { bih_run(d, &opts, &mut r) }, BihStatus::InvalidArgument);
    assert!(r.is_null());

    let opts = BihRunOptions { max_iter: 1, precond: BihPrecond::None, ..bih_default_run_options() };
    assert_eq!(unsafe { bih_run(d, &opts, &mut r) }, BihStatus::NotConverged);
    assert!(!r.is_null());
    let mut s = BihSummary::default();
    assert_eq!(unsafe { bih_result_summary(r, &mut s) }, BihStatus::Ok);
    assert_eq!(s.converged, 0);
    assert!(s.h2_error.is_finite());
    unsafe {
        bih_result_free(r);
        bih_domain_free(d);
        bih_domain_free(ptr::null_mut());
        bih_result_free(ptr::null_mut());
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("mp.json").to_str().unwrap()).unwrap();
    let d = builtin("lamella", 1);
    assert_eq!(unsafe { bih_domain_save(d, path.as_ptr()) }, BihStatus::Ok);
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { bih_domain_load(path.as_ptr(), &mut e) }, BihStatus::Ok);
    let (mut a, mut b) = (0, 0);
    unsafe {
        bih_domain_num_patches(d, &mut a);
        bih_domain_num_patches(e, &mut b);
    }
    assert_eq!(a, b);

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { bih_run(e, ptr::null(), &mut r) }, BihStatus::Ok);
    unsafe {
        bih_result_free(r);
        bih_domain_free(d);
        bih_domain_free(e);
    }

    let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
    let mut f = ptr::null_mut();
    let st = unsafe { bih_domain_load(missing.as_ptr(), &mut f) };
    assert!(matches!(st, BihStatus::Io | BihStatus::Geometry));
    assert!(!last_error().is_empty());
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/biharmonic_ieti.h");
    for f in [
        "bih_domain_builtin",
        "bih_domain_load",
        "bih_domain_save",
        "bih_domain_free",
        "bih_domain_num_patches",
        "bih_run",
        "bih_result_summary",
        "bih_result_patch_coeffs",
        "bih_result_free",
        "bih_last_error_message",
        "BIH_STATUS_NOT_CONVERGED",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/biharmonic_ieti.h");
    let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() else {
        eprintln!("no C compiler available");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
