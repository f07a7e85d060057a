//! Exercises the C ABI through its exported functions.

use std::ffi::{c_char, CStr};
use std::ptr;

use hsmilne_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { hs_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, hs_last_error_length().min(511));
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn operator(n: usize, q0: f64) -> *mut HsOperator {
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { hs_operator_new(n, 6.0, q0, &mut op) }, HsStatus::Ok);
    assert!(!op.is_null());
    op
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(hs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn operator_round_trip() {
    let op = operator(6, 1.0);
    let mut n = 0usize;
    assert_eq!(unsafe { hs_operator_len(op, &mut n) }, HsStatus::Ok);
    assert_eq!(n, 216);
    let mut nodes = vec![0.0; 3 * n];
    let mut w = vec![0.0; n];
    assert_eq!(unsafe { hs_operator_nodes(op, nodes.as_mut_ptr(), nodes.len()) }, HsStatus::Ok);
    assert_eq!(unsafe { hs_operator_weights(op, w.as_mut_ptr(), w.len()) }, HsStatus::Ok);
    // Oracle: e₀ = (2π)^{-3/4} e^{-|v|²/4} sampled from the returned nodes is
    // annihilated by L (the diagonal is calibrated on it) and projects to (1, 0, 0, 0, 0).
    let e0: Vec<f64> = nodes
        .chunks_exact(3)
        .map(|v| (2.0 * std::f64::consts::PI).powf(-0.75) * (-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / 4.0).exp())
        .collect();
    let mass: f64 = e0.iter().zip(&w).map(|(e, w)| e * e * w).sum();
    assert!((mass - 1.0).abs() < 1e-10);
    let mut le = vec![0.0; n];
    assert_eq!(unsafe { hs_operator_apply(op, e0.as_ptr(), le.as_mut_ptr(), n) }, HsStatus::Ok);
    assert!(le.iter().all(|x| x.abs() < 1e-12));
    let mut c = [0.0; 5];
    assert_eq!(unsafe { hs_operator_project(op, e0.as_ptr(), n, c.as_mut_ptr()) }, HsStatus::Ok);
    assert!((c[0] - 1.0).abs() < 1e-12 && c[1..].iter().all(|x| x.abs() < 1e-12));
    let mut r = [1.0; 5];
    assert_eq!(unsafe { hs_operator_null_residuals(op, r.as_mut_ptr()) }, HsStatus::Ok);
    assert!(r[0] < 1e-12 && r.iter().all(|x| x.is_finite()));
    unsafe { hs_operator_free(op) };
}

#[test]
fn errors_are_reported_with_messages() {
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { hs_operator_new(6, 6.0, -1.0, &mut op) }, HsStatus::InvalidArgument);
    assert!(op.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { hs_operator_new(6, 6.0, 1.0, ptr::null_mut()) }, HsStatus::NullPointer);
    assert_eq!(last_error(), "out is null");
    let op = operator(6, 1.0);
    let f = [0.0; 10];
    let mut out = vec![0.0; 10];
    assert_eq!(unsafe { hs_operator_apply(op, f.as_ptr(), out.as_mut_ptr(), 10) }, HsStatus::DimensionMismatch);
    assert!(last_error().contains("expected length 216"));
    let mut n = 0;
    assert_eq!(unsafe { hs_operator_len(ptr::null(), &mut n) }, HsStatus::NullPointer);
    // Success clears the message.
    assert_eq!(unsafe { hs_operator_len(op, &mut n) }, HsStatus::Ok);
    assert_eq!(hs_last_error_length(), 0);
    // Truncation keeps the NUL terminator.
    assert_eq!(unsafe { hs_operator_len(ptr::null(), &mut n) }, HsStatus::NullPointer);
    let mut small = [1 as c_char; 4];
    assert_eq!(unsafe { hs_last_error_message(small.as_mut_ptr(), 4) }, 3);
    assert_eq!(small[3], 0);
    unsafe { hs_operator_free(op) };
    unsafe { hs_operator_free(ptr::null_mut()) };
}

#[test]
fn milne_limit_of_null_data() {
    let op = operator(8, 0.2);
    let mut solver = ptr::null_mut();
    assert_eq!(unsafe { hs_milne_new(op, 1.0, 2.0, 0.04, &mut solver) }, HsStatus::Ok);
    // The solver keeps the operator alive.
    unsafe { hs_operator_free(op) };
    let op = operator(8, 0.2);
    let mut n = 0;
    unsafe { hs_operator_len(op, &mut n) };
    let mut nodes = vec![0.0; 3 * n];
    unsafe { hs_operator_nodes(op, nodes.as_mut_ptr(), nodes.len()) };
    let h: Vec<f64> = nodes
        .chunks_exact(3)
        .map(|v| (2.0 * std::f64::consts::PI).powf(-0.75) * (-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / 4.0).exp())
        .collect();
    let mut lim = [0.0; 5];
    let mut iters = 0usize;
    assert_eq!(unsafe { hs_milne_solve(solver, h.as_ptr(), n, 1e-8, 500, lim.as_mut_ptr(), &mut iters) }, HsStatus::Ok, "{}", last_error());
    assert!((lim[0] - 1.0).abs() < 1e-5 && lim[1..].iter().all(|x| x.abs() < 1e-5), "{lim:?}");
    unsafe { hs_milne_free(solver) };
    // A truncated grid is rejected.
    let trunc = operator(16, 1.0);
    let mut s2 = ptr::null_mut();
    assert_eq!(unsafe { hs_milne_new(trunc, 1.0, 2.0, 0.04, &mut s2) }, HsStatus::Precondition);
    unsafe { hs_operator_free(trunc) };
    unsafe { hs_operator_free(op) };
}

#[test]
fn hitting_time_from_center() {
    let (c, x, v) = ([0.0; 3], [0.0; 3], [0.0, 2.0, 0.0]);
    let mut t = 0.0;
    assert_eq!(unsafe { hs_hitting_time(c.as_ptr(), 1.5, x.as_ptr(), v.as_ptr(), 0.1, &mut t) }, HsStatus::Ok);
    // |x − ε t v| = R  ⇒  t = R/(ε|v|).
    assert!((t - 1.5 / 0.2).abs() < 1e-12);
    let z = [0.0; 3];
    assert_eq!(unsafe { hs_hitting_time(c.as_ptr(), 1.5, x.as_ptr(), z.as_ptr(), 0.1, &mut t) }, HsStatus::InvalidArgument);
    assert_eq!(unsafe { hs_hitting_time(ptr::null(), 1.5, x.as_ptr(), v.as_ptr(), 0.1, &mut t) }, HsStatus::NullPointer);
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/hsmilne.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["hs_operator_new", "hs_operator_free", "hs_milne_solve", "hs_last_error_message", "HS_STATUS_DIMENSION_MISMATCH"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Compile a translation unit against the header when a C compiler is present.
    let Ok(cc) = which_cc() else { return };
    let dir = std::env::temp_dir().join(format!("hsmilne-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(&src, "#include \"hsmilne.h\"\nint main(void) { HsOperator *op = 0; HsStatus s = hs_operator_new(6, 6.0, 1.0, &op); hs_operator_free(op); return (int)s; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
