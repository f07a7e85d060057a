//! C ABI for the `hsmilne` workbench.
//!
//! Objects cross the boundary as opaque handles ([`HsOperator`],
//! [`HsMilneSolver`]) created by `*_new` functions and released by the
//! matching `*_free`. Every fallible function returns an [`HsStatus`]; on
//! failure a message is stored per thread and can be copied out with
//! [`hs_last_error_message`]. Arrays are passed as pointer plus length, and
//! lengths are checked against the handle's grid. Panics never unwind into
//! the caller: they are reported as [`HsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use hsmilne::collision_core::{assemble_collision, project_null, CollisionParams, KernelOperator, Normalization, VelocityGrid};
use hsmilne::domain_tracer::{hitting_time, ConvexDomain};
use hsmilne::layer_geometry::LayerGeometry;
use hsmilne::milne_solver::{extract_limit, EtaGridSpec, MilneSolver};
use hsmilne::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument violates a documented precondition.
    InvalidArgument = 2,
    /// An array length does not match the handle's grid.
    DimensionMismatch = 3,
    /// The operation is not available for this input (e.g. a truncated grid).
    Precondition = 4,
    /// An iterative method did not converge.
    NonConvergence = 5,
    /// Any other numerical failure.
    Numerical = 6,
    /// A panic was caught at the boundary.
    Panic = 7,
}

/// Linearized collision operator on a velocity grid.
pub struct HsOperator {
    op: Arc<KernelOperator>,
}

/// ε-Milne solver bound to an operator and a layer geometry.
pub struct HsMilneSolver {
    solver: MilneSolver,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) | Error::ZeroVelocity => HsStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => HsStatus::DimensionMismatch,
        Error::Precondition(_) => HsStatus::Precondition,
        Error::NonConvergence { .. } => HsStatus::NonConvergence,
        _ => HsStatus::Numerical,
    }
}

struct Failure(HsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            HsStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller promises `p` is either null or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| Failure(HsStatus::NullPointer, format!("{name} is null")))
}

fn slice<'a>(p: *const f64, len: usize, expected: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len != expected {
        return Err(Failure(HsStatus::DimensionMismatch, format!("{name}: expected length {expected}, found {len}")));
    }
    non_null(p, name)?;
    // SAFETY: non-null and, per the caller's contract, valid for `len` reads.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a>(p: *mut f64, len: usize, expected: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if len != expected {
        return Err(Failure(HsStatus::DimensionMismatch, format!("{name}: expected length {expected}, found {len}")));
    }
    non_null(p, name)?;
    // SAFETY: non-null and, per the caller's contract, valid for `len` writes.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn vec3(p: *const f64, name: &str) -> Result<[f64; 3], Failure> {
    let s = slice(p, 3, 3, name)?;
    Ok([s[0], s[1], s[2]])
}

fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure(HsStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and, per the caller's contract, valid for one write.
    unsafe { p.write(value) };
    Ok(())
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(s) => s,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Length in bytes (without the terminating NUL) of the calling thread's last error message.
#[no_mangle]
pub extern "C" fn hs_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the calling thread's last error message into `buf` (capacity `cap`
/// bytes, including the NUL), truncating if needed. Returns the number of
/// bytes written, excluding the NUL. The message is empty after a success.
///
/// # Safety
/// `buf` must be null or valid for `cap` byte writes.
#[no_mangle]
pub unsafe extern "C" fn hs_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    if buf.is_null() || cap == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let mut n = msg.len().min(cap - 1);
        // Do not split a UTF-8 sequence.
        while !msg.is_char_boundary(n) {
            n -= 1;
        }
        // SAFETY: `buf` is valid for `cap > n` writes per the contract.
        unsafe {
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        n
    })
}

/// Assembles the linearized collision operator on a Gauss–Hermite grid with
/// `per_axis_count` nodes per axis, truncation parameter `v_max`, and
/// collision strength `q0` (unit-mass Maxwellian).
///
/// # Safety
/// `out` must be null or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hs_operator_new(per_axis_count: usize, v_max: f64, q0: f64, out: *mut *mut HsOperator) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(HsStatus::NullPointer, "out is null".into()));
        }
        let grid = Arc::new(VelocityGrid::new(per_axis_count, v_max)?);
        let params = CollisionParams::new(q0, Normalization::UnitMass)?;
        let op = assemble_collision(grid, &params)?;
        write_out(out, Box::into_raw(Box::new(HsOperator { op: Arc::new(op) })), "out")
    })
}

/// Releases an operator. Null is ignored. Solvers created from the operator
/// remain valid.
///
/// # Safety
/// `op` must be null or a handle from [`hs_operator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_operator_free(op: *mut HsOperator) {
    if !op.is_null() {
        // SAFETY: ownership returns from the caller per the contract.
        drop(unsafe { Box::from_raw(op) });
    }
}

/// Number of velocity nodes.
///
/// # Safety
/// `op` must be a live handle or null; `out` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_operator_len(op: *const HsOperator, out: *mut usize) -> HsStatus {
    guard(|| write_out(out, non_null(op, "op")?.op.len(), "out"))
}

/// Copies the velocity nodes as `[v₀ˣ, v₀ʸ, v₀ᶻ, v₁ˣ, …]` into `out` (length `3·len`).
///
/// # Safety
/// `op` must be a live handle or null; `out` null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hs_operator_nodes(op: *const HsOperator, out: *mut f64, len: usize) -> HsStatus {
    guard(|| {
        let op = &non_null(op, "op")?.op;
        let out = slice_mut(out, len, 3 * op.len(), "out")?;
        for (dst, v) in out.chunks_exact_mut(3).zip(&op.grid.nodes) {
            dst.copy_from_slice(v);
        }
        Ok(())
    })
}

/// Copies the quadrature weights into `out` (length `len`).
///
/// # Safety
/// `op` must be a live handle or null; `out` null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hs_operator_weights(op: *const HsOperator, out: *mut f64, len: usize) -> HsStatus {
    guard(|| {
        let op = &non_null(op, "op")?.op;
        slice_mut(out, len, op.len(), "out")?.copy_from_slice(&op.grid.weights);
        Ok(())
    })
}

/// Applies `L` to the grid function `f`, writing `L f` into `out`; both have length `len`.
///
/// # Safety
/// `op` must be a live handle or null; `f` and `out` null or valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn hs_operator_apply(op: *const HsOperator, f: *const f64, out: *mut f64, len: usize) -> HsStatus {
    guard(|| {
        let op = &non_null(op, "op")?.op;
        let f = slice(f, len, op.len(), "f")?;
        let lf = op.apply_l(f)?;
        slice_mut(out, len, op.len(), "out")?.copy_from_slice(&lf);
        Ok(())
    })
}

/// Relative null-space residuals `‖L e_k‖/‖e_k‖`, written to `out[0..5]`.
///
/// # Safety
/// `op` must be a live handle or null; `out` null or valid for 5 writes.
#[no_mangle]
pub unsafe extern "C" fn hs_operator_null_residuals(op: *const HsOperator, out: *mut f64) -> HsStatus {
    guard(|| {
        let op = &non_null(op, "op")?.op;
        slice_mut(out, 5, 5, "out")?.copy_from_slice(&op.null_residuals());
        Ok(())
    })
}

/// Coefficients `(a, b₁, b₂, b₃, c)` of the null-space projection of `f`
/// (length `len`) on the orthonormal basis, written to `coeffs[0..5]`.
///
/// # Safety
/// `op` must be a live handle or null; `f` null or valid for `len` reads;
/// `coeffs` null or valid for 5 writes.
#[no_mangle]
pub unsafe extern "C" fn hs_operator_project(op: *const HsOperator, f: *const f64, len: usize, coeffs: *mut f64) -> HsStatus {
    guard(|| {
        let op = &non_null(op, "op")?.op;
        let f = slice(f, len, op.len(), "f")?;
        let (state, _) = project_null(f, &op.basis)?;
        slice_mut(coeffs, 5, 5, "coeffs")?.copy_from_slice(&state.to_array());
        Ok(())
    })
}

/// Creates an ε-Milne solver for a layer with principal radii `r1`, `r2` and
/// Knudsen number `epsilon`, using the default η grid. The operator must live
/// on a full tensor grid.
///
/// # Safety
/// `op` must be a live handle or null; `out` null or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hs_milne_new(op: *const HsOperator, r1: f64, r2: f64, epsilon: f64, out: *mut *mut HsMilneSolver) -> HsStatus {
    guard(|| {
        let op = non_null(op, "op")?.op.clone();
        if out.is_null() {
            return Err(Failure(HsStatus::NullPointer, "out is null".into()));
        }
        let geom = LayerGeometry::new(r1, r2, epsilon)?;
        let solver = MilneSolver::new(op, geom, &EtaGridSpec::default())?;
        write_out(out, Box::into_raw(Box::new(HsMilneSolver { solver })), "out")
    })
}

/// Releases a solver. Null is ignored.
///
/// # Safety
/// `solver` must be null or a handle from [`hs_milne_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_milne_free(solver: *mut HsMilneSolver) {
    if !solver.is_null() {
        // SAFETY: ownership returns from the caller per the contract.
        drop(unsafe { Box::from_raw(solver) });
    }
}

/// Solves the homogeneous ε-Milne problem with in-flow data `h` (length
/// `len`, only entries with `v_η > 0` are used) and writes the far-field
/// limit `(a, b₁, b₂, b₃, c)` to `limit[0..5]` and the Krylov iteration count
/// to `iterations` (which may be null).
///
/// # Safety
/// `solver` must be a live handle or null; `h` null or valid for `len` reads;
/// `limit` null or valid for 5 writes; `iterations` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_milne_solve(
    solver: *const HsMilneSolver,
    h: *const f64,
    len: usize,
    tol: f64,
    max_iter: usize,
    limit: *mut f64,
    iterations: *mut usize,
) -> HsStatus {
    guard(|| {
        let solver = &non_null(solver, "solver")?.solver;
        let h = slice(h, len, solver.operator().len(), "h")?;
        let limit = slice_mut(limit, 5, 5, "limit")?;
        let sol = solver.solve(h, None, 0.0, tol, max_iter)?;
        let lim = extract_limit(&sol, tol)?;
        limit.copy_from_slice(&lim.g_l.to_array());
        if !iterations.is_null() {
            // SAFETY: non-null and valid for one write per the contract.
            unsafe { iterations.write(sol.diagnostics.iterations) };
        }
        Ok(())
    })
}

/// Backward hitting time of the ball with `center[0..3]` and `radius` from
/// `x[0..3]` along `−ε v`, written to `out`.
///
/// # Safety
/// `center`, `x`, `v` must be null or valid for 3 reads; `out` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_hitting_time(center: *const f64, radius: f64, x: *const f64, v: *const f64, epsilon: f64, out: *mut f64) -> HsStatus {
    guard(|| {
        let domain = ConvexDomain::ball(vec3(center, "center")?, radius)?;
        let t = hitting_time(&domain, vec3(x, "x")?, vec3(v, "v")?, epsilon)?;
        write_out(out, t, "out")
    })
}
