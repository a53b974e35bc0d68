//! C ABI over the `muntz` crate: opaque handles, status codes and a
//! thread-local last-error message.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use muntz::biorthogonal::{dual_family_auto, BiorthogonalFamily};
use muntz::exponents::{generate_exponents, ExponentKind, ExponentSequence, DEFAULT_MIN_GAP};
use muntz::muntz_space::{recover_coefficients, Function, MuntzSeries};
use muntz::operators::{default_selection, dilation_operator, synthesis_certificate, CertificateTolerances};
use muntz::quadrature::QuadratureSpec;
use muntz::MuntzError;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuntzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    PrecisionInsufficient = 3,
    Domain = 4,
    NonMember = 5,
    Io = 6,
    Panic = 7,
}

/// Validated exponent sequence.
pub struct MuntzExponents(ExponentSequence);

/// Biorthogonal family of a truncation.
pub struct MuntzFamily(BiorthogonalFamily);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &MuntzError) -> MuntzStatus {
    match e {
        MuntzError::PrecisionInsufficient { .. } | MuntzError::NotPositiveDefinite(_) => MuntzStatus::PrecisionInsufficient,
        MuntzError::Domain(_) | MuntzError::Convergence(_) | MuntzError::Quadrature { .. } => MuntzStatus::Domain,
        MuntzError::NonMember(_) => MuntzStatus::NonMember,
        MuntzError::Io { .. } => MuntzStatus::Io,
        _ => MuntzStatus::InvalidArgument,
    }
}

/// Run `f`, recording any error or panic as the last error.
fn guard(f: impl FnOnce() -> Result<(), (MuntzStatus, String)>) -> MuntzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MuntzStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            MuntzStatus::Panic
        }
    }
}

fn lift<T>(r: muntz::Result<T>) -> Result<T, (MuntzStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MuntzStatus, String) {
    (MuntzStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (MuntzStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn muntz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn muntz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generate `n` exponents of kind `"power"`, `"integers"` (parameter `p`) or
/// `"lacunary"` (parameter `q`).
///
/// # Safety
/// `kind` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn muntz_exponents_generate(
    kind: *const c_char,
    param: f64,
    n: usize,
    out: *mut *mut MuntzExponents,
) -> MuntzStatus {
    guard(|| {
        if kind.is_null() {
            return Err(null("kind"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let tag = CStr::from_ptr(kind).to_str().map_err(|e| (MuntzStatus::InvalidArgument, e.to_string()))?;
        let k = lift(ExponentKind::parse(tag))?;
        let name = if k == ExponentKind::Lacunary { "q" } else { "p" };
        let params = [(name.to_string(), param)].into_iter().collect();
        let seq = lift(generate_exponents(k, &params, n))?;
        *out = Box::into_raw(Box::new(MuntzExponents(seq)));
        Ok(())
    })
}

/// Wrap `len` strictly increasing positive exponents.
///
/// # Safety
/// `values` must point to `len` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn muntz_exponents_from_values(
    values: *const f64,
    len: usize,
    out: *mut *mut MuntzExponents,
) -> MuntzStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let seq = lift(ExponentSequence::custom(v, DEFAULT_MIN_GAP))?;
        *out = Box::into_raw(Box::new(MuntzExponents(seq)));
        Ok(())
    })
}

/// Number of stored exponents.
///
/// # Safety
/// `e` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn muntz_exponents_len(e: *const MuntzExponents) -> usize {
    e.as_ref().map_or(0, |e| e.0.len())
}

/// # Safety
/// `e` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn muntz_exponents_free(e: *mut MuntzExponents) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Biorthogonal family of the first `n` exponents at `bits` of precision,
/// raising precision up to `4 * bits` when needed.
///
/// # Safety
/// `e` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn muntz_family_new(
    e: *const MuntzExponents,
    n: usize,
    bits: u32,
    out: *mut *mut MuntzFamily,
) -> MuntzStatus {
    guard(|| {
        let e = deref(e, "exponents")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let fam = lift(dual_family_auto(&e.0, n, bits, bits.saturating_mul(4)))?;
        *out = Box::into_raw(Box::new(MuntzFamily(fam)));
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn muntz_family_free(f: *mut MuntzFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Truncation `N` of a family; 0 for null.
///
/// # Safety
/// `f` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn muntz_family_truncation(f: *const MuntzFamily) -> usize {
    f.as_ref().map_or(0, |f| f.0.truncation())
}

/// `‖r_n‖` for `1 ≤ n ≤ N`, rounded to double.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn muntz_family_norm(f: *const MuntzFamily, n: usize, out: *mut f64) -> MuntzStatus {
    guard(|| {
        let f = deref(f, "family")?;
        if out.is_null() {
            return Err(null("out"));
        }
        lift(f.0.check_index(n))?;
        *out = f.0.norms[n - 1].to_f64();
        Ok(())
    })
}

/// Distance from `t^{λ_n}` to the span of the other `N - 1` monomials.
///
/// # Safety
/// `f` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn muntz_family_distance(f: *const MuntzFamily, n: usize, out: *mut f64) -> MuntzStatus {
    guard(|| {
        let f = deref(f, "family")?;
        if out.is_null() {
            return Err(null("out"));
        }
        lift(f.0.check_index(n))?;
        *out = f.0.projection_deficit[n - 1].to_f64();
        Ok(())
    })
}

/// Coefficients of `r_n` in the monomials `t^{λ_1..λ_N}`, written to `out[0..N]`.
///
/// # Safety
/// `f` must be a live handle and `out` point to room for `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn muntz_family_dual_coefficients(f: *const MuntzFamily, n: usize, out: *mut f64) -> MuntzStatus {
    guard(|| {
        let f = deref(f, "family")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = lift(f.0.dual_coefficients(n))?;
        let dst = std::slice::from_raw_parts_mut(out, c.len());
        for (d, v) in dst.iter_mut().zip(&c) {
            *d = v.to_f64();
        }
        Ok(())
    })
}

/// Exact `⟨f, r_n⟩` for the real finite series `Σ coeffs[i] t^{exponents[i]}`,
/// written to `out[0..N]`.
///
/// # Safety
/// `exponents` and `coeffs` must point to `len` doubles, `out` to `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn muntz_family_recover(
    f: *const MuntzFamily,
    exponents: *const f64,
    coeffs: *const f64,
    len: usize,
    out: *mut f64,
) -> MuntzStatus {
    guard(|| {
        let f = deref(f, "family")?;
        if exponents.is_null() || coeffs.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let mut pairs: Vec<(f64, f64)> = std::slice::from_raw_parts(exponents, len)
            .iter()
            .copied()
            .zip(std::slice::from_raw_parts(coeffs, len).iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (e, c): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let lam = lift(ExponentSequence::custom(e, DEFAULT_MIN_GAP))?;
        let series = lift(MuntzSeries::from_real(lam, &c, f.0.precision_bits()))?;
        let quad = QuadratureSpec::for_precision(f.0.precision_bits());
        let rec = lift(recover_coefficients(&Function::from(series), &f.0, &quad))?;
        let dst = std::slice::from_raw_parts_mut(out, rec.coefficients.len());
        for (d, v) in dst.iter_mut().zip(&rec.coefficients) {
            *d = v.re.to_f64();
        }
        Ok(())
    })
}

/// Spectral-synthesis certificate of the dilation `f(x) ↦ f(ρx)` truncated to
/// the family, as a JSON string to be released with `muntz_string_free`.
///
/// # Safety
/// `f` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn muntz_certify_dilation(
    f: *const MuntzFamily,
    rho: f64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> MuntzStatus {
    guard(|| {
        let f = deref(f, "family")?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let fam = &f.0;
        let n = fam.truncation();
        let bits = fam.precision_bits();
        let op = lift(dilation_operator(&fam.lambda, rho, n, bits))?;
        let tol = CertificateTolerances::for_precision(bits);
        let cert = lift(synthesis_certificate(&op, fam, &tol, default_selection(n, seed)))?;
        let json = serde_json::to_string(&cert).map_err(|e| (MuntzStatus::Io, e.to_string()))?;
        let c = CString::new(json).map_err(|e| (MuntzStatus::Io, e.to_string()))?;
        *out_json = c.into_raw();
        Ok(())
    })
}
