//! C ABI over the core crate. Fields and band stacks cross the boundary as
//! opaque handles; every call returns a status code and leaves a message
//! retrievable with `pls_last_error_message` on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use parabolic_ls::cubes::{bmo_norm, overline_bmo_norm, BmoForm, CubeSearchPolicy};
use parabolic_ls::grid::{AnisotropicGrid, SampledField};
use parabolic_ls::harness::{run_check, Check, HarnessConfig};
use parabolic_ls::io::{read_field, write_field};
use parabolic_ls::littlewood_paley::{
    build_partition, decompose, lizorkin_triebel_norm, BandStack, BumpProfile,
};
use parabolic_ls::norms::{parabolic_sobolev_norm, SobolevOrder};
use parabolic_ls::{Error, Exponent};

/// Status of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainError = 3,
    Io = 4,
    Panic = 5,
}

/// BMO variant selected by `pls_bmo_norm`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlsBmoForm {
    /// Mean oscillation about the cube average.
    Oscillation = 0,
    /// Mean oscillation about the best constant.
    Inf = 1,
    /// Inf form plus the L1 norm.
    Overline = 2,
}

/// Sampled field with its grid.
pub struct PlsField(SampledField);

/// Dyadic bands of a field.
pub struct PlsBandStack(BandStack);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlsStatus {
    match e {
        Error::Io(_) | Error::Format(_) | Error::Json(_) => PlsStatus::Io,
        Error::InvalidParameter(_) | Error::InvalidGrid(_) | Error::GridMismatch(_) => {
            PlsStatus::InvalidArgument
        }
        _ => PlsStatus::DomainError,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (PlsStatus, String)>) -> PlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PlsStatus::Panic
        }
    }
}

fn core<T>(r: parabolic_ls::Result<T>) -> Result<T, (PlsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PlsStatus, String) {
    (PlsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn field_ref<'a>(f: *const PlsField) -> Result<&'a SampledField, (PlsStatus, String)> {
    f.as_ref().map(|f| &f.0).ok_or_else(|| null("field"))
}

unsafe fn slice<'a, T>(
    p: *const T,
    len: usize,
    what: &str,
) -> Result<&'a [T], (PlsStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_of<'a>(p: *const c_char) -> Result<&'a Path, (PlsStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| (PlsStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), (PlsStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

fn exponent(p: f64) -> Result<Exponent, (PlsStatus, String)> {
    core(Exponent::new(p))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a field from `len` values in row-major order (time fastest).
/// `shape` has `n + 1` entries and `box_len` has `n`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pls_field_new(
    n: usize,
    shape: *const usize,
    box_len: *const f64,
    time_len: f64,
    periodic: bool,
    values: *const f64,
    len: usize,
    out: *mut *mut PlsField,
) -> PlsStatus {
    guard(|| {
        let shape = slice(shape, n + 1, "shape")?.to_vec();
        let box_len = slice(box_len, n, "box_len")?.to_vec();
        let values = slice(values, len, "values")?.to_vec();
        let g = core(AnisotropicGrid::new(n, box_len, time_len, shape))?;
        let g = if periodic { g } else { g.bounded() };
        let f = core(SampledField::new(g, values))?;
        write_out(out, Box::into_raw(Box::new(PlsField(f))))
    })
}

/// Reads a field file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pls_field_read(path: *const c_char, out: *mut *mut PlsField) -> PlsStatus {
    guard(|| {
        let (_, f) = core(read_field(path_of(path)?))?;
        write_out(out, Box::into_raw(Box::new(PlsField(f))))
    })
}

/// Writes a field file atomically.
///
/// # Safety
/// `field` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pls_field_write(field: *const PlsField, path: *const c_char) -> PlsStatus {
    guard(|| core(write_field(path_of(path)?, field_ref(field)?, None)))
}

/// Number of samples.
///
/// # Safety
/// `field` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pls_field_len(field: *const PlsField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values().len())
}

/// Copies the samples into `buf`, which holds `len` entries.
///
/// # Safety
/// `field` must be a live handle and `buf` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn pls_field_values(
    field: *const PlsField,
    buf: *mut f64,
    len: usize,
) -> PlsStatus {
    guard(|| {
        let f = field_ref(field)?;
        if len != f.values().len() {
            return Err((
                PlsStatus::InvalidArgument,
                format!("buffer holds {len}, field has {}", f.values().len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(f.values().as_ptr(), buf, len);
        Ok(())
    })
}

/// Releases a field handle. NULL is ignored.
///
/// # Safety
/// `field` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pls_field_free(field: *mut PlsField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// BMO norm over the whole grid with the default cube family.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pls_bmo_norm(
    field: *const PlsField,
    form: PlsBmoForm,
    out: *mut f64,
) -> PlsStatus {
    guard(|| {
        let u = field_ref(field)?;
        let domain = u.grid().extent();
        let policy = CubeSearchPolicy::default();
        let v = match form {
            PlsBmoForm::Oscillation => {
                core(bmo_norm(u, &domain, &policy, BmoForm::Oscillation))?.value
            }
            PlsBmoForm::Inf => core(bmo_norm(u, &domain, &policy, BmoForm::Inf))?.value,
            PlsBmoForm::Overline => core(overline_bmo_norm(u, &domain, &policy))?.value,
        };
        write_out(out, v)
    })
}

/// Parabolic Sobolev norm of order `m` over the whole grid.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pls_sobolev_norm(
    field: *const PlsField,
    m: u32,
    out: *mut f64,
) -> PlsStatus {
    guard(|| {
        let u = field_ref(field)?;
        let r = core(parabolic_sobolev_norm(
            u,
            core(SobolevOrder::new(m))?,
            &u.grid().extent(),
        ))?;
        write_out(out, r.value)
    })
}

/// Lizorkin-Triebel norm; pass `INFINITY` for an infinite exponent.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pls_lt_norm(
    field: *const PlsField,
    s: f64,
    p: f64,
    q: f64,
    truncated: bool,
    out: *mut f64,
) -> PlsStatus {
    guard(|| {
        let u = field_ref(field)?;
        let partition = core(build_partition(u.grid(), BumpProfile::default()))?;
        let v = core(lizorkin_triebel_norm(
            u,
            &partition,
            s,
            exponent(p)?,
            exponent(q)?,
            truncated,
        ))?;
        write_out(out, v)
    })
}

/// Splits a periodic field into dyadic bands.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pls_decompose(
    field: *const PlsField,
    out: *mut *mut PlsBandStack,
) -> PlsStatus {
    guard(|| {
        let u = field_ref(field)?;
        let partition = core(build_partition(u.grid(), BumpProfile::default()))?;
        let stack = core(decompose(u, &partition))?;
        write_out(out, Box::into_raw(Box::new(PlsBandStack(stack))))
    })
}

/// Number of bands, 0 for NULL.
///
/// # Safety
/// `stack` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pls_bands_count(stack: *const PlsBandStack) -> usize {
    stack.as_ref().map_or(0, |s| s.0.len())
}

/// Copies band `j` out as a new field handle.
///
/// # Safety
/// `stack` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pls_band(
    stack: *const PlsBandStack,
    j: usize,
    out: *mut *mut PlsField,
) -> PlsStatus {
    guard(|| {
        let s = stack.as_ref().ok_or_else(|| null("band stack"))?;
        if j >= s.0.len() {
            return Err((
                PlsStatus::InvalidArgument,
                format!("band {j} out of range 0..{}", s.0.len()),
            ));
        }
        write_out(out, Box::into_raw(Box::new(PlsField(s.0.band(j).clone()))))
    })
}

/// Releases a band stack. NULL is ignored.
///
/// # Safety
/// `stack` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pls_bands_free(stack: *mut PlsBandStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

/// Runs a named inequality check (`theorem1`, `theorem2`, `basic`, `interp`,
/// `bandsup`, `lowband`) with Sobolev order `m`; writes the implied constant.
///
/// # Safety
/// `field` must be a live handle, `check` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pls_verify(
    field: *const PlsField,
    check: *const c_char,
    m: u32,
    out: *mut f64,
) -> PlsStatus {
    guard(|| {
        let u = field_ref(field)?;
        if check.is_null() {
            return Err(null("check"));
        }
        let name = CStr::from_ptr(check)
            .to_str()
            .map_err(|_| (PlsStatus::InvalidArgument, "check is not UTF-8".to_string()))?;
        let check: Check = core(name.parse())?;
        let cfg = HarnessConfig {
            m,
            ..HarnessConfig::default()
        };
        let r = core(run_check(check, u, "ffi", &cfg))?;
        write_out(out, r.implied_constant)
    })
}
