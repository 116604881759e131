//! C ABI for the private learned index library.
//!
//! Conventions: every fallible call returns a [`DpPlrStatus`]; results come
//! back through out-pointers; handles are opaque and released with their
//! matching `_free` function; strings are NUL-terminated UTF-8 owned by the
//! library and released with [`dp_plr_string_free`]. A failing call stores
//! a thread-local message retrievable via [`dp_plr_last_error_message`]
//! until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dp_plr::baselines::{build_crypte, build_dp_bplus, build_special};
use dp_plr::{
    cfc_error_bound, generate_column, AnyIndex, Distribution, DpPlrIndex, LookupOutcome, Method,
    PrivacyParams, SortedColumn,
};

/// Result of every fallible library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpPlrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    KeyNotFound = 3,
    ParseError = 4,
    InternalError = 5,
}

/// Opaque sorted column handle.
pub struct DpPlrColumn {
    inner: SortedColumn,
}

/// Opaque index handle; may hold any of the four index kinds.
pub struct DpPlrIndexHandle {
    inner: AnyIndex,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: DpPlrStatus, message: impl AsRef<str>) -> DpPlrStatus {
    let owned = CString::new(message.as_ref().replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(owned));
    status
}

fn fail_from(err: dp_plr::Error) -> DpPlrStatus {
    let status = match &err {
        dp_plr::Error::KeyNotFound(_) => DpPlrStatus::KeyNotFound,
        dp_plr::Error::Json(_) | dp_plr::Error::MalformedFile { .. } => DpPlrStatus::ParseError,
        dp_plr::Error::Io(_) => DpPlrStatus::InternalError,
        _ => DpPlrStatus::InvalidArgument,
    };
    fail(status, err.to_string())
}

fn guarded(body: impl FnOnce() -> DpPlrStatus) -> DpPlrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(DpPlrStatus::InternalError, "internal panic"),
    }
}

/// Message for the most recent failing call on this thread, or NULL.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dp_plr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |msg| msg.as_ptr())
    })
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn dp_plr_status_name(status: DpPlrStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        DpPlrStatus::Ok => b"ok\0",
        DpPlrStatus::NullPointer => b"null pointer\0",
        DpPlrStatus::InvalidArgument => b"invalid argument\0",
        DpPlrStatus::KeyNotFound => b"key not found\0",
        DpPlrStatus::ParseError => b"parse error\0",
        DpPlrStatus::InternalError => b"internal error\0",
    };
    name.as_ptr().cast()
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, DpPlrStatus> {
    if ptr.is_null() {
        return Err(fail(DpPlrStatus::NullPointer, "NULL string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(DpPlrStatus::ParseError, "argument is not valid UTF-8"))
}

fn write_out<T>(out: *mut T, value: T) -> DpPlrStatus {
    if out.is_null() {
        return fail(DpPlrStatus::NullPointer, "NULL out-pointer");
    }
    unsafe { out.write(value) };
    DpPlrStatus::Ok
}

fn write_string(out: *mut *mut c_char, text: String) -> DpPlrStatus {
    match CString::new(text) {
        Ok(owned) => write_out(out, owned.into_raw()),
        Err(_) => fail(DpPlrStatus::InternalError, "serialized text contained NUL"),
    }
}

/// Generates a deterministic synthetic column.
/// `dist` is one of "uniform", "lognormal", "zipf".
///
/// # Safety
/// `dist` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_column_generate(
    dist: *const c_char,
    n_keys: usize,
    n_tuples: u64,
    seed: u64,
    out: *mut *mut DpPlrColumn,
) -> DpPlrStatus {
    guarded(|| {
        let dist = match read_str(dist) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let dist: Distribution = match dist.parse() {
            Ok(d) => d,
            Err(err) => return fail_from(err),
        };
        match generate_column(dist, n_keys, n_tuples, seed) {
            Ok(col) => write_out(out, Box::into_raw(Box::new(DpPlrColumn { inner: col }))),
            Err(err) => fail_from(err),
        }
    })
}

/// Parses a `{keys, counts, total}` JSON column document.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_column_from_json(
    text: *const c_char,
    out: *mut *mut DpPlrColumn,
) -> DpPlrStatus {
    guarded(|| {
        let text = match read_str(text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match SortedColumn::from_json(text) {
            Ok(col) => write_out(out, Box::into_raw(Box::new(DpPlrColumn { inner: col }))),
            Err(err) => fail_from(err),
        }
    })
}

/// Serializes a column as JSON; release the string with
/// [`dp_plr_string_free`].
///
/// # Safety
/// `col` must be a live column handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_column_to_json(
    col: *const DpPlrColumn,
    out: *mut *mut c_char,
) -> DpPlrStatus {
    guarded(|| {
        let Some(col) = col.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL column handle");
        };
        match col.inner.to_json() {
            Ok(text) => write_string(out, text),
            Err(err) => fail_from(err),
        }
    })
}

/// Number of distinct keys in the column.
///
/// # Safety
/// `col` must be a live column handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_column_n_keys(
    col: *const DpPlrColumn,
    out: *mut usize,
) -> DpPlrStatus {
    guarded(|| {
        let Some(col) = col.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL column handle");
        };
        write_out(out, col.inner.n_keys())
    })
}

/// Tuple count of the column.
///
/// # Safety
/// `col` must be a live column handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_column_total(
    col: *const DpPlrColumn,
    out: *mut u64,
) -> DpPlrStatus {
    guarded(|| {
        let Some(col) = col.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL column handle");
        };
        write_out(out, col.inner.total())
    })
}

/// Key at a 0-based position in the public domain.
///
/// # Safety
/// `col` must be a live column handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_column_key_at(
    col: *const DpPlrColumn,
    position: usize,
    out: *mut i64,
) -> DpPlrStatus {
    guarded(|| {
        let Some(col) = col.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL column handle");
        };
        match col.inner.keys().get(position) {
            Some(key) => write_out(out, *key),
            None => fail(
                DpPlrStatus::InvalidArgument,
                format!("position {position} out of range"),
            ),
        }
    })
}

/// Releases a column handle. Passing NULL is a no-op.
///
/// # Safety
/// `col` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_column_free(col: *mut DpPlrColumn) {
    if !col.is_null() {
        drop(Box::from_raw(col));
    }
}

/// Builds the learned index under epsilon-DP.
///
/// Pass `alpha_s <= 0` for the default pessimism multiplier
/// sqrt(ln(2/beta)), and `tau < 0` for the default of half the curve error
/// bound.
///
/// # Safety
/// `col` must be a live column handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_build(
    col: *const DpPlrColumn,
    epsilon: f64,
    beta: f64,
    alpha_s: f64,
    tau: f64,
    seed: u64,
    out: *mut *mut DpPlrIndexHandle,
) -> DpPlrStatus {
    guarded(|| {
        let Some(col) = col.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL column handle");
        };
        let build = || -> dp_plr::Result<DpPlrIndex> {
            let alpha_s = if alpha_s > 0.0 {
                alpha_s
            } else {
                (2.0 / beta).ln().sqrt().max(1.0)
            };
            let tau = if tau >= 0.0 {
                tau
            } else {
                let probe = PrivacyParams::new(epsilon, beta, alpha_s, 0.0)?;
                cfc_error_bound(&probe, col.inner.n_keys())? / 2.0
            };
            let params = PrivacyParams::new(epsilon, beta, alpha_s, tau)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DpPlrIndex::build(&col.inner, &params, &mut rng)
        };
        match build() {
            Ok(idx) => write_out(
                out,
                Box::into_raw(Box::new(DpPlrIndexHandle { inner: AnyIndex::DpPlr(idx) })),
            ),
            Err(err) => fail_from(err),
        }
    })
}

/// Builds one of the baseline indexes: "dp_bplus" (uses `overflow_b`),
/// "crypte", or "special" (uses `mu`).
///
/// # Safety
/// `col` must be a live column handle, `method` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_build_baseline(
    col: *const DpPlrColumn,
    method: *const c_char,
    epsilon: f64,
    overflow_b: u64,
    mu: f64,
    seed: u64,
    out: *mut *mut DpPlrIndexHandle,
) -> DpPlrStatus {
    guarded(|| {
        let Some(col) = col.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL column handle");
        };
        let method = match read_str(method) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let method: Method = match method.parse() {
            Ok(m) => m,
            Err(err) => return fail_from(err),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let built = match method {
            Method::DpBplus => {
                build_dp_bplus(&col.inner, epsilon, overflow_b, &mut rng).map(AnyIndex::DpBplus)
            }
            Method::Crypte => build_crypte(&col.inner, epsilon, &mut rng).map(AnyIndex::Crypte),
            Method::Special => {
                build_special(&col.inner, epsilon, mu, &mut rng).map(AnyIndex::Special)
            }
            Method::DpPlr => {
                return fail(
                    DpPlrStatus::InvalidArgument,
                    "use dp_plr_index_build for the learned index",
                )
            }
        };
        match built {
            Ok(inner) => write_out(out, Box::into_raw(Box::new(DpPlrIndexHandle { inner }))),
            Err(err) => fail_from(err),
        }
    })
}

/// Method tag of an index handle as a static string
/// ("dp_plr", "dp_bplus", "crypte", "special").
///
/// # Safety
/// `idx` must be a live index handle.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_method(idx: *const DpPlrIndexHandle) -> *const c_char {
    let Some(idx) = idx.as_ref() else {
        return std::ptr::null();
    };
    let name: &'static [u8] = match idx.inner.method() {
        Method::DpPlr => b"dp_plr\0",
        Method::DpBplus => b"dp_bplus\0",
        Method::Crypte => b"crypte\0",
        Method::Special => b"special\0",
    };
    name.as_ptr().cast()
}

/// Pessimistic position range for a key. Fails with `KeyNotFound` for keys
/// outside the public domain and `InvalidArgument` for count-style indexes.
///
/// # Safety
/// `idx` must be a live index handle; `out_lo` and `out_hi` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_lookup_range(
    idx: *const DpPlrIndexHandle,
    key: i64,
    out_lo: *mut u64,
    out_hi: *mut u64,
) -> DpPlrStatus {
    guarded(|| {
        let Some(idx) = idx.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL index handle");
        };
        match idx.inner.lookup(key) {
            Ok(LookupOutcome::Range(range)) => {
                let status = write_out(out_lo, range.lo);
                if status != DpPlrStatus::Ok {
                    return status;
                }
                write_out(out_hi, range.hi)
            }
            Ok(LookupOutcome::Count(_)) => fail(
                DpPlrStatus::InvalidArgument,
                "this index returns tuple counts; use dp_plr_index_lookup_count",
            ),
            Err(err) => fail_from(err),
        }
    })
}

/// Returned-tuple count for a key on the leaf-count index.
///
/// # Safety
/// `idx` must be a live index handle and `out_count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_lookup_count(
    idx: *const DpPlrIndexHandle,
    key: i64,
    out_count: *mut u64,
) -> DpPlrStatus {
    guarded(|| {
        let Some(idx) = idx.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL index handle");
        };
        match idx.inner.lookup(key) {
            Ok(LookupOutcome::Count(count)) => write_out(out_count, count),
            Ok(LookupOutcome::Range(_)) => fail(
                DpPlrStatus::InvalidArgument,
                "this index returns ranges; use dp_plr_index_lookup_range",
            ),
            Err(err) => fail_from(err),
        }
    })
}

/// Conservative range lookup between two keys (learned index only).
///
/// # Safety
/// `idx` must be a live index handle; `out_lo` and `out_hi` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_range_lookup(
    idx: *const DpPlrIndexHandle,
    key_lo: i64,
    key_hi: i64,
    out_lo: *mut u64,
    out_hi: *mut u64,
) -> DpPlrStatus {
    guarded(|| {
        let Some(idx) = idx.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL index handle");
        };
        let AnyIndex::DpPlr(inner) = &idx.inner else {
            return fail(
                DpPlrStatus::InvalidArgument,
                "range lookups are only supported for dp_plr indexes",
            );
        };
        match inner.range_lookup(key_lo, key_hi) {
            Ok(range) => {
                let status = write_out(out_lo, range.lo);
                if status != DpPlrStatus::Ok {
                    return status;
                }
                write_out(out_hi, range.hi)
            }
            Err(err) => fail_from(err),
        }
    })
}

/// Index payload size in bits under each method's accounting convention.
///
/// # Safety
/// `idx` must be a live index handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_size_bits(
    idx: *const DpPlrIndexHandle,
    out: *mut u64,
) -> DpPlrStatus {
    guarded(|| {
        let Some(idx) = idx.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL index handle");
        };
        write_out(out, idx.inner.index_size_bits())
    })
}

/// Serializes the index envelope as JSON; release the string with
/// [`dp_plr_string_free`].
///
/// # Safety
/// `idx` must be a live index handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_to_json(
    idx: *const DpPlrIndexHandle,
    out: *mut *mut c_char,
) -> DpPlrStatus {
    guarded(|| {
        let Some(idx) = idx.as_ref() else {
            return fail(DpPlrStatus::NullPointer, "NULL index handle");
        };
        match idx.inner.to_json() {
            Ok(text) => write_string(out, text),
            Err(err) => fail_from(err),
        }
    })
}

/// Loads any index envelope produced by this library or its CLI.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_from_json(
    text: *const c_char,
    out: *mut *mut DpPlrIndexHandle,
) -> DpPlrStatus {
    guarded(|| {
        let text = match read_str(text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match AnyIndex::from_json(text) {
            Ok(inner) => write_out(out, Box::into_raw(Box::new(DpPlrIndexHandle { inner }))),
            Err(err) => fail_from(err),
        }
    })
}

/// Releases an index handle. Passing NULL is a no-op.
///
/// # Safety
/// `idx` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_index_free(idx: *mut DpPlrIndexHandle) {
    if !idx.is_null() {
        drop(Box::from_raw(idx));
    }
}

/// Releases a string returned by this library. Passing NULL is a no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn dp_plr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
