//! C ABI over the verification toolkit.
//!
//! Objects cross the boundary as opaque handles owned by the caller and released
//! with the matching `*_free`. Every fallible call returns an [`ScfStatus`]; the
//! message of the last failure on the calling thread is available through
//! [`scf_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use scfloer::config::{preset, ExperimentConfig};
use scfloer::linear::{assemble_ddt, index_all_scales};
use scfloer::report::{write_artifacts, SuiteReport};
use scfloer::suite::{run, Suite};
use scfloer::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Config = 3,
    InvalidArgument = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

pub struct ScfConfig(ExperimentConfig);

pub struct ScfReport(SuiteReport);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> ScfStatus {
    match e {
        Error::Config(_) | Error::InvalidGrid(_) | Error::Margin { .. } => ScfStatus::Config,
        Error::InvalidParameter(_) | Error::Shape(_) | Error::UnsupportedOrder { .. } => ScfStatus::InvalidArgument,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format(_) => ScfStatus::Io,
        _ => ScfStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status plus the thread's last error message.
fn guard(f: impl FnOnce() -> Result<(), (ScfStatus, String)>) -> ScfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScfStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            ScfStatus::Panic
        }
    }
}

fn lib(e: Error) -> (ScfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ScfStatus, String) {
    (ScfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ScfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (ScfStatus::InvalidString, format!("{what} is not UTF-8")))
}

/// Copies `text` plus a terminating NUL into `buf`; `needed` receives the required size.
unsafe fn write_str(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), (ScfStatus, String)> {
    let n = text.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() || len < n {
        return Err((ScfStatus::BufferTooSmall, format!("buffer of {len} bytes, {n} needed")));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf as *mut u8, text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

/// Copies the calling thread's last error message (NUL-terminated, possibly truncated)
/// into `buf` and returns the full length including the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn scf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        e.len() + 1
    })
}

/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn scf_config_default(out: *mut *mut ScfConfig) -> ScfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(ScfConfig(ExperimentConfig::default())));
        Ok(())
    })
}

/// Configuration reproducing acceptance criterion `n` (1 to 10).
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn scf_config_preset(n: u32, out: *mut *mut ScfConfig) -> ScfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = u8::try_from(n).map_err(|_| (ScfStatus::InvalidArgument, format!("there is no criterion {n}")))?;
        *out = Box::into_raw(Box::new(ScfConfig(preset(n).map_err(lib)?)));
        Ok(())
    })
}

/// Parses and validates a TOML config.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn scf_config_from_toml(text: *const c_char, out: *mut *mut ScfConfig) -> ScfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = read_str(text, "text")?;
        *out = Box::into_raw(Box::new(ScfConfig(ExperimentConfig::from_toml(t).map_err(lib)?)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn scf_config_set_seed(cfg: *mut ScfConfig, seed: u64) -> ScfStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        c.0.run.seed = seed;
        Ok(())
    })
}

/// Writes the canonical TOML serialization.
///
/// # Safety
/// `cfg` must be a live handle, `buf` null or valid for `len` bytes, `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn scf_config_to_toml(cfg: *const ScfConfig, buf: *mut c_char, len: usize, needed: *mut usize) -> ScfStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        write_str(&c.0.to_toml(), buf, len, needed)
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scf_config_free(cfg: *mut ScfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Process exit code the runner uses when the named suite fails, or -1 for an unknown name.
///
/// # Safety
/// `suite` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn scf_suite_exit_code(suite: *const c_char) -> i32 {
    match read_str(suite, "suite").ok().and_then(|s| Suite::ALL.into_iter().find(|x| x.name() == s)) {
        Some(s) => s.exit_code(),
        None => -1,
    }
}

/// Runs one verification suite (by its subcommand name, e.g. "glue-identities").
/// A suite whose criteria fail still returns `Ok`; query the report.
///
/// # Safety
/// `cfg` must be a live handle, `suite` NUL-terminated, `out` valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn scf_run_suite(cfg: *const ScfConfig, suite: *const c_char, out: *mut *mut ScfReport) -> ScfStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let name = read_str(suite, "suite")?;
        let s = Suite::ALL
            .into_iter()
            .find(|x| x.name() == name)
            .ok_or_else(|| (ScfStatus::InvalidArgument, format!("unknown suite {name:?}")))?;
        *out = Box::into_raw(Box::new(ScfReport(run(s, &c.0).map_err(lib)?)));
        Ok(())
    })
}

/// # Safety
/// `rep` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn scf_report_passed(rep: *const ScfReport) -> bool {
    rep.as_ref().is_some_and(|r| r.0.passed())
}

/// # Safety
/// `rep` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn scf_report_criterion_count(rep: *const ScfReport) -> usize {
    rep.as_ref().map_or(0, |r| r.0.criteria.len())
}

/// Acceptance criterion number and verdict of the `i`-th line of a report.
///
/// # Safety
/// `rep` must be a live handle; `id` and `pass` writable.
#[no_mangle]
pub unsafe extern "C" fn scf_report_criterion(rep: *const ScfReport, i: usize, id: *mut u32, pass: *mut bool) -> ScfStatus {
    guard(|| {
        let r = rep.as_ref().ok_or_else(|| null("rep"))?;
        if id.is_null() || pass.is_null() {
            return Err(null("id/pass"));
        }
        let c = r.0.criteria.get(i).ok_or_else(|| (ScfStatus::InvalidArgument, format!("line {i} of {}", r.0.criteria.len())))?;
        *id = u32::from(c.id);
        *pass = c.pass;
        Ok(())
    })
}

/// Summary lines joined by newlines.
///
/// # Safety
/// `rep` must be a live handle, `buf` null or valid for `len` bytes, `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn scf_report_summary(rep: *const ScfReport, buf: *mut c_char, len: usize, needed: *mut usize) -> ScfStatus {
    guard(|| {
        let r = rep.as_ref().ok_or_else(|| null("rep"))?;
        write_str(&r.0.summary_lines().join("\n"), buf, len, needed)
    })
}

/// Writes the CSV/JSON artifacts of a report into `dir`.
///
/// # Safety
/// Handles must be live and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn scf_report_write(rep: *const ScfReport, cfg: *const ScfConfig, dir: *const c_char) -> ScfStatus {
    guard(|| {
        let r = rep.as_ref().ok_or_else(|| null("rep"))?;
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let d = read_str(dir, "dir")?;
        write_artifacts(Path::new(d), &c.0, &r.0).map_err(lib)
    })
}

/// # Safety
/// `rep` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scf_report_free(rep: *mut ScfReport) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}

/// Kernel and cokernel dimensions and index of d/dt on periodic functions sampled at `n_t`
/// points, as an operator between levels `level + 1` and `level`.
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn scf_ddt_index(n_t: usize, level: usize, dim_ker: *mut usize, dim_coker: *mut usize, index: *mut i64) -> ScfStatus {
    guard(|| {
        if dim_ker.is_null() || dim_coker.is_null() || index.is_null() {
            return Err(null("output"));
        }
        let op = assemble_ddt(n_t, &[level, level + 1]).map_err(lib)?;
        let r = &index_all_scales(&op).map_err(lib)?[0];
        *dim_ker = r.dim_ker;
        *dim_coker = r.dim_coker;
        *index = r.index;
        Ok(())
    })
}
