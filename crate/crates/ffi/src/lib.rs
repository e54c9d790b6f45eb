//! C ABI over the simulator, the streaming reconstructor, and the Strehl
//! meter. Every entry point takes and returns plain C types, never panics
//! across the boundary, and reports failures through [`DhwfsStatus`] codes
//! plus a thread-local message retrievable with [`dhwfs_last_error`].
//!
//! Handles returned by the `*_new` functions are opaque and owned by the
//! caller; release them with the matching `*_free`. Fields cross the
//! boundary as dense row-major `double` buffers, complex data interleaved
//! as re,im pairs.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;

use dhwfs::config::RunConfig;
use dhwfs::dynamic::DynamicReconstructor;
use dhwfs::grid::ComplexField;
use dhwfs::metrics::StrehlMeter;
use dhwfs::pipeline::Simulator;
use dhwfs::Error;

/// Result codes for every fallible call. `Ok` is zero; everything else
/// carries a category, with the detail text available from
/// [`dhwfs_last_error`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhwfsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Dimension = 5,
    DegenerateInput = 6,
    DegenerateFit = 7,
    Format = 8,
    Io = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_from_error(err: &Error) -> DhwfsStatus {
    set_last_error(&err.to_string());
    match err.category() {
        "config" => DhwfsStatus::Config,
        "invalid_argument" => DhwfsStatus::InvalidArgument,
        "dimension" => DhwfsStatus::Dimension,
        "degenerate_input" => DhwfsStatus::DegenerateInput,
        "degenerate_fit" => DhwfsStatus::DegenerateFit,
        "format" => DhwfsStatus::Format,
        "io" => DhwfsStatus::Io,
        _ => DhwfsStatus::InvalidArgument,
    }
}

fn null_argument(name: &str) -> DhwfsStatus {
    set_last_error(&format!("{name} must not be null"));
    DhwfsStatus::NullArgument
}

/// Run `body` with panics converted to [`DhwfsStatus::Panic`].
fn guarded(body: impl FnOnce() -> DhwfsStatus) -> DhwfsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic crossed the FFI boundary".to_string());
            set_last_error(&message);
            DhwfsStatus::Panic
        }
    }
}

/// Run `body` with panics and `None` results converted to a null pointer.
fn guarded_ptr<T>(body: impl FnOnce() -> Option<*mut T>) -> *mut T {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Some(ptr)) => ptr,
        Ok(None) => std::ptr::null_mut(),
        Err(_) => {
            set_last_error("panic crossed the FFI boundary");
            std::ptr::null_mut()
        }
    }
}

unsafe fn str_arg<'a>(name: &str, ptr: *const c_char) -> Result<&'a str, DhwfsStatus> {
    if ptr.is_null() {
        return Err(null_argument(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(&format!("{name} is not valid UTF-8"));
        DhwfsStatus::InvalidUtf8
    })
}

/// Opaque configuration handle; a validated set of simulation and
/// reconstruction parameters.
pub struct DhwfsConfig {
    inner: RunConfig,
}

/// Opaque frame-stream synthesizer handle.
pub struct DhwfsSimulator {
    inner: Simulator,
}

/// Opaque streaming reconstructor handle.
pub struct DhwfsReconstructor {
    inner: DynamicReconstructor,
}

/// Opaque Strehl-ratio evaluator handle.
pub struct DhwfsStrehlMeter {
    inner: StrehlMeter,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dhwfs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the current thread's last error message into `buf` (truncated to
/// `cap - 1` bytes, always NUL-terminated). Returns the full message length
/// in bytes, or 0 when there is no pending message. `buf` may be null when
/// `cap` is 0.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && cap > 0 {
            let copy = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, copy);
            *buf.add(copy) = 0;
        }
        bytes.len()
    })
}

/// New configuration with default parameters. Never fails.
#[no_mangle]
pub extern "C" fn dhwfs_config_new() -> *mut DhwfsConfig {
    guarded_ptr(|| {
        Some(Box::into_raw(Box::new(DhwfsConfig {
            inner: RunConfig::default(),
        })))
    })
}

/// Set one configuration key from its text form, e.g.
/// `dhwfs_config_set(cfg, "n", "128")`. Keys and accepted values match the
/// CLI flags and `key = value` config-file lines.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_config_set(
    cfg: *mut DhwfsConfig,
    key: *const c_char,
    value: *const c_char,
) -> DhwfsStatus {
    guarded(|| {
        let Some(cfg) = cfg.as_mut() else {
            return null_argument("cfg");
        };
        let key = match str_arg("key", key) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let value = match str_arg("value", value) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match cfg.inner.set_key(key, value) {
            Ok(()) => DhwfsStatus::Ok,
            Err(err) => status_from_error(&err),
        }
    })
}

/// Grid side length of the configuration, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_config_n(cfg: *const DhwfsConfig) -> usize {
    match cfg.as_ref() {
        Some(cfg) => cfg.inner.n,
        None => 0,
    }
}

#[no_mangle]
pub unsafe extern "C" fn dhwfs_config_free(cfg: *mut DhwfsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// New simulator for the configuration and seed, or null on invalid
/// configuration (see [`dhwfs_last_error`]).
#[no_mangle]
pub unsafe extern "C" fn dhwfs_simulator_new(
    cfg: *const DhwfsConfig,
    seed: u64,
) -> *mut DhwfsSimulator {
    guarded_ptr(|| {
        let Some(cfg) = cfg.as_ref() else {
            null_argument("cfg");
            return None;
        };
        match Simulator::with_seed(&cfg.inner, seed) {
            Ok(inner) => Some(Box::into_raw(Box::new(DhwfsSimulator { inner }))),
            Err(err) => {
                status_from_error(&err);
                None
            }
        }
    })
}

/// Synthesize the next frame. `measurement_out` receives `2 n^2` doubles
/// (interleaved re,im, row-major); `phase_out` receives the `n^2` true
/// phase samples and may be null when the truth is not needed. `len` is
/// the element count of `measurement_out`.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_simulator_next_frame(
    sim: *mut DhwfsSimulator,
    measurement_out: *mut f64,
    len: usize,
    phase_out: *mut f64,
) -> DhwfsStatus {
    guarded(|| {
        let Some(sim) = sim.as_mut() else {
            return null_argument("sim");
        };
        if measurement_out.is_null() {
            return null_argument("measurement_out");
        }
        let n = sim.inner.n();
        if len != 2 * n * n {
            set_last_error(&format!(
                "measurement_out has {len} elements, need {}",
                2 * n * n
            ));
            return DhwfsStatus::Dimension;
        }
        let frame = match sim.inner.next_frame() {
            Ok(frame) => frame,
            Err(err) => return status_from_error(&err),
        };
        let out = std::slice::from_raw_parts_mut(measurement_out, len);
        for (pair, z) in out.chunks_exact_mut(2).zip(frame.measurement.data()) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        if !phase_out.is_null() {
            std::slice::from_raw_parts_mut(phase_out, n * n)
                .copy_from_slice(frame.truth_phase.data());
        }
        DhwfsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn dhwfs_simulator_free(sim: *mut DhwfsSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// New streaming reconstructor, or null on invalid configuration.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_reconstructor_new(
    cfg: *const DhwfsConfig,
) -> *mut DhwfsReconstructor {
    guarded_ptr(|| {
        let Some(cfg) = cfg.as_ref() else {
            null_argument("cfg");
            return None;
        };
        let build = || -> Result<DynamicReconstructor, Error> {
            cfg.inner.validate()?;
            Ok(DynamicReconstructor::new(
                cfg.inner.propagation_operator()?,
                cfg.inner.ddh_config()?,
            ))
        };
        match build() {
            Ok(inner) => Some(Box::into_raw(Box::new(DhwfsReconstructor { inner }))),
            Err(err) => {
                status_from_error(&err);
                None
            }
        }
    })
}

/// Feed one raw measurement frame (`2 n^2` interleaved doubles) and run the
/// per-frame update.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_reconstructor_process_frame(
    rec: *mut DhwfsReconstructor,
    measurement: *const f64,
    len: usize,
) -> DhwfsStatus {
    guarded(|| {
        let Some(rec) = rec.as_mut() else {
            return null_argument("rec");
        };
        if measurement.is_null() {
            return null_argument("measurement");
        }
        let n = rec.inner.n();
        if len != 2 * n * n {
            set_last_error(&format!("measurement has {len} elements, need {}", 2 * n * n));
            return DhwfsStatus::Dimension;
        }
        let samples = std::slice::from_raw_parts(measurement, len);
        let mut field = ComplexField::zeros(n);
        for (z, pair) in field.data_mut().iter_mut().zip(samples.chunks_exact(2)) {
            *z = Complex64::new(pair[0], pair[1]);
        }
        match rec.inner.process_frame(&field) {
            Ok(()) => DhwfsStatus::Ok,
            Err(err) => status_from_error(&err),
        }
    })
}

unsafe fn copy_real_field(
    name: &str,
    field: &dhwfs::grid::RealField,
    out: *mut f64,
    len: usize,
) -> DhwfsStatus {
    if out.is_null() {
        return null_argument(name);
    }
    let expect = field.n() * field.n();
    if len != expect {
        set_last_error(&format!("{name} has {len} elements, need {expect}"));
        return DhwfsStatus::Dimension;
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(field.data());
    DhwfsStatus::Ok
}

/// Copy the current phase estimate (`n^2` doubles, radians, row-major).
#[no_mangle]
pub unsafe extern "C" fn dhwfs_reconstructor_phase(
    rec: *const DhwfsReconstructor,
    out: *mut f64,
    len: usize,
) -> DhwfsStatus {
    guarded(|| {
        let Some(rec) = rec.as_ref() else {
            return null_argument("rec");
        };
        copy_real_field("out", rec.inner.phase(), out, len)
    })
}

/// Copy the current reflectance estimate (`n^2` doubles, row-major).
#[no_mangle]
pub unsafe extern "C" fn dhwfs_reconstructor_reflectance(
    rec: *const DhwfsReconstructor,
    out: *mut f64,
    len: usize,
) -> DhwfsStatus {
    guarded(|| {
        let Some(rec) = rec.as_ref() else {
            return null_argument("rec");
        };
        copy_real_field("out", rec.inner.reflectance(), out, len)
    })
}

/// Frames consumed so far, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_reconstructor_frame_index(rec: *const DhwfsReconstructor) -> u64 {
    match rec.as_ref() {
        Some(rec) => rec.inner.frame_index(),
        None => 0,
    }
}

/// Total 2-D transforms applied since construction or reset, or 0 for a
/// null handle.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_reconstructor_transform_count(
    rec: *const DhwfsReconstructor,
) -> u64 {
    match rec.as_ref() {
        Some(rec) => rec.inner.transform_count(),
        None => 0,
    }
}

/// Reset to the cold-start state and zero the transform counter.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_reconstructor_reset(rec: *mut DhwfsReconstructor) -> DhwfsStatus {
    guarded(|| {
        let Some(rec) = rec.as_mut() else {
            return null_argument("rec");
        };
        rec.inner.reset();
        DhwfsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn dhwfs_reconstructor_free(rec: *mut DhwfsReconstructor) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// New Strehl evaluator over a centered circular aperture of the given
/// diameter in pixels (pass `n` for the full-width aperture), or null on
/// invalid arguments.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_strehl_meter_new(
    n: usize,
    aperture_diameter_px: f64,
) -> *mut DhwfsStrehlMeter {
    guarded_ptr(|| {
        let build = || -> Result<StrehlMeter, Error> {
            let mask = dhwfs::grid::ApertureMask::circular(n, aperture_diameter_px)?;
            StrehlMeter::new(mask)
        };
        match build() {
            Ok(inner) => Some(Box::into_raw(Box::new(DhwfsStrehlMeter { inner }))),
            Err(err) => {
                status_from_error(&err);
                None
            }
        }
    })
}

/// Peak Strehl ratio of the wrapped residual between two phase maps
/// (`n^2` doubles each); writes the ratio to `out`.
#[no_mangle]
pub unsafe extern "C" fn dhwfs_strehl(
    meter: *const DhwfsStrehlMeter,
    phi_hat: *const f64,
    phi_true: *const f64,
    len: usize,
    out: *mut f64,
) -> DhwfsStatus {
    guarded(|| {
        let Some(meter) = meter.as_ref() else {
            return null_argument("meter");
        };
        if phi_hat.is_null() || phi_true.is_null() {
            return null_argument("phi_hat/phi_true");
        }
        if out.is_null() {
            return null_argument("out");
        }
        let n = meter.inner.mask().n();
        if len != n * n {
            set_last_error(&format!("phase buffers have {len} elements, need {}", n * n));
            return DhwfsStatus::Dimension;
        }
        let to_field = |ptr: *const f64| {
            let mut field = dhwfs::grid::RealField::zeros(n);
            field
                .data_mut()
                .copy_from_slice(std::slice::from_raw_parts(ptr, len));
            field
        };
        match meter.inner.strehl(&to_field(phi_hat), &to_field(phi_true)) {
            Ok(value) => {
                *out = value;
                DhwfsStatus::Ok
            }
            Err(err) => status_from_error(&err),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn dhwfs_strehl_meter_free(meter: *mut DhwfsStrehlMeter) {
    if !meter.is_null() {
        drop(Box::from_raw(meter));
    }
}
