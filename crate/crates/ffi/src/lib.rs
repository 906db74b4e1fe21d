//! C ABI over the equicheck library.
//!
//! Every fallible function returns an [`EqcStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be read with [`eqc_last_error`]. Networks are opaque handles created by
//! `eqc_network_from_*` and released with [`eqc_network_free`]; strings
//! returned by the library are released with [`eqc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use equicheck::cli::{default_elements, REAL_TOLERANCE};
use equicheck::config::{builtin, ArchitectureConfig};
use equicheck::layers::{forward, Network, WeightInit};
use equicheck::metrics::profile_equivariance;
use equicheck::{analyze, check_layer, mirror_commutation, output_size, rotation_commutation, Error, FeatureMap};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Config = 4,
    Unsupported = 5,
    Panic = 6,
}

/// Opaque network handle.
pub struct EqcNetwork {
    config: ArchitectureConfig,
    net: Network,
    integer_valued: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> EqcStatus {
    match err {
        Error::Dimension(_) | Error::Index { .. } | Error::Patch(_) => EqcStatus::InvalidArgument,
        Error::Shape(_) => EqcStatus::Shape,
        Error::Config(_) => EqcStatus::Config,
        Error::UnsupportedKind(_) => EqcStatus::Unsupported,
        Error::Layer { source, .. } => status_of(source),
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), (EqcStatus, String)>) -> EqcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EqcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside equicheck");
            EqcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (EqcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (EqcStatus, String) {
    (EqcStatus::NullPointer, "null pointer argument".into())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (EqcStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EqcStatus::InvalidArgument, "string is not valid UTF-8".into()))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), (EqcStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eqc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eqc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Output side `⌊(i + 2p - k) / s⌋ + 1` of a window layer.
///
/// # Safety
/// `out` must be a valid pointer to a `size_t`.
#[no_mangle]
pub unsafe extern "C" fn eqc_output_size(i: usize, k: usize, s: usize, p: usize, out: *mut usize) -> EqcStatus {
    guard(|| write(out, output_size(i, k, s, p).map_err(lib_err)?))
}

/// Whether a window layer is exact: `(i + 2p - k) mod s == 0`.
///
/// # Safety
/// `out` must be a valid pointer to a `bool`.
#[no_mangle]
pub unsafe extern "C" fn eqc_check_layer(i: usize, k: usize, s: usize, p: usize, out: *mut bool) -> EqcStatus {
    guard(|| write(out, check_layer(i, k, s, p).map_err(lib_err)?))
}

/// Brute-force rotation commutation verdict for an unpadded window layer.
///
/// # Safety
/// `out` must be a valid pointer to a `bool`.
#[no_mangle]
pub unsafe extern "C" fn eqc_rotation_commutation(i: usize, k: usize, s: usize, out: *mut bool) -> EqcStatus {
    guard(|| write(out, rotation_commutation(i, k, s).map_err(lib_err)?.holds))
}

/// Brute-force mirror commutation verdict for an unpadded window layer.
///
/// # Safety
/// `out` must be a valid pointer to a `bool`.
#[no_mangle]
pub unsafe extern "C" fn eqc_mirror_commutation(i: usize, k: usize, s: usize, out: *mut bool) -> EqcStatus {
    guard(|| write(out, mirror_commutation(i, k, s).map_err(lib_err)?.holds))
}

fn make_network(
    config: ArchitectureConfig,
    input_size: usize,
    seed: u64,
    integer_valued: bool,
) -> Result<Box<EqcNetwork>, (EqcStatus, String)> {
    let config = if input_size == 0 {
        config
    } else {
        config.with_input_size(input_size)
    };
    let net = config.build(WeightInit { seed, integer_valued }).map_err(lib_err)?;
    Ok(Box::new(EqcNetwork {
        config,
        net,
        integer_valued,
    }))
}

/// Builds a built-in network (`toy41`, `p4cnn`, `z2cnn`, `fig1-maxpool`) with
/// weights drawn from `seed`. `input_size` 0 keeps the built-in's size.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_from_builtin(
    name: *const c_char,
    input_size: usize,
    seed: u64,
    integer_valued: bool,
    out: *mut *mut EqcNetwork,
) -> EqcStatus {
    guard(|| {
        let name = read_str(name)?;
        let cfg = builtin(name).ok_or_else(|| (EqcStatus::Config, format!("unknown built-in '{name}'")))?;
        write(out, Box::into_raw(make_network(cfg, input_size, seed, integer_valued)?))
    })
}

/// Builds a network from a JSON architecture config.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_from_json(
    json: *const c_char,
    input_size: usize,
    seed: u64,
    integer_valued: bool,
    out: *mut *mut EqcNetwork,
) -> EqcStatus {
    guard(|| {
        let cfg = ArchitectureConfig::from_json(read_str(json)?).map_err(lib_err)?;
        write(out, Box::into_raw(make_network(cfg, input_size, seed, integer_valued)?))
    })
}

/// Releases a network handle. NULL is ignored.
///
/// # Safety
/// `net` must come from `eqc_network_from_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_free(net: *mut EqcNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

unsafe fn handle<'a>(net: *const EqcNetwork) -> Result<&'a EqcNetwork, (EqcStatus, String)> {
    net.as_ref().ok_or_else(null)
}

/// Whether every strided layer of the network satisfies the exactness
/// condition at its input size.
///
/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_is_exact(net: *const EqcNetwork, out: *mut bool) -> EqcStatus {
    guard(|| {
        let h = handle(net)?;
        let report = analyze(&h.config.layers, h.config.side()).map_err(lib_err)?;
        write(out, report.exact)
    })
}

/// Full analysis report as JSON. Free the string with `eqc_string_free`.
///
/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_analysis_json(net: *const EqcNetwork, out: *mut *mut c_char) -> EqcStatus {
    guard(|| {
        let h = handle(net)?;
        let report = analyze(&h.config.layers, h.config.side()).map_err(lib_err)?;
        let json = serde_json_string(&report)?;
        write(out, json.into_raw())
    })
}

fn serde_json_string(report: &equicheck::AnalysisReport) -> Result<CString, (EqcStatus, String)> {
    let doc = equicheck::report::ReportDocument::new(
        Vec::new(),
        if report.exact {
            equicheck::report::Status::Exact
        } else {
            equicheck::report::Status::Approximate
        },
        equicheck::report::Payload::Analysis(report.clone()),
    );
    CString::new(doc.to_json()).map_err(|_| (EqcStatus::Panic, "report contained NUL".into()))
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eqc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Side length of the square input the network expects.
///
/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_input_size(net: *const EqcNetwork, out: *mut usize) -> EqcStatus {
    guard(|| write(out, handle(net)?.net.input_size()))
}

/// Number of values in the network's final output.
///
/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_output_len(net: *const EqcNetwork, out: *mut usize) -> EqcStatus {
    guard(|| {
        let shapes = handle(net)?.net.shapes().map_err(lib_err)?;
        let last = shapes.last().expect("input shape always present");
        write(out, last.channels * last.group_size * last.side * last.side)
    })
}

/// Runs the network on a `(channels, side, side)` row-major input and writes
/// the flattened final activation into `output`.
///
/// # Safety
/// `input` must point to `input_len` doubles and `output` to `output_len`.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_forward(
    net: *const EqcNetwork,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> EqcStatus {
    guard(|| {
        let h = handle(net)?;
        if input.is_null() || output.is_null() {
            return Err(null());
        }
        let side = h.net.input_size();
        let values = std::slice::from_raw_parts(input, input_len).to_vec();
        let x = FeatureMap::from_values(h.net.input_channels(), 1, side, side, values).map_err(lib_err)?;
        let acts = forward(&h.net, &x).map_err(lib_err)?;
        let result = acts.last().expect("forward returns the input at least").values();
        if result.len() != output_len {
            return Err((
                EqcStatus::Shape,
                format!("output buffer holds {output_len} values, network produces {}", result.len()),
            ));
        }
        std::slice::from_raw_parts_mut(output, output_len).copy_from_slice(result);
        Ok(())
    })
}

/// Largest per-depth equivariance error over every non-identity element of
/// the network's group, on an input drawn from `seed`.
///
/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqc_network_max_equivariance_error(
    net: *const EqcNetwork,
    seed: u64,
    out: *mut f64,
) -> EqcStatus {
    guard(|| {
        let h = handle(net)?;
        let elements = default_elements(h.config.group);
        let profile =
            profile_equivariance(&h.net, &h.config.name, seed, &elements, h.integer_valued).map_err(lib_err)?;
        write(out, profile.max_error())
    })
}

/// Tolerance used for real-valued measurements.
#[no_mangle]
pub extern "C" fn eqc_real_tolerance() -> f64 {
    REAL_TOLERANCE
}
