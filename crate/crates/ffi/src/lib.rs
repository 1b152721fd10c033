//! C ABI over the tipsense library.
//!
//! Every fallible call returns a [`TsStatus`]. On failure a message is kept
//! per thread and can be read with [`ts_last_error_message`]. Output
//! pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::Vector3;
use tipsense::collision::{self, CollisionError, CollisionParams, ControlSign};
use tipsense::estimator::{self, MlpModel, INPUTS, OUTPUTS};
use tipsense::kinematics::{self, ContactAngles};
use tipsense::latency::{self, LatencyError, LatencyOptions, TimeSeries};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The collision never released within the search horizon.
    NoRelease = 3,
    Io = 4,
    Parse = 5,
    /// A signal was constant or the geometry was singular.
    Degenerate = 6,
    Panic = 7,
}

/// Collision parameters. `control_sign` is -1 (retract) or +1 (press).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TsCollisionParams {
    pub m_f: f64,
    pub m_r: f64,
    pub k: f64,
    pub v0: f64,
    pub t_l: f64,
    pub f_in: f64,
    pub control_sign: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TsCollisionResult {
    pub t_f: f64,
    pub total_impulse: f64,
    pub natural_impulse: f64,
    pub eta: f64,
}

/// Opaque estimator handle.
pub struct TsModel {
    model: MlpModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: TsStatus, msg: impl Into<String>) -> TsStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> TsStatus) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TsStatus::Panic, "internal panic"),
    }
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

fn collision_status(e: &CollisionError) -> TsStatus {
    match e {
        CollisionError::NoRelease { .. } => TsStatus::NoRelease,
        _ => TsStatus::InvalidArgument,
    }
}

/// Impulse ratio of one collision.
///
/// # Safety
/// `params` and `out` must be valid pointers or null.
#[no_mangle]
pub unsafe extern "C" fn ts_collision_eta(params: *const TsCollisionParams, out: *mut TsCollisionResult) -> TsStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return fail(TsStatus::NullPointer, "null argument");
        }
        let p = unsafe { *params };
        let control_sign = match p.control_sign {
            -1 => ControlSign::Retract,
            1 => ControlSign::Press,
            s => return fail(TsStatus::InvalidArgument, format!("control_sign must be -1 or 1, got {s}")),
        };
        let params = CollisionParams { m_f: p.m_f, m_r: p.m_r, k: p.k, v0: p.v0, t_l: p.t_l, f_in: p.f_in, control_sign };
        match collision::impulse_ratio(&params) {
            Ok(r) => {
                unsafe {
                    *out = TsCollisionResult {
                        t_f: r.t_f,
                        total_impulse: r.total_impulse,
                        natural_impulse: r.natural_impulse,
                        eta: r.eta,
                    }
                };
                TsStatus::Ok
            }
            Err(e) => fail(collision_status(&e), e.to_string()),
        }
    })
}

/// Contact frame in the sensor base frame: row-major rotation and translation.
///
/// # Safety
/// `rotation` must point to 9 doubles and `translation` to 3, or be null.
#[no_mangle]
pub unsafe extern "C" fn ts_contact_transform(
    theta: f64,
    phi: f64,
    r_sensor: f64,
    rotation: *mut f64,
    translation: *mut f64,
) -> TsStatus {
    guard(|| {
        if rotation.is_null() || translation.is_null() {
            return fail(TsStatus::NullPointer, "null argument");
        }
        match kinematics::contact_transform(ContactAngles::new(theta, phi), r_sensor) {
            Ok(t) => {
                let rot = unsafe { std::slice::from_raw_parts_mut(rotation, 9) };
                for i in 0..3 {
                    for j in 0..3 {
                        rot[3 * i + j] = t.rotation[(i, j)];
                    }
                }
                let tr = unsafe { std::slice::from_raw_parts_mut(translation, 3) };
                tr.copy_from_slice(t.translation.as_slice());
                TsStatus::Ok
            }
            Err(e) => fail(TsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Contact angles of a point on the sensor sphere.
///
/// # Safety
/// `point` must point to 3 doubles; `theta` and `phi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_angles_from_point(point: *const f64, r_sensor: f64, theta: *mut f64, phi: *mut f64) -> TsStatus {
    guard(|| {
        if point.is_null() || theta.is_null() || phi.is_null() {
            return fail(TsStatus::NullPointer, "null argument");
        }
        let p = unsafe { std::slice::from_raw_parts(point, 3) };
        match kinematics::angles_from_point(&Vector3::new(p[0], p[1], p[2]), r_sensor) {
            Ok(a) => {
                unsafe {
                    *theta = a.theta;
                    *phi = a.phi;
                }
                TsStatus::Ok
            }
            Err(kinematics::KinematicsError::Degenerate) => fail(TsStatus::Degenerate, "point on the gimbal axis"),
            Err(e) => fail(TsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Load a model file. On success `*out` owns a handle to release with
/// [`ts_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_model_load(path: *const c_char, out: *mut *mut TsModel) -> TsStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(TsStatus::NullPointer, "null argument");
        }
        let Ok(path) = unsafe { CStr::from_ptr(path) }.to_str() else {
            return fail(TsStatus::InvalidArgument, "path is not UTF-8");
        };
        match estimator::load_model(Path::new(path)) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(TsModel { model })) };
                TsStatus::Ok
            }
            Err(estimator::EstimatorError::Io(e)) => fail(TsStatus::Io, format!("{path}: {e}")),
            Err(e) => fail(TsStatus::Parse, format!("{path}: {e}")),
        }
    })
}

/// Run the estimator: 8 pressures in, `[fx, fy, fz, theta, phi]` out.
///
/// # Safety
/// `model` must come from [`ts_model_load`]; `input` holds 8 doubles and
/// `output` room for 5.
#[no_mangle]
pub unsafe extern "C" fn ts_model_forward(model: *const TsModel, input: *const f64, output: *mut f64) -> TsStatus {
    guard(|| {
        if model.is_null() || input.is_null() || output.is_null() {
            return fail(TsStatus::NullPointer, "null argument");
        }
        let x: [f64; INPUTS] = unsafe { std::slice::from_raw_parts(input, INPUTS) }.try_into().expect("length fixed");
        if x.iter().any(|v| !v.is_finite()) {
            return fail(TsStatus::InvalidArgument, "non-finite input");
        }
        let y = unsafe { &*model }.model.forward(&x);
        unsafe { std::slice::from_raw_parts_mut(output, OUTPUTS) }.copy_from_slice(&y);
        TsStatus::Ok
    })
}

/// Release a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`ts_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ts_model_free(model: *mut TsModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

fn latency_status(e: &LatencyError) -> TsStatus {
    match e {
        LatencyError::Degenerate => TsStatus::Degenerate,
        _ => TsStatus::InvalidArgument,
    }
}

/// Delay of `measured` behind `truth` (s), both sampled at `rate_hz` from t = 0.
///
/// # Safety
/// The arrays must hold `n_truth` and `n_measured` doubles; `latency_s` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_estimate_latency(
    truth: *const f64,
    n_truth: usize,
    measured: *const f64,
    n_measured: usize,
    rate_hz: f64,
    max_lag_s: f64,
    latency_s: *mut f64,
) -> TsStatus {
    guard(|| {
        if truth.is_null() || measured.is_null() || latency_s.is_null() {
            return fail(TsStatus::NullPointer, "null argument");
        }
        let a = unsafe { std::slice::from_raw_parts(truth, n_truth) }.to_vec();
        let b = unsafe { std::slice::from_raw_parts(measured, n_measured) }.to_vec();
        let result = TimeSeries::new(rate_hz, 0.0, a)
            .and_then(|a| Ok((a, TimeSeries::new(rate_hz, 0.0, b)?)))
            .and_then(|(a, b)| latency::estimate_latency(&a, &b, &LatencyOptions { max_lag_s, refine: false }));
        match result {
            Ok(est) => {
                unsafe { *latency_s = est.latency_s };
                TsStatus::Ok
            }
            Err(e) => fail(latency_status(&e), e.to_string()),
        }
    })
}

/// Zero-phase moving average of `n` samples with an odd `window` into `out`.
///
/// # Safety
/// `x` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ts_zero_phase_moving_average(x: *const f64, n: usize, window: usize, out: *mut f64) -> TsStatus {
    guard(|| {
        if x.is_null() || out.is_null() {
            return fail(TsStatus::NullPointer, "null argument");
        }
        let values = unsafe { std::slice::from_raw_parts(x, n) }.to_vec();
        match TimeSeries::new(1.0, 0.0, values).and_then(|s| latency::zero_phase_moving_average(&s, window)) {
            Ok(y) => {
                unsafe { std::slice::from_raw_parts_mut(out, n) }.copy_from_slice(&y.values);
                TsStatus::Ok
            }
            Err(e) => fail(latency_status(&e), e.to_string()),
        }
    })
}
