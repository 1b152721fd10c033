use std::ffi::{CStr, CString};
use std::ptr;

use tipsense::collision::{impulse_ratio, CollisionParams};
use tipsense::estimator::{save_model, MlpModel, INPUTS, OUTPUTS};
use tipsense::kinematics::{contact_transform, ContactAngles, SENSOR_RADIUS};
use tipsense_ffi::*;

fn last_error() -> String {
    let p = ts_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn nominal() -> TsCollisionParams {
    let p = CollisionParams::nominal();
    TsCollisionParams { m_f: p.m_f, m_r: p.m_r, k: p.k, v0: p.v0, t_l: p.t_l, f_in: p.f_in, control_sign: -1 }
}

#[test]
fn collision_matches_library() {
    let mut out = TsCollisionResult::default();
    assert_eq!(unsafe { ts_collision_eta(&nominal(), &mut out) }, TsStatus::Ok);
    let expected = impulse_ratio(&CollisionParams::nominal()).unwrap();
    assert_eq!(out.eta, expected.eta);
    assert_eq!(out.t_f, expected.t_f);
}

#[test]
fn collision_errors() {
    let mut out = TsCollisionResult::default();
    assert_eq!(unsafe { ts_collision_eta(ptr::null(), &mut out) }, TsStatus::NullPointer);

    let bad_sign = TsCollisionParams { control_sign: 0, ..nominal() };
    assert_eq!(unsafe { ts_collision_eta(&bad_sign, &mut out) }, TsStatus::InvalidArgument);
    assert!(last_error().contains("control_sign"));

    let bad_mass = TsCollisionParams { m_f: -1.0, ..nominal() };
    assert_eq!(unsafe { ts_collision_eta(&bad_mass, &mut out) }, TsStatus::InvalidArgument);
    assert!(last_error().contains("m_f"));

    let press = TsCollisionParams { control_sign: 1, ..nominal() };
    assert_eq!(unsafe { ts_collision_eta(&press, &mut out) }, TsStatus::NoRelease);
    assert_eq!(out.eta, 0.0, "output untouched on failure");
}

#[test]
fn transform_and_inverse() {
    let (theta, phi) = (0.3, -0.7);
    let mut rot = [0.0; 9];
    let mut tr = [0.0; 3];
    assert_eq!(unsafe { ts_contact_transform(theta, phi, SENSOR_RADIUS, rot.as_mut_ptr(), tr.as_mut_ptr()) }, TsStatus::Ok);
    let t = contact_transform(ContactAngles::new(theta, phi), SENSOR_RADIUS).unwrap();
    assert_eq!(rot[1], t.rotation[(0, 1)]);
    assert_eq!(rot[3], t.rotation[(1, 0)]);
    assert_eq!(tr, [t.translation.x, t.translation.y, t.translation.z]);

    let (mut th, mut ph) = (0.0, 0.0);
    assert_eq!(unsafe { ts_angles_from_point(tr.as_ptr(), SENSOR_RADIUS, &mut th, &mut ph) }, TsStatus::Ok);
    assert!((th - theta).abs() < 1e-12 && (ph - phi).abs() < 1e-12);

    let off = [1.0, 0.0, 0.0];
    assert_eq!(unsafe { ts_angles_from_point(off.as_ptr(), SENSOR_RADIUS, &mut th, &mut ph) }, TsStatus::InvalidArgument);
    assert_eq!(unsafe { ts_contact_transform(theta, phi, -1.0, rot.as_mut_ptr(), tr.as_mut_ptr()) }, TsStatus::InvalidArgument);
    assert_eq!(unsafe { ts_contact_transform(theta, phi, 1.0, ptr::null_mut(), tr.as_mut_ptr()) }, TsStatus::NullPointer);
}

#[test]
fn model_handle_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let mut model = MlpModel::zeros();
    let n = model.params().len();
    model.params_mut()[n - OUTPUTS..].copy_from_slice(&[1.0, -2.0, 3.0, 0.25, -0.5]);
    save_model(&model, serde_json::Value::Null, &path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { ts_model_load(c_path.as_ptr(), &mut handle) }, TsStatus::Ok);
    assert!(!handle.is_null());

    let x = [0.1; INPUTS];
    let mut y = [0.0; OUTPUTS];
    assert_eq!(unsafe { ts_model_forward(handle, x.as_ptr(), y.as_mut_ptr()) }, TsStatus::Ok);
    assert_eq!(y, model.forward(&x));

    let nan = [f64::NAN; INPUTS];
    assert_eq!(unsafe { ts_model_forward(handle, nan.as_ptr(), y.as_mut_ptr()) }, TsStatus::InvalidArgument);
    unsafe { ts_model_free(handle) };
    unsafe { ts_model_free(ptr::null_mut()) };

    let missing = CString::new(dir.path().join("absent.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ts_model_load(missing.as_ptr(), &mut handle) }, TsStatus::Io);
    std::fs::write(&path, "{not json").unwrap();
    assert_eq!(unsafe { ts_model_load(c_path.as_ptr(), &mut handle) }, TsStatus::Parse);
    assert!(last_error().contains("model.json"));
}

#[test]
fn latency_and_filter() {
    let rate = 1000.0;
    let truth: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.013).sin() + (i as f64 * 0.071).cos()).collect();
    let measured: Vec<f64> = (0..2000).map(|i| if i >= 7 { truth[i - 7] } else { 0.0 }).collect();
    let mut lat = 0.0;
    let status = unsafe {
        ts_estimate_latency(truth.as_ptr(), truth.len(), measured.as_ptr(), measured.len(), rate, 0.1, &mut lat)
    };
    assert_eq!(status, TsStatus::Ok);
    assert!((lat - 0.007).abs() < 1e-9, "{lat}");

    let flat = vec![1.0; 100];
    let status = unsafe { ts_estimate_latency(flat.as_ptr(), 100, flat.as_ptr(), 100, rate, 0.01, &mut lat) };
    assert_eq!(status, TsStatus::Degenerate);

    let x = [0.0, 0.0, 3.0, 0.0, 0.0];
    let mut y = [0.0; 5];
    assert_eq!(unsafe { ts_zero_phase_moving_average(x.as_ptr(), 5, 3, y.as_mut_ptr()) }, TsStatus::Ok);
    assert!((y[2] - y[1]).abs() > 0.0 && (y[1] - y[3]).abs() < 1e-12);
    assert_eq!(unsafe { ts_zero_phase_moving_average(x.as_ptr(), 5, 4, y.as_mut_ptr()) }, TsStatus::InvalidArgument);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/tipsense.h");
    for name in [
        "ts_last_error_message",
        "ts_collision_eta",
        "ts_contact_transform",
        "ts_angles_from_point",
        "ts_model_load",
        "ts_model_forward",
        "ts_model_free",
        "ts_estimate_latency",
        "ts_zero_phase_moving_average",
        "TS_STATUS_NO_RELEASE",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
