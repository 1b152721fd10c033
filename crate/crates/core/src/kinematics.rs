//! Contact location on the spherical fingertip and the base/contact frame transform.
//!
//! A contact is located by two angles: `theta`, a rotation about the base
//! x-axis applied first, and `phi`, a rotation about the base y-axis applied
//! after it. The contact frame is `T = Ry(phi) * Rx(theta) * Trans(0, 0, r)`,
//! mapping contact-frame coordinates to base-frame coordinates. Its z-axis is
//! the outward surface normal.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use thiserror::Error;

/// Fingertip radius (m).
pub const SENSOR_RADIUS: f64 = 0.010;
/// Trained range of `theta` (rad).
pub const THETA_RANGE: (f64, f64) = (-FRAC_PI_4, FRAC_PI_4);
/// Trained range of `phi` (rad).
pub const PHI_RANGE: (f64, f64) = (-3.0 * FRAC_PI_4, FRAC_PI_4);
/// Largest trained shear magnitude per axis (N).
pub const SHEAR_LIMIT: f64 = 15.0;
/// Largest trained normal force magnitude (N); normal forces are non-positive.
pub const NORMAL_LIMIT: f64 = 25.0;

const ON_SPHERE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("non-finite input")]
    NonFinite,
    #[error("sensor radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("point is {distance} m from the center, expected the sensor radius {radius} m")]
    OffSphere { distance: f64, radius: f64 },
    #[error("point lies on the y-axis pole where phi is undefined")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactAngles {
    pub theta: f64,
    pub phi: f64,
}

impl ContactAngles {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Self {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.phi.is_finite()
    }

    pub fn in_training_domain(&self) -> bool {
        (THETA_RANGE.0..=THETA_RANGE.1).contains(&self.theta) && (PHI_RANGE.0..=PHI_RANGE.1).contains(&self.phi)
    }

    /// `Ry(phi) * Rx(theta)`.
    pub fn rotation(&self) -> Matrix3<f64> {
        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), self.theta);
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), self.phi);
        (ry * rx).into_inner()
    }
}

/// Force in the contact frame (N). `fz` is the normal component and is
/// negative when the fingertip is pressed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactForce {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
}

impl ContactForce {
    pub fn new(fx: f64, fy: f64, fz: f64) -> Self {
        Self { fx, fy, fz }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.fz)
    }

    pub fn shear_magnitude(&self) -> f64 {
        self.fx.hypot(self.fy)
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fy.is_finite() && self.fz.is_finite()
    }

    pub fn in_training_domain(&self) -> bool {
        self.fx.abs() <= SHEAR_LIMIT
            && self.fy.abs() <= SHEAR_LIMIT
            && self.fz <= 0.0
            && self.fz >= -NORMAL_LIMIT
    }
}

/// Proper rigid transform; maps points from a child frame into its parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    /// Orthonormality and unit determinant, both within `tol`.
    pub fn is_proper(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r * r.transpose() - Matrix3::identity()).abs().max() <= tol && (r.determinant() - 1.0).abs() <= tol
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }
}

/// Contact frame expressed in the sensor base frame.
pub fn contact_transform(angles: ContactAngles, r_sensor: f64) -> Result<RigidTransform, KinematicsError> {
    if !angles.is_finite() || !r_sensor.is_finite() {
        return Err(KinematicsError::NonFinite);
    }
    if r_sensor <= 0.0 {
        return Err(KinematicsError::BadRadius(r_sensor));
    }
    let rotation = angles.rotation();
    let p0 = Vector3::new(0.0, 0.0, r_sensor);
    Ok(RigidTransform { rotation, translation: rotation * p0 })
}

/// Outward unit normal at the contact, in the base frame.
pub fn contact_normal(angles: ContactAngles) -> Vector3<f64> {
    let (st, ct) = angles.theta.sin_cos();
    let (sp, cp) = angles.phi.sin_cos();
    // Third column of Ry(phi) Rx(theta).
    Vector3::new(ct * sp, -st, ct * cp)
}

/// Re-express a contact-frame force in the base frame.
pub fn force_to_base(angles: ContactAngles, force: ContactForce) -> Vector3<f64> {
    angles.rotation() * force.as_vector()
}

/// Inverse of the contact translation: angles locating `p` on the sphere,
/// with `theta` in (-pi/2, pi/2).
pub fn angles_from_point(p: &Vector3<f64>, r_sensor: f64) -> Result<ContactAngles, KinematicsError> {
    if !(p.iter().all(|v| v.is_finite()) && r_sensor.is_finite()) {
        return Err(KinematicsError::NonFinite);
    }
    if r_sensor <= 0.0 {
        return Err(KinematicsError::BadRadius(r_sensor));
    }
    let distance = p.norm();
    if (distance - r_sensor).abs() > ON_SPHERE_TOL {
        return Err(KinematicsError::OffSphere { distance, radius: r_sensor });
    }
    // p = r (cos t sin f, -sin t, cos t cos f)
    let xz = p.x.hypot(p.z);
    if xz <= 1e-9 * r_sensor {
        return Err(KinematicsError::Degenerate);
    }
    Ok(ContactAngles { theta: (-p.y).atan2(xz), phi: p.x.atan2(p.z) })
}
