//! Point-mass fingertip simulation with delayed sensing and reactive behaviors.
//!
//! The fingertip is a sphere of radius `radius_m` on a damped point mass.
//! Scene objects push on it through penalty springs. Sensors are sampled at a
//! fixed rate and each sample reaches the controller `latency_s` later; the
//! controller holds its last command between samples.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;
use thiserror::Error;

use crate::collision::{CollisionParams, ControlSign};
use crate::estimator::MlpModel;
use crate::geometry::{Aabb, Primitive};
use crate::kinematics::{angles_from_point, ContactForce, RigidTransform, SENSOR_RADIUS};
use crate::mapping::{
    project_contact, simulate_proximity, FingertipPose, ProximityArray, ProximityLayout, DEFAULT_CONTACT_THRESHOLD,
};
use crate::numfmt::sig9;
use crate::sensor::{channel_response, ContactState, PressureSensorLayout, TransferConfig};

#[derive(Debug, Error)]
pub enum ReactiveError {
    #[error("not in contact: sensed normal force {force_n:.3} N is below {threshold_n:.3} N")]
    NotInContact { force_n: f64, threshold_n: f64 },
    #[error("simulation unstable at t = {t_s:.6} s: fingertip at {position:?} (bound {bound_m} m)")]
    Unstable { t_s: f64, position: [f64; 3], bound_m: f64 },
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub mass_kg: f64,
    /// Viscous damping against world-frame velocity (N s/m).
    pub damping: f64,
    pub radius_m: f64,
    /// Penalty stiffness of fingertip-object contact (N/m).
    pub contact_stiffness: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Sensor base orientation as a rotation vector (rad).
    pub orientation: [f64; 3],
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            mass_kg: 0.1,
            damping: 5.0,
            radius_m: SENSOR_RADIUS,
            contact_stiffness: 1500.0,
            position: [0.0; 3],
            velocity: [0.0; 3],
            orientation: [0.0; 3],
        }
    }
}

impl PlantConfig {
    pub fn rotation(&self) -> Matrix3<f64> {
        Rotation3::new(Vector3::from(self.orientation)).into_inner()
    }

    pub fn validate(&self) -> Result<(), ReactiveError> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.mass_kg) && self.mass_kg > 0.0) {
            return Err(ReactiveError::Config(format!("plant.mass_kg must be positive, got {}", self.mass_kg)));
        }
        if !(ok(self.damping) && self.damping >= 0.0) {
            return Err(ReactiveError::Config(format!("plant.damping must be non-negative, got {}", self.damping)));
        }
        if !(ok(self.radius_m) && self.radius_m > 0.0) {
            return Err(ReactiveError::Config(format!("plant.radius_m must be positive, got {}", self.radius_m)));
        }
        if !(ok(self.contact_stiffness) && self.contact_stiffness > 0.0) {
            return Err(ReactiveError::Config("plant.contact_stiffness must be positive".into()));
        }
        if !self.position.iter().chain(&self.velocity).chain(&self.orientation).all(|v| v.is_finite()) {
            return Err(ReactiveError::Config("plant state must be finite".into()));
        }
        Ok(())
    }
}

/// Shape geometry as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Plane { point: [f64; 3], normal: [f64; 3] },
    Box { min: [f64; 3], max: [f64; 3] },
}

/// Convex object with a time-parameterized pose:
/// `offset(t) = velocity t + amplitude sin(2 pi frequency_hz t)`, plus an
/// optional sinusoidal tilt of planes about `tilt_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub shape: Shape,
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub amplitude: [f64; 3],
    #[serde(default)]
    pub frequency_hz: f64,
    #[serde(default)]
    pub tilt_axis: [f64; 3],
    #[serde(default)]
    pub tilt_amplitude_rad: f64,
    #[serde(default)]
    pub tilt_frequency_hz: f64,
}

impl SceneObject {
    pub fn fixed(shape: Shape) -> Self {
        Self {
            shape,
            velocity: [0.0; 3],
            amplitude: [0.0; 3],
            frequency_hz: 0.0,
            tilt_axis: [0.0; 3],
            tilt_amplitude_rad: 0.0,
            tilt_frequency_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ReactiveError> {
        let prim = self.primitive_at(0.0);
        if !prim.is_valid() {
            return Err(ReactiveError::Config(format!("malformed shape {:?}", self.shape)));
        }
        let finite = self
            .velocity
            .iter()
            .chain(&self.amplitude)
            .chain(&self.tilt_axis)
            .chain([&self.frequency_hz, &self.tilt_amplitude_rad, &self.tilt_frequency_hz])
            .all(|v| v.is_finite());
        if !finite {
            return Err(ReactiveError::Config("object motion must be finite".into()));
        }
        if self.tilt_amplitude_rad != 0.0 {
            if matches!(self.shape, Shape::Box { .. }) {
                return Err(ReactiveError::Config("only planes can tilt".into()));
            }
            if Vector3::from(self.tilt_axis).norm() < 1e-12 {
                return Err(ReactiveError::Config("tilt_axis must be nonzero".into()));
            }
        }
        Ok(())
    }

    pub fn offset(&self, t: f64) -> Vector3<f64> {
        let s = (std::f64::consts::TAU * self.frequency_hz * t).sin();
        Vector3::from(self.velocity) * t + Vector3::from(self.amplitude) * s
    }

    pub fn primitive_at(&self, t: f64) -> Primitive {
        let off = self.offset(t);
        match self.shape {
            Shape::Plane { point, normal } => {
                let mut n = Vector3::from(normal);
                if self.tilt_amplitude_rad != 0.0 {
                    let angle = self.tilt_amplitude_rad * (std::f64::consts::TAU * self.tilt_frequency_hz * t).sin();
                    let axis = nalgebra::Unit::new_normalize(Vector3::from(self.tilt_axis));
                    n = Rotation3::from_axis_angle(&axis, angle) * n;
                }
                let p = Vector3::from(point) + off;
                Primitive::plane([p.x, p.y, p.z], [n.x, n.y, n.z])
            }
            Shape::Box { min, max } => Primitive::Box(Aabb::new(min, max).translated(&off)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    None,
    /// Constant force `f_des` along the sensed contact normal.
    ContactFollowing { f_des: f64 },
    /// Virtual springs on proximity readings below `d_thresh_mm`.
    PotentialField { d_thresh_mm: f64, k_field: f64 },
    /// After the first sensed contact, a constant force of `f_in` away from
    /// (retract) or into (press) the contact.
    CollisionReflex {
        f_in: f64,
        #[serde(default = "default_sign")]
        sign: ControlSign,
    },
}

fn default_sign() -> ControlSign {
    ControlSign::Retract
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensingConfig {
    /// Exact contact state from the simulator.
    Oracle,
    /// Noisy pressure forward model followed by a trained estimator.
    Estimated { model: std::path::PathBuf, noise_std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_rate")]
    pub sensor_rate_hz: f64,
    #[serde(default = "default_latency")]
    pub latency_s: f64,
    #[serde(default = "default_threshold")]
    pub contact_threshold_n: f64,
    #[serde(default = "default_bound")]
    pub position_bound_m: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub plant: PlantConfig,
    pub behavior: Behavior,
    #[serde(default = "default_sensing")]
    pub sensing: SensingConfig,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_rate() -> f64 {
    200.0
}
fn default_latency() -> f64 {
    0.007
}
fn default_threshold() -> f64 {
    DEFAULT_CONTACT_THRESHOLD
}
fn default_bound() -> f64 {
    10.0
}
fn default_sensing() -> SensingConfig {
    SensingConfig::Oracle
}

impl Scenario {
    pub fn new(duration_s: f64, behavior: Behavior, plant: PlantConfig, objects: Vec<SceneObject>) -> Self {
        Self {
            duration_s,
            dt_s: default_dt(),
            sensor_rate_hz: default_rate(),
            latency_s: default_latency(),
            contact_threshold_n: default_threshold(),
            position_bound_m: default_bound(),
            seed: 0,
            plant,
            behavior,
            sensing: SensingConfig::Oracle,
            objects,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ReactiveError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ReactiveError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ReactiveError> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ReactiveError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("duration_s", self.duration_s)?;
        pos("dt_s", self.dt_s)?;
        pos("sensor_rate_hz", self.sensor_rate_hz)?;
        pos("position_bound_m", self.position_bound_m)?;
        if !(self.latency_s.is_finite() && self.latency_s >= 0.0) {
            return Err(ReactiveError::Config(format!("latency_s must be non-negative, got {}", self.latency_s)));
        }
        if !(self.contact_threshold_n.is_finite() && self.contact_threshold_n >= 0.0) {
            return Err(ReactiveError::Config("contact_threshold_n must be non-negative".into()));
        }
        match self.behavior {
            Behavior::ContactFollowing { f_des } if !f_des.is_finite() => {
                return Err(ReactiveError::Config("f_des must be finite".into()))
            }
            Behavior::PotentialField { d_thresh_mm, k_field } if !(d_thresh_mm.is_finite() && k_field.is_finite() && k_field >= 0.0) => {
                return Err(ReactiveError::Config("potential field gains must be finite and k_field >= 0".into()))
            }
            Behavior::CollisionReflex { f_in, .. } if !(f_in.is_finite() && f_in >= 0.0) => {
                return Err(ReactiveError::Config("f_in must be non-negative".into()))
            }
            _ => {}
        }
        if let SensingConfig::Estimated { noise_std, .. } = &self.sensing {
            if !(noise_std.is_finite() && *noise_std >= 0.0) {
                return Err(ReactiveError::Config("sensing.noise_std must be non-negative".into()));
            }
        }
        self.plant.validate()?;
        for o in &self.objects {
            o.validate()?;
        }
        Ok(())
    }
}

/// Runtime sensing pipeline.
pub enum Sensing<'a> {
    Oracle,
    Estimated {
        model: &'a MlpModel,
        layout: PressureSensorLayout,
        transfer: TransferConfig,
        noise_std: f64,
    },
}

/// Command for contact following: `f_des` along the world contact normal.
pub fn contact_following_command(
    rotation: &Matrix3<f64>,
    sensed: &ContactState,
    f_des: f64,
    threshold_n: f64,
) -> Result<Vector3<f64>, ReactiveError> {
    let pose = FingertipPose::new(RigidTransform::new(*rotation, Vector3::zeros()), 0.0);
    let point = project_contact(&pose, sensed, threshold_n, SENSOR_RADIUS).map_err(|_| ReactiveError::NotInContact {
        force_n: sensed.force.fz.abs(),
        threshold_n,
    })?;
    Ok(point.normal.expect("contact points carry a normal") * f_des)
}

/// Sum of virtual spring forces from readings closer than `d_thresh_mm`.
pub fn potential_field_command(
    rotation: &Matrix3<f64>,
    layout: &ProximityLayout,
    array: &ProximityArray,
    d_thresh_mm: f64,
    k_field: f64,
) -> Vector3<f64> {
    let mut f = Vector3::zeros();
    for (ray, reading) in layout.rays.iter().zip(array.readings_mm) {
        if let Some(d) = reading {
            if d < d_thresh_mm {
                let dir = rotation * Vector3::from(ray.direction);
                f -= dir * (k_field * (d_thresh_mm - d) / 1000.0);
            }
        }
    }
    f
}

/// Exact contact between the fingertip sphere and the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneContact {
    /// Force of the objects on the fingertip (world).
    pub force: Vector3<f64>,
    /// Unit direction from the fingertip center toward the deepest contact.
    pub direction: Vector3<f64>,
    pub penetration: f64,
}

fn scene_contact(prims: &[Primitive], center: &Vector3<f64>, radius: f64, k: f64) -> Option<SceneContact> {
    let mut force = Vector3::zeros();
    let mut deepest: Option<(f64, Vector3<f64>)> = None;
    for p in prims {
        let q = p.query(center);
        let pen = radius - q.distance;
        if pen > 0.0 {
            force += q.normal * (k * pen);
            if deepest.is_none_or(|(d, _)| pen > d) {
                deepest = Some((pen, -q.normal));
            }
        }
    }
    deepest.map(|(penetration, direction)| SceneContact { force, direction, penetration })
}

/// Clearance between the fingertip surface and the nearest object.
fn clearance(prims: &[Primitive], center: &Vector3<f64>, radius: f64) -> f64 {
    prims.iter().map(|p| p.query(center).distance - radius).fold(f64::INFINITY, f64::min)
}

/// Contact state in the sensor frame, as the ideal sensor would report it.
fn oracle_state(rotation: &Matrix3<f64>, contact: &SceneContact) -> Option<ContactState> {
    let local_dir = rotation.transpose() * contact.direction;
    let angles = angles_from_point(&(local_dir * SENSOR_RADIUS), SENSOR_RADIUS).ok()?;
    let f_contact = angles.rotation().transpose() * (rotation.transpose() * contact.force);
    Some(ContactState::new(angles, ContactForce::new(f_contact.x, f_contact.y, f_contact.z)))
}

#[derive(Debug, Clone, Copy)]
struct SensorSample {
    t: f64,
    contact: Option<ContactState>,
    proximity: ProximityArray,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Contact force of the scene on the fingertip (world).
    pub contact_force: Vector3<f64>,
    pub in_contact: bool,
    pub command: Vector3<f64>,
    /// Measurement time of the sample behind `command`, if any.
    pub sensed_at: Option<f64>,
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub log: Vec<LogRow>,
    /// Integral of the contact force magnitude over the run (N s).
    pub contact_impulse: f64,
    pub min_clearance: f64,
    /// Time the first contact ended, if contact was made and then lost.
    pub first_release: Option<f64>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t_s,px,py,pz,vx,vy,vz,fx,fy,fz,contact_flag";

pub fn write_trajectory_csv<W: Write>(mut out: W, log: &[LogRow]) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    for r in log {
        let vals = [r.position, r.velocity, r.contact_force].map(|v| format!("{},{},{}", sig9(v.x), sig9(v.y), sig9(v.z)));
        writeln!(out, "{},{},{}", sig9(r.t), vals.join(","), u8::from(r.in_contact))?;
    }
    Ok(())
}

/// Run a scenario. Sampling at `sensor_rate_hz` begins at t = 0; a sample
/// taken at `ts` is first used at `ts + latency_s`.
pub fn simulate(scenario: &Scenario, sensing: &Sensing) -> Result<SimOutcome, ReactiveError> {
    scenario.validate()?;
    let plant = &scenario.plant;
    let rotation = plant.rotation();
    let layout = ProximityLayout::default();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let dt = scenario.dt_s;
    let steps = (scenario.duration_s / dt).round() as usize;
    let sample_period = 1.0 / scenario.sensor_rate_hz;

    let mut p = Vector3::from(plant.position);
    let mut v = Vector3::from(plant.velocity);
    let mut pending: VecDeque<SensorSample> = VecDeque::new();
    let mut next_sample = 0usize;
    let mut command = Vector3::zeros();
    let mut sensed_at = None;
    let mut reflex_direction: Option<Vector3<f64>> = None;
    let mut log = Vec::with_capacity(steps + 1);
    let mut impulse = 0.0;
    let mut min_clearance = f64::INFINITY;
    let mut touched = false;
    let mut first_release = None;

    for step in 0..=steps {
        let t = step as f64 * dt;
        let prims: Vec<Primitive> = scenario.objects.iter().map(|o| o.primitive_at(t)).collect();
        let contact = scene_contact(&prims, &p, plant.radius_m, plant.contact_stiffness);
        let gap = clearance(&prims, &p, plant.radius_m);
        min_clearance = min_clearance.min(gap);

        if contact.is_some() {
            touched = true;
        } else if touched && first_release.is_none() {
            first_release = Some(t);
        }

        // Sample sensors.
        if t + 1e-12 >= next_sample as f64 * sample_period {
            let pose = RigidTransform::new(rotation, p);
            let sample = SensorSample {
                t,
                contact: sense_contact(sensing, &rotation, contact.as_ref(), &mut rng),
                proximity: simulate_proximity(&prims, &pose, &layout),
            };
            pending.push_back(sample);
            while next_sample as f64 * sample_period <= t + 1e-12 {
                next_sample += 1;
            }
        }

        // Deliver samples whose latency has elapsed.
        while pending.front().is_some_and(|s| s.t + scenario.latency_s <= t + 1e-12) {
            let s = pending.pop_front().expect("front exists");
            sensed_at = Some(s.t);
            command = match scenario.behavior {
                Behavior::None => Vector3::zeros(),
                Behavior::ContactFollowing { f_des } => match s.contact {
                    Some(c) => contact_following_command(&rotation, &c, f_des, scenario.contact_threshold_n).unwrap_or(command),
                    None => command,
                },
                Behavior::PotentialField { d_thresh_mm, k_field } => {
                    potential_field_command(&rotation, &layout, &s.proximity, d_thresh_mm, k_field)
                }
                Behavior::CollisionReflex { f_in, sign } => {
                    if reflex_direction.is_none() {
                        if let Some(c) = s.contact.filter(|c| c.force.fz.abs() > scenario.contact_threshold_n) {
                            let pose = FingertipPose::new(RigidTransform::new(rotation, Vector3::zeros()), 0.0);
                            let n = project_contact(&pose, &c, 0.0, SENSOR_RADIUS)
                                .ok()
                                .and_then(|m| m.normal)
                                .unwrap_or_else(Vector3::zeros);
                            reflex_direction = Some(n);
                        }
                    }
                    reflex_direction.map_or(Vector3::zeros(), |n| n * (sign.factor() * f_in))
                }
            };
        }

        let f_contact = contact.map_or(Vector3::zeros(), |c| c.force);
        log.push(LogRow {
            t,
            position: p,
            velocity: v,
            contact_force: f_contact,
            in_contact: contact.is_some(),
            command,
            sensed_at,
            clearance: gap,
        });
        if step == steps {
            break;
        }
        impulse += f_contact.norm() * dt;

        let a = (f_contact + command - v * plant.damping) / plant.mass_kg;
        v += a * dt;
        p += v * dt;
        if !(p.iter().all(|x| x.is_finite()) && p.norm() <= scenario.position_bound_m) {
            return Err(ReactiveError::Unstable {
                t_s: t + dt,
                position: [p.x, p.y, p.z],
                bound_m: scenario.position_bound_m,
            });
        }
    }
    Ok(SimOutcome { log, contact_impulse: impulse, min_clearance, first_release })
}

fn sense_contact(
    sensing: &Sensing,
    rotation: &Matrix3<f64>,
    contact: Option<&SceneContact>,
    rng: &mut ChaCha8Rng,
) -> Option<ContactState> {
    match sensing {
        Sensing::Oracle => contact.and_then(|c| oracle_state(rotation, c)),
        Sensing::Estimated { model, layout, transfer, noise_std } => {
            let clean = contact.and_then(|c| oracle_state(rotation, c)).map_or([0.0; crate::sensor::CHANNELS], |s| {
                channel_response(layout, transfer, &s)
            });
            let noise = Normal::new(0.0, *noise_std).ok()?;
            let s = clean.map(|c| transfer.quantize(if *noise_std > 0.0 { c + noise.sample(rng) } else { c }));
            Some(ContactState::from_target(&model.forward(&s)))
        }
    }
}

/// One-dimensional collision matching the two-mass collision model: the
/// fingertip starts touching a wall while moving into it at `v0`, and the
/// reflex retracts or presses with `f_in` once contact has been sensed.
pub fn collision_scenario(params: &CollisionParams, dt: f64) -> Scenario {
    let r = SENSOR_RADIUS;
    let plant = PlantConfig {
        mass_kg: params.m_r,
        damping: 0.0,
        radius_m: r,
        contact_stiffness: params.k,
        position: [0.0; 3],
        velocity: [0.0, 0.0, params.v0],
        orientation: [0.0; 3],
    };
    let wall = SceneObject::fixed(Shape::Plane { point: [0.0, 0.0, r], normal: [0.0, 0.0, -1.0] });
    let half_period = std::f64::consts::PI / params.omega0();
    let mut s = Scenario::new(
        params.t_l + 4.0 * half_period,
        Behavior::CollisionReflex { f_in: params.f_in, sign: params.control_sign },
        plant,
        vec![wall],
    );
    s.dt_s = dt;
    s.sensor_rate_hz = 1.0 / dt;
    s.latency_s = params.t_l;
    s.contact_threshold_n = 0.0;
    s
}

/// Impulse ratio of the time-stepped collision against its zero-control run.
/// Both impulses include the plastic term `m_f v0` and end at the first release.
pub fn simulated_impulse_ratio(params: &CollisionParams, dt: f64) -> Result<f64, ReactiveError> {
    let impulse = |p: &CollisionParams| -> Result<f64, ReactiveError> {
        let out = simulate(&collision_scenario(p, dt), &Sensing::Oracle)?;
        let mut total = 0.0;
        for w in out.log.windows(2) {
            if !w[0].in_contact && w[0].t > 0.0 {
                break;
            }
            total += w[0].contact_force.norm() * dt;
        }
        if out.first_release.is_none() {
            return Err(ReactiveError::Config("the collision did not release within the run".into()));
        }
        Ok(p.m_f * p.v0 + total)
    };
    let baseline = CollisionParams { f_in: 0.0, ..*params };
    Ok(impulse(params)? / impulse(&baseline)?)
}

/// Fingertip pressing down on a plane that bobs and tilts under it.
pub fn contact_following_scenario(f_des: f64) -> Scenario {
    let plant = PlantConfig {
        // Start pressed 2 mm in, so the first sample already sees 3 N.
        position: [0.0, 0.0, SENSOR_RADIUS - 0.002],
        // Dome faces world -z.
        orientation: [std::f64::consts::PI, 0.0, 0.0],
        ..PlantConfig::default()
    };
    let floor = SceneObject {
        amplitude: [0.0, 0.0, 0.02],
        frequency_hz: 0.5,
        tilt_axis: [0.0, 1.0, 0.0],
        tilt_amplitude_rad: 0.15,
        tilt_frequency_hz: 0.3,
        ..SceneObject::fixed(Shape::Plane { point: [0.0, 0.0, 0.0], normal: [0.0, 0.0, 1.0] })
    };
    Scenario::new(5.0, Behavior::ContactFollowing { f_des }, plant, vec![floor])
}

/// A block driven at 0.1 m/s toward the front of a free fingertip.
pub fn approach_scenario(behavior: Behavior) -> Scenario {
    let block = SceneObject {
        velocity: [0.0, 0.0, -0.1],
        ..SceneObject::fixed(Shape::Box { min: [-0.05, -0.05, 0.13], max: [0.05, 0.05, 0.2] })
    };
    Scenario::new(2.0, behavior, PlantConfig::default(), vec![block])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::ContactAngles;

    #[test]
    fn idle_plant_stays_put() {
        let s = Scenario::new(1.0, Behavior::None, PlantConfig::default(), vec![]);
        let out = simulate(&s, &Sensing::Oracle).unwrap();
        assert_eq!(out.log.len(), 1001);
        assert!(out.log.iter().all(|r| r.position == Vector3::zeros() && r.velocity == Vector3::zeros()));
    }

    #[test]
    fn following_command_examples() {
        let state = ContactState::new(ContactAngles::default(), ContactForce::new(0.0, 0.0, -3.0));
        let id = Matrix3::identity();
        assert_eq!(contact_following_command(&id, &state, 2.0, 1.0).unwrap(), Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(contact_following_command(&id, &state, 0.0, 1.0).unwrap(), Vector3::zeros());
        assert!(matches!(contact_following_command(&id, &state, 2.0, 5.0), Err(ReactiveError::NotInContact { .. })));
    }

    #[test]
    fn field_is_zero_at_and_beyond_threshold() {
        let layout = ProximityLayout::default();
        let id = Matrix3::identity();
        let far = ProximityArray::from_raw([80.0, 100.0, -1.0, 120.0, 80.0]);
        assert_eq!(potential_field_command(&id, &layout, &far, 80.0, 100.0), Vector3::zeros());
        let near = ProximityArray::from_raw([70.0, -1.0, -1.0, -1.0, -1.0]);
        let f = potential_field_command(&id, &layout, &near, 80.0, 100.0);
        assert!((f - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn commands_wait_for_latency() {
        let s = approach_scenario(Behavior::PotentialField { d_thresh_mm: 80.0, k_field: 50.0 });
        let out = simulate(&s, &Sensing::Oracle).unwrap();
        for row in &out.log {
            if let Some(ts) = row.sensed_at {
                assert!(ts <= row.t - s.latency_s + 1e-9);
            } else {
                assert_eq!(row.command, Vector3::zeros());
            }
        }
    }

    #[test]
    fn runaway_is_detected() {
        let plant = PlantConfig { velocity: [100.0, 0.0, 0.0], damping: 0.0, ..PlantConfig::default() };
        let s = Scenario::new(1.0, Behavior::None, plant, vec![]);
        assert!(matches!(simulate(&s, &Sensing::Oracle), Err(ReactiveError::Unstable { .. })));
    }

    #[test]
    fn deterministic_under_seed() {
        let s = contact_following_scenario(2.0);
        let a = simulate(&s, &Sensing::Oracle).unwrap();
        let b = simulate(&s, &Sensing::Oracle).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scenario_toml_round_trip() {
        let s = contact_following_scenario(2.0);
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
        let bad = s.to_toml().replace("contact_following", "moonwalk");
        assert!(matches!(Scenario::from_toml(&bad), Err(ReactiveError::Config(_))));
    }

    #[test]
    fn oracle_state_for_head_on_press() {
        let c = SceneContact { force: Vector3::new(0.0, 0.0, -3.0), direction: Vector3::z(), penetration: 0.002 };
        let s = oracle_state(&Matrix3::identity(), &c).unwrap();
        assert!(s.angles.theta.abs() < 1e-12 && s.angles.phi.abs() < 1e-12);
        assert!((s.force.fz + 3.0).abs() < 1e-12);
    }

    #[test]
    fn following_sticks_to_moving_plane() {
        let f_des = 2.0;
        let out = simulate(&contact_following_scenario(f_des), &Sensing::Oracle).unwrap();
        for r in out.log.iter().filter(|r| r.t >= 0.5) {
            let f = r.contact_force.norm();
            assert!((0.5 * f_des..=2.0 * f_des).contains(&f), "force {f} at t = {}", r.t);
        }
    }

    #[test]
    fn field_keeps_block_away() {
        let none = simulate(&approach_scenario(Behavior::None), &Sensing::Oracle).unwrap();
        let field = PotentialField { d_thresh_mm: 80.0, k_field: 50.0 };
        let with = simulate(&approach_scenario(field), &Sensing::Oracle).unwrap();
        assert!(none.min_clearance <= 0.0);
        assert!(with.min_clearance > 0.05);
    }

    use Behavior::PotentialField;

    #[test]
    fn stepped_collision_tracks_closed_form() {
        let mut last = 0.0;
        for t_l in [0.0, 0.007, 0.02] {
            let p = CollisionParams { t_l, ..CollisionParams::nominal() };
            let analytic = crate::collision::impulse_ratio(&p).unwrap().eta;
            let sim = simulated_impulse_ratio(&p, 1e-5).unwrap();
            assert!((sim - analytic).abs() < 0.01 * analytic, "t_l {t_l}: {sim} vs {analytic}");
            assert!(sim > last);
            last = sim;
        }
    }
}
