//! Synthetic barometer array and the bowl data-collection protocol.
//!
//! Eight pressure sensors sit under the rubber dome, four on each of two
//! perpendicular boards. Each channel responds to a contact through an angular
//! kernel and a shear coupling:
//!
//! ```text
//! c_i = max(d_i . n, 0)^q * (w_n |fz| + w_s (s . t_i))
//! ```
//!
//! where `n` is the contact normal, `d_i` the sensor direction, `s` the shear
//! force rotated into the base frame and `t_i = d_i - (d_i . n) n` the sensor's
//! tangential offset from the contact. Shear pushes pressure toward the sensors
//! ahead of it, which makes the shear direction observable. Gaussian noise is
//! added before ADC-style quantization.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::kinematics::{contact_normal, ContactAngles, ContactForce, NORMAL_LIMIT, SHEAR_LIMIT};
use crate::numfmt::join_sig9;

pub const CHANNELS: usize = 8;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("layout: {0}")]
    Layout(String),
    #[error("contact state outside the trained domain: {0:?}")]
    OutOfDomain(ContactState),
    #[error("patch {index} at theta={theta_deg:.3} deg, phi={phi_deg:.3} deg: {reason}")]
    Patch { index: usize, theta_deg: f64, phi_deg: f64, reason: String },
    #[error("invalid protocol: {0}")]
    Protocol(String),
    #[error("noise standard deviation must be finite and non-negative, got {0}")]
    Noise(f64),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("dataset is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Board {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureSensor {
    pub direction: [f64; 3],
    pub board: Board,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureSensorLayout {
    pub sensors: Vec<PressureSensor>,
}

impl Default for PressureSensorLayout {
    /// Two perpendicular arcs: board B around the -x side, board A around +z.
    /// Sensors step 22.5 deg in phi and alternate +/-20 deg in theta.
    fn default() -> Self {
        let sensors = (0..CHANNELS)
            .map(|i| {
                let phi = -123.75 + 22.5 * i as f64;
                let theta = if i % 2 == 0 { 20.0 } else { -20.0 };
                let n = contact_normal(ContactAngles::from_degrees(theta, phi));
                PressureSensor { direction: [n.x, n.y, n.z], board: if i < 4 { Board::B } else { Board::A } }
            })
            .collect();
        Self { sensors }
    }
}

impl PressureSensorLayout {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.sensors.len() != CHANNELS {
            return Err(SensorError::Layout(format!("expected {CHANNELS} sensors, got {}", self.sensors.len())));
        }
        let on_a = self.sensors.iter().filter(|s| s.board == Board::A).count();
        if on_a != CHANNELS / 2 {
            return Err(SensorError::Layout(format!("boards must carry 4 sensors each, board A has {on_a}")));
        }
        for (i, s) in self.sensors.iter().enumerate() {
            let n = Vector3::from(s.direction).norm();
            if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
                return Err(SensorError::Layout(format!("sensor {i} direction is not unit length ({n})")));
            }
        }
        for i in 0..CHANNELS {
            for j in i + 1..CHANNELS {
                let d = Vector3::from(self.sensors[i].direction) - Vector3::from(self.sensors[j].direction);
                if d.norm() < 1e-9 {
                    return Err(SensorError::Layout(format!("sensors {i} and {j} share a direction")));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("layout serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn direction(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.sensors[i].direction)
    }
}

/// Constants of the pressure-transfer model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    /// Exponent of the cosine kernel on the normal term.
    pub kernel_power: i32,
    /// Exponent of the cosine kernel on the shear term.
    pub shear_kernel_power: i32,
    /// Channel gain per newton of normal force.
    pub normal_gain: f64,
    /// Channel gain per newton of shear along the tangential offset.
    pub shear_gain: f64,
    /// ADC full scale; readings clamp to [-full_scale, full_scale].
    pub full_scale: f64,
    /// Quantization levels across `full_scale`.
    pub adc_levels: u32,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self { kernel_power: 4, shear_kernel_power: 1, normal_gain: 0.04, shear_gain: 0.01, full_scale: 2.0, adc_levels: 4096 }
    }
}

impl TransferConfig {
    pub fn quantum(&self) -> f64 {
        self.full_scale / self.adc_levels as f64
    }

    pub fn quantize(&self, v: f64) -> f64 {
        let q = self.quantum();
        ((v / q).round() * q).clamp(-self.full_scale, self.full_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactState {
    pub angles: ContactAngles,
    pub force: ContactForce,
}

impl ContactState {
    pub fn new(angles: ContactAngles, force: ContactForce) -> Self {
        Self { angles, force }
    }

    pub fn in_domain(&self) -> bool {
        self.angles.is_finite() && self.force.is_finite() && self.angles.in_training_domain() && self.force.in_training_domain()
    }

    /// `[fx, fy, fz, theta, phi]`, the estimator's output order.
    pub fn to_target(&self) -> [f64; 5] {
        [self.force.fx, self.force.fy, self.force.fz, self.angles.theta, self.angles.phi]
    }

    pub fn from_target(t: &[f64; 5]) -> Self {
        Self { angles: ContactAngles::new(t[3], t[4]), force: ContactForce::new(t[0], t[1], t[2]) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PressureSample {
    pub s: [f64; CHANNELS],
    pub timestamp: f64,
}

/// Noiseless, unquantized channel responses.
pub fn channel_response(layout: &PressureSensorLayout, cfg: &TransferConfig, state: &ContactState) -> [f64; CHANNELS] {
    let n = contact_normal(state.angles);
    let shear = state.angles.rotation() * Vector3::new(state.force.fx, state.force.fy, 0.0);
    let normal = state.force.fz.abs();
    let mut out = [0.0; CHANNELS];
    for (i, c) in out.iter_mut().enumerate() {
        let d = layout.direction(i);
        let cos = d.dot(&n);
        if cos <= 0.0 {
            continue;
        }
        let tangential = d - cos * n;
        *c = cos.powi(cfg.kernel_power) * cfg.normal_gain * normal
            + cos.powi(cfg.shear_kernel_power) * cfg.shear_gain * shear.dot(&tangential);
    }
    out
}

/// One noisy, quantized pressure sample for `state`.
pub fn synthesize<R: rand::Rng + ?Sized>(
    layout: &PressureSensorLayout,
    cfg: &TransferConfig,
    state: &ContactState,
    noise_std: f64,
    rng: &mut R,
) -> Result<PressureSample, SensorError> {
    if !state.in_domain() {
        return Err(SensorError::OutOfDomain(*state));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(SensorError::Noise(noise_std));
    }
    let clean = channel_response(layout, cfg, state);
    let noise = Normal::new(0.0, noise_std).map_err(|_| SensorError::Noise(noise_std))?;
    let mut s = [0.0; CHANNELS];
    for (out, c) in s.iter_mut().zip(clean) {
        let v = if noise_std > 0.0 { c + noise.sample(rng) } else { c };
        *out = cfg.quantize(v);
    }
    Ok(PressureSample { s, timestamp: 0.0 })
}

/// Motion parameters of the layered asterisk press.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsteriskProtocol {
    /// Normal-force levels, evenly spaced down to -25 N.
    pub layers: usize,
    /// Shear directions per level, evenly spaced over a full turn.
    pub rays: usize,
    /// States sampled along each 0 -> 15 -> 0 N shear ramp.
    pub points_per_ray: usize,
    /// Friction bound: shear magnitude never exceeds `mu * |fz|`.
    pub mu: f64,
}

impl Default for AsteriskProtocol {
    fn default() -> Self {
        Self { layers: 5, rays: 8, points_per_ray: 18, mu: 1.0 }
    }
}

impl AsteriskProtocol {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.layers == 0 || self.rays == 0 || self.points_per_ray == 0 {
            return Err(SensorError::Protocol("layers, rays and points_per_ray must be at least 1".into()));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(SensorError::Protocol(format!("friction bound must be non-negative, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn states_per_patch(&self) -> usize {
        self.layers * self.rays * self.points_per_ray
    }
}

/// States visited while pressing one planar patch: the contact angles never change.
pub fn asterisk_trajectory(patch: ContactAngles, protocol: &AsteriskProtocol) -> Vec<ContactState> {
    let mut states = Vec::with_capacity(protocol.states_per_patch());
    for layer in 1..=protocol.layers {
        let fz = -NORMAL_LIMIT * layer as f64 / protocol.layers as f64;
        let cap = protocol.mu * fz.abs();
        for ray in 0..protocol.rays {
            let heading = std::f64::consts::TAU * ray as f64 / protocol.rays as f64;
            let (sin, cos) = heading.sin_cos();
            for p in 0..protocol.points_per_ray {
                let s = (p as f64 + 0.5) / protocol.points_per_ray as f64;
                let ramp = SHEAR_LIMIT * (1.0 - (2.0 * s - 1.0).abs());
                let magnitude = ramp.min(cap);
                states.push(ContactState::new(patch, ContactForce::new(magnitude * cos, magnitude * sin, fz)));
            }
        }
    }
    states
}

/// Patch grid: a theta range crossed with each phi band (degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub theta_deg: [f64; 2],
    pub phi_bands_deg: Vec<[f64; 2]>,
    pub theta_points: usize,
    pub phi_points: usize,
}

impl Default for PatchGrid {
    /// Three overlapping 90 deg bands, one per mounting orientation.
    fn default() -> Self {
        Self {
            theta_deg: [-45.0, 45.0],
            phi_bands_deg: vec![[-135.0, -45.0], [-90.0, 0.0], [-45.0, 45.0]],
            theta_points: 4,
            phi_points: 4,
        }
    }
}

fn grid_points(range: [f64; 2], n: usize) -> Vec<f64> {
    if n == 1 {
        vec![0.5 * (range[0] + range[1])]
    } else {
        crate::collision::linspace(range[0], range[1], n)
    }
}

impl PatchGrid {
    pub fn single(theta_deg: f64, phi_deg: f64) -> Self {
        Self { theta_deg: [theta_deg; 2], phi_bands_deg: vec![[phi_deg; 2]], theta_points: 1, phi_points: 1 }
    }

    /// Patches band by band, theta-major within each band.
    pub fn patches(&self) -> Vec<ContactAngles> {
        let thetas = grid_points(self.theta_deg, self.theta_points);
        self.phi_bands_deg
            .iter()
            .flat_map(|band| {
                let phis = grid_points(*band, self.phi_points);
                thetas
                    .iter()
                    .flat_map(move |&t| phis.clone().into_iter().map(move |p| ContactAngles::from_degrees(t, p)))
            })
            .collect()
    }
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub layout: PressureSensorLayout,
    pub transfer: TransferConfig,
    pub patches: PatchGrid,
    pub protocol: AsteriskProtocol,
    pub noise_std: f64,
    pub seed: u64,
    pub train_fraction: f64,
    /// Sample rate used for record timestamps (Hz).
    pub sample_rate_hz: f64,
}

impl Default for DatasetSpec {
    /// Desk scale: about a tenth of a full collection run.
    fn default() -> Self {
        Self {
            layout: PressureSensorLayout::default(),
            transfer: TransferConfig::default(),
            patches: PatchGrid::default(),
            protocol: AsteriskProtocol::default(),
            noise_std: DEFAULT_NOISE_STD,
            seed: 0,
            train_fraction: 0.9,
            sample_rate_hz: 200.0,
        }
    }
}

/// Default pressure noise (channel units).
pub const DEFAULT_NOISE_STD: f64 = 0.01;

impl DatasetSpec {
    pub fn expected_records(&self) -> usize {
        self.patches.patches().len() * self.protocol.states_per_patch()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub sample: PressureSample,
    pub state: ContactState,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub noise_std: f64,
    pub layout_hash: String,
    pub record_count: usize,
    pub spec: DatasetSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub records: Vec<Record>,
    pub meta: DatasetMeta,
}

impl LabeledDataset {
    /// Build from in-memory records (e.g. loaded or hand-made); metadata is
    /// filled from `spec`.
    pub fn from_records(records: Vec<Record>, spec: DatasetSpec) -> Self {
        let meta = DatasetMeta {
            seed: spec.seed,
            noise_std: spec.noise_std,
            layout_hash: spec.layout.hash(),
            record_count: records.len(),
            spec,
        };
        Self { records, meta }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run the protocol over every patch, synthesize readings, shuffle and split.
///
/// Each patch draws from its own RNG stream, so the result does not depend on
/// how patches are scheduled.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<LabeledDataset, SensorError> {
    spec.layout.validate()?;
    spec.protocol.validate()?;
    if !(spec.noise_std.is_finite() && spec.noise_std >= 0.0) {
        return Err(SensorError::Noise(spec.noise_std));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(SensorError::Protocol(format!("train fraction {} outside (0, 1]", spec.train_fraction)));
    }
    let patches = spec.patches.patches();
    let per_patch: Vec<Vec<(PressureSample, ContactState)>> = patches
        .par_iter()
        .enumerate()
        .map(|(index, &patch)| {
            let patch_err = |reason: String| SensorError::Patch {
                index,
                theta_deg: patch.theta.to_degrees(),
                phi_deg: patch.phi.to_degrees(),
                reason,
            };
            if !patch.in_training_domain() {
                return Err(patch_err("outside the trained angle range".into()));
            }
            let mut rng = stream_rng(spec.seed, index as u64 + 1);
            asterisk_trajectory(patch, &spec.protocol)
                .into_iter()
                .map(|state| {
                    synthesize(&spec.layout, &spec.transfer, &state, spec.noise_std, &mut rng)
                        .map(|s| (s, state))
                        .map_err(|e| patch_err(e.to_string()))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut pairs: Vec<(PressureSample, ContactState)> = per_patch.into_iter().flatten().collect();
    if pairs.is_empty() {
        return Err(SensorError::Empty);
    }
    for (i, (sample, _)) in pairs.iter_mut().enumerate() {
        sample.timestamp = i as f64 / spec.sample_rate_hz;
    }
    pairs.shuffle(&mut stream_rng(spec.seed, 0));
    let n_train = ((pairs.len() as f64) * spec.train_fraction).round() as usize;
    let records = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (sample, state))| Record {
            sample,
            state,
            split: if i < n_train { Split::Train } else { Split::Test },
        })
        .collect();
    Ok(LabeledDataset::from_records(records, spec.clone()))
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    s: [f64; CHANNELS],
    f: [f64; 3],
    a: [f64; 2],
    split: Split,
}

/// Sidecar path for a dataset file: `foo.jsonl` -> `foo.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Write the JSON-lines records (9 significant digits) and the metadata sidecar.
pub fn write_dataset(dataset: &LabeledDataset, path: &Path) -> Result<(), SensorError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_records(&mut out, &dataset.records)?;
    out.flush()?;
    let meta = File::create(meta_path(path))?;
    serde_json::to_writer_pretty(BufWriter::new(meta), &dataset.meta)?;
    Ok(())
}

pub fn write_records<W: Write>(mut out: W, records: &[Record]) -> std::io::Result<()> {
    for r in records {
        let split = match r.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        writeln!(
            out,
            "{{\"s\":[{}],\"f\":[{}],\"a\":[{}],\"split\":\"{}\"}}",
            join_sig9(&r.sample.s),
            join_sig9(&[r.state.force.fx, r.state.force.fy, r.state.force.fz]),
            join_sig9(&[r.state.angles.theta, r.state.angles.phi]),
            split
        )?;
    }
    Ok(())
}

/// Read a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<LabeledDataset, SensorError> {
    let meta: DatasetMeta = serde_json::from_reader(BufReader::new(File::open(meta_path(path))?))?;
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: JsonRecord = serde_json::from_str(&line).map_err(|e| SensorError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        records.push(Record {
            sample: PressureSample { s: r.s, timestamp: i as f64 / meta.spec.sample_rate_hz },
            state: ContactState::new(ContactAngles::new(r.a[0], r.a[1]), ContactForce::new(r.f[0], r.f[1], r.f[2])),
            split: r.split,
        });
    }
    if records.is_empty() {
        return Err(SensorError::Empty);
    }
    Ok(LabeledDataset { meta: DatasetMeta { record_count: records.len(), ..meta }, records })
}
