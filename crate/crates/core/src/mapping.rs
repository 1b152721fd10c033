//! Coarse maps from proximity rays and contact estimates.
//!
//! During free motion every in-range time-of-flight reading becomes a world
//! point. When the fingertip touches something, the estimated contact location
//! and normal are added too. Points are binned into a sparse voxel grid.

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use thiserror::Error;

use crate::geometry::{raycast_all, Aabb, Primitive};
use crate::kinematics::{contact_normal, contact_transform, RigidTransform, SENSOR_RADIUS};
use crate::numfmt::sig9;
use crate::sensor::ContactState;

/// Number of time-of-flight sensors.
pub const TOF_COUNT: usize = 5;
/// Valid time-of-flight range (mm).
pub const TOF_MIN_MM: f64 = 10.0;
pub const TOF_MAX_MM: f64 = 150.0;
/// Smallest normal force accepted as a map contact (N).
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 1.58;
/// Default voxel edge (m).
pub const DEFAULT_CELL: f64 = 0.010;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("normal force {force_n:.3} N is below the contact threshold {threshold_n:.3} N")]
    BelowThreshold { force_n: f64, threshold_n: f64 },
    #[error("contact angles do not define a contact point: {0}")]
    Kinematics(#[from] crate::kinematics::KinematicsError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("{file}: {msg}")]
    Csv { file: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingertipPose {
    /// Sensor base frame in the world frame.
    pub transform: RigidTransform,
    pub t: f64,
}

impl FingertipPose {
    pub fn new(transform: RigidTransform, t: f64) -> Self {
        Self { transform, t }
    }

    pub fn from_quaternion(t: f64, q: [f64; 4], translation: [f64; 3]) -> Self {
        let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
        Self {
            transform: RigidTransform::new(uq.to_rotation_matrix().into_inner(), Vector3::from(translation)),
            t,
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.transform.rotation)
    }
}

/// One time-of-flight sensor: ray origin and unit direction in the base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityRay {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityLayout {
    pub rays: [ProximityRay; TOF_COUNT],
}

impl Default for ProximityLayout {
    /// Two sensors looking along +z past the dome, two along -x, one on the
    /// back face along +x. Offsets stay inside a 23 x 22 x 24 mm envelope.
    fn default() -> Self {
        let ray = |origin, direction| ProximityRay { origin, direction };
        Self {
            rays: [
                ray([0.0, 0.006, 0.011], [0.0, 0.0, 1.0]),
                ray([0.0, -0.006, 0.011], [0.0, 0.0, 1.0]),
                ray([-0.011, 0.006, 0.0], [-1.0, 0.0, 0.0]),
                ray([-0.011, -0.006, 0.0], [-1.0, 0.0, 0.0]),
                ray([0.011, 0.0, 0.0], [1.0, 0.0, 0.0]),
            ],
        }
    }
}

impl ProximityLayout {
    pub fn distinct_directions(&self) -> usize {
        let mut dirs: Vec<Vector3<f64>> = Vec::new();
        for r in &self.rays {
            let d = Vector3::from(r.direction);
            if !dirs.iter().any(|e| (e - d).norm() < 1e-9) {
                dirs.push(d);
            }
        }
        dirs.len()
    }
}

/// Five readings in millimetres; `None` marks out-of-range.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProximityArray {
    pub readings_mm: [Option<f64>; TOF_COUNT],
}

impl ProximityArray {
    /// Keep only readings inside the valid range.
    pub fn from_raw(raw_mm: [f64; TOF_COUNT]) -> Self {
        Self { readings_mm: raw_mm.map(|d| (d.is_finite() && (TOF_MIN_MM..=TOF_MAX_MM).contains(&d)).then_some(d)) }
    }

    /// CSV encoding: out-of-range as -1.
    pub fn to_raw(&self) -> [f64; TOF_COUNT] {
        self.readings_mm.map(|d| d.unwrap_or(-1.0))
    }
}

/// Simulated readings of every ray against the scene.
pub fn simulate_proximity(objects: &[Primitive], pose: &RigidTransform, layout: &ProximityLayout) -> ProximityArray {
    let raw = layout.rays.map(|ray| {
        let origin = pose.transform_point(&Vector3::from(ray.origin));
        let dir = pose.transform_vector(&Vector3::from(ray.direction));
        raycast_all(objects, &origin, &dir).map_or(f64::INFINITY, |d| d * 1000.0)
    });
    ProximityArray::from_raw(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Proximity,
    Contact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub position: Vector3<f64>,
    pub kind: PointKind,
    /// Contact normal (outward from the fingertip); contact points only.
    pub normal: Option<Vector3<f64>>,
    pub t: f64,
}

impl MapPoint {
    /// Normal of the touched surface, pointing out of the object.
    pub fn surface_normal(&self) -> Option<Vector3<f64>> {
        self.normal.map(|n| -n)
    }
}

/// World points for every in-range reading.
pub fn project_proximity(pose: &FingertipPose, layout: &ProximityLayout, array: &ProximityArray) -> Vec<MapPoint> {
    layout
        .rays
        .iter()
        .zip(array.readings_mm)
        .filter_map(|(ray, reading)| {
            let d = reading?;
            let local = Vector3::from(ray.origin) + Vector3::from(ray.direction) * (d / 1000.0);
            Some(MapPoint {
                position: pose.transform.transform_point(&local),
                kind: PointKind::Proximity,
                normal: None,
                t: pose.t,
            })
        })
        .collect()
}

/// World contact point and normal for an estimate whose normal force exceeds `threshold_n`.
pub fn project_contact(
    pose: &FingertipPose,
    estimate: &ContactState,
    threshold_n: f64,
    r_sensor: f64,
) -> Result<MapPoint, MappingError> {
    let force_n = estimate.force.fz.abs();
    if force_n < threshold_n {
        return Err(MappingError::BelowThreshold { force_n, threshold_n });
    }
    let local = contact_transform(estimate.angles, r_sensor)?;
    Ok(MapPoint {
        position: pose.transform.transform_point(&local.translation),
        kind: PointKind::Contact,
        normal: Some(pose.transform.transform_vector(&contact_normal(estimate.angles))),
        t: pose.t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CellCounts {
    pub proximity: u32,
    pub contact: u32,
}

/// Sparse voxel grid over fixed bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    pub bounds: Aabb,
    pub cell: f64,
    pub cells: BTreeMap<[i64; 3], CellCounts>,
    /// Points rejected for lying outside `bounds`.
    pub out_of_bounds: usize,
}

impl CoarseGrid {
    pub fn new(bounds: Aabb, cell: f64) -> Result<Self, MappingError> {
        if !bounds.is_valid() {
            return Err(MappingError::Grid(format!("bad bounds {bounds:?}")));
        }
        if !(cell.is_finite() && cell > 0.0) {
            return Err(MappingError::Grid(format!("cell size must be positive, got {cell}")));
        }
        Ok(Self { bounds, cell, cells: BTreeMap::new(), out_of_bounds: 0 })
    }

    pub fn index_of(&self, p: &Vector3<f64>) -> Option<[i64; 3]> {
        if !self.bounds.contains(p) {
            return None;
        }
        Some(std::array::from_fn(|i| ((p[i] - self.bounds.min[i]) / self.cell).floor() as i64))
    }

    pub fn cell_center(&self, idx: [i64; 3]) -> Vector3<f64> {
        Vector3::from(std::array::from_fn(|i| self.bounds.min[i] + (idx[i] as f64 + 0.5) * self.cell))
    }

    /// Returns false (and counts it) when the point is out of bounds.
    pub fn insert(&mut self, point: &MapPoint) -> bool {
        match self.index_of(&point.position) {
            Some(idx) => {
                let c = self.cells.entry(idx).or_default();
                match point.kind {
                    PointKind::Proximity => c.proximity += 1,
                    PointKind::Contact => c.contact += 1,
                }
                true
            }
            None => {
                self.out_of_bounds += 1;
                false
            }
        }
    }

    pub fn occupied(&self) -> BTreeSet<[i64; 3]> {
        self.cells.keys().copied().collect()
    }

    pub fn write_cells_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "ix,iy,iz,cx_m,cy_m,cz_m,proximity_hits,contact_hits")?;
        for (idx, counts) in &self.cells {
            let c = self.cell_center(*idx);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                idx[0],
                idx[1],
                idx[2],
                sig9(c.x),
                sig9(c.y),
                sig9(c.z),
                counts.proximity,
                counts.contact
            )?;
        }
        Ok(())
    }
}

/// Bin all points; the order of `points` does not matter.
pub fn rasterize<'a>(
    points: impl IntoIterator<Item = &'a MapPoint>,
    bounds: Aabb,
    cell: f64,
) -> Result<CoarseGrid, MappingError> {
    let mut grid = CoarseGrid::new(bounds, cell)?;
    for p in points {
        grid.insert(p);
    }
    Ok(grid)
}

/// Points CSV; the normal columns carry the surface normal of contacts.
pub fn write_points_csv<W: Write>(mut out: W, points: &[MapPoint]) -> std::io::Result<()> {
    writeln!(out, "t_s,x_m,y_m,z_m,kind,nx,ny,nz")?;
    for p in points {
        let kind = match p.kind {
            PointKind::Proximity => "proximity",
            PointKind::Contact => "contact",
        };
        let n = p.surface_normal().map_or([f64::NAN; 3], |n| [n.x, n.y, n.z]);
        let normals = if p.normal.is_some() {
            format!("{},{},{}", sig9(n[0]), sig9(n[1]), sig9(n[2]))
        } else {
            ",,".to_string()
        };
        writeln!(out, "{},{},{},{},{kind},{normals}", sig9(p.t), sig9(p.position.x), sig9(p.position.y), sig9(p.position.z))?;
    }
    Ok(())
}

fn read_rows<R: Read>(input: R, file: &str, columns: usize) -> Result<Vec<Vec<f64>>, MappingError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| MappingError::Csv { file: file.into(), msg: e.to_string() })?;
        if rec.len() != columns {
            return Err(MappingError::Csv {
                file: file.into(),
                msg: format!("line {}: expected {columns} columns, found {}", i + 2, rec.len()),
            });
        }
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| MappingError::Csv { file: file.into(), msg: format!("line {}: {e}", i + 2) })?;
        rows.push(row);
    }
    Ok(rows)
}

/// `t_s,qw,qx,qy,qz,tx,ty,tz`
pub fn read_pose_log<R: Read>(input: R, file: &str) -> Result<Vec<FingertipPose>, MappingError> {
    Ok(read_rows(input, file, 8)?
        .into_iter()
        .map(|r| FingertipPose::from_quaternion(r[0], [r[1], r[2], r[3], r[4]], [r[5], r[6], r[7]]))
        .collect())
}

pub fn write_pose_log<W: Write>(mut out: W, poses: &[FingertipPose]) -> std::io::Result<()> {
    writeln!(out, "t_s,qw,qx,qy,qz,tx,ty,tz")?;
    for p in poses {
        let q = p.quaternion();
        let t = p.transform.translation;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            sig9(p.t),
            sig9(q.w),
            sig9(q.i),
            sig9(q.j),
            sig9(q.k),
            sig9(t.x),
            sig9(t.y),
            sig9(t.z)
        )?;
    }
    Ok(())
}

/// `t_s,d1..d5` in mm, -1 for out-of-range.
pub fn read_proximity_log<R: Read>(input: R, file: &str) -> Result<Vec<(f64, ProximityArray)>, MappingError> {
    Ok(read_rows(input, file, 1 + TOF_COUNT)?
        .into_iter()
        .map(|r| (r[0], ProximityArray::from_raw(std::array::from_fn(|i| r[i + 1]))))
        .collect())
}

pub fn write_proximity_log<W: Write>(mut out: W, rows: &[(f64, ProximityArray)]) -> std::io::Result<()> {
    writeln!(out, "t_s,d1,d2,d3,d4,d5")?;
    for (t, a) in rows {
        let raw = a.to_raw();
        writeln!(out, "{},{}", sig9(*t), raw.map(sig9).join(","))?;
    }
    Ok(())
}

/// `t_s,fx,fy,fz,theta,phi` (contact frame forces in N, angles in rad).
pub fn read_contact_log<R: Read>(input: R, file: &str) -> Result<Vec<(f64, ContactState)>, MappingError> {
    Ok(read_rows(input, file, 6)?
        .into_iter()
        .map(|r| (r[0], ContactState::from_target(&[r[1], r[2], r[3], r[4], r[5]])))
        .collect())
}

pub fn write_contact_log<W: Write>(mut out: W, rows: &[(f64, ContactState)]) -> std::io::Result<()> {
    writeln!(out, "t_s,fx,fy,fz,theta,phi")?;
    for (t, s) in rows {
        writeln!(out, "{},{}", sig9(*t), s.to_target().map(sig9).join(","))?;
    }
    Ok(())
}

/// Pose at the latest timestamp not after `t` (logs sorted by time).
pub fn pose_at(poses: &[FingertipPose], t: f64) -> Option<&FingertipPose> {
    let idx = poses.partition_point(|p| p.t <= t + 1e-9);
    idx.checked_sub(1).map(|i| &poses[i])
}

/// Combine logged poses, proximity readings and contact estimates into map points.
pub fn build_points(
    poses: &[FingertipPose],
    proximity: &[(f64, ProximityArray)],
    contacts: &[(f64, ContactState)],
    layout: &ProximityLayout,
    threshold_n: f64,
) -> Vec<MapPoint> {
    let mut points = Vec::new();
    for (t, array) in proximity {
        if let Some(pose) = pose_at(poses, *t) {
            let pose = FingertipPose { t: *t, ..*pose };
            points.extend(project_proximity(&pose, layout, array));
        }
    }
    for (t, state) in contacts {
        if let Some(pose) = pose_at(poses, *t) {
            let pose = FingertipPose { t: *t, ..*pose };
            if let Ok(p) = project_contact(&pose, state, threshold_n, SENSOR_RADIUS) {
                points.push(p);
            }
        }
    }
    points
}

/// Scripted scenes for map reproduction runs.
pub mod scenes {
    use super::*;
    use crate::kinematics::{angles_from_point, ContactAngles, ContactForce};
    use crate::sensor::ContactState;

    /// Three walls around a 0.6 x 0.34 m area plus two removable blocks.
    #[derive(Debug, Clone, PartialEq)]
    pub struct RoomScene {
        pub walls: Vec<Primitive>,
        pub objects: Vec<Aabb>,
    }

    impl RoomScene {
        pub fn standard() -> Self {
            let wall = |c, h| Primitive::Box(Aabb::from_center(c, h));
            Self {
                walls: vec![
                    wall([-0.31, 0.17, 0.1], [0.01, 0.19, 0.1]),
                    wall([0.31, 0.17, 0.1], [0.01, 0.19, 0.1]),
                    wall([0.0, 0.35, 0.1], [0.32, 0.01, 0.1]),
                ],
                objects: vec![
                    Aabb::from_center([-0.12, 0.2, 0.1], [0.03, 0.03, 0.1]),
                    Aabb::from_center([0.13, 0.22, 0.1], [0.025, 0.025, 0.1]),
                ],
            }
        }

        /// Walls plus the objects whose indices are listed in `present`.
        pub fn primitives(&self, present: &[usize]) -> Vec<Primitive> {
            let mut out = self.walls.clone();
            out.extend(present.iter().map(|&i| Primitive::Box(self.objects[i])));
            out
        }

        /// Offset by a quarter cell so wall and object faces fall mid-cell.
        pub fn map_bounds() -> Aabb {
            Aabb::new([-0.4025, -0.1025, 0.0], [0.4025, 0.4025, 0.2])
        }
    }

    fn sweep_pose(t: f64, position: [f64; 3], yaw: f64) -> FingertipPose {
        // Base +z looks along world +y (tilted by yaw about world z).
        let level = Rotation3::from_axis_angle(&Vector3::x_axis(), -std::f64::consts::FRAC_PI_2);
        let turn = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
        FingertipPose::new(RigidTransform::new((turn * level).into_inner(), Vector3::from(position)), t)
    }

    /// Back-and-forth sweep at 0.1 m height: rows along x, yaw oscillating.
    pub fn sweep_poses() -> Vec<FingertipPose> {
        let mut poses = Vec::new();
        let rows = [0.0, 0.04, 0.08, 0.12];
        let steps = 120;
        let mut t = 0.0;
        for (r, &y) in rows.iter().enumerate() {
            for s in 0..=steps {
                let u = s as f64 / steps as f64;
                let x = if r % 2 == 0 { -0.26 + 0.52 * u } else { 0.26 - 0.52 * u };
                let yaw = 0.6 * (std::f64::consts::TAU * 3.0 * u).sin();
                poses.push(sweep_pose(t, [x, y, 0.1], yaw));
                t += 0.01;
            }
        }
        poses
    }

    /// Proximity log of the sweep through the room with `present` objects.
    pub fn sweep_readings(scene: &RoomScene, present: &[usize], layout: &ProximityLayout) -> Vec<(f64, ProximityArray)> {
        let prims = scene.primitives(present);
        sweep_poses().iter().map(|p| (p.t, simulate_proximity(&prims, &p.transform, layout))).collect()
    }

    /// Proximity-only points of a sweep.
    pub fn sweep_points(scene: &RoomScene, present: &[usize], layout: &ProximityLayout) -> Vec<MapPoint> {
        let poses = sweep_poses();
        let readings = sweep_readings(scene, present, layout);
        build_points(&poses, &readings, &[], layout, DEFAULT_CONTACT_THRESHOLD)
    }

    /// Logs from tapping a box: poses, proximity readings between taps, and
    /// noiseless contact states during taps.
    pub struct TapLogs {
        pub poses: Vec<FingertipPose>,
        pub proximity: Vec<(f64, ProximityArray)>,
        pub contacts: Vec<(f64, ContactState)>,
        pub block: Aabb,
    }

    /// Tap the five exposed faces of a block at three spots each, pressing
    /// 2 mm into a 1500 N/m contact. The fingertip is oriented so that the
    /// touch lands at a chosen spot on the dome.
    pub fn box_tap(layout: &ProximityLayout) -> TapLogs {
        let block = Aabb::new([-0.04, -0.03, 0.0], [0.04, 0.03, 0.05]);
        let prims = [Primitive::Box(block)];
        let faces: [([f64; 3], Vector3<f64>); 5] = [
            ([0.0, 0.0, 0.05], Vector3::z()),
            ([0.04, 0.0, 0.025], Vector3::x()),
            ([-0.04, 0.0, 0.025], -Vector3::x()),
            ([0.0, 0.03, 0.025], Vector3::y()),
            ([0.0, -0.03, 0.025], -Vector3::y()),
        ];
        let dome_spots = [
            ContactAngles::from_degrees(0.0, 0.0),
            ContactAngles::from_degrees(30.0, -20.0),
            ContactAngles::from_degrees(-25.0, -100.0),
            ContactAngles::from_degrees(10.0, 30.0),
        ];
        let offsets = [-0.015, 0.0, 0.015];
        let depth = 0.002;
        let stiffness = 1500.0;
        let mut logs = TapLogs { poses: Vec::new(), proximity: Vec::new(), contacts: Vec::new(), block };
        let mut t = 0.0;
        for (center, n) in faces {
            let tangent = if n.z.abs() > 0.5 { Vector3::x() } else { Vector3::z() };
            for (k, off) in offsets.iter().enumerate() {
                let spot = dome_spots[k % dome_spots.len()];
                let surface = Vector3::from(center) + tangent * *off;
                // Rotate the dome direction of `spot` onto -n.
                let dome_dir = contact_normal(spot);
                let rot = Rotation3::rotation_between(&dome_dir, &-n)
                    .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
                // Hover 30 mm off, then press.
                for (gap, pressing) in [(0.03, false), (-depth, true)] {
                    let tip_center = surface + n * (SENSOR_RADIUS + gap);
                    let pose = FingertipPose::new(RigidTransform::new(rot.into_inner(), tip_center), t);
                    logs.poses.push(pose);
                    logs.proximity.push((t, simulate_proximity(&prims, &pose.transform, layout)));
                    if pressing {
                        let local = pose.transform.inverse().transform_vector(&(-n * SENSOR_RADIUS));
                        let angles = angles_from_point(&local, SENSOR_RADIUS).expect("contact point on dome");
                        let force = ContactForce::new(0.0, 0.0, -stiffness * depth);
                        logs.contacts.push((t, ContactState::new(angles, force)));
                    }
                    t += 0.05;
                }
            }
        }
        logs
    }

}
