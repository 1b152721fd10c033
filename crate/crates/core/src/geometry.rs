//! Convex scene primitives with ray casting and signed distances.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn from_center(center: [f64; 3], half: [f64; 3]) -> Self {
        Self {
            min: [center[0] - half[0], center[1] - half[1], center[2] - half[2]],
            max: [center[0] + half[0], center[1] + half[1], center[2] + half[2]],
        }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i])
    }

    pub fn center(&self) -> Vector3<f64> {
        (Vector3::from(self.min) + Vector3::from(self.max)) * 0.5
    }

    pub fn half_extents(&self) -> Vector3<f64> {
        (Vector3::from(self.max) - Vector3::from(self.min)) * 0.5
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn translated(&self, by: &Vector3<f64>) -> Self {
        Self {
            min: [self.min[0] + by.x, self.min[1] + by.y, self.min[2] + by.z],
            max: [self.max[0] + by.x, self.max[1] + by.y, self.max[2] + by.z],
        }
    }

    /// Grow every face outward by `margin`.
    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            min: self.min.map(|v| v - margin),
            max: self.max.map(|v| v + margin),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Primitive {
    /// Half-space below the plane; `normal` points out of the solid.
    Plane { point: [f64; 3], normal: [f64; 3] },
    Box(Aabb),
}

/// Closest-surface query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceQuery {
    /// Positive outside the solid.
    pub distance: f64,
    /// Outward surface normal at the closest point.
    pub normal: Vector3<f64>,
}

impl Primitive {
    pub fn plane(point: [f64; 3], normal: [f64; 3]) -> Self {
        let n = Vector3::from(normal).normalize();
        Primitive::Plane { point, normal: [n.x, n.y, n.z] }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Primitive::Plane { point, normal } => {
                point.iter().all(|v| v.is_finite()) && (Vector3::from(*normal).norm() - 1.0).abs() < 1e-9
            }
            Primitive::Box(b) => b.is_valid(),
        }
    }

    pub fn query(&self, p: &Vector3<f64>) -> SurfaceQuery {
        match self {
            Primitive::Plane { point, normal } => {
                let n = Vector3::from(*normal);
                SurfaceQuery { distance: (p - Vector3::from(*point)).dot(&n), normal: n }
            }
            Primitive::Box(b) => {
                let rel = p - b.center();
                let q = rel.abs() - b.half_extents();
                let outside = q.map(|v| v.max(0.0));
                let sign = rel.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
                if outside.norm() > 0.0 {
                    SurfaceQuery { distance: outside.norm(), normal: outside.component_mul(&sign).normalize() }
                } else {
                    let axis = q.imax();
                    let mut normal = Vector3::zeros();
                    normal[axis] = sign[axis];
                    SurfaceQuery { distance: q[axis], normal }
                }
            }
        }
    }

    /// Distance along a unit ray to the first surface hit, or 0 from inside.
    pub fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match self {
            Primitive::Plane { point, normal } => {
                let n = Vector3::from(*normal);
                let height = (origin - Vector3::from(*point)).dot(&n);
                if height <= 0.0 {
                    return Some(0.0);
                }
                let closing = -dir.dot(&n);
                (closing > 1e-15).then(|| height / closing)
            }
            Primitive::Box(b) => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for i in 0..3 {
                    if dir[i].abs() < 1e-15 {
                        if origin[i] < b.min[i] || origin[i] > b.max[i] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (b.min[i] - origin[i]) / dir[i];
                    let t2 = (b.max[i] - origin[i]) / dir[i];
                    t_near = t_near.max(t1.min(t2));
                    t_far = t_far.min(t1.max(t2));
                }
                if t_near > t_far || t_far < 0.0 {
                    None
                } else {
                    Some(t_near.max(0.0))
                }
            }
        }
    }
}

/// Nearest hit over several primitives.
pub fn raycast_all(objects: &[Primitive], origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    objects.iter().filter_map(|o| o.raycast(origin, dir)).min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_queries() {
        let b = Primitive::Box(Aabb::new([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]));
        let q = b.query(&Vector3::new(0.5, 1.0, 4.0));
        assert!((q.distance - 1.0).abs() < 1e-15);
        assert_eq!(q.normal, Vector3::new(0.0, 0.0, 1.0));
        let q = b.query(&Vector3::new(0.1, 1.0, 1.5));
        assert!((q.distance + 0.1).abs() < 1e-15);
        assert_eq!(q.normal, Vector3::new(-1.0, 0.0, 0.0));
        let q = b.query(&Vector3::new(2.0, 3.0, 1.0));
        assert!((q.distance - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn box_raycast() {
        let b = Primitive::Box(Aabb::new([1.0, -1.0, -1.0], [2.0, 1.0, 1.0]));
        let x = Vector3::x();
        assert_eq!(b.raycast(&Vector3::zeros(), &x), Some(1.0));
        assert_eq!(b.raycast(&Vector3::zeros(), &-x), None);
        assert_eq!(b.raycast(&Vector3::new(1.5, 0.0, 0.0), &x), Some(0.0));
        assert_eq!(b.raycast(&Vector3::new(0.0, 2.0, 0.0), &x), None);
    }

    #[test]
    fn plane_queries() {
        let p = Primitive::plane([0.0, 0.0, 1.0], [0.0, 0.0, -2.0]);
        assert!(p.is_valid());
        let q = p.query(&Vector3::zeros());
        assert!((q.distance - 1.0).abs() < 1e-15);
        assert_eq!(p.raycast(&Vector3::zeros(), &Vector3::z()), Some(1.0));
        assert_eq!(p.raycast(&Vector3::zeros(), &Vector3::x()), None);
        let objects = [p, Primitive::Box(Aabb::from_center([0.0, 0.0, 0.5], [0.1; 3]))];
        assert!((raycast_all(&objects, &Vector3::zeros(), &Vector3::z()).unwrap() - 0.4).abs() < 1e-15);
    }
}
