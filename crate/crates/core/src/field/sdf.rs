//! Closed-form signed distances (negative inside) and CSG combinators.

use crate::point::Point3;

pub fn sphere(p: Point3, radius: f64) -> f64 {
    p.norm() - radius
}

pub fn cuboid(p: Point3, half_extents: Point3) -> f64 {
    let q = p.abs() - half_extents;
    q.component_max(Point3::ORIGIN).norm() + q.max_elem().min(0.0)
}

pub fn capsule(p: Point3, a: Point3, b: Point3, radius: f64) -> f64 {
    let pa = p - a;
    let ba = b - a;
    let len2 = ba.norm_squared();
    let h = if len2 > 0.0 {
        (pa.dot(ba) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (pa - ba * h).norm() - radius
}

/// Torus around the local y axis, lying in the xz plane.
pub fn torus(p: Point3, major: f64, minor: f64) -> f64 {
    let qx = (p.x * p.x + p.z * p.z).sqrt() - major;
    (qx * qx + p.y * p.y).sqrt() - minor
}

pub fn union(a: f64, b: f64) -> f64 {
    a.min(b)
}

pub fn intersection(a: f64, b: f64) -> f64 {
    a.max(b)
}

pub fn difference(a: f64, b: f64) -> f64 {
    a.max(-b)
}
