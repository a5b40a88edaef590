use super::{KdTree, SurfaceSamples, TriangleBvh, TriangleMesh};
use crate::error::{Error, Result};
use crate::point::Point3;
use rayon::prelude::*;

/// Closest point of triangle `abc` to `p` (Voronoi-region walk).
pub(crate) fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance(p: Point3, a: Point3, b: Point3, c: Point3) -> f64 {
    (closest_point_on_triangle(p, a, b, c) - p).norm()
}

/// Linear scan reference for [`KdTree::nearest`].
pub fn brute_nearest_point(points: &[Point3], q: Point3) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (*p - q).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Linear scan reference for [`TriangleBvh::nearest`].
pub fn brute_point_mesh_distance(mesh: &TriangleMesh, q: Point3) -> Option<(usize, f64)> {
    (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.triangle(t);
            (t, (closest_point_on_triangle(q, a, b, c) - q).norm_squared())
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Exact distance from each point to the mesh surface.
pub fn point_mesh_distances(points: &[Point3], mesh: &TriangleMesh) -> Result<Vec<f64>> {
    if mesh.is_empty() {
        return Err(Error::EmptyInput("mesh"));
    }
    let bvh = TriangleBvh::new(mesh);
    Ok(points
        .par_iter()
        .map(|p| bvh.nearest(*p).expect("non-empty").1.sqrt())
        .collect())
}

fn mean_nearest(from: &[Point3], to: &KdTree) -> f64 {
    let sum: f64 = from
        .par_iter()
        .map(|p| to.nearest(*p).expect("non-empty").1.sqrt())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    sum / from.len() as f64
}

/// Symmetric mean nearest-neighbour distance.
pub fn chamfer_distance(a: &SurfaceSamples, b: &SurfaceSamples) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("sample set"));
    }
    let (ta, tb) = (KdTree::new(&a.points), KdTree::new(&b.points));
    Ok(0.5 * (mean_nearest(&a.points, &tb) + mean_nearest(&b.points, &ta)))
}

/// Mean distance from predicted samples to the ground-truth surface.
pub fn p2s_distance(pred: &SurfaceSamples, gt: &TriangleMesh) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyInput("sample set"));
    }
    let d = point_mesh_distances(&pred.points, gt)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Largest distance from a sample to the mesh surface.
pub fn hausdorff_distance(a: &SurfaceSamples, b: &TriangleMesh) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyInput("sample set"));
    }
    Ok(point_mesh_distances(&a.points, b)?.into_iter().fold(0.0, f64::max))
}
