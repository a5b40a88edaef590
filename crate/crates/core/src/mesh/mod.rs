//! Triangle meshes: Marching Cubes extraction, OBJ I/O, area-weighted
//! surface sampling and the distance metrics used to compare surfaces.

mod marching_cubes;
mod metrics;
mod obj;
mod spatial;

pub use marching_cubes::{case_table, marching_cubes};
pub use metrics::{
    brute_nearest_point, brute_point_mesh_distance, chamfer_distance, hausdorff_distance, p2s_distance,
    point_mesh_distances, point_triangle_distance,
};
pub use obj::{export_obj, parse_obj, read_obj, write_obj};
pub use spatial::{KdTree, TriangleBvh};

use crate::error::{Error, Result};
use crate::point::Point3;
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::io::Write;

/// Triangles at or below this area are dropped from extracted meshes.
pub const DEGENERATE_AREA: f64 = 1e-12;

pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Self {
        Self { vertices, triangles }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Checks indices and coordinates.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::OutOfRange(format!("triangle {t:?} indexes past {n} vertices")));
        }
        if self.vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange("non-finite vertex".into()));
        }
        Ok(())
    }

    /// Drops triangles with repeated indices or area `<= min_area` and
    /// compacts the vertex list, preserving order.
    pub fn without_degenerate(self, min_area: f64) -> Self {
        let keep: Vec<[u32; 3]> = self
            .triangles
            .iter()
            .enumerate()
            .filter(|(t, [a, b, c])| a != b && b != c && a != c && self.triangle_area(*t) > min_area)
            .map(|(_, tri)| *tri)
            .collect();
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let triangles = keep
            .iter()
            .map(|tri| {
                tri.map(|i| {
                    let slot = &mut remap[i as usize];
                    if *slot == u32::MAX {
                        *slot = vertices.len() as u32;
                        vertices.push(self.vertices[i as usize]);
                    }
                    *slot
                })
            })
            .collect();
        Self { vertices, triangles }
    }

    pub fn translated(&self, t: Point3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| *v + t).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        let mut edges = HashSet::new();
        for tri in &self.triangles {
            for m in 0..3 {
                let (a, b) = (tri[m], tri[(m + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// `V - E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let used: HashSet<u32> = self.triangles.iter().flatten().copied().collect();
        used.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Signed volume by the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }
}

/// Points drawn uniformly by area from a mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<Point3>,
    /// Source triangle of each point.
    pub triangle_ids: Vec<u32>,
}

impl SurfaceSamples {
    pub fn from_points(points: Vec<Point3>) -> Self {
        Self {
            points,
            triangle_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, t: Point3) -> Self {
        Self {
            points: self.points.iter().map(|p| *p + t).collect(),
            triangle_ids: self.triangle_ids.clone(),
        }
    }

    /// `x,y,z` rows with a header line.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x,y,z")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.x, p.y, p.z)?;
        }
        Ok(())
    }
}

pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<SurfaceSamples> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_surface_with(mesh, n, &mut rng)
}

pub fn sample_surface_with(mesh: &TriangleMesh, n: usize, rng: &mut impl Rng) -> Result<SurfaceSamples> {
    if mesh.is_empty() {
        return Err(Error::EmptyInput("mesh"));
    }
    let areas: Vec<f64> = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).collect();
    let pick = WeightedIndex::new(&areas).map_err(|_| Error::EmptyInput("mesh surface area"))?;
    let mut out = SurfaceSamples {
        points: Vec::with_capacity(n),
        triangle_ids: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let t = pick.sample(rng);
        let [a, b, c] = mesh.triangle(t);
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        out.points.push(a + (b - a) * u + (c - a) * v);
        out.triangle_ids.push(t as u32);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldOracle, SceneSpec};
    use crate::grid::{LevelGrid, ISO};

    pub(crate) fn sphere_grid(cells: usize) -> LevelGrid {
        let o = FieldOracle::new(&SceneSpec::sphere(0.5)).unwrap();
        let mut g = LevelGrid::new(0, cells);
        let all: Vec<usize> = (0..g.len()).collect();
        g.evaluate_nodes(&o, &all);
        g
    }

    #[test]
    fn constant_grid_is_empty() {
        let g = LevelGrid::from_values(0, 4, vec![0.2; 125], crate::grid::NodeState::Evaluated);
        assert!(marching_cubes(&g, ISO).is_empty());
        let g = LevelGrid::from_values(0, 4, vec![0.9; 125], crate::grid::NodeState::Evaluated);
        assert!(marching_cubes(&g, ISO).is_empty());
    }

    #[test]
    fn sphere_mesh_geometry_and_topology() {
        let g = sphere_grid(64);
        let m = marching_cubes(&g, ISO);
        m.validate().unwrap();
        let h = 2.0 / 64.0;
        let tol = h * 3f64.sqrt();
        for v in &m.vertices {
            let r = v.norm();
            assert!((r - 0.5).abs() <= tol, "radius {r}");
        }
        assert_eq!(m.euler_characteristic(), 2);
        let vol = m.signed_volume();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        assert!((vol - exact).abs() / exact < 0.02, "volume {vol}");
        // closed: every edge shared by exactly two triangles
        let mut count = std::collections::HashMap::new();
        for tri in &m.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        assert!(count.values().all(|c| *c == 2));
    }

    #[test]
    fn degenerate_filter_compacts() {
        let p = |x| Point3::new(x, 0.0, 0.0);
        let m = TriangleMesh::new(
            vec![p(0.0), p(1.0), Point3::new(0.0, 1.0, 0.0), p(2.0), p(3.0)],
            vec![[0, 1, 2], [1, 3, 4], [0, 0, 2]],
        )
        .without_degenerate(DEGENERATE_AREA);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
        assert_eq!(m.vertices.len(), 3);
    }

    #[test]
    fn samples_lie_on_their_triangles() {
        let m = marching_cubes(&sphere_grid(16), ISO);
        let s = sample_surface(&m, 500, 7).unwrap();
        assert_eq!(s.len(), 500);
        for (p, t) in s.points.iter().zip(&s.triangle_ids) {
            let [a, b, c] = m.triangle(*t as usize);
            assert!(point_triangle_distance(*p, a, b, c) < 1e-12);
        }
        assert_eq!(s, sample_surface(&m, 500, 7).unwrap());
        assert!(sample_surface(&TriangleMesh::default(), 5, 0).is_err());
    }
}
