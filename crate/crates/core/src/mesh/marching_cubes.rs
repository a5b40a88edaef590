//! Marching Cubes over a [`LevelGrid`].
//!
//! The 256-entry case table is built once from the face configurations of
//! the cube: on every face the iso-contour separates the inside corners
//! (the usual convention for the ambiguous diagonal face), the face segments
//! are chained into loops around the cube, and each loop is fanned into
//! triangles. Neighbouring cells see identical face decisions, so the
//! output is crack-free.

use super::TriangleMesh;
use crate::grid::LevelGrid;
use crate::point::Point3;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::OnceLock;

/// Corner offsets, bit `c` of the case index is corner `c`.
pub(crate) const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

pub(crate) const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

const FACES: [[usize; 4]; 6] = [
    [0, 1, 2, 3],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [3, 2, 6, 7],
    [0, 3, 7, 4],
    [1, 2, 6, 5],
];

/// Triangles (as cube-edge triples) for every corner configuration.
pub fn case_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("adjacent corners")
}

/// Face corner cycles ordered counter-clockwise when seen from outside.
fn oriented_faces() -> [[usize; 4]; 6] {
    let mut faces = FACES;
    let pt = |c: usize| {
        let o = CORNERS[c];
        Point3::new(o[0] as f64, o[1] as f64, o[2] as f64)
    };
    let center = Point3::new(0.5, 0.5, 0.5);
    for f in faces.iter_mut() {
        let n = (pt(f[1]) - pt(f[0])).cross(pt(f[2]) - pt(f[1]));
        let face_center = (pt(f[0]) + pt(f[2])) * 0.5;
        if n.dot(face_center - center) < 0.0 {
            f.reverse();
        }
    }
    faces
}

fn build_table() -> [Vec<[u8; 3]>; 256] {
    let faces = oriented_faces();
    std::array::from_fn(|case| {
        let inside = |c: usize| case & (1 << c) != 0;
        // directed segments: next[from_edge] = to_edge
        let mut next: [Option<usize>; 12] = [None; 12];
        for f in &faces {
            // crossings around the face in CCW order, tagged enter/leave
            let mut enters = Vec::new();
            let mut leaves = Vec::new();
            for m in 0..4 {
                let (a, b) = (f[m], f[(m + 1) % 4]);
                match (inside(a), inside(b)) {
                    (false, true) => enters.push((m, edge_between(a, b))),
                    (true, false) => leaves.push((m, edge_between(a, b))),
                    _ => {}
                }
            }
            // pair each inside run's leave with the enter that opened it
            for &(lm, le) in &leaves {
                let (_, ee) = enters
                    .iter()
                    .copied()
                    .filter(|(em, _)| *em != lm)
                    .min_by_key(|(em, _)| (lm + 4 - em) % 4)
                    .expect("every inside run is entered");
                next[le] = Some(ee);
            }
        }
        let mut tris = Vec::new();
        let mut used = [false; 12];
        for start in 0..12 {
            if used[start] || next[start].is_none() {
                continue;
            }
            let mut lp = vec![start];
            used[start] = true;
            let mut e = next[start].expect("checked");
            while e != start {
                used[e] = true;
                lp.push(e);
                e = next[e].expect("closed loop");
            }
            for t in 1..lp.len() - 1 {
                tris.push([lp[0] as u8, lp[t] as u8, lp[t + 1] as u8]);
            }
        }
        tris
    })
}

/// Extracts the `iso` level set; values `>= iso` are inside. Triangles are
/// emitted in cell-index order and wound so normals point out of the
/// inside region.
pub fn marching_cubes(grid: &LevelGrid, iso: f32) -> TriangleMesh {
    let table = case_table();
    let r = grid.cells();
    let n = grid.nodes_per_axis();
    let vals = grid.values();

    // triangles as triples of global lattice-edge keys, per k slab
    let slabs: Vec<Vec<[u64; 3]>> = (0..r)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..r {
                for i in 0..r {
                    let mut case = 0usize;
                    for (c, o) in CORNERS.iter().enumerate() {
                        if vals[(i + o[0]) + n * ((j + o[1]) + n * (k + o[2]))] >= iso {
                            case |= 1 << c;
                        }
                    }
                    for tri in &table[case] {
                        let key = |e: u8| {
                            let [a, b] = EDGES[e as usize];
                            let (oa, ob) = (CORNERS[a], CORNERS[b]);
                            let lo = [oa[0].min(ob[0]), oa[1].min(ob[1]), oa[2].min(ob[2])];
                            let axis = (0..3).find(|&d| oa[d] != ob[d]).expect("edge");
                            let node = (i + lo[0]) + n * ((j + lo[1]) + n * (k + lo[2]));
                            node as u64 * 3 + axis as u64
                        };
                        out.push([key(tri[0]), key(tri[1]), key(tri[2])]);
                    }
                }
            }
            out
        })
        .collect();

    let mut vertex_of_edge: HashMap<u64, u32> = HashMap::new();
    let mut vertex_of_pos: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    for tri in slabs.iter().flatten() {
        let mut idx = [0u32; 3];
        for (slot, key) in idx.iter_mut().zip(tri) {
            *slot = *vertex_of_edge.entry(*key).or_insert_with(|| {
                let p = edge_vertex(grid, *key, iso);
                let bits = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                *vertex_of_pos.entry(bits).or_insert_with(|| {
                    vertices.push(p);
                    (vertices.len() - 1) as u32
                })
            });
        }
        if idx[0] != idx[1] && idx[1] != idx[2] && idx[0] != idx[2] {
            triangles.push(idx);
        }
    }

    TriangleMesh::new(vertices, triangles).without_degenerate(super::DEGENERATE_AREA)
}

fn edge_vertex(grid: &LevelGrid, key: u64, iso: f32) -> Point3 {
    let node = (key / 3) as usize;
    let axis = (key % 3) as usize;
    let (i, j, k) = grid.coords(node);
    let (i2, j2, k2) = match axis {
        0 => (i + 1, j, k),
        1 => (i, j + 1, k),
        _ => (i, j, k + 1),
    };
    let (v0, v1) = (grid.value(i, j, k) as f64, grid.value(i2, j2, k2) as f64);
    let t = if v1 != v0 {
        ((iso as f64 - v0) / (v1 - v0)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let p0 = grid.node_point(i, j, k);
    let p1 = grid.node_point(i2, j2, k2);
    p0 + (p1 - p0) * t
}
