//! Dense node grids over the NDC cube and the primitive operations the
//! localization algorithms are assembled from.
//!
//! Node `(i, j, k)` of a grid with `R` cells per axis sits at
//! `(-1 + 2i/R, -1 + 2j/R, 1 - 2k/R)`: `k = 0` is the near plane and `k`
//! grows away from the observer. Values are stored x-fastest.

mod dump;
mod mask;

pub use dump::{read_dump, write_dump, write_plane_dump};
pub use mask::NodeMask;

use crate::field::OccupancyOracle;
use crate::point::Point3;
use rayon::prelude::*;

/// Occupancy at or above this value counts as inside.
pub const ISO: f32 = 0.5;

/// Upper bound on the number of points handed to the oracle at once.
const EVAL_CHUNK: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum NodeState {
    Unknown,
    Interpolated,
    Evaluated,
    Shadow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelGrid {
    level: u32,
    cells: usize,
    values: Vec<f32>,
    states: Vec<NodeState>,
}

#[inline]
pub fn binarize_value(v: f32) -> f32 {
    if v >= ISO {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub fn is_inside(v: f32) -> bool {
    v >= ISO
}

impl LevelGrid {
    /// A grid with every node unknown.
    pub fn new(level: u32, cells: usize) -> Self {
        assert!(cells > 0, "grid needs at least one cell");
        let n = (cells + 1).pow(3);
        Self {
            level,
            cells,
            values: vec![0.0; n],
            states: vec![NodeState::Unknown; n],
        }
    }

    pub fn from_values(level: u32, cells: usize, values: Vec<f32>, state: NodeState) -> Self {
        assert_eq!(values.len(), (cells + 1).pow(3));
        let states = vec![state; values.len()];
        Self {
            level,
            cells,
            values,
            states,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cells per axis.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.cells + 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node spacing in NDC units.
    pub fn spacing(&self) -> f64 {
        2.0 / self.cells as f64
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [NodeState] {
        &mut self.states
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.cells + 1;
        i + n * (j + n * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.cells + 1;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    #[inline]
    pub fn state(&self, idx: usize) -> NodeState {
        self.states[idx]
    }

    pub fn set(&mut self, idx: usize, value: f32, state: NodeState) {
        self.values[idx] = value;
        self.states[idx] = state;
    }

    /// NDC position of a node.
    #[inline]
    pub fn node_point(&self, i: usize, j: usize, k: usize) -> Point3 {
        let r = self.cells as f64;
        Point3::new(
            -1.0 + 2.0 * i as f64 / r,
            -1.0 + 2.0 * j as f64 / r,
            1.0 - 2.0 * k as f64 / r,
        )
    }

    #[inline]
    pub fn index_point(&self, idx: usize) -> Point3 {
        let (i, j, k) = self.coords(idx);
        self.node_point(i, j, k)
    }

    /// NDC depth of slice `k`.
    #[inline]
    pub fn depth_of(&self, k: f64) -> f64 {
        1.0 - 2.0 * k / self.cells as f64
    }

    pub fn is_fully_assigned(&self) -> bool {
        !self.states.contains(&NodeState::Unknown)
    }

    pub fn count_state(&self, state: NodeState) -> usize {
        self.states.iter().filter(|s| **s == state).count()
    }

    /// Calls `f` for each in-bounds 26-neighbor of `idx` in ascending index order.
    #[inline]
    pub fn for_each_neighbor(&self, idx: usize, mut f: impl FnMut(usize)) {
        let n = self.cells + 1;
        let (i, j, k) = self.coords(idx);
        let range = |c: usize| c.saturating_sub(1)..=(c + 1).min(n - 1);
        for kk in range(k) {
            for jj in range(j) {
                for ii in range(i) {
                    if (ii, jj, kk) != (i, j, k) {
                        f(ii + n * (jj + n * kk));
                    }
                }
            }
        }
    }

    /// Evaluates the listed nodes with the oracle, overwriting their values and
    /// marking them evaluated. Returns the number of oracle calls made.
    pub fn evaluate_nodes<O: OccupancyOracle + ?Sized>(&mut self, oracle: &O, indices: &[usize]) -> u64 {
        if indices.is_empty() {
            return 0;
        }
        for chunk in indices.chunks(EVAL_CHUNK) {
            let points: Vec<Point3> = chunk.par_iter().map(|&idx| self.index_point(idx)).collect();
            let vals = oracle.eval_batch(&points);
            for (&idx, v) in chunk.iter().zip(vals) {
                self.values[idx] = v as f32;
                self.states[idx] = NodeState::Evaluated;
            }
        }
        indices.len() as u64
    }

    /// Binary inside/outside volume of this grid.
    pub fn to_volume(&self) -> BinaryVolume {
        BinaryVolume {
            nodes_per_axis: self.nodes_per_axis(),
            inside: self.values.iter().map(|v| is_inside(*v)).collect(),
        }
    }
}

/// A {0,1} node volume at one grid resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVolume {
    pub nodes_per_axis: usize,
    pub inside: Vec<bool>,
}

impl BinaryVolume {
    pub fn count_inside(&self) -> usize {
        self.inside.iter().filter(|b| **b).count()
    }
}

/// Doubles the resolution. Nodes at even indices copy the coarse value and
/// state bit-for-bit; the rest get the trilinear interpolant, which at
/// midpoints is the mean of the 2, 4 or 8 enclosing coarse nodes.
pub fn upsample_interpolate(coarse: &LevelGrid) -> LevelGrid {
    let rc = coarse.cells;
    let nc = rc + 1;
    let rf = 2 * rc;
    let nf = rf + 1;
    let mut values = vec![0.0f32; nf * nf * nf];
    let mut states = vec![NodeState::Interpolated; nf * nf * nf];
    let cv = &coarse.values;
    let cs = &coarse.states;

    values
        .par_chunks_mut(nf * nf)
        .zip(states.par_chunks_mut(nf * nf))
        .enumerate()
        .for_each(|(kf, (vslab, sslab))| {
            let ks = span(kf);
            for jf in 0..nf {
                let js = span(jf);
                for i_f in 0..nf {
                    let is = span(i_f);
                    let out = i_f + nf * jf;
                    if is.1 == 1 && js.1 == 1 && ks.1 == 1 {
                        let cidx = is.0 + nc * (js.0 + nc * ks.0);
                        vslab[out] = cv[cidx];
                        sslab[out] = cs[cidx];
                        continue;
                    }
                    let mut sum = 0.0f64;
                    for dk in 0..ks.1 {
                        for dj in 0..js.1 {
                            for di in 0..is.1 {
                                sum += cv[(is.0 + di) + nc * ((js.0 + dj) + nc * (ks.0 + dk))] as f64;
                            }
                        }
                    }
                    vslab[out] = (sum / (is.1 * js.1 * ks.1) as f64) as f32;
                }
            }
        });

    LevelGrid {
        level: coarse.level + 1,
        cells: rf,
        values,
        states,
    }
}

// (first coarse index, number of coarse nodes spanned) for a fine index
#[inline]
fn span(f: usize) -> (usize, usize) {
    (f / 2, if f % 2 == 0 { 1 } else { 2 })
}

/// Maps values to {0,1} with the inclusive 0.5 threshold; states are kept.
pub fn binarize(grid: &LevelGrid) -> LevelGrid {
    LevelGrid {
        level: grid.level,
        cells: grid.cells,
        values: grid.values.par_iter().map(|v| binarize_value(*v)).collect(),
        states: grid.states.clone(),
    }
}

/// Nodes whose value is strictly between 0 and 1.
pub fn boundary_candidates(grid: &LevelGrid) -> NodeMask {
    let bits = grid.values.par_iter().map(|v| *v > 0.0 && *v < 1.0).collect();
    NodeMask::from_bits(grid.nodes_per_axis(), bits)
}

/// Adds every 26-connected neighbor of a set node.
pub fn dilate_1ring(mask: &NodeMask) -> NodeMask {
    let n = mask.nodes_per_axis();
    let mut out = mask.clone();
    for idx in mask.iter_ones() {
        let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
        for kk in k.saturating_sub(1)..=(k + 1).min(n - 1) {
            for jj in j.saturating_sub(1)..=(j + 1).min(n - 1) {
                for ii in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                    out.set(ii + n * (jj + n * kk), true);
                }
            }
        }
    }
    out
}

/// Per-column maximum along the depth axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnMax {
    pub value: f32,
    /// Smallest `k` attaining the maximum.
    pub index: usize,
}

/// Max over `k` for every `(i, j)` column, ties resolved to the smallest `k`.
/// The result is indexed `i + n * j`.
pub fn argmax_z(grid: &LevelGrid) -> Vec<ColumnMax> {
    let n = grid.nodes_per_axis();
    (0..n * n)
        .into_par_iter()
        .map(|col| {
            let mut best = ColumnMax {
                value: grid.values[col],
                index: 0,
            };
            for k in 1..n {
                let v = grid.values[col + n * n * k];
                if v > best.value {
                    best = ColumnMax { value: v, index: k };
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_grid(col: &[f32]) -> LevelGrid {
        // 1 cell in x/y is too small for a column of arbitrary length, so
        // build a cubic grid and fill column (0,0).
        let cells = col.len() - 1;
        let mut g = LevelGrid::new(0, cells);
        for (k, v) in col.iter().enumerate() {
            let idx = g.index(0, 0, k);
            g.set(idx, *v, NodeState::Evaluated);
        }
        g
    }

    #[test]
    fn node_mapping() {
        let g = LevelGrid::new(0, 4);
        assert_eq!(g.node_point(0, 0, 0), Point3::new(-1.0, -1.0, 1.0));
        assert_eq!(g.node_point(4, 4, 4), Point3::new(1.0, 1.0, -1.0));
        assert_eq!(g.node_point(2, 2, 2), Point3::new(0.0, 0.0, 0.0));
        let idx = g.index(1, 2, 3);
        assert_eq!(g.coords(idx), (1, 2, 3));
        assert_eq!(idx, 1 + 5 * (2 + 5 * 3));
    }

    #[test]
    fn upsample_constant_and_midpoint() {
        let g = LevelGrid::from_values(0, 2, vec![1.0; 27], NodeState::Evaluated);
        let f = upsample_interpolate(&g);
        assert_eq!(f.cells(), 4);
        assert_eq!(f.level(), 1);
        assert!(f.values().iter().all(|v| *v == 1.0));

        // x-ramp (0 at i=0, 1 at i=1) on a one-cell grid
        let mut g = LevelGrid::new(0, 1);
        for idx in 0..8 {
            let (i, _, _) = g.coords(idx);
            g.set(idx, i as f32, NodeState::Evaluated);
        }
        let f = upsample_interpolate(&g);
        assert_eq!(f.value(1, 0, 0), 0.5);
        assert_eq!(f.value(1, 1, 1), 0.5);
        assert_eq!(f.value(2, 2, 2), 1.0);
        assert_eq!(f.state(f.index(0, 0, 0)), NodeState::Evaluated);
        assert_eq!(f.state(f.index(1, 0, 0)), NodeState::Interpolated);
    }

    #[test]
    fn upsample_matches_reference_trilinear() {
        // 3^3 binarized sphere pattern
        let mut g = LevelGrid::new(0, 2);
        for idx in 0..27 {
            let p = g.index_point(idx);
            g.set(idx, if p.norm() < 1.2 { 1.0 } else { 0.0 }, NodeState::Evaluated);
        }
        let f = upsample_interpolate(&g);
        for idx in 0..f.len() {
            let (i, j, k) = f.coords(idx);
            // reference: trilinear interpolation in coarse index space
            let (x, y, z) = (i as f64 / 2.0, j as f64 / 2.0, k as f64 / 2.0);
            let (x0, y0, z0) = (x.floor().min(1.0) as usize, y.floor().min(1.0) as usize, z.floor().min(1.0) as usize);
            let (tx, ty, tz) = (x - x0 as f64, y - y0 as f64, z - z0 as f64);
            let mut r = 0.0;
            for (dz, wz) in [(0, 1.0 - tz), (1, tz)] {
                for (dy, wy) in [(0, 1.0 - ty), (1, ty)] {
                    for (dx, wx) in [(0, 1.0 - tx), (1, tx)] {
                        r += wx * wy * wz * g.value(x0 + dx, y0 + dy, z0 + dz) as f64;
                    }
                }
            }
            let v = f.values()[idx];
            assert!((0.0..=1.0).contains(&v));
            assert!((v as f64 - r).abs() < 1e-7, "node {:?}: {v} vs {r}", (i, j, k));
            if i % 2 == 0 && j % 2 == 0 && k % 2 == 0 {
                assert_eq!(v.to_bits(), g.value(i / 2, j / 2, k / 2).to_bits());
            }
        }
    }

    #[test]
    fn binarize_threshold() {
        let g = LevelGrid::from_values(0, 1, vec![0.5, 0.4999, 0.0, 1.0, 0.7, 0.2, 0.5, 0.51], NodeState::Evaluated);
        let b = binarize(&g);
        assert_eq!(b.values(), &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(binarize(&b), b);
    }

    #[test]
    fn candidates_in_1d_pair() {
        let mut g = LevelGrid::new(0, 1);
        for idx in 0..8 {
            let (i, _, _) = g.coords(idx);
            g.set(idx, i as f32, NodeState::Evaluated);
        }
        let f = upsample_interpolate(&g);
        let m = boundary_candidates(&f);
        // every node with i == 1 is a midpoint between a 0 and a 1 node
        let ones: Vec<_> = m.iter_ones().collect();
        assert_eq!(ones.len(), 9);
        assert!(ones.iter().all(|idx| f.coords(*idx).0 == 1));

        let c = LevelGrid::from_values(0, 3, vec![1.0; 64], NodeState::Evaluated);
        assert_eq!(boundary_candidates(&c).count(), 0);
    }

    #[test]
    fn dilation_counts() {
        let n = 5;
        assert_eq!(dilate_1ring(&NodeMask::new(n)).count(), 0);
        let mut m = NodeMask::new(n);
        m.set(2 + n * (2 + n * 2), true);
        assert_eq!(dilate_1ring(&m).count(), 27);
        let mut m = NodeMask::new(n);
        m.set(0, true);
        assert_eq!(dilate_1ring(&m).count(), 8);
        // edge node: 2 * 3 * 3 in-bounds neighborhood
        let mut m = NodeMask::new(n);
        m.set(2 + n * 2, true);
        assert_eq!(dilate_1ring(&m).count(), 18);
    }

    #[test]
    fn neighbor_iteration_matches_dilation() {
        let g = LevelGrid::new(0, 4);
        for idx in [0usize, 7, 62, 124] {
            let mut m = NodeMask::new(5);
            m.set(idx, true);
            let mut seen = vec![];
            g.for_each_neighbor(idx, |nb| seen.push(nb));
            assert!(seen.windows(2).all(|w| w[0] < w[1]));
            let dil: Vec<_> = dilate_1ring(&m).iter_ones().filter(|i| *i != idx).collect();
            assert_eq!(seen, dil);
        }
    }

    #[test]
    fn argmax_tie_rule() {
        let g = column_grid(&[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(argmax_z(&g)[0], ColumnMax { value: 0.0, index: 0 });
        let g = column_grid(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(argmax_z(&g)[0], ColumnMax { value: 1.0, index: 1 });
        let g = column_grid(&[0.2, 0.7, 0.9]);
        assert_eq!(argmax_z(&g)[0], ColumnMax { value: 0.9, index: 2 });
    }
}
