//! The two octree baselines: refine on a binarized interface, or refine on
//! corner-value spread above a threshold.

use super::{evaluate_level0, AlgoConfig, ExtractionResult, Variant};
use crate::error::Result;
use crate::field::OccupancyOracle;
use crate::grid::{binarize, binarize_value, upsample_interpolate, LevelGrid, NodeMask, NodeState};
use rayon::prelude::*;
use std::time::Instant;

/// Refines only cells whose binarized corners disagree.
pub fn extract_octree_binarized<O: OccupancyOracle + ?Sized>(
    oracle: &O,
    config: &AlgoConfig,
) -> Result<ExtractionResult> {
    config.expect_variant(Variant::OctreeBinarized)?;
    let start = Instant::now();
    let (mut grid, n0) = evaluate_level0(oracle, config.coarsest);
    let mut per_level = vec![n0];

    for _ in 0..config.levels {
        let bin = binarize(&grid);
        let refine = cells_where(&bin, |corners| {
            let first = corners[0];
            corners.iter().any(|c| *c != first)
        });
        let mut fine = upsample_interpolate(&bin);
        restore_evaluated(&mut fine, &grid);
        per_level.push(evaluate_children(&mut fine, oracle, &refine));
        binarize_unevaluated(&mut fine);
        grid = fine;
    }
    Ok(ExtractionResult::new(grid, per_level, start.elapsed()))
}

/// Refines cells whose max pairwise corner deviation exceeds the threshold;
/// everything else is filled by trilinear interpolation of the raw values.
pub fn extract_octree_threshold<O: OccupancyOracle + ?Sized>(
    oracle: &O,
    config: &AlgoConfig,
) -> Result<ExtractionResult> {
    config.expect_variant(Variant::OctreeThreshold)?;
    let t = config.threshold.expect("validated") as f32;
    let start = Instant::now();
    let (mut grid, n0) = evaluate_level0(oracle, config.coarsest);
    let mut per_level = vec![n0];

    for _ in 0..config.levels {
        let refine = cells_where(&grid, |corners| {
            let (lo, hi) = corners
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            hi - lo > t
        });
        let mut fine = upsample_interpolate(&grid);
        per_level.push(evaluate_children(&mut fine, oracle, &refine));
        grid = fine;
    }
    Ok(ExtractionResult::new(grid, per_level, start.elapsed()))
}

/// Coarse cells (by their min-corner node index) for which `pred` holds on
/// the eight corner values, in ascending order.
fn cells_where(grid: &LevelGrid, pred: impl Fn(&[f32; 8]) -> bool + Sync) -> Vec<usize> {
    let r = grid.cells();
    let vals = grid.values();
    (0..r)
        .into_par_iter()
        .flat_map_iter(|k| {
            let pred = &pred;
            (0..r).flat_map(move |j| {
                (0..r).filter_map(move |i| {
                    let mut c = [0.0f32; 8];
                    for (bit, slot) in c.iter_mut().enumerate() {
                        *slot = vals[grid.index(i + (bit & 1), j + ((bit >> 1) & 1), k + (bit >> 2))];
                    }
                    pred(&c).then(|| grid.index(i, j, k))
                })
            })
        })
        .collect()
}

/// Mask over fine nodes covered by the given coarse cells (27 per cell).
fn children_mask(coarse_cells: usize, cells: &[usize]) -> NodeMask {
    let nc = coarse_cells + 1;
    let nf = 2 * coarse_cells + 1;
    let mut mask = NodeMask::new(nf);
    for &c in cells {
        let (i, j, k) = (c % nc, (c / nc) % nc, c / (nc * nc));
        for dk in 0..3 {
            for dj in 0..3 {
                for di in 0..3 {
                    mask.set((2 * i + di) + nf * ((2 * j + dj) + nf * (2 * k + dk)), true);
                }
            }
        }
    }
    mask
}

fn evaluate_children<O: OccupancyOracle + ?Sized>(fine: &mut LevelGrid, oracle: &O, cells: &[usize]) -> u64 {
    let mask = children_mask(fine.cells() / 2, cells);
    let todo: Vec<usize> = mask
        .iter_ones()
        .filter(|idx| fine.state(*idx) != NodeState::Evaluated)
        .collect();
    fine.evaluate_nodes(oracle, &todo)
}

/// Even fine nodes copied from evaluated coarse nodes get their raw oracle
/// value back (the upsampled grid was built from binarized values).
fn restore_evaluated(fine: &mut LevelGrid, coarse: &LevelGrid) {
    let nc = coarse.nodes_per_axis();
    for (cidx, s) in coarse.states().iter().enumerate() {
        if *s == NodeState::Evaluated {
            let (i, j, k) = (cidx % nc, (cidx / nc) % nc, cidx / (nc * nc));
            let fidx = fine.index(2 * i, 2 * j, 2 * k);
            fine.values_mut()[fidx] = coarse.values()[cidx];
        }
    }
}

/// Unevaluated nodes inherit the binarized interpolant.
fn binarize_unevaluated(fine: &mut LevelGrid) {
    for idx in 0..fine.len() {
        if fine.state(idx) != NodeState::Evaluated {
            let v = binarize_value(fine.values()[idx]);
            fine.values_mut()[idx] = v;
        }
    }
}
