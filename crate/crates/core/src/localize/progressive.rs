//! Coarse-to-fine surface localization with conflict resolution.
//!
//! Per level:
//! 1. binarize the coarse grid and upsample it by trilinear interpolation;
//! 2. nodes with a fractional interpolant are boundary candidates; dilate by
//!    one ring and evaluate everything selected;
//! 3. a node whose binarized oracle value differs from its binarized
//!    interpolant marks a surface the coarse level missed, so its
//!    unevaluated neighbors are evaluated too, repeating on the newly
//!    evaluated nodes until no conflict remains.
//!
//! Nodes never evaluated keep their interpolated value.

use super::{evaluate_level0, AlgoConfig, ExtractionResult, Variant};
use crate::error::Result;
use crate::field::OccupancyOracle;
use crate::grid::{
    binarize, boundary_candidates, dilate_1ring, is_inside, upsample_interpolate, LevelGrid, NodeState,
};
use std::time::Instant;

pub fn extract_progressive<O: OccupancyOracle + ?Sized>(
    oracle: &O,
    config: &AlgoConfig,
) -> Result<ExtractionResult> {
    config.expect_variant(Variant::Progressive)?;
    let start = Instant::now();
    let (mut grid, n0) = evaluate_level0(oracle, config.coarsest);
    let mut per_level = vec![n0];
    let mut iterations = vec![0];
    let mut limit_hit = false;

    for _ in 0..config.levels {
        let step = refine_level(oracle, &grid, config);
        per_level.push(step.evals);
        iterations.push(step.conflict_iterations);
        limit_hit |= step.limit_hit;
        grid = step.grid;
    }

    let mut result = ExtractionResult::new(grid, per_level, start.elapsed());
    result.conflict_iterations = iterations;
    result.conflict_limit_hit = limit_hit;
    Ok(result)
}

struct LevelStep {
    grid: LevelGrid,
    evals: u64,
    conflict_iterations: usize,
    limit_hit: bool,
}

fn refine_level<O: OccupancyOracle + ?Sized>(oracle: &O, coarse: &LevelGrid, config: &AlgoConfig) -> LevelStep {
    let interp = upsample_interpolate(&binarize(coarse));
    let mut fine = interp.clone();

    // Copied nodes that the oracle already saw keep their raw value.
    let nc = coarse.nodes_per_axis();
    for (cidx, s) in coarse.states().iter().enumerate() {
        if *s == NodeState::Evaluated {
            let (i, j, k) = (cidx % nc, (cidx / nc) % nc, cidx / (nc * nc));
            let fidx = fine.index(2 * i, 2 * j, 2 * k);
            fine.values_mut()[fidx] = coarse.values()[cidx];
        }
    }

    let selected = dilate_1ring(&boundary_candidates(&interp));
    let batch: Vec<usize> = selected
        .iter_ones()
        .filter(|idx| fine.state(*idx) != NodeState::Evaluated)
        .collect();
    let mut evals = fine.evaluate_nodes(oracle, &batch);

    let mut step = LevelStep {
        grid: fine,
        evals: 0,
        conflict_iterations: 0,
        limit_hit: false,
    };
    if !config.conflict_pass {
        step.evals = evals;
        return step;
    }

    let max_iters = config.max_conflict_iters.unwrap_or(step.grid.cells());
    let mut frontier = conflicts(&step.grid, &interp, &batch);
    let mut scratch = Vec::new();
    while !frontier.is_empty() {
        if step.conflict_iterations >= max_iters {
            step.limit_hit = true;
            break;
        }
        step.conflict_iterations += 1;
        scratch.clear();
        for &idx in &frontier {
            step.grid.for_each_neighbor(idx, |nb| {
                if step.grid.state(nb) != NodeState::Evaluated {
                    scratch.push(nb);
                }
            });
        }
        scratch.sort_unstable();
        scratch.dedup();
        evals += step.grid.evaluate_nodes(oracle, &scratch);
        frontier = conflicts(&step.grid, &interp, &scratch);
    }
    step.evals = evals;
    step
}

/// Freshly evaluated nodes whose oracle side of the surface disagrees with
/// the interpolated guess.
fn conflicts(fine: &LevelGrid, interp: &LevelGrid, fresh: &[usize]) -> Vec<usize> {
    fresh
        .iter()
        .copied()
        .filter(|&idx| is_inside(fine.values()[idx]) != is_inside(interp.values()[idx]))
        .collect()
}
