use super::{AlgoConfig, ExtractionResult, Variant};
use crate::error::Result;
use crate::field::OccupancyOracle;
use crate::grid::LevelGrid;
use std::time::Instant;

/// Dense evaluation of every node of the target grid.
pub fn extract_brute_force<O: OccupancyOracle + ?Sized>(
    oracle: &O,
    config: &AlgoConfig,
) -> Result<ExtractionResult> {
    config.expect_variant(Variant::Brute)?;
    let start = Instant::now();
    let mut grid = LevelGrid::new(config.levels, config.target_cells());
    let all: Vec<usize> = (0..grid.len()).collect();
    let evals = grid.evaluate_nodes(oracle, &all);
    let mut per_level = vec![0; config.levels as usize + 1];
    per_level[config.levels as usize] = evals;
    Ok(ExtractionResult::new(grid, per_level, start.elapsed()))
}
