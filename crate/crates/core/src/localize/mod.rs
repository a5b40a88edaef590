//! Surface extraction strategies and their accuracy/cost accounting.
//!
//! All four strategies produce a binarized node volume at the target level
//! and report how many oracle evaluations they spent per level:
//!
//! * [`extract_brute_force`] evaluates every node of the target grid.
//! * [`extract_octree_binarized`] refines cells that straddle the binarized
//!   inside/outside interface.
//! * [`extract_octree_threshold`] refines cells whose corner values spread by
//!   more than a threshold.
//! * [`extract_progressive`] upsamples the binarized coarse level, evaluates
//!   fractional nodes plus a one-ring, and chases conflicts between the
//!   interpolated guess and the oracle until none remain.

mod brute;
mod octree;
mod progressive;

pub use brute::extract_brute_force;
pub use octree::{extract_octree_binarized, extract_octree_threshold};
pub use progressive::extract_progressive;

use crate::error::{Error, Result};
use crate::field::OccupancyOracle;
use crate::grid::{BinaryVolume, LevelGrid};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

/// Finest supported cells per axis.
pub const MAX_CELLS: usize = 1024;

pub const DEFAULT_COARSEST: usize = 16;

/// Octree thresholds swept in the accuracy/speed comparison.
pub const THRESHOLD_SWEEP: [f64; 6] = [0.05, 0.08, 0.12, 0.2, 0.3, 0.4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Brute,
    OctreeBinarized,
    OctreeThreshold,
    Progressive,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Brute,
        Variant::OctreeBinarized,
        Variant::OctreeThreshold,
        Variant::Progressive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Brute => "brute",
            Variant::OctreeBinarized => "octree_binarized",
            Variant::OctreeThreshold => "octree_threshold",
            Variant::Progressive => "progressive",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub variant: Variant,
    /// Refinement threshold, octree_threshold only.
    pub threshold: Option<f64>,
    /// Cells per axis at level 0.
    pub coarsest: usize,
    /// Target level; the target grid has `coarsest * 2^levels` cells.
    pub levels: u32,
    /// Conflict-pass iteration cap per level; `None` means the level's cell count.
    pub max_conflict_iters: Option<usize>,
    /// Progressive only. Disabling it is an ablation.
    pub conflict_pass: bool,
}

impl AlgoConfig {
    pub fn new(variant: Variant, coarsest: usize, levels: u32) -> Self {
        Self {
            variant,
            threshold: None,
            coarsest,
            levels,
            max_conflict_iters: None,
            conflict_pass: true,
        }
    }

    /// Config whose target grid has exactly `resolution` cells per axis.
    pub fn for_resolution(variant: Variant, coarsest: usize, resolution: usize) -> Result<Self> {
        if coarsest == 0 || resolution < coarsest || resolution % coarsest != 0 {
            return Err(Error::InvalidConfig(format!(
                "resolution {resolution} is not a power-of-two multiple of coarsest {coarsest}"
            )));
        }
        let ratio = resolution / coarsest;
        if !ratio.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "resolution {resolution} is not a power-of-two multiple of coarsest {coarsest}"
            )));
        }
        let cfg = Self::new(variant, coarsest, ratio.trailing_zeros());
        cfg.check_size()?;
        Ok(cfg)
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn without_conflict_pass(mut self) -> Self {
        self.conflict_pass = false;
        self
    }

    pub fn target_cells(&self) -> usize {
        self.coarsest << self.levels
    }

    fn check_size(&self) -> Result<()> {
        if self.coarsest == 0 || self.levels > 10 || self.target_cells() > MAX_CELLS {
            return Err(Error::InvalidConfig(format!(
                "target resolution {}x2^{} exceeds {MAX_CELLS}",
                self.coarsest, self.levels
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_size()?;
        match (self.variant, self.threshold) {
            (Variant::OctreeThreshold, Some(t)) if t > 0.0 && t < 0.5 => Ok(()),
            (Variant::OctreeThreshold, Some(t)) => Err(Error::InvalidConfig(format!(
                "threshold {t} outside (0, 0.5)"
            ))),
            (Variant::OctreeThreshold, None) => {
                Err(Error::InvalidConfig("octree_threshold needs a threshold".into()))
            }
            (_, Some(_)) => Err(Error::InvalidConfig(format!(
                "threshold given for variant {}",
                self.variant
            ))),
            _ => Ok(()),
        }
    }

    fn expect_variant(&self, v: Variant) -> Result<()> {
        self.validate()?;
        if self.variant != v {
            return Err(Error::InvalidConfig(format!(
                "config is for {}, not {v}",
                self.variant
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExtractionResult {
    /// Target-level grid: oracle values at evaluated nodes, interpolated
    /// values elsewhere.
    pub final_grid: LevelGrid,
    pub binarized: BinaryVolume,
    pub evals_per_level: Vec<u64>,
    pub total_evals: u64,
    pub wall_time: Duration,
    /// Conflict-pass iterations run at each level (progressive only).
    pub conflict_iterations: Vec<usize>,
    /// Set when a conflict pass hit its iteration cap.
    pub conflict_limit_hit: bool,
}

impl ExtractionResult {
    fn new(final_grid: LevelGrid, evals_per_level: Vec<u64>, wall_time: Duration) -> Self {
        let binarized = final_grid.to_volume();
        let total_evals = evals_per_level.iter().sum();
        Self {
            final_grid,
            binarized,
            evals_per_level,
            total_evals,
            wall_time,
            conflict_iterations: Vec::new(),
            conflict_limit_hit: false,
        }
    }
}

/// Runs whichever strategy `config.variant` names.
pub fn extract<O: OccupancyOracle + ?Sized>(oracle: &O, config: &AlgoConfig) -> Result<ExtractionResult> {
    match config.variant {
        Variant::Brute => extract_brute_force(oracle, config),
        Variant::OctreeBinarized => extract_octree_binarized(oracle, config),
        Variant::OctreeThreshold => extract_octree_threshold(oracle, config),
        Variant::Progressive => extract_progressive(oracle, config),
    }
}

/// Fully evaluated level-0 grid shared by the hierarchical strategies.
fn evaluate_level0<O: OccupancyOracle + ?Sized>(oracle: &O, coarsest: usize) -> (LevelGrid, u64) {
    let mut grid = LevelGrid::new(0, coarsest);
    let all: Vec<usize> = (0..grid.len()).collect();
    let n = grid.evaluate_nodes(oracle, &all);
    (grid, n)
}

/// `|a ∧ b| / |a ∨ b|`, or 1 when both are empty.
pub fn compare_iou(a: &BinaryVolume, b: &BinaryVolume) -> Result<f64> {
    if a.inside.len() != b.inside.len() || a.nodes_per_axis != b.nodes_per_axis {
        return Err(Error::DimensionMismatch {
            expected: a.inside.len(),
            actual: b.inside.len(),
        });
    }
    let (mut inter, mut uni) = (0u64, 0u64);
    for (x, y) in a.inside.iter().zip(&b.inside) {
        inter += (*x && *y) as u64;
        uni += (*x || *y) as u64;
    }
    Ok(if uni == 0 { 1.0 } else { inter as f64 / uni as f64 })
}

/// Brute-force evaluation count over this result's count.
pub fn acceleration_factor(result: &ExtractionResult, brute: &ExtractionResult) -> Result<f64> {
    if result.final_grid.cells() != brute.final_grid.cells() {
        return Err(Error::DimensionMismatch {
            expected: brute.final_grid.cells(),
            actual: result.final_grid.cells(),
        });
    }
    if result.total_evals == 0 {
        return Err(Error::ZeroEvaluations("accelerated result"));
    }
    Ok(brute.total_evals as f64 / result.total_evals as f64)
}
