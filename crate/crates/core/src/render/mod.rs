//! Mesh-free novel-view rendering.
//!
//! The occupancy grid is laid out in view coordinates: node columns are
//! pixels and `k` walks away from the viewer. Localization runs one level
//! short of the target; the last level is handled per column. Everything
//! behind the first certainly-occupied node of a column is a shadow node and
//! is never evaluated, the remaining fractional nodes are evaluated, and the
//! surface depth is interpolated between the last outside and first inside
//! node. The texture field is then sampled at that surface point.

mod camera;
mod ppm;

pub use camera::{CameraSpec, ViewOracle};
pub use ppm::{parse_ppm, write_ppm};

use crate::error::{Error, Result};
use crate::field::{Color, FieldOracle, OccupancyOracle};
use crate::grid::{
    argmax_z, binarize, is_inside, upsample_interpolate, write_plane_dump, ColumnMax, LevelGrid, NodeState, ISO,
};
use crate::localize::{extract_progressive, AlgoConfig, Variant};
use crate::point::Point3;
use rayon::prelude::*;
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    /// Progressive localization settings; `levels` is the target level L.
    pub algo: AlgoConfig,
    pub background: Color,
}

impl RenderConfig {
    pub fn new(coarsest: usize, resolution: usize) -> Result<Self> {
        Ok(Self {
            algo: AlgoConfig::for_resolution(Variant::Progressive, coarsest, resolution)?,
            background: [1.0, 1.0, 1.0],
        })
    }

    pub fn with_background(mut self, b: Color) -> Self {
        self.background = b;
        self
    }

    pub fn resolution(&self) -> usize {
        self.algo.target_cells()
    }

    fn validate(&self) -> Result<()> {
        self.algo.validate()?;
        if self.algo.variant != Variant::Progressive {
            return Err(Error::InvalidConfig("rendering requires the progressive variant".into()));
        }
        if self.algo.levels == 0 {
            return Err(Error::InvalidConfig("rendering needs at least one refinement level".into()));
        }
        if self.background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidConfig("background color outside [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    /// Oracle calls for the whole render.
    pub evals: u64,
    /// Calls made at the target level only.
    pub final_level_evals: u64,
    pub shadow_nodes: usize,
    /// Columns whose culling node turned out to be outside, un-shadowed.
    pub reopened_columns: usize,
    /// Calls spent confirming the two nodes around each surface crossing.
    pub bracket_evals: u64,
    /// Conflict-chasing rounds at the target level.
    pub conflict_iterations: usize,
    /// Brackets with equal occupancy at both ends.
    pub degenerate_brackets: usize,
    /// Uncovered pixels whose partial occupancy sits on the near or far
    /// plane, i.e. the surface is clipped by the view volume.
    pub grazing_pixels: usize,
}

/// Per-pixel surface depth in view NDC. Pixel `(0, 0)` is the top-left
/// corner `(x, y) = (-1, +1)`; rows run downward.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    /// Row-major; NaN where not covered.
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
    /// Column maximum of the upsampled binarized prediction, row-major.
    pub first_pass: Vec<ColumnMax>,
    /// Column maximum after the final evaluation pass, row-major.
    pub final_pass: Vec<ColumnMax>,
    pub stats: RenderStats,
}

impl DepthMap {
    pub fn covered(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// View-space x/y of a pixel.
    pub fn pixel_xy(&self, px: usize, py: usize) -> (f64, f64) {
        let r = (self.width - 1) as f64;
        (-1.0 + 2.0 * px as f64 / r, 1.0 - 2.0 * py as f64 / r)
    }

    /// Flat dump of the depth plane in image order, NaN where uncovered.
    pub fn write_dump(&self, level: u32, w: impl Write) -> Result<()> {
        let plane: Vec<f32> = self.depth.iter().map(|d| *d as f32).collect();
        write_plane_dump(level, self.width - 1, &plane, w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<Color>,
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
    pub background: Color,
    pub stats: RenderStats,
}

/// Surface depth per pixel without texture lookup.
pub fn surface_depth_map(oracle: &FieldOracle, camera: &CameraSpec, config: &RenderConfig) -> Result<DepthMap> {
    config.validate()?;
    camera.validate()?;
    let view = ViewOracle::new(oracle, *camera);
    let before = view.calls();

    // coarse levels: ordinary progressive localization
    let mut coarse_cfg = config.algo.clone();
    coarse_cfg.levels -= 1;
    let coarse = extract_progressive(&view, &coarse_cfg)?.final_grid;

    // target level: first guess from the binarized coarse prediction
    let guess = upsample_interpolate(&binarize(&coarse));
    let first = argmax_z(&guess);
    let mut fine = guess.clone();
    let nc = coarse.nodes_per_axis();
    for (cidx, s) in coarse.states().iter().enumerate() {
        if *s == NodeState::Evaluated {
            let (i, j, k) = (cidx % nc, (cidx / nc) % nc, cidx / (nc * nc));
            let fidx = fine.index(2 * i, 2 * j, 2 * k);
            fine.values_mut()[fidx] = coarse.values()[cidx];
        }
    }

    let n = fine.nodes_per_axis();
    let mut stats = RenderStats::default();
    for (col, cm) in first.iter().enumerate() {
        if cm.value == 1.0 {
            for k in cm.index + 1..n {
                fine.states_mut()[col + n * n * k] = NodeState::Shadow;
                stats.shadow_nodes += 1;
            }
        }
    }

    let batch: Vec<usize> = (0..fine.len())
        .into_par_iter()
        .filter(|&idx| {
            let v = guess.values()[idx];
            v > 0.0 && v < 1.0 && !matches!(fine.state(idx), NodeState::Shadow | NodeState::Evaluated)
        })
        .collect();
    stats.final_level_evals = fine.evaluate_nodes(&view, &batch);

    // same conflict chase as localization, kept out of the shadow region
    let max_iters = config.algo.max_conflict_iters.unwrap_or(fine.cells());
    let mut frontier = batch;
    for _ in 0..max_iters {
        frontier.retain(|&idx| is_inside(fine.values()[idx]) != is_inside(guess.values()[idx]));
        if frontier.is_empty() {
            break;
        }
        // a culling node found outside no longer hides anything behind it
        for &idx in &frontier {
            let (i, j, k) = fine.coords(idx);
            let col = i + n * j;
            if first[col].value == 1.0 && first[col].index == k && !is_inside(fine.values()[idx]) {
                for kk in k + 1..n {
                    let behind = col + n * n * kk;
                    if fine.state(behind) == NodeState::Shadow {
                        fine.states_mut()[behind] = NodeState::Interpolated;
                        stats.shadow_nodes -= 1;
                    }
                }
                stats.reopened_columns += 1;
            }
        }
        let mut next = Vec::new();
        for &idx in &frontier {
            fine.for_each_neighbor(idx, |nb| {
                if !matches!(fine.state(nb), NodeState::Shadow | NodeState::Evaluated) {
                    next.push(nb);
                }
            });
        }
        next.sort_unstable();
        next.dedup();
        stats.final_level_evals += fine.evaluate_nodes(&view, &next);
        stats.conflict_iterations += 1;
        frontier = next;
    }

    // both ends of every surface bracket must be oracle values
    loop {
        let need: Vec<usize> = (0..n * n)
            .into_par_iter()
            .filter_map(|col| {
                let k = (0..n).find(|&k| is_inside(fine.values()[col + n * n * k]))?;
                let at = |k: usize| col + n * n * k;
                if fine.state(at(k)) != NodeState::Evaluated {
                    Some(at(k))
                } else if k > 0 && fine.state(at(k - 1)) != NodeState::Evaluated {
                    Some(at(k - 1))
                } else {
                    None
                }
            })
            .collect();
        if need.is_empty() {
            break;
        }
        stats.shadow_nodes -= need.iter().filter(|&&idx| fine.state(idx) == NodeState::Shadow).count();
        stats.bracket_evals += fine.evaluate_nodes(&view, &need);
    }
    stats.final_level_evals += stats.bracket_evals;

    let last = argmax_z(&binarize(&fine));
    let cells = fine.cells();
    let per_pixel: Vec<(f64, bool, bool, bool)> = (0..n * n)
        .into_par_iter()
        .map(|pix| {
            let (px, py) = (pix % n, pix / n);
            let col = px + n * (cells - py);
            let cm = last[col];
            if cm.value < 1.0 {
                let f = first[col];
                let grazing = f.value > 0.0 && (f.index == 0 || f.index == cells);
                return (f64::NAN, false, false, grazing);
            }
            let k = cm.index;
            if k == 0 {
                return (fine.depth_of(0.0), true, false, false);
            }
            let (v0, v1) = (fine.values()[col + n * n * (k - 1)], fine.values()[col + n * n * k]);
            let (s, degenerate) = if v1 == v0 {
                (1.0, true)
            } else {
                (((ISO - v0) as f64 / (v1 - v0) as f64).clamp(0.0, 1.0), false)
            };
            (fine.depth_of((k - 1) as f64 + s), true, degenerate, false)
        })
        .collect();

    let mut depth = Vec::with_capacity(n * n);
    let mut mask = Vec::with_capacity(n * n);
    for (d, m, degenerate, grazing) in per_pixel {
        depth.push(d);
        mask.push(m);
        stats.degenerate_brackets += degenerate as usize;
        stats.grazing_pixels += grazing as usize;
    }
    let row_major = |cols: &[ColumnMax]| -> Vec<ColumnMax> {
        (0..n * n).map(|pix| cols[pix % n + n * (cells - pix / n)]).collect()
    };
    stats.evals = view.calls() - before;
    Ok(DepthMap {
        width: n,
        height: n,
        depth,
        mask,
        first_pass: row_major(&first),
        final_pass: row_major(&last),
        stats,
    })
}

/// Textured render; uncovered pixels take the background color.
pub fn render_view(oracle: &FieldOracle, camera: &CameraSpec, config: &RenderConfig) -> Result<RenderedImage> {
    if !oracle.has_texture() {
        return Err(Error::TextureUnavailable);
    }
    let dm = surface_depth_map(oracle, camera, config)?;
    let world: Vec<Point3> = (0..dm.width * dm.height)
        .filter(|p| dm.mask[*p])
        .map(|p| {
            let (x, y) = dm.pixel_xy(p % dm.width, p / dm.width);
            camera.view_to_world(Point3::new(x, y, dm.depth[p]))
        })
        .collect();
    let mut colors = oracle.eval_texture_batch(&world)?.into_iter();
    let rgb = dm
        .mask
        .iter()
        .map(|m| {
            if *m {
                colors.next().expect("one color per covered pixel")
            } else {
                config.background
            }
        })
        .collect();
    Ok(RenderedImage {
        width: dm.width,
        height: dm.height,
        rgb,
        depth: dm.depth,
        mask: dm.mask,
        background: config.background,
        stats: dm.stats,
    })
}

/// Covered pixels from the render, the rest from `backdrop`.
pub fn composite(image: &RenderedImage, backdrop: &[Color]) -> Result<Vec<Color>> {
    if backdrop.len() != image.rgb.len() {
        return Err(Error::DimensionMismatch {
            expected: image.rgb.len(),
            actual: backdrop.len(),
        });
    }
    Ok(image
        .rgb
        .par_iter()
        .zip(&image.mask)
        .zip(backdrop)
        .map(|((c, m), b)| if *m { *c } else { *b })
        .collect())
}

/// Full-level progressive localization of the same view grid, for cost
/// comparisons against [`surface_depth_map`].
pub fn localize_view(oracle: &FieldOracle, camera: &CameraSpec, config: &RenderConfig) -> Result<(LevelGrid, u64)> {
    config.validate()?;
    let view = ViewOracle::new(oracle, *camera);
    let before = view.calls();
    let r = extract_progressive(&view, &config.algo)?;
    Ok((r.final_grid, view.calls() - before))
}

/// Column-wise first crossing of the binarized grid, as a reference for
/// tests: depth of the first node at or above the iso level.
pub fn first_inside_depth(grid: &LevelGrid, i: usize, j: usize) -> Option<f64> {
    (0..grid.nodes_per_axis())
        .find(|&k| is_inside(grid.value(i, j, k)))
        .map(|k| grid.depth_of(k as f64))
}
