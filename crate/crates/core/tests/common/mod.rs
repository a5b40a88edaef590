#![allow(dead_code)]

use occfield::field::{Color, FieldOracle, SceneSpec};
use occfield::render::{CameraSpec, DepthMap, RenderStats, RenderedImage};
use occfield::Point3;
use std::path::PathBuf;

pub fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes").join(format!("{name}.json"))
}

pub fn scene(name: &str) -> SceneSpec {
    SceneSpec::from_path(scene_path(name)).unwrap()
}

pub fn oracle(name: &str) -> FieldOracle {
    FieldOracle::new(&scene(name)).unwrap()
}

/// Front-most crossing of the 0.5 level along a view column, by marching
/// from the near plane with step `h` and bisecting the first bracket.
pub fn ray_march_depth(o: &FieldOracle, cam: &CameraSpec, x: f64, y: f64, h: f64) -> Option<f64> {
    let occ = |z: f64| o.occupancy_from_distance(o.signed_distance(cam.view_to_world(Point3::new(x, y, z))));
    let steps = (2.0 / h).round() as usize;
    let mut prev_z = 1.0;
    if occ(prev_z) >= 0.5 {
        return Some(prev_z);
    }
    for s in 1..=steps {
        let z = 1.0 - s as f64 * h;
        if occ(z) >= 0.5 {
            let (mut out, mut inside) = (prev_z, z);
            for _ in 0..60 {
                let mid = 0.5 * (out + inside);
                if occ(mid) >= 0.5 {
                    inside = mid;
                } else {
                    out = mid;
                }
            }
            return Some(0.5 * (out + inside));
        }
        prev_z = z;
    }
    None
}

/// Worst depth error over covered pixels, and covered pixels the reference misses.
pub fn depth_error(o: &FieldOracle, cam: &CameraSpec, dm: &DepthMap) -> (f64, usize) {
    let h = 2.0 / (dm.width - 1) as f64;
    let mut worst: f64 = 0.0;
    let mut misses = 0;
    for py in 0..dm.height {
        for px in 0..dm.width {
            let p = px + dm.width * py;
            if !dm.mask[p] {
                continue;
            }
            let (x, y) = dm.pixel_xy(px, py);
            match ray_march_depth(o, cam, x, y, h) {
                Some(z) => worst = worst.max((z - dm.depth[p]).abs()),
                None => misses += 1,
            }
        }
    }
    (worst, misses)
}

/// Textured image built from ray-marched depths alone, one pixel per node
/// column of a `cells`-cell view grid.
pub fn ray_march_image(o: &FieldOracle, cam: &CameraSpec, cells: usize, background: Color) -> RenderedImage {
    let n = cells + 1;
    let h = 2.0 / cells as f64;
    let mut rgb = vec![background; n * n];
    let mut depth = vec![f64::NAN; n * n];
    let mut mask = vec![false; n * n];
    for py in 0..n {
        for px in 0..n {
            let (x, y) = (-1.0 + px as f64 * h, 1.0 - py as f64 * h);
            if let Some(z) = ray_march_depth(o, cam, x, y, h) {
                let p = px + n * py;
                rgb[p] = o.texture(cam.view_to_world(Point3::new(x, y, z))).unwrap();
                depth[p] = z;
                mask[p] = true;
            }
        }
    }
    RenderedImage {
        width: n,
        height: n,
        rgb,
        depth,
        mask,
        background,
        stats: RenderStats::default(),
    }
}
