//! A 2D stand-in for image-conditioned occupancy learning.
//!
//! Every item is one binary shape in `[-1,1]^2`. The predictor sees the
//! query position plus samples of a coarse, blurred raster of the item
//! around it (the analogue of pixel-aligned image features) and must output
//! the occupancy. Wide shapes survive the blur; thin ones only leave a faint
//! line, so they are the hard cases a sampler has to seek out.

use super::{bce_loss, iou_from_points, sample_batch_with, OhemParams, OhemState, SamplePoint, TrainingItem};
use crate::error::{Error, Result};
use crate::point::Point3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use std::path::Path;

const OFFSETS: [f64; 3] = [-1.0, 0.0, 1.0];
/// Position plus a 3x3 stencil of raster samples.
pub const INPUTS: usize = 2 + 9;
pub const HIDDEN: usize = 32;
pub const LEARNING_RATE: f64 = 0.05;
const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub name: String,
    pub kind: ShapeKind,
    pub count: usize,
}

fn default_pool() -> usize {
    1024
}
fn default_raster() -> usize {
    8
}
fn default_eval_grid() -> usize {
    48
}
fn default_batch_items() -> usize {
    8
}
fn default_points_per_item() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDatasetSpec {
    pub name: String,
    pub clusters: Vec<ClusterSpec>,
    /// Seed for shape parameters and point pools.
    pub seed: u64,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    /// Cells per side of the blurred raster the predictor sees.
    #[serde(default = "default_raster")]
    pub raster: usize,
    /// Evaluation lattice per side.
    #[serde(default = "default_eval_grid")]
    pub eval_grid: usize,
    #[serde(default = "default_batch_items")]
    pub batch_items: usize,
    #[serde(default = "default_points_per_item")]
    pub points_per_item: usize,
}

impl ToyDatasetSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.iter().map(|c| c.count).sum::<usize>() == 0 {
            return Err(Error::EmptyInput("toy dataset"));
        }
        if self.pool_size == 0 || self.raster < 2 || self.eval_grid < 2 || self.batch_items == 0 || self.points_per_item == 0 {
            return Err(Error::InvalidConfig("toy dataset sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape2D {
    Circle { cx: f64, cy: f64, r: f64 },
    Cross { cx: f64, cy: f64, half_len: f64, half_width: f64, angle: f64 },
}

impl Shape2D {
    fn random(kind: ShapeKind, rng: &mut impl Rng) -> Self {
        match kind {
            ShapeKind::Circle => Shape2D::Circle {
                cx: rng.random_range(-0.35..0.35),
                cy: rng.random_range(-0.35..0.35),
                r: rng.random_range(0.25..0.55),
            },
            ShapeKind::Cross => Shape2D::Cross {
                cx: rng.random_range(-0.2..0.2),
                cy: rng.random_range(-0.2..0.2),
                half_len: rng.random_range(0.45..0.7),
                half_width: rng.random_range(0.035..0.06),
                angle: rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
            },
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape2D::Circle { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Shape2D::Cross {
                cx,
                cy,
                half_len,
                half_width,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = ((c * dx + s * dy).abs(), (-s * dx + c * dy).abs());
                (u <= half_len && v <= half_width) || (v <= half_len && u <= half_width)
            }
        }
    }

    /// A point drawn uniformly from the shape's interior.
    fn interior_point(&self, rng: &mut impl Rng) -> (f64, f64) {
        loop {
            let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if self.contains(x, y) {
                return (x, y);
            }
        }
    }
}

/// Coverage fractions of an `r x r` raster over `[-1,1]^2`, row-major from
/// `(-1,-1)`.
fn rasterize(shape: &Shape2D, r: usize) -> Vec<f64> {
    let cell = 2.0 / r as f64;
    let sub = cell / SUPERSAMPLE as f64;
    let mut out = vec![0.0; r * r];
    for cy in 0..r {
        for cx in 0..r {
            let mut hit = 0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = -1.0 + cx as f64 * cell + (sx as f64 + 0.5) * sub;
                    let y = -1.0 + cy as f64 * cell + (sy as f64 + 0.5) * sub;
                    hit += shape.contains(x, y) as usize;
                }
            }
            out[cx + r * cy] = hit as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
        }
    }
    out
}

/// Bilinear lookup with cell-centred samples and clamped borders.
fn raster_at(raster: &[f64], r: usize, x: f64, y: f64) -> f64 {
    let to_cell = |v: f64| ((v + 1.0) * 0.5 * r as f64 - 0.5).clamp(0.0, (r - 1) as f64);
    let (fx, fy) = (to_cell(x), to_cell(y));
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(r - 1), (y0 + 1).min(r - 1));
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let at = |i: usize, j: usize| raster[i + r * j];
    (1.0 - ty) * ((1.0 - tx) * at(x0, y0) + tx * at(x1, y0)) + ty * ((1.0 - tx) * at(x0, y1) + tx * at(x1, y1))
}

fn features(raster: &[f64], r: usize, x: f64, y: f64) -> [f64; INPUTS] {
    let step = 2.0 / r as f64;
    let mut f = [0.0; INPUTS];
    f[0] = x;
    f[1] = y;
    let mut m = 2;
    for dy in OFFSETS {
        for dx in OFFSETS {
            f[m] = raster_at(raster, r, x + dx * step, y + dy * step);
            m += 1;
        }
    }
    f
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub spec: ToyDatasetSpec,
    pub items: Vec<TrainingItem>,
    pub shapes: Vec<Shape2D>,
    /// Predictor inputs for every pool point, per item.
    pool_inputs: Vec<Vec<[f64; INPUTS]>>,
    eval_inputs: Vec<Vec<[f64; INPUTS]>>,
    eval_labels: Vec<Vec<bool>>,
    cluster_of: Vec<usize>,
}

impl ToyDataset {
    pub fn generate(spec: &ToyDatasetSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, 0.05).expect("valid std");
        let r = spec.raster;
        let g = spec.eval_grid;
        let mut ds = ToyDataset {
            spec: spec.clone(),
            items: Vec::new(),
            shapes: Vec::new(),
            pool_inputs: Vec::new(),
            eval_inputs: Vec::new(),
            eval_labels: Vec::new(),
            cluster_of: Vec::new(),
        };
        for (ci, cluster) in spec.clusters.iter().enumerate() {
            for _ in 0..cluster.count {
                let shape = Shape2D::random(cluster.kind, &mut rng);
                let raster = rasterize(&shape, r);
                let mut points = Vec::with_capacity(spec.pool_size);
                let mut inputs = Vec::with_capacity(spec.pool_size);
                for m in 0..spec.pool_size {
                    let (x, y) = if m % 2 == 0 {
                        (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    } else {
                        let (x, y) = shape.interior_point(&mut rng);
                        let x: f64 = x + noise.sample(&mut rng);
                        let y: f64 = y + noise.sample(&mut rng);
                        (x.clamp(-1.0, 1.0), y.clamp(-1.0, 1.0))
                    };
                    points.push(SamplePoint::new(Point3::new(x, y, 0.0), shape.contains(x, y)));
                    inputs.push(features(&raster, r, x, y));
                }
                let mut ev_in = Vec::with_capacity(g * g);
                let mut ev_lab = Vec::with_capacity(g * g);
                for j in 0..g {
                    for i in 0..g {
                        let x = -1.0 + 2.0 * (i as f64 + 0.5) / g as f64;
                        let y = -1.0 + 2.0 * (j as f64 + 0.5) / g as f64;
                        ev_in.push(features(&raster, r, x, y));
                        ev_lab.push(shape.contains(x, y));
                    }
                }
                ds.items.push(TrainingItem {
                    id: ds.items.len() as u64,
                    scene: spec.name.clone(),
                    cluster: cluster.name.clone(),
                    points,
                    iou: 0.0,
                });
                ds.shapes.push(shape);
                ds.pool_inputs.push(inputs);
                ds.eval_inputs.push(ev_in);
                ds.eval_labels.push(ev_lab);
                ds.cluster_of.push(ci);
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Fully connected `INPUTS -> 32 -> 32 -> 1`, ReLU hidden units, sigmoid out.
#[derive(Debug, Clone)]
pub struct Mlp {
    w1: Vec<[f64; INPUTS]>,
    b1: Vec<f64>,
    w2: Vec<[f64; HIDDEN]>,
    b2: Vec<f64>,
    w3: [f64; HIDDEN],
    b3: f64,
}

struct Grads {
    w1: Vec<[f64; INPUTS]>,
    b1: Vec<f64>,
    w2: Vec<[f64; HIDDEN]>,
    b2: Vec<f64>,
    w3: [f64; HIDDEN],
    b3: f64,
}

impl Grads {
    fn zero() -> Self {
        Self {
            w1: vec![[0.0; INPUTS]; HIDDEN],
            b1: vec![0.0; HIDDEN],
            w2: vec![[0.0; HIDDEN]; HIDDEN],
            b2: vec![0.0; HIDDEN],
            w3: [0.0; HIDDEN],
            b3: 0.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    pub fn new(rng: &mut impl Rng) -> Self {
        let mut init = |fan_in: usize| {
            let a = (6.0 / fan_in as f64).sqrt();
            rng.random_range(-a..a)
        };
        let w1 = (0..HIDDEN).map(|_| std::array::from_fn(|_| init(INPUTS))).collect();
        let w2 = (0..HIDDEN).map(|_| std::array::from_fn(|_| init(HIDDEN))).collect();
        let w3 = std::array::from_fn(|_| init(HIDDEN));
        Self {
            w1,
            b1: vec![0.0; HIDDEN],
            w2,
            b2: vec![0.0; HIDDEN],
            w3,
            b3: 0.0,
        }
    }

    fn hidden(&self, x: &[f64; INPUTS]) -> ([f64; HIDDEN], [f64; HIDDEN]) {
        let mut h1 = [0.0; HIDDEN];
        for (n, h) in h1.iter_mut().enumerate() {
            let z: f64 = self.b1[n] + self.w1[n].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *h = z.max(0.0);
        }
        let mut h2 = [0.0; HIDDEN];
        for (n, h) in h2.iter_mut().enumerate() {
            let z: f64 = self.b2[n] + self.w2[n].iter().zip(&h1).map(|(w, v)| w * v).sum::<f64>();
            *h = z.max(0.0);
        }
        (h1, h2)
    }

    pub fn predict(&self, x: &[f64; INPUTS]) -> f64 {
        let (_, h2) = self.hidden(x);
        sigmoid(self.b3 + self.w3.iter().zip(&h2).map(|(w, v)| w * v).sum::<f64>())
    }

    /// Accumulates the BCE gradient of one sample; returns the prediction.
    fn backprop(&self, x: &[f64; INPUTS], label: bool, g: &mut Grads) -> f64 {
        let (h1, h2) = self.hidden(x);
        let p = sigmoid(self.b3 + self.w3.iter().zip(&h2).map(|(w, v)| w * v).sum::<f64>());
        let d3 = p - if label { 1.0 } else { 0.0 };
        g.b3 += d3;
        let mut d2 = [0.0; HIDDEN];
        for n in 0..HIDDEN {
            g.w3[n] += d3 * h2[n];
            d2[n] = if h2[n] > 0.0 { d3 * self.w3[n] } else { 0.0 };
        }
        let mut d1 = [0.0; HIDDEN];
        for n in 0..HIDDEN {
            if d2[n] == 0.0 {
                continue;
            }
            g.b2[n] += d2[n];
            for m in 0..HIDDEN {
                g.w2[n][m] += d2[n] * h1[m];
                d1[m] += d2[n] * self.w2[n][m];
            }
        }
        for n in 0..HIDDEN {
            if h1[n] <= 0.0 || d1[n] == 0.0 {
                continue;
            }
            g.b1[n] += d1[n];
            for m in 0..INPUTS {
                g.w1[n][m] += d1[n] * x[m];
            }
        }
        p
    }

    fn step(&mut self, g: &Grads, scale: f64) {
        for n in 0..HIDDEN {
            for m in 0..INPUTS {
                self.w1[n][m] -= scale * g.w1[n][m];
            }
            self.b1[n] -= scale * g.b1[n];
            for m in 0..HIDDEN {
                self.w2[n][m] -= scale * g.w2[n][m];
            }
            self.b2[n] -= scale * g.b2[n];
            self.w3[n] -= scale * g.w3[n];
        }
        self.b3 -= scale * g.b3;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyReport {
    pub use_ohem: bool,
    pub epochs: usize,
    pub seed: u64,
    /// Mean evaluation IoU per cluster, in dataset order.
    pub clusters: Vec<(String, f64)>,
    pub worst: f64,
}

impl ToyReport {
    pub fn method(&self) -> &'static str {
        if self.use_ohem {
            "ohem"
        } else {
            "uniform"
        }
    }
}

/// Mean per-item evaluation IoU of each cluster.
pub fn evaluate(model: &Mlp, data: &ToyDataset) -> Result<Vec<(String, f64)>> {
    let mut sums = vec![(0.0, 0usize); data.spec.clusters.len()];
    for (it, (inputs, labels)) in data.eval_inputs.iter().zip(&data.eval_labels).enumerate() {
        let preds: Vec<f64> = inputs.iter().map(|x| model.predict(x)).collect();
        let iou = iou_from_points(&preds, labels, 0.5)?;
        let c = data.cluster_of[it];
        sums[c].0 += iou;
        sums[c].1 += 1;
    }
    Ok(data
        .spec
        .clusters
        .iter()
        .zip(sums)
        .filter(|(_, (_, n))| *n > 0)
        .map(|(c, (s, n))| (c.name.clone(), s / n as f64))
        .collect())
}

/// Trains a fresh predictor with uniform or OHEM batch selection and reports
/// per-cluster IoU. Cluster labels are used for the report only.
pub fn fit_toy_predictor(data: &ToyDataset, use_ohem: bool, epochs: usize, seed: u64) -> Result<ToyReport> {
    if data.is_empty() {
        return Err(Error::EmptyInput("toy dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Mlp::new(&mut rng);
    let mut state = OhemState::new(OhemParams::default());
    for item in &data.items {
        state.register_item(item.id, item.points.len());
    }
    let spec = &data.spec;
    let steps_per_epoch = data.len().div_ceil(spec.batch_items);
    let pool = spec.pool_size;

    for _ in 0..epochs {
        for _ in 0..steps_per_epoch {
            let batch: Vec<(u64, Vec<usize>)> = if use_ohem {
                sample_batch_with(&state, &mut rng, spec.batch_items, spec.points_per_item)?
            } else {
                (0..spec.batch_items)
                    .map(|_| {
                        let id = rng.random_range(0..data.len()) as u64;
                        (id, (0..spec.points_per_item).map(|_| rng.random_range(0..pool)).collect())
                    })
                    .collect()
            };
            let mut grads = Grads::zero();
            let mut count = 0usize;
            for (id, pids) in &batch {
                let it = *id as usize;
                let mut preds = Vec::with_capacity(pids.len());
                let mut labels = Vec::with_capacity(pids.len());
                let mut bces = Vec::with_capacity(pids.len());
                for &pid in pids {
                    let label = data.items[it].points[pid].label;
                    let p = model.backprop(&data.pool_inputs[it][pid], label, &mut grads);
                    preds.push(p);
                    labels.push(label);
                    bces.push((pid, bce_loss(p, label)));
                    count += 1;
                }
                if use_ohem {
                    state.update(*id, iou_from_points(&preds, &labels, 0.5)?, &bces)?;
                }
            }
            model.step(&grads, LEARNING_RATE / count.max(1) as f64);
        }
    }

    let clusters = evaluate(&model, data)?;
    let worst = clusters.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    Ok(ToyReport {
        use_ohem,
        epochs,
        seed,
        clusters,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kinds: &[(ShapeKind, usize)]) -> ToyDatasetSpec {
        ToyDatasetSpec {
            name: "t".into(),
            clusters: kinds
                .iter()
                .map(|(k, n)| ClusterSpec {
                    name: format!("{k:?}"),
                    kind: *k,
                    count: *n,
                })
                .collect(),
            seed: 3,
            pool_size: 64,
            raster: 8,
            eval_grid: 16,
            batch_items: 4,
            points_per_item: 16,
        }
    }

    #[test]
    fn shapes_and_raster() {
        let c = Shape2D::Circle { cx: 0.0, cy: 0.0, r: 0.5 };
        assert!(c.contains(0.0, 0.49) && !c.contains(0.0, 0.51));
        let x = Shape2D::Cross {
            cx: 0.0,
            cy: 0.0,
            half_len: 0.5,
            half_width: 0.05,
            angle: 0.0,
        };
        assert!(x.contains(0.45, 0.0) && x.contains(0.0, -0.45) && !x.contains(0.3, 0.3));
        let r = rasterize(&c, 8);
        assert_eq!(r.len(), 64);
        assert_eq!(raster_at(&r, 8, 0.0, 0.0), 1.0);
        assert_eq!(raster_at(&r, 8, -1.0, -1.0), 0.0);
    }

    #[test]
    fn dataset_is_deterministic() {
        let spec = tiny(&[(ShapeKind::Circle, 3), (ShapeKind::Cross, 1)]);
        let a = ToyDataset::generate(&spec).unwrap();
        let b = ToyDataset::generate(&spec).unwrap();
        assert_eq!(a.items, b.items);
        assert_eq!(a.len(), 4);
        assert_eq!(a.items[3].cluster, "Cross");
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = Mlp::new(&mut rng);
        let x: [f64; INPUTS] = std::array::from_fn(|i| 0.1 * i as f64 - 0.3);
        let mut g = Grads::zero();
        m.backprop(&x, true, &mut g);
        let eps = 1e-6;
        let base = m.w1[3][2];
        m.w1[3][2] = base + eps;
        let up = bce_loss(m.predict(&x), true);
        m.w1[3][2] = base - eps;
        let down = bce_loss(m.predict(&x), true);
        m.w1[3][2] = base;
        let fd = (up - down) / (2.0 * eps);
        assert!((fd - g.w1[3][2]).abs() < 1e-6, "{fd} vs {}", g.w1[3][2]);
    }

    #[test]
    fn training_runs_and_is_seeded() {
        let data = ToyDataset::generate(&tiny(&[(ShapeKind::Circle, 4)])).unwrap();
        let a = fit_toy_predictor(&data, true, 2, 1).unwrap();
        assert_eq!(a, fit_toy_predictor(&data, true, 2, 1).unwrap());
        assert_eq!(a.clusters.len(), 1);
        let z = fit_toy_predictor(&data, false, 0, 1).unwrap();
        assert_eq!(z.epochs, 0);
    }
}
