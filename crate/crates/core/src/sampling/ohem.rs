use crate::error::{Error, Result};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhemParams {
    pub alpha_i: f64,
    pub beta_i: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
    /// BCE values above this are clamped before weighting.
    pub bce_cap: f64,
    /// Keep `decay * old + (1 - decay) * new` instead of overwriting.
    pub ema_decay: Option<f64>,
}

impl Default for OhemParams {
    fn default() -> Self {
        Self {
            alpha_i: 0.15,
            beta_i: 10.0,
            alpha_p: 0.7,
            beta_p: 0.0,
            bce_cap: 20.0,
            ema_decay: None,
        }
    }
}

/// Inverse sampling probability of an item: `exp(-iou / alpha + beta)`.
pub fn ohem_item_weight(iou: f64, alpha_i: f64, beta_i: f64) -> f64 {
    (-iou / alpha_i + beta_i).exp()
}

/// Inverse sampling probability of a point: `1 / (exp(-bce / alpha) + beta)`,
/// with `bce` clamped to `cap`.
pub fn ohem_point_weight(bce: f64, alpha_p: f64, beta_p: f64, cap: f64) -> f64 {
    1.0 / ((-bce.min(cap) / alpha_p).exp() + beta_p)
}

#[derive(Debug, Clone)]
struct ItemEntry {
    /// Latest IoU, `None` until the item is first visited.
    iou: Option<f64>,
    weight: Option<f64>,
    /// Per-point stored weights; `None` until visited.
    points: Vec<Option<f64>>,
}

/// Stored item and point weights, overwritten whenever an item is visited.
///
/// Entries never visited are weighted as if they had the mean IoU (items) or
/// mean BCE (points) of everything visited so far.
#[derive(Debug, Clone)]
pub struct OhemState {
    pub params: OhemParams,
    items: BTreeMap<u64, ItemEntry>,
    bce_sum: f64,
    bce_count: u64,
}

impl OhemState {
    pub fn new(params: OhemParams) -> Self {
        Self {
            params,
            items: BTreeMap::new(),
            bce_sum: 0.0,
            bce_count: 0,
        }
    }

    pub fn register_item(&mut self, id: u64, pool_size: usize) {
        self.items.entry(id).or_insert(ItemEntry {
            iou: None,
            weight: None,
            points: vec![None; pool_size],
        });
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.items.keys().copied()
    }

    fn mean_seen_iou(&self) -> f64 {
        let seen: Vec<f64> = self.items.values().filter_map(|e| e.iou).collect();
        if seen.is_empty() {
            0.0
        } else {
            seen.iter().sum::<f64>() / seen.len() as f64
        }
    }

    fn mean_seen_bce(&self) -> f64 {
        if self.bce_count == 0 {
            0.0
        } else {
            self.bce_sum / self.bce_count as f64
        }
    }

    fn blend(&self, old: Option<f64>, new: f64) -> f64 {
        match (self.params.ema_decay, old) {
            (Some(d), Some(o)) => d * o + (1.0 - d) * new,
            _ => new,
        }
    }

    /// Records one visit of `id`: its IoU and the BCE of each visited point.
    pub fn update(&mut self, id: u64, iou: f64, point_bce: &[(usize, f64)]) -> Result<()> {
        let p = self.params;
        let entry = self
            .items
            .get(&id)
            .ok_or_else(|| Error::OutOfRange(format!("unknown item {id}")))?;
        if let Some((pid, _)) = point_bce.iter().find(|(pid, _)| *pid >= entry.points.len()) {
            return Err(Error::OutOfRange(format!("point {pid} outside pool of item {id}")));
        }
        let item_w = self.blend(entry.weight, ohem_item_weight(iou, p.alpha_i, p.beta_i));
        let point_ws: Vec<(usize, f64)> = point_bce
            .iter()
            .map(|(pid, bce)| {
                let new = ohem_point_weight(*bce, p.alpha_p, p.beta_p, p.bce_cap);
                (*pid, self.blend(entry.points[*pid], new))
            })
            .collect();
        let entry = self.items.get_mut(&id).expect("checked above");
        entry.iou = Some(iou);
        entry.weight = Some(item_w);
        for (pid, w) in point_ws {
            entry.points[pid] = Some(w);
        }
        for (_, bce) in point_bce {
            self.bce_sum += bce.min(p.bce_cap);
            self.bce_count += 1;
        }
        Ok(())
    }

    /// Item weights in id order.
    pub fn item_weights(&self) -> Vec<(u64, f64)> {
        let p = self.params;
        let default = ohem_item_weight(self.mean_seen_iou(), p.alpha_i, p.beta_i);
        self.items
            .iter()
            .map(|(id, e)| (*id, e.weight.unwrap_or(default)))
            .collect()
    }

    pub fn item_distribution(&self) -> Vec<(u64, f64)> {
        let w = self.item_weights();
        let total: f64 = w.iter().map(|(_, w)| w).sum();
        w.into_iter().map(|(id, w)| (id, w / total)).collect()
    }

    pub fn point_weights(&self, id: u64) -> Option<Vec<f64>> {
        let p = self.params;
        let default = ohem_point_weight(self.mean_seen_bce(), p.alpha_p, p.beta_p, p.bce_cap);
        self.items
            .get(&id)
            .map(|e| e.points.iter().map(|w| w.unwrap_or(default)).collect())
    }
}

/// Draws `batch_size` items proportionally to their weights and, for each,
/// `points_per_item` pool indices proportionally to the point weights.
pub fn sample_batch(
    state: &OhemState,
    seed: u64,
    batch_size: usize,
    points_per_item: usize,
) -> Result<Vec<(u64, Vec<usize>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_batch_with(state, &mut rng, batch_size, points_per_item)
}

pub fn sample_batch_with(
    state: &OhemState,
    rng: &mut impl Rng,
    batch_size: usize,
    points_per_item: usize,
) -> Result<Vec<(u64, Vec<usize>)>> {
    if state.is_empty() {
        return Err(Error::EmptyInput("OHEM state"));
    }
    let weights = state.item_weights();
    let pick = WeightedIndex::new(weights.iter().map(|(_, w)| *w))
        .map_err(|e| Error::OutOfRange(format!("item weights: {e}")))?;
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let id = weights[pick.sample(rng)].0;
        let pw = state.point_weights(id).expect("id from state");
        let points = if pw.is_empty() || points_per_item == 0 {
            Vec::new()
        } else {
            let pp = WeightedIndex::new(&pw).map_err(|e| Error::OutOfRange(format!("point weights: {e}")))?;
            (0..points_per_item).map(|_| pp.sample(rng)).collect()
        };
        batch.push((id, points));
    }
    Ok(batch)
}

/// Splits a mean loss by cluster: returns `(sum_i P_i * mean_i, global mean)`
/// with `P_i` the fraction of samples in cluster `i`. The two agree.
pub fn cluster_decomposition(losses: &[f64], clusters: &[usize]) -> Result<(f64, f64)> {
    if losses.len() != clusters.len() {
        return Err(Error::DimensionMismatch {
            expected: losses.len(),
            actual: clusters.len(),
        });
    }
    if losses.is_empty() {
        return Err(Error::EmptyInput("loss list"));
    }
    let mut per: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (l, c) in losses.iter().zip(clusters) {
        let e = per.entry(*c).or_default();
        e.0 += l;
        e.1 += 1;
    }
    let n = losses.len() as f64;
    let weighted = per
        .values()
        .map(|(sum, count)| (*count as f64 / n) * (sum / *count as f64))
        .sum();
    let global = losses.iter().sum::<f64>() / n;
    Ok((weighted, global))
}
