//! Training-support math: depth encoding, BCE, point-set IoU, online hard
//! example mining and importance-based point sampling, plus a small 2D toy
//! problem that shows what hard-example mining buys on imbalanced data.

mod ohem;
mod points;
pub mod toy;

pub use ohem::{
    cluster_decomposition, ohem_item_weight, ohem_point_weight, sample_batch, sample_batch_with, OhemParams,
    OhemState,
};
pub use points::{importance_sample_points, project_to_surface, SurfaceSource};

use crate::error::{Error, Result};
use crate::point::Point3;

/// Lower/upper clamp applied to predictions before taking logs.
pub const BCE_EPS: f64 = 1e-7;

pub const DEFAULT_SOFTZ_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub position: Point3,
    pub label: bool,
    /// Latest prediction in [0,1].
    pub prediction: f64,
    /// Latest BCE at this point.
    pub bce: f64,
}

impl SamplePoint {
    /// A point with the uninformed prediction 0.5.
    pub fn new(position: Point3, label: bool) -> Self {
        Self {
            position,
            label,
            prediction: 0.5,
            bce: bce_loss(0.5, label),
        }
    }

    pub fn record(&mut self, prediction: f64) {
        self.prediction = prediction.clamp(0.0, 1.0);
        self.bce = bce_loss(prediction, self.label);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingItem {
    pub id: u64,
    pub scene: String,
    /// Ground-truth grouping, used only for reporting.
    pub cluster: String,
    pub points: Vec<SamplePoint>,
    /// IoU over `points` at the latest predictions.
    pub iou: f64,
}

impl TrainingItem {
    pub fn refresh_iou(&mut self) -> Result<f64> {
        let preds: Vec<f64> = self.points.iter().map(|p| p.prediction).collect();
        let labels: Vec<bool> = self.points.iter().map(|p| p.label).collect();
        self.iou = iou_from_points(&preds, &labels, 0.5)?;
        Ok(self.iou)
    }
}

/// Soft one-hot depth: `P_z` in [-1,1] spread over two adjacent of `n` bins.
pub fn softz_encode(pz: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("SoftZ needs at least 2 bins, got {n}")));
    }
    if !(-1.0..=1.0).contains(&pz) {
        return Err(Error::OutOfRange(format!("depth {pz} outside [-1,1]")));
    }
    let t = (n - 1) as f64 * 0.5 * (pz + 1.0);
    let i0 = (t.floor() as usize).min(n - 1);
    let mut z = vec![0.0; n];
    z[i0] = 1.0 + i0 as f64 - t;
    if i0 + 1 < n {
        z[i0 + 1] = t - i0 as f64;
    }
    Ok(z)
}

/// Expected bin position mapped back to [-1,1].
pub fn softz_decode(z: &[f64]) -> f64 {
    let n = z.len();
    let t: f64 = z.iter().enumerate().map(|(i, w)| i as f64 * w).sum();
    2.0 * t / (n - 1) as f64 - 1.0
}

pub fn bce_loss(prediction: f64, label: bool) -> f64 {
    let p = prediction.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// IoU of thresholded predictions against labels; 1 when both are empty.
pub fn iou_from_points(predictions: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("point set"));
    }
    let (mut inter, mut uni) = (0usize, 0usize);
    for (p, l) in predictions.iter().zip(labels) {
        let pred = *p >= threshold;
        inter += (pred && *l) as usize;
        uni += (pred || *l) as usize;
    }
    Ok(if uni == 0 { 1.0 } else { inter as f64 / uni as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softz_values() {
        let z = softz_encode(-1.0, 64).unwrap();
        assert_eq!(z[0], 1.0);
        assert_eq!(z.iter().sum::<f64>(), 1.0);
        let z = softz_encode(1.0, 64).unwrap();
        assert_eq!(z[63], 1.0);
        assert_eq!(z.iter().filter(|v| **v != 0.0).count(), 1);
        let z = softz_encode(0.0, 64).unwrap();
        assert_eq!((z[31], z[32]), (0.5, 0.5));
        assert!(softz_encode(1.5, 64).is_err());
        assert!(softz_encode(0.0, 1).is_err());
        assert!((softz_decode(&softz_encode(0.3, 64).unwrap()) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn bce_values() {
        assert!((bce_loss(0.5, true) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.5, false) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.0, true) - 16.118_095_650_958_32).abs() < 1e-9);
        assert!(bce_loss(1.0, true) < 1e-6);
        assert!(bce_loss(0.0, false) < 1e-6);
    }

    #[test]
    fn iou_values() {
        let l = [true, true, false, false];
        assert_eq!(iou_from_points(&[1.0, 1.0, 1.0, 1.0], &l, 0.5).unwrap(), 0.5);
        assert_eq!(iou_from_points(&[0.9, 0.6, 0.1, 0.0], &l, 0.5).unwrap(), 1.0);
        assert_eq!(iou_from_points(&[0.0; 4], &[false; 4], 0.5).unwrap(), 1.0);
        assert!(iou_from_points(&[0.0; 3], &l, 0.5).is_err());
        assert!(iou_from_points(&[], &[], 0.5).is_err());
    }
}
