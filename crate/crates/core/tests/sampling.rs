mod common;

use occfield::field::{FieldOracle, SceneSpec};
use occfield::sampling::toy::{fit_toy_predictor, ToyDataset, ToyDatasetSpec, ToyReport};
use occfield::sampling::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::path::PathBuf;

const DRAWS: usize = 100_000;

/// Pearson chi-square p-value of observed counts against probabilities.
fn chi_square_p(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

fn state_with_ious(ious: &[f64], pool: usize) -> OhemState {
    let mut s = OhemState::new(OhemParams::default());
    for (id, iou) in ious.iter().enumerate() {
        s.register_item(id as u64, pool);
        s.update(id as u64, *iou, &[]).unwrap();
    }
    s
}

#[test]
fn three_to_one_weights() {
    // exp(-iou/0.15) differs by a factor 3 across 0.15 ln 3
    let s = state_with_ious(&[0.5, 0.5 - 0.15 * 3f64.ln()], 0);
    let w = s.item_weights();
    assert!((w[1].1 / w[0].1 - 3.0).abs() < 1e-9);
    let batch = sample_batch(&s, 17, DRAWS, 0).unwrap();
    let second = batch.iter().filter(|(id, _)| *id == 1).count() as f64 / DRAWS as f64;
    assert!((second - 0.75).abs() <= 0.01, "{second}");
}

#[test]
fn item_frequencies_pass_chi_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ious: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
    let s = state_with_ious(&ious, 0);
    let dist = s.item_distribution();
    let batch = sample_batch(&s, 99, DRAWS, 0).unwrap();
    let mut counts = vec![0usize; 16];
    for (id, _) in &batch {
        counts[*id as usize] += 1;
    }
    let probs: Vec<f64> = dist.iter().map(|(_, p)| *p).collect();
    let p = chi_square_p(&counts, &probs);
    assert!(p > 0.01, "p = {p}");
    for (c, q) in counts.iter().zip(&probs) {
        assert!((*c as f64 / DRAWS as f64 - q).abs() < 0.01);
    }
}

#[test]
fn point_frequencies_pass_chi_square() {
    let mut s = OhemState::new(OhemParams::default());
    s.register_item(0, 8);
    let bces: Vec<(usize, f64)> = (0..8).map(|i| (i, 0.2 * i as f64)).collect();
    s.update(0, 0.5, &bces).unwrap();
    let w = s.point_weights(0).unwrap();
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|v| v / total).collect();
    let batch = sample_batch(&s, 3, 1, DRAWS).unwrap();
    let mut counts = vec![0usize; 8];
    for pid in &batch[0].1 {
        counts[*pid] += 1;
    }
    let p = chi_square_p(&counts, &probs);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn normalized_distribution_and_idempotence() {
    let ious = [0.9, 0.1, 0.5, 0.75];
    let mut s = state_with_ious(&ious, 0);
    let p = OhemParams::default();
    let weights: Vec<f64> = ious.iter().map(|i| ohem_item_weight(*i, p.alpha_i, p.beta_i)).collect();
    let total: f64 = weights.iter().sum();
    for ((_, got), w) in s.item_distribution().iter().zip(&weights) {
        assert!((got - w / total).abs() < 1e-12);
    }
    let before = s.item_weights();
    s.update(2, 0.5, &[]).unwrap();
    assert_eq!(s.item_weights(), before);
    // shifting beta scales every weight alike
    let mut shifted = OhemState::new(OhemParams {
        beta_i: 3.0,
        ..OhemParams::default()
    });
    for (id, iou) in ious.iter().enumerate() {
        shifted.register_item(id as u64, 0);
        shifted.update(id as u64, *iou, &[]).unwrap();
    }
    for (a, b) in shifted.item_distribution().iter().zip(s.item_distribution()) {
        assert!((a.1 - b.1).abs() < 1e-12);
    }
}

#[test]
fn weights_are_monotone() {
    let p = OhemParams::default();
    let ious: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for w in ious.windows(2) {
        assert!(ohem_item_weight(w[0], p.alpha_i, p.beta_i) > ohem_item_weight(w[1], p.alpha_i, p.beta_i));
    }
    for w in ious.windows(2) {
        assert!(ohem_point_weight(w[0], p.alpha_p, p.beta_p, p.bce_cap) < ohem_point_weight(w[1], p.alpha_p, p.beta_p, p.bce_cap));
    }
}

#[test]
fn single_item_is_always_drawn() {
    let s = state_with_ious(&[0.3], 4);
    let batch = sample_batch(&s, 1, 100, 2).unwrap();
    assert!(batch.iter().all(|(id, pids)| *id == 0 && pids.len() == 2));
}

#[test]
fn cluster_decomposition_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let clusters: Vec<usize> = (0..5000).map(|_| if rng.random_bool(0.05) { 1 } else { rng.random_range(2..6) }).collect();
    let losses: Vec<f64> = clusters.iter().map(|c| *c as f64 * rng.random_range(0.0..1.0)).collect();
    let (weighted, global) = cluster_decomposition(&losses, &clusters).unwrap();
    assert!((weighted - global).abs() <= 1e-12);
}

#[test]
fn iou_matches_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let preds: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels: Vec<bool> = (0..1000).map(|_| rng.random_bool(0.4)).collect();
    let mut inter = 0;
    let mut union = 0;
    for i in 0..1000 {
        let p = preds[i] >= 0.5;
        if p && labels[i] {
            inter += 1;
        }
        if p || labels[i] {
            union += 1;
        }
    }
    assert_eq!(iou_from_points(&preds, &labels, 0.5).unwrap(), inter as f64 / union as f64);
    let exact: Vec<f64> = labels.iter().map(|l| *l as u8 as f64).collect();
    assert_eq!(iou_from_points(&exact, &labels, 0.5).unwrap(), 1.0);
}

#[test]
fn softz_properties_over_random_depths() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [2usize, 64, 128] {
        for _ in 0..1000 {
            let pz: f64 = rng.random_range(-1.0..=1.0);
            let z = softz_encode(pz, n).unwrap();
            assert!(z.iter().all(|v| *v >= 0.0));
            assert!((z.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            let nz: Vec<usize> = (0..n).filter(|&i| z[i] != 0.0).collect();
            assert!(nz.len() <= 2 && nz.windows(2).all(|w| w[1] == w[0] + 1));
            assert!((softz_decode(&z) - pz).abs() < 1e-12);
        }
    }
}

#[test]
fn uniform_points_estimate_volume() {
    let o = FieldOracle::new(&SceneSpec::sphere(0.5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 20_000;
    let pts = importance_sample_points(&o, SurfaceSource::Field, n, 0.05, 1.0, &mut rng).unwrap();
    let frac = pts.iter().filter(|p| p.label).count() as f64 / n as f64;
    let truth = 4.0 / 3.0 * std::f64::consts::PI * 0.125 / 8.0;
    let sd = (truth * (1.0 - truth) / n as f64).sqrt();
    assert!((frac - truth).abs() < 4.0 * sd, "{frac} vs {truth}");
}

#[test]
fn importance_points_hug_the_surface() {
    let o = common::oracle("torus");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sigma = 0.05;
    let pts = importance_sample_points(&o, SurfaceSource::Field, 4096, sigma, 1.0 / 16.0, &mut rng).unwrap();
    let near = pts.iter().filter(|p| o.signed_distance(p.position).abs() <= 3.0 * sigma).count();
    assert!(near as f64 >= 0.8 * pts.len() as f64);
    for p in &pts {
        assert_eq!(p.label, o.occupancy(p.position) >= 0.5);
    }

    let mesh = {
        use occfield::localize::{extract, AlgoConfig, Variant};
        let r = extract(&o, &AlgoConfig::for_resolution(Variant::Progressive, 16, 64).unwrap()).unwrap();
        occfield::mesh::marching_cubes(&r.final_grid, 0.5)
    };
    let pts = importance_sample_points(&o, SurfaceSource::Mesh(&mesh), 1000, 0.0, 0.0, &mut rng).unwrap();
    // mesh samples sit within a cell diagonal of the true surface
    let diag = 2.0 / 64.0 * 3f64.sqrt();
    assert!(pts.iter().all(|p| o.signed_distance(p.position).abs() <= diag));
}

fn dataset(name: &str) -> ToyDataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("datasets").join(format!("{name}.json"));
    ToyDataset::generate(&ToyDatasetSpec::from_path(path).unwrap()).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn balanced_data_gives_no_edge_to_ohem() {
    let data = dataset("balanced");
    let mut gaps = Vec::new();
    for seed in 0..5 {
        let u = fit_toy_predictor(&data, false, 100, seed).unwrap();
        let h = fit_toy_predictor(&data, true, 100, seed).unwrap();
        gaps.push(h.worst - u.worst);
    }
    let gap = median(gaps);
    assert!(gap.abs() <= 0.05, "{gap}");
}

#[test]
fn untrained_predictor_is_near_trivial() {
    let data = dataset("imbalanced");
    let r = fit_toy_predictor(&data, true, 0, 1).unwrap();
    assert_eq!(r.epochs, 0);
    assert_eq!(r, ToyReport { use_ohem: true, ..fit_toy_predictor(&data, false, 0, 1).unwrap() });
    assert!(r.worst < 0.5);
}
