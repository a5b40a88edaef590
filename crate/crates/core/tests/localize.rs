mod common;

use occfield::field::{FieldOracle, SceneSpec};
use occfield::grid::{is_inside, NodeState};
use occfield::localize::*;

fn cfg(variant: Variant, res: usize) -> AlgoConfig {
    AlgoConfig::for_resolution(variant, DEFAULT_COARSEST, res).unwrap()
}

fn run(o: &FieldOracle, c: &AlgoConfig) -> ExtractionResult {
    o.reset_calls();
    let r = extract(o, c).unwrap();
    assert_eq!(r.total_evals, o.calls(), "{c:?}");
    assert_eq!(r.total_evals, r.evals_per_level.iter().sum::<u64>());
    r
}

#[test]
fn brute_force_counts_every_node() {
    let o = common::oracle("sphere");
    let r = run(&o, &cfg(Variant::Brute, 64));
    assert_eq!(r.total_evals, 65u64.pow(3));
    // inclusive at 0.5, so on-surface nodes count as inside
    let g = &r.final_grid;
    let lattice = (0..g.len()).filter(|&i| g.index_point(i).norm() <= 0.5).count();
    assert_eq!(r.binarized.count_inside(), lattice);
    let e = run(&common::oracle("empty"), &cfg(Variant::Brute, 64));
    assert_eq!(e.binarized.count_inside(), 0);
}

#[test]
fn empty_scene_stops_at_level_zero() {
    let o = common::oracle("empty");
    for v in [Variant::OctreeBinarized, Variant::Progressive] {
        let r = run(&o, &cfg(v, 128));
        assert_eq!(r.total_evals, 17u64.pow(3), "{v:?}");
    }
    let r = run(&o, &cfg(Variant::OctreeThreshold, 128).with_threshold(0.05));
    assert_eq!(r.total_evals, 17u64.pow(3));
}

#[test]
fn counter_matches_for_every_variant_and_scene() {
    for name in ["sphere", "torus", "capsule_figure", "thin_slab", "offset_slab", "thin_rod"] {
        let o = common::oracle(name);
        let brute = run(&o, &cfg(Variant::Brute, 64));
        for c in [
            cfg(Variant::OctreeBinarized, 64),
            cfg(Variant::OctreeThreshold, 64).with_threshold(0.12),
            cfg(Variant::Progressive, 64),
        ] {
            let r = run(&o, &c);
            assert!(r.total_evals < brute.total_evals, "{name} {c:?}");
        }
    }
}

#[test]
fn progressive_never_evaluates_twice_and_agrees_where_evaluated() {
    for name in ["sphere", "torus", "offset_slab", "thin_rod"] {
        let o = common::oracle(name);
        let r = run(&o, &cfg(Variant::Progressive, 128));
        let g = &r.final_grid;
        // each evaluation lands on a distinct final node
        assert_eq!(r.total_evals as usize, g.count_state(NodeState::Evaluated), "{name}");
        for idx in 0..g.len() {
            if g.state(idx) == NodeState::Evaluated {
                let truth = o.occupancy(g.index_point(idx)) as f32;
                assert_eq!(g.values()[idx], truth);
            }
        }
    }
}

#[test]
fn progressive_matches_brute_near_the_surface() {
    let o = common::oracle("sphere");
    let brute = run(&o, &cfg(Variant::Brute, 128));
    let prog = run(&o, &cfg(Variant::Progressive, 128));
    let h = brute.final_grid.spacing();
    let g = &prog.final_grid;
    let mut near = 0;
    for idx in 0..g.len() {
        if o.signed_distance(g.index_point(idx)).abs() <= h {
            near += 1;
            assert_eq!(is_inside(g.values()[idx]), brute.binarized.inside[idx], "node {idx}");
        }
    }
    assert!(near > 10_000);
    assert_eq!(compare_iou(&prog.binarized, &brute.binarized).unwrap(), 1.0);
}

#[test]
fn binarized_octree_loses_the_rod() {
    let o = common::oracle("thin_rod");
    let brute = run(&o, &cfg(Variant::Brute, 128));
    let mise = run(&o, &cfg(Variant::OctreeBinarized, 128));
    let prog = run(&o, &cfg(Variant::Progressive, 128));
    assert!(compare_iou(&mise.binarized, &brute.binarized).unwrap() < 0.99);
    assert!(compare_iou(&prog.binarized, &brute.binarized).unwrap() >= 0.999);
}

#[test]
fn threshold_sweep_is_monotone() {
    let o = common::oracle("sphere");
    let brute = run(&o, &cfg(Variant::Brute, 64));
    let mut prev: Option<(u64, f64)> = None;
    for t in THRESHOLD_SWEEP {
        let r = run(&o, &cfg(Variant::OctreeThreshold, 64).with_threshold(t));
        let iou = compare_iou(&r.binarized, &brute.binarized).unwrap();
        if let Some((e, i)) = prev {
            assert!(r.total_evals <= e, "t={t}");
            assert!(iou <= i, "t={t}");
        }
        prev = Some((r.total_evals, iou));
    }
}

#[test]
fn threshold_extremes() {
    let soft = FieldOracle::new(&SceneSpec::sphere(0.5).with_sharpness(1.0)).unwrap();
    let r = run(&soft, &cfg(Variant::OctreeThreshold, 64).with_threshold(0.4));
    assert_eq!(r.total_evals, 17u64.pow(3));
    let lax = AlgoConfig {
        threshold: Some(1.0),
        ..cfg(Variant::OctreeThreshold, 64)
    };
    assert!(lax.validate().is_err());
    // every cell of a smooth field refines, so each node is evaluated once
    let tight = run(&soft, &cfg(Variant::OctreeThreshold, 64).with_threshold(1e-9));
    assert_eq!(tight.total_evals, 65u64.pow(3));
}

#[test]
fn conflict_pass_recovers_the_fin() {
    let o = common::oracle("offset_slab");
    let brute = run(&o, &cfg(Variant::Brute, 128));
    let full = run(&o, &cfg(Variant::Progressive, 128));
    let ablated = run(&o, &cfg(Variant::Progressive, 128).without_conflict_pass());
    assert_eq!(full.binarized, brute.binarized);
    assert!(compare_iou(&ablated.binarized, &brute.binarized).unwrap() < 0.999);
    assert!(!full.conflict_limit_hit);
    assert!(full.conflict_iterations.iter().any(|&n| n > 0));
}

#[test]
fn conflict_cap_sets_the_flag() {
    let o = common::oracle("offset_slab");
    let capped = AlgoConfig {
        max_conflict_iters: Some(1),
        ..cfg(Variant::Progressive, 128)
    };
    let r = run(&o, &capped);
    assert!(r.conflict_limit_hit);
}

#[test]
fn results_are_deterministic_across_pools() {
    let o = common::oracle("capsule_figure");
    let c = cfg(Variant::Progressive, 128);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run(&o, &c));
    let b = four.install(|| run(&o, &c));
    assert_eq!(a.total_evals, b.total_evals);
    assert_eq!(a.evals_per_level, b.evals_per_level);
    assert_eq!(a.final_grid.values(), b.final_grid.values());
}

#[test]
fn acceleration_and_iou_edge_cases() {
    let o = FieldOracle::new(&SceneSpec::sphere(0.5)).unwrap();
    let brute = run(&o, &cfg(Variant::Brute, 32));
    assert_eq!(acceleration_factor(&brute, &brute).unwrap(), 1.0);
    let small = run(&o, &cfg(Variant::Brute, 16));
    assert!(compare_iou(&small.binarized, &brute.binarized).is_err());
    assert!(acceleration_factor(&small, &brute).is_err());
}
