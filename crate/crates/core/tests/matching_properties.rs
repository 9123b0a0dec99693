mod common;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deim_core::matching::{cost_matrix, hungarian, o2m_assign, CostMatrix, CostWeights, O2mParams};
use deim_core::simharness::synth_scene;

fn random_rows(rng: &mut ChaCha8Rng, n_p: usize, n_t: usize, integer: bool) -> Vec<Vec<f64>> {
    (0..n_p)
        .map(|_| {
            (0..n_t)
                .map(|_| {
                    if integer {
                        rng.gen_range(0..5) as f64
                    } else {
                        rng.gen_range(-1.0..3.0)
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn matches_brute_force_on_small_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..300 {
        let (n_p, n_t) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let rows = random_rows(&mut rng, n_p, n_t, i % 3 == 0);
        let r = hungarian(&CostMatrix::from_rows(&rows).unwrap()).unwrap();
        let want = common::brute_force_assignment(&rows, n_t);
        assert!((r.total_cost - want).abs() <= 1e-12, "{rows:?}");
        assert_eq!(r.pairs.len(), n_p.min(n_t));
        assert_eq!(r.unmatched_targets.len(), n_t - r.pairs.len());
        assert_eq!(r.unmatched_predictions.len(), n_p - r.pairs.len());
    }
}

#[test]
fn permutation_invariant_total_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let (n_p, n_t) = (rng.gen_range(1..=9), rng.gen_range(1..=7));
        let rows = random_rows(&mut rng, n_p, n_t, false);
        let mut rp: Vec<usize> = (0..n_p).collect();
        let mut cp: Vec<usize> = (0..n_t).collect();
        rp.shuffle(&mut rng);
        cp.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = rp.iter().map(|&i| cp.iter().map(|&j| rows[i][j]).collect()).collect();
        let a = hungarian(&CostMatrix::from_rows(&rows).unwrap()).unwrap().total_cost;
        let b = hungarian(&CostMatrix::from_rows(&permuted).unwrap())
            .unwrap()
            .total_cost;
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn positive_scaling_keeps_the_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let (n_p, n_t) = (rng.gen_range(1..=9), rng.gen_range(1..=7));
        let m = CostMatrix::from_rows(&random_rows(&mut rng, n_p, n_t, false)).unwrap();
        let c = rng.gen_range(0.1..10.0);
        let a = hungarian(&m).unwrap();
        let b = hungarian(&m.scaled(c)).unwrap();
        assert_eq!(a.pairs, b.pairs);
        assert!((b.total_cost - c * a.total_cost).abs() <= 1e-9 * b.total_cost.abs().max(1.0));
    }
}

#[test]
fn o2m_dominates_o2o_on_synthetic_scenes() {
    let w = CostWeights::default();
    for seed in 0..100 {
        let n_t = (seed % 12) as usize;
        let (preds, targets) = synth_scene(n_t, 30, 0.15, seed).unwrap();
        let o2o = hungarian(&cost_matrix(&preds, &targets, &w).unwrap()).unwrap();
        let o2m = o2m_assign(&preds, &targets, &w, &O2mParams::default()).unwrap();
        assert!(o2m.pairs.len() >= o2o.pairs.len());
        // every target keeps at least one positive
        assert!(o2m.matches_per_target(n_t).iter().all(|&k| k >= 1));
        // a prediction is positive for at most one target
        let mut seen = vec![false; preds.len()];
        for &(p, _) in &o2m.pairs {
            assert!(!seen[p]);
            seen[p] = true;
        }
    }
}

#[test]
fn o2m_is_bounded_by_k_max() {
    let params = O2mParams {
        k_max: 3,
        topk_for_dynamic_k: 10,
    };
    let (preds, targets) = synth_scene(1, 40, 0.0, 3).unwrap();
    let r = o2m_assign(&preds, &targets, &CostWeights::default(), &params).unwrap();
    assert_eq!(r.pairs.len(), 3);
}
