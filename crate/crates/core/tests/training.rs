use std::sync::Arc;

use compressed_elsa::elsa::{loss_and_gradient, ElsaConfig, ElsaTrainer};
use compressed_elsa::infer::SparseInferenceEngine;
use compressed_elsa::interactions::InteractionMatrix;
use compressed_elsa::linalg::{AdamConfig, DenseMatrix};
use compressed_elsa::sparsifier::{apply_pruning_event, sparsify_renormalize, RestartPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_rows(n_users: usize, n_items: usize, density: f64, rng: &mut ChaCha8Rng) -> InteractionMatrix {
    let rows: Vec<Vec<u32>> = (0..n_users)
        .map(|_| (0..n_items as u32).filter(|_| rng.random::<f64>() < density).collect())
        .collect();
    InteractionMatrix::try_from_rows(n_items, &rows).unwrap()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    diff / scale.max(1e-300)
}

#[test]
fn gradient_matches_central_differences_with_mask() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, d) = (6, 4);
    let weights: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mask: Vec<bool> = (0..n * d).map(|i| i % 3 != 1).collect();
    let masked: Vec<f64> = weights.iter().zip(&mask).map(|(&w, &m)| if m { w } else { 0.0 }).collect();
    let rows: Vec<Vec<u32>> = vec![vec![0, 2], vec![1, 3, 5], vec![4], vec![0, 1, 2, 3]];
    let batch: Vec<&[u32]> = rows.iter().map(Vec::as_slice).collect();
    let analytic = loss_and_gradient(&masked, n, d, Some(&mask), &batch).gradient;
    let h = 1e-6;
    let mut numeric = vec![0.0; n * d];
    for p in 0..n * d {
        if !mask[p] {
            continue;
        }
        let mut plus = masked.clone();
        plus[p] += h;
        let mut minus = masked.clone();
        minus[p] -= h;
        let lp = loss_and_gradient(&plus, n, d, Some(&mask), &batch).loss;
        let lm = loss_and_gradient(&minus, n, d, Some(&mask), &batch).loss;
        numeric[p] = (lp - lm) / (2.0 * h);
    }
    for p in 0..n * d {
        if !mask[p] {
            assert_eq!(analytic[p], 0.0);
        }
    }
    assert!(relative_error(&analytic, &numeric) < 1e-4);
}

#[test]
fn continue_policy_keeps_pruned_entries_frozen() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = random_rows(60, 30, 0.15, &mut rng);
    let config = ElsaConfig {
        d: 8,
        epochs: 3,
        batch_size: 16,
        adam: AdamConfig { lr: 0.05, ..AdamConfig::default() },
        seed: 3,
    };
    let mut trainer = ElsaTrainer::new(&data, config).unwrap();
    trainer.train_epoch().unwrap();
    let (model, optimizer, mask) = trainer.parts_mut();
    let pruned = apply_pruning_event(model, optimizer, 3, RestartPolicy::Continue).unwrap();
    *mask = Some(pruned.to_bits());
    let bits = pruned.to_bits();
    for (p, &kept) in bits.iter().enumerate() {
        if !kept {
            assert_eq!(optimizer.first_moment()[p], 0.0);
            assert_eq!(optimizer.second_moment()[p], 0.0);
        }
    }
    for _ in 0..2 {
        trainer.train_epoch().unwrap();
        let grad = trainer.last_gradient().unwrap();
        let weights = &trainer.model().embeddings;
        for (p, &kept) in bits.iter().enumerate() {
            if !kept {
                assert_eq!(grad.as_slice()[p], 0.0);
                assert_eq!(weights.as_slice()[p], 0.0);
            }
        }
        for i in 0..30 {
            let nnz = weights.row(i).iter().filter(|&&v| v != 0.0).count();
            assert!(nnz <= 3);
        }
    }
}

#[test]
fn restart_rewinds_survivors_to_init() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = random_rows(40, 20, 0.2, &mut rng);
    let config = ElsaConfig {
        d: 6,
        epochs: 2,
        batch_size: 8,
        adam: AdamConfig::default(),
        seed: 1,
    };
    let mut trainer = ElsaTrainer::new(&data, config).unwrap();
    trainer.train_epoch().unwrap();
    let init = trainer.model().init_snapshot.clone().unwrap();
    let (model, optimizer, _) = trainer.parts_mut();
    let mask = apply_pruning_event(model, optimizer, 2, RestartPolicy::RestartFromInit).unwrap();
    assert_eq!(optimizer.steps(), 0);
    let expected = mask.apply(&init).row_l2_normalized().0;
    assert_eq!(model.embeddings, expected);
}

#[test]
fn engine_is_shareable_across_threads() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dense = DenseMatrix::from_fn(100, 16, |_, _| rng.random_range(-1.0f32..1.0));
    let engine = Arc::new(SparseInferenceEngine::build(sparsify_renormalize(&dense, 4).unwrap().embeddings).unwrap());
    let queries: Vec<Vec<u32>> = (0..8u32).map(|t| vec![t, t + 10, t * 3 + 1]).collect();
    let serial: Vec<Vec<f32>> = queries.iter().map(|q| engine.infer_scores(q).unwrap()).collect();
    let handles: Vec<_> = queries
        .into_iter()
        .map(|q| {
            let e = Arc::clone(&engine);
            std::thread::spawn(move || e.infer_scores(&q).unwrap())
        })
        .collect();
    for (h, want) in handles.into_iter().zip(serial) {
        assert_eq!(h.join().unwrap(), want);
    }
}

#[test]
fn work_is_bounded_by_query_and_item_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, d) = (300, 64);
    let dense = DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0f32..1.0));
    for k in [2, 8, 32] {
        let engine = SparseInferenceEngine::build(sparsify_renormalize(&dense, k).unwrap().embeddings).unwrap();
        for size in [1, 5, 40] {
            let items: Vec<u32> = (0..size).map(|_| rng.random_range(0..n as u32)).collect();
            let mut unique = items.clone();
            unique.sort_unstable();
            unique.dedup();
            let (_, macs) = engine.infer_scores_counted(&items).unwrap();
            assert!(macs <= (unique.len() + n) * k, "k={k}: {macs} MACs");
        }
    }
}
