use knnvault::{classify, classify_batch, neighbor_attribution, top_k, Collection, EmbeddingRecord, EngineConfig};
use knnvault_oracle::fixtures::{collection_of, random_records, random_vectors, records_of};
use knnvault_oracle::{oracle_attribution, oracle_classify, oracle_top_k};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_collection_matches_oracle_for_every_k() {
    let records = random_records(1000, 64, 10, 11);
    let c = collection_of(&records, 64, 10);
    let queries = random_vectors(60, 64, 12);
    for k in 1..=20 {
        for q in &queries {
            assert_eq!(top_k(&c, q, k).unwrap(), oracle_top_k(&records, q, k), "k={k}");
            let got = classify(&c, q, EngineConfig::new(k).unwrap()).unwrap();
            assert_eq!(got, oracle_classify(&records, q, k).unwrap(), "k={k}");
        }
    }
}

#[test]
fn attribution_matches_recount() {
    let records = random_records(50, 8, 4, 3);
    let c = collection_of(&records, 8, 4);
    let queries: Vec<(Vec<f32>, u32)> = random_vectors(100, 8, 4)
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i % 4) as u32))
        .collect();
    for k in [1, 3, 10] {
        let got = neighbor_attribution(&c, &queries, EngineConfig::new(k).unwrap()).unwrap();
        assert_eq!(got, oracle_attribution(&records, &queries, k));
    }
}

#[test]
fn batch_equals_sequential_map() {
    let records = random_records(300, 16, 5, 21);
    let c = collection_of(&records, 16, 5);
    let queries = random_vectors(200, 16, 22);
    let cfg = EngineConfig::default();
    let batch = classify_batch(&c, &queries, cfg);
    for (q, b) in queries.iter().zip(batch) {
        assert_eq!(b.unwrap(), classify(&c, q, cfg).unwrap());
    }
    let same = vec![queries[0].clone(); 3];
    let out: Vec<_> = classify_batch(&c, &same, cfg).into_iter().map(Result::unwrap).collect();
    assert!(out.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn deleted_class_is_never_predicted() {
    let records = random_records(400, 12, 4, 5);
    let mut c = collection_of(&records, 12, 4);
    let doomed = c.select(&"label=l2".parse().unwrap());
    assert!(!doomed.is_empty());
    c.delete(&doomed);
    let survivors = records_of(&c);
    for q in random_vectors(200, 12, 6) {
        let r = classify(&c, &q, EngineConfig::default()).unwrap();
        assert_ne!(r.predicted_label_id, 2);
        assert_eq!(r, oracle_classify(&survivors, &q, 10).unwrap());
    }
}

#[test]
fn positive_scaling_keeps_predictions() {
    let records = random_records(500, 32, 6, 8);
    let c = collection_of(&records, 32, 6);
    let cfg = EngineConfig::default();
    for q in random_vectors(50, 32, 9) {
        let base = classify(&c, &q, cfg).unwrap();
        // powers of two scale exactly, so the whole result is bit-identical
        for s in [0.25f32, 2.0, 1024.0] {
            let scaled: Vec<f32> = q.iter().map(|x| x * s).collect();
            assert_eq!(classify(&c, &scaled, cfg).unwrap(), base);
        }
        // other scalars perturb similarities by rounding only
        for s in [0.3f32, 7.0, 1e6] {
            let scaled: Vec<f32> = q.iter().map(|x| x * s).collect();
            let r = classify(&c, &scaled, cfg).unwrap();
            assert_eq!(r.predicted_label_id, base.predicted_label_id);
            assert_eq!(r.votes, base.votes);
            for (a, b) in r.neighbors.iter().zip(&base.neighbors) {
                assert_eq!(a.record_id, b.record_id);
                assert!((a.similarity - b.similarity).abs() < 1e-6);
            }
        }
    }
}

fn grid_records(values: Vec<(Vec<i8>, u32)>) -> Vec<EmbeddingRecord> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, (v, l))| EmbeddingRecord::new(i as u64 * 3 + 1, l, v.into_iter().map(f32::from).collect()))
        .filter(|r| r.vector.iter().any(|&x| x != 0.0))
        .collect()
}

proptest! {
    // Small integer grids force many exact similarity ties, exercising the
    // id and label tie rules against the oracle.
    #[test]
    fn tie_heavy_grids_match_oracle(
        values in prop::collection::vec((prop::collection::vec(-2i8..=2, 3), 0u32..3), 1..40),
        query in prop::collection::vec(-2i8..=2, 3),
        k in 1usize..12,
    ) {
        let records = grid_records(values);
        let query: Vec<f32> = query.into_iter().map(f32::from).collect();
        prop_assume!(!records.is_empty() && query.iter().any(|&x| x != 0.0));
        let c = collection_of(&records, 3, 3);
        prop_assert_eq!(top_k(&c, &query, k).unwrap(), oracle_top_k(&records, &query, k));
        prop_assert_eq!(
            classify(&c, &query, EngineConfig::new(k).unwrap()).unwrap(),
            oracle_classify(&records, &query, k).unwrap()
        );
    }

    #[test]
    fn insertion_order_never_changes_results(seed in any::<u64>(), k in 1usize..15) {
        let records = random_records(120, 6, 4, seed);
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        let a = collection_of(&records, 6, 4);
        let b = collection_of(&shuffled, 6, 4);
        let cfg = EngineConfig::new(k).unwrap();
        for q in random_vectors(20, 6, seed.wrapping_add(1)) {
            prop_assert_eq!(classify(&a, &q, cfg).unwrap(), classify(&b, &q, cfg).unwrap());
        }
    }

    #[test]
    fn stored_vector_recovers_own_label_with_k1(seed in any::<u64>()) {
        let records = random_records(80, 5, 7, seed);
        let c = collection_of(&records, 5, 7);
        for r in &records {
            let res = classify(&c, &r.vector, EngineConfig::new(1).unwrap()).unwrap();
            prop_assert_eq!(res.neighbors[0].record_id, r.id);
            prop_assert_eq!(res.neighbors[0].similarity, 1.0);
            prop_assert_eq!(res.predicted_label_id, r.label_id);
        }
    }

    #[test]
    fn deleted_ids_never_reappear(seed in any::<u64>(), picks in prop::collection::vec(0u64..100, 1..30)) {
        let records = random_records(100, 4, 3, seed);
        let mut c: Collection = collection_of(&records, 4, 3);
        c.delete(&picks);
        for q in random_vectors(30, 4, seed ^ 1) {
            let n = top_k(&c, &q, 100).unwrap();
            prop_assert_eq!(n.len(), c.len());
            prop_assert!(n.iter().all(|n| !picks.contains(&n.record_id)));
        }
    }
}
