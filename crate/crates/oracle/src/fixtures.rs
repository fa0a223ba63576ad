//! Seeded synthetic datasets for tests and benchmarks.

use knnvault::harness::LabeledSet;
use knnvault::{Collection, EmbeddingRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Support and test sets drawn from the same class clusters.
pub struct Clusters {
    pub support: LabeledSet,
    pub test: LabeledSet,
}

/// `classes` isotropic Gaussian clusters in `dim` dimensions. Means are
/// drawn with standard deviation `separation`, points around them with
/// standard deviation `spread`. Support ids are `0..`, test ids continue
/// after the support.
pub fn gaussian_clusters(
    classes: usize,
    dim: usize,
    support_per_class: usize,
    test_per_class: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Clusters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_dist = Normal::new(0.0, separation).unwrap();
    let noise = Normal::new(0.0, spread).unwrap();
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| mean_dist.sample(&mut rng)).collect())
        .collect();
    let labels: Vec<String> = (0..classes).map(|c| format!("class{c}")).collect();
    let mut next_id = 0u64;
    let mut draw = |per_class: usize, rng: &mut ChaCha8Rng| {
        let mut items = Vec::with_capacity(classes * per_class);
        for _ in 0..per_class {
            for (label, mean) in means.iter().enumerate() {
                let v = mean.iter().map(|m| (m + noise.sample(rng)) as f32).collect();
                items.push(EmbeddingRecord::new(next_id, label as u32, v));
                next_id += 1;
            }
        }
        items
    };
    let support = draw(support_per_class, &mut rng);
    let test = draw(test_per_class, &mut rng);
    Clusters {
        support: LabeledSet::new(dim, labels.clone(), support).unwrap(),
        test: LabeledSet::new(dim, labels, test).unwrap(),
    }
}

/// `n` records with uniform components in [-1, 1), ids `0..n`, labels
/// uniform over `labels` classes.
pub fn random_records(n: usize, dim: usize, labels: u32, seed: u64) -> Vec<EmbeddingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .map(|id| {
            let v = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            EmbeddingRecord::new(id, rng.random_range(0..labels), v)
        })
        .collect()
}

pub fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect()
}

pub fn label_names(n: u32) -> Vec<String> {
    (0..n).map(|i| format!("l{i}")).collect()
}

pub fn collection_of(records: &[EmbeddingRecord], dim: usize, labels: u32) -> Collection {
    let mut c = Collection::new("fixture", dim, label_names(labels)).unwrap();
    c.insert(records.to_vec()).unwrap();
    c
}

pub fn records_of(c: &Collection) -> Vec<EmbeddingRecord> {
    c.scan().map(|r| r.to_record()).collect()
}
