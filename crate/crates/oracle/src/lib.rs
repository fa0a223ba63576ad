//! Naive reference implementations of retrieval, voting, attribution and
//! accuracy.
//!
//! Nothing here calls into the engine's kernels. Every routine scans every
//! record, computes cosine similarity inline in double precision and fully
//! sorts. Only the result types are shared with `knnvault`.

pub mod fixtures;

use std::collections::{BTreeMap, HashMap};

use knnvault::{ClassificationResult, EmbeddingRecord, Neighbor};

/// Cosine similarity accumulated left to right in f64.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut dot = 0.0f64;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    for i in 0..a.len() {
        let x = a[i] as f64;
        let y = b[i] as f64;
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    let s = dot / (aa * bb).sqrt();
    s.clamp(-1.0, 1.0)
}

pub fn oracle_top_k(records: &[EmbeddingRecord], query: &[f32], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = records
        .iter()
        .map(|r| Neighbor {
            record_id: r.id,
            label_id: r.label_id,
            similarity: cosine(query, &r.vector),
        })
        .collect();
    all.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap()
            .then(a.record_id.cmp(&b.record_id))
    });
    all.truncate(k);
    all
}

pub fn oracle_classify(records: &[EmbeddingRecord], query: &[f32], k: usize) -> Option<ClassificationResult> {
    let neighbors = oracle_top_k(records, query, k);
    if neighbors.is_empty() {
        return None;
    }
    let mut votes: HashMap<u32, usize> = HashMap::new();
    let mut sums: HashMap<u32, f64> = HashMap::new();
    for n in &neighbors {
        *votes.entry(n.label_id).or_default() += 1;
        *sums.entry(n.label_id).or_default() += n.similarity;
    }
    let mut labels: Vec<u32> = votes.keys().copied().collect();
    labels.sort();
    let mut predicted = labels[0];
    for &l in &labels[1..] {
        let (v, s) = (votes[&l], sums[&l]);
        let (bv, bs) = (votes[&predicted], sums[&predicted]);
        if v > bv || (v == bv && s > bs) {
            predicted = l;
        }
    }
    Some(ClassificationResult {
        predicted_label_id: predicted,
        neighbors,
        votes: votes.into_iter().collect(),
        summed_similarity: sums.into_iter().collect(),
    })
}

/// Per-record count of correctly classified queries that retrieved the
/// record with a label matching the query's true label.
pub fn oracle_attribution(
    records: &[EmbeddingRecord],
    queries: &[(Vec<f32>, u32)],
    k: usize,
) -> BTreeMap<u64, usize> {
    let mut counts: BTreeMap<u64, usize> = records.iter().map(|r| (r.id, 0)).collect();
    for (q, truth) in queries {
        let Some(result) = oracle_classify(records, q, k) else { continue };
        if result.predicted_label_id != *truth {
            continue;
        }
        for n in &result.neighbors {
            if n.label_id == *truth {
                *counts.get_mut(&n.record_id).unwrap() += 1;
            }
        }
    }
    counts
}

pub fn oracle_accuracy(support: &[EmbeddingRecord], test: &[EmbeddingRecord], k: usize) -> f64 {
    let mut correct = 0usize;
    for t in test {
        if let Some(r) = oracle_classify(support, &t.vector, k) {
            if r.predicted_label_id == t.label_id {
                correct += 1;
            }
        }
    }
    correct as f64 / test.len() as f64
}

/// One round of most-valuable-feature selection: per class, the record with
/// the highest attribution count, smallest id on ties. Returned ascending by
/// class label.
pub fn oracle_mvf_round(support: &[EmbeddingRecord], test: &[EmbeddingRecord], k: usize) -> Vec<u64> {
    let queries: Vec<(Vec<f32>, u32)> = test.iter().map(|t| (t.vector.clone(), t.label_id)).collect();
    let counts = oracle_attribution(support, &queries, k);
    let mut best: BTreeMap<u32, (usize, u64)> = BTreeMap::new();
    for r in support {
        let c = counts[&r.id];
        let entry = best.entry(r.label_id).or_insert((c, r.id));
        if c > entry.0 || (c == entry.0 && r.id < entry.1) {
            *entry = (c, r.id);
        }
    }
    best.values().map(|&(_, id)| id).collect()
}
