//! Exact top-k cosine retrieval and majority-vote classification.

pub mod kernel;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{validate_vector, Collection, EmbeddingRecord};

/// Neighbourhood size used throughout the reference experiments.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub record_id: u64,
    pub label_id: u32,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub predicted_label_id: u32,
    pub neighbors: Vec<Neighbor>,
    pub votes: BTreeMap<u32, usize>,
    pub summed_similarity: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub k: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

impl EngineConfig {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        Ok(Self { k })
    }
}

/// Which neighbours earn credit in [`neighbor_attribution_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionRule {
    /// Correctly classified query and neighbour label equals the true label.
    #[default]
    CorrectAndMatching,
    /// Neighbour label equals the true label; query correctness ignored.
    MatchingOnly,
    /// Every neighbour of a correctly classified query.
    CorrectOnly,
}

/// A query vector carrying its ground-truth label.
pub trait LabeledVector: Sync {
    fn vector(&self) -> &[f32];
    fn label_id(&self) -> u32;
}

impl LabeledVector for EmbeddingRecord {
    fn vector(&self) -> &[f32] {
        &self.vector
    }

    fn label_id(&self) -> u32 {
        self.label_id
    }
}

impl<V: AsRef<[f32]> + Sync> LabeledVector for (V, u32) {
    fn vector(&self) -> &[f32] {
        self.0.as_ref()
    }

    fn label_id(&self) -> u32 {
        self.1
    }
}

/// Heap entry ordered so that the *worst* candidate is the maximum:
/// lower similarity is worse, and among equal similarities the larger id.
/// Similarities are never NaN (queries and records have non-zero finite
/// norms), and `-0.0 == 0.0` here.
#[derive(Clone, Copy)]
struct Candidate(Neighbor);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .similarity
            .partial_cmp(&self.0.similarity)
            .unwrap_or(Ordering::Equal)
            .then(self.0.record_id.cmp(&other.0.record_id))
    }
}

fn check_query(c: &Collection, query: &[f32]) -> Result<f64> {
    validate_vector(|| "query".to_owned(), query, c.dimension())
}

/// The `min(k, live)` most similar live records, best first. Equal
/// similarities are ordered by ascending record id.
pub fn top_k(c: &Collection, query: &[f32], k: usize) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let query_norm_sq = check_query(c, query)?;
    Ok(scan_top_k(c, &kernel::widen(query), query_norm_sq, k))
}

fn scan_top_k(c: &Collection, query: &[f64], query_norm_sq: f64, k: usize) -> Vec<Neighbor> {
    let mut heap = BinaryHeap::with_capacity(k.min(c.len()) + 1);
    for r in c.live_slots() {
        let cand = Candidate(Neighbor {
            record_id: r.id,
            label_id: r.label_id,
            similarity: kernel::cosine(kernel::dot(query, r.vector), query_norm_sq, r.norm_sq),
        });
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(mut worst) = heap.peek_mut() {
            if cand < *worst {
                *worst = cand;
            }
        }
    }
    heap.into_sorted_vec().into_iter().map(|c| c.0).collect()
}

/// Tallies votes over an ordered neighbour list and applies the decision
/// rule: most votes, then largest summed similarity, then smallest label.
pub fn tally(neighbors: Vec<Neighbor>) -> Option<ClassificationResult> {
    let mut votes = BTreeMap::new();
    let mut summed = BTreeMap::new();
    for n in &neighbors {
        *votes.entry(n.label_id).or_insert(0usize) += 1;
        *summed.entry(n.label_id).or_insert(0.0f64) += n.similarity;
    }
    let mut best: Option<(u32, usize, f64)> = None;
    for (&label, &count) in &votes {
        let sum = summed[&label];
        let better = match best {
            None => true,
            Some((_, bc, bs)) => count > bc || (count == bc && sum > bs),
        };
        if better {
            best = Some((label, count, sum));
        }
    }
    best.map(|(predicted_label_id, ..)| ClassificationResult {
        predicted_label_id,
        neighbors,
        votes,
        summed_similarity: summed,
    })
}

pub fn classify(c: &Collection, query: &[f32], cfg: EngineConfig) -> Result<ClassificationResult> {
    let neighbors = top_k(c, query, cfg.k)?;
    tally(neighbors).ok_or_else(|| Error::EmptyCollection {
        name: c.name().to_owned(),
    })
}

/// Classifies every query in parallel; element `i` is exactly
/// `classify(c, &queries[i], cfg)`.
pub fn classify_batch<V>(c: &Collection, queries: &[V], cfg: EngineConfig) -> Vec<Result<ClassificationResult>>
where
    V: AsRef<[f32]> + Sync,
{
    queries.par_iter().map(|q| classify(c, q.as_ref(), cfg)).collect()
}

/// For every live record, how many correctly classified queries of its own
/// class retrieved it among their top-k neighbours.
pub fn neighbor_attribution<Q: LabeledVector>(
    c: &Collection,
    queries: &[Q],
    cfg: EngineConfig,
) -> Result<BTreeMap<u64, usize>> {
    neighbor_attribution_with(c, queries, cfg, AttributionRule::default())
}

pub fn neighbor_attribution_with<Q: LabeledVector>(
    c: &Collection,
    queries: &[Q],
    cfg: EngineConfig,
    rule: AttributionRule,
) -> Result<BTreeMap<u64, usize>> {
    let results: Vec<_> = queries
        .par_iter()
        .map(|q| classify(c, q.vector(), cfg))
        .collect();
    let mut counts: BTreeMap<u64, usize> = c.scan().map(|r| (r.id, 0)).collect();
    for (q, result) in queries.iter().zip(results) {
        let result = result?;
        let truth = q.label_id();
        let correct = result.predicted_label_id == truth;
        let credit_query = match rule {
            AttributionRule::CorrectAndMatching | AttributionRule::CorrectOnly => correct,
            AttributionRule::MatchingOnly => true,
        };
        if !credit_query {
            continue;
        }
        for n in &result.neighbors {
            let credit = match rule {
                AttributionRule::CorrectOnly => true,
                _ => n.label_id == truth,
            };
            if credit {
                *counts.get_mut(&n.record_id).expect("neighbor is live") += 1;
            }
        }
    }
    Ok(counts)
}
