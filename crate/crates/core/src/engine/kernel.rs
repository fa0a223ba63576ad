//! Double-precision accumulation kernels shared by the store and engine.
//!
//! Sums run strictly left to right so results are reproducible bit for bit
//! across platforms and thread counts.

/// Squared Euclidean norm.
pub fn norm_sq(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum()
}

pub fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn dot(query: &[f64], v: &[f32]) -> f64 {
    debug_assert_eq!(query.len(), v.len());
    query.iter().zip(v).map(|(&q, &x)| q * x as f64).sum()
}

/// Cosine similarity from a dot product and squared norms, clamped to
/// [-1, 1] against rounding overshoot.
///
/// Taking one square root of the product keeps self-similarity exact:
/// for `q == v` the dot equals both squared norms and `sqrt(x * x) == x`.
pub fn cosine(dot: f64, query_norm_sq: f64, norm_sq: f64) -> f64 {
    (dot / (query_norm_sq * norm_sq).sqrt()).clamp(-1.0, 1.0)
}
