//! Reading back the CSV written by `knnvault classify`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use knnvault::{ClassificationResult, Neighbor};

use crate::cli::CLASSIFY_HEADER;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyRow {
    pub query_id: u64,
    pub true_label_id: u32,
    /// `Err` carries the error column verbatim.
    pub outcome: Result<ClassificationResult, String>,
}

fn list<T: FromStr>(field: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|s| s.parse::<T>().with_context(|| format!("bad list item {s:?}")))
        .collect()
}

fn map<V: FromStr>(field: &str) -> Result<BTreeMap<u32, V>>
where
    V::Err: std::error::Error + Send + Sync + 'static,
{
    let mut out = BTreeMap::new();
    for item in field.split(';').filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once(':').ok_or_else(|| anyhow!("bad map item {item:?}"))?;
        out.insert(k.parse()?, v.parse().with_context(|| format!("bad map value {v:?}"))?);
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<Vec<ClassifyRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(CLASSIFY_HEADER) {
        bail!("unexpected header {header:?}");
    }
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let f = |i: usize| record.get(i).unwrap_or("");
        let row = (|| -> Result<ClassifyRow> {
            let query_id = f(0).parse()?;
            let true_label_id = f(1).parse()?;
            if !f(9).is_empty() {
                return Ok(ClassifyRow {
                    query_id,
                    true_label_id,
                    outcome: Err(f(9).to_owned()),
                });
            }
            let ids: Vec<u64> = list(f(6))?;
            let labels: Vec<u32> = list(f(7))?;
            let sims: Vec<f64> = list(f(8))?;
            if ids.len() != labels.len() || ids.len() != sims.len() {
                bail!("neighbour columns differ in length");
            }
            let neighbors = ids
                .into_iter()
                .zip(labels)
                .zip(sims)
                .map(|((record_id, label_id), similarity)| Neighbor {
                    record_id,
                    label_id,
                    similarity,
                })
                .collect();
            Ok(ClassifyRow {
                query_id,
                true_label_id,
                outcome: Ok(ClassificationResult {
                    predicted_label_id: f(2).parse()?,
                    neighbors,
                    votes: map(f(4))?,
                    summed_similarity: map(f(5))?,
                }),
            })
        })()
        .with_context(|| format!("row {}", n + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read(path: &Path) -> Result<Vec<ClassifyRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text)
}
