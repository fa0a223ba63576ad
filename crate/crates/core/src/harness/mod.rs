//! Experimental protocols over the store and engine: plain accuracy,
//! class- and sample-incremental learning, dataset merging, and random or
//! most-valuable-feature removal. Each run yields a [`ProtocolReport`].

mod protocols;
mod report;
mod schedule;

pub use protocols::{
    evaluate_accuracy, merge_sets, random_removal_order, run_class_incremental, run_merge_consistency,
    run_mvf_removal, run_random_removal, run_sample_incremental, stratified_order, MergeInput, MergedSets,
    RemovalSchedule,
};
pub use report::{emit_report, parse_report, read_report, write_report, ClassAccuracy, ProtocolReport, ReportStep, CSV_HEADER};
pub use schedule::{run_schedule, Schedule, ScheduleKind};

use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::store::{validate_vector, Collection, EmbeddingRecord};

/// Labeled embeddings used as a support or test set.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub dimension: usize,
    pub labels: Vec<String>,
    pub items: Vec<EmbeddingRecord>,
}

impl LabeledSet {
    pub fn new(dimension: usize, labels: Vec<String>, items: Vec<EmbeddingRecord>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be at least 1"));
        }
        for (pos, item) in items.iter().enumerate() {
            let what = || format!("item {} (position {pos})", item.id);
            validate_vector(what, &item.vector, dimension)?;
            if item.label_id as usize >= labels.len() {
                return Err(Error::LabelInvalid {
                    what: what(),
                    label: item.label_id.to_string(),
                });
            }
        }
        Ok(Self {
            dimension,
            labels,
            items,
        })
    }

    pub fn from_collection(c: &Collection) -> Self {
        Self {
            dimension: c.dimension(),
            labels: c.labels().to_vec(),
            items: c.scan().map(|r| r.to_record()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Builds a fresh collection holding exactly these items.
    pub fn to_collection(&self, name: &str) -> Result<Collection> {
        let mut c = Collection::new(name, self.dimension, self.labels.clone())?;
        c.insert(self.items.clone())?;
        Ok(c)
    }

    pub fn filter(&self, mut keep: impl FnMut(&EmbeddingRecord) -> bool) -> Self {
        Self {
            dimension: self.dimension,
            labels: self.labels.clone(),
            items: self.items.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Item indices grouped by label id, each group in item order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.labels.len()];
        for (i, item) in self.items.iter().enumerate() {
            groups[item.label_id as usize].push(i);
        }
        groups
    }
}

/// Settings shared by all protocol runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub engine: EngineConfig,
    pub seed: u64,
    /// Also record per-class accuracy for every step.
    pub per_class: bool,
}


impl ProtocolConfig {
    pub fn with_k(k: usize) -> Result<Self> {
        Ok(Self {
            engine: EngineConfig::new(k)?,
            ..Self::default()
        })
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn per_class(mut self, on: bool) -> Self {
        self.per_class = on;
        self
    }
}
