use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::record::{validate_vector, EmbeddingRecord, RecordRef, MAX_SOURCE_TAG_BYTES};
use crate::error::{Error, Result};

/// Tombstones are compacted away once they outnumber live records by this
/// margin.
const COMPACTION_SLACK: usize = 1024;

/// A named, versioned set of labeled embeddings sharing one dimension and
/// one label vocabulary.
///
/// Records live in slot-major arrays. Deleting a record tombstones its slot;
/// the live index maps each live id to its slot and iterates in ascending id
/// order, which is the order [`Collection::scan`] yields.
#[derive(Debug, Clone)]
pub struct Collection {
    name: String,
    dimension: usize,
    labels: Vec<String>,
    generation: u64,
    slots: Slots,
    index: BTreeMap<u64, usize>,
}

#[derive(Debug, Clone, Default)]
struct Slots {
    ids: Vec<u64>,
    label_ids: Vec<u32>,
    norms: Vec<f64>,
    tags: Vec<Option<String>>,
    vectors: Vec<f32>,
    live: Vec<bool>,
}

impl Slots {
    fn len(&self) -> usize {
        self.ids.len()
    }

    fn push(&mut self, record: EmbeddingRecord, norm_sq: f64) -> usize {
        let slot = self.ids.len();
        self.ids.push(record.id);
        self.label_ids.push(record.label_id);
        self.norms.push(norm_sq);
        self.tags.push(record.source_tag);
        self.vectors.extend_from_slice(&record.vector);
        self.live.push(true);
        slot
    }
}

/// Outcome of a delete call. Ids that were not live are reported, never fatal.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DeleteOutcome {
    pub deleted: usize,
    pub not_live: Vec<u64>,
}

/// Record selector used by erasure requests: `label=X` or `source_tag=Y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicate {
    Label(String),
    SourceTag(String),
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some(("label", v)) => Ok(Predicate::Label(v.to_owned())),
            Some(("source_tag", v)) => Ok(Predicate::SourceTag(v.to_owned())),
            _ => Err(Error::invalid(
                "predicate",
                format!("expected `label=X` or `source_tag=Y`, got {s:?}"),
            )),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Label(v) => write!(f, "label={v}"),
            Predicate::SourceTag(v) => write!(f, "source_tag={v}"),
        }
    }
}

impl Collection {
    pub fn new(name: impl Into<String>, dimension: usize, labels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be at least 1"));
        }
        if labels.is_empty() {
            return Err(Error::invalid("labels", "vocabulary must not be empty"));
        }
        if u32::try_from(labels.len()).is_err() {
            return Err(Error::invalid("labels", "vocabulary exceeds u32 range"));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::invalid("labels", format!("duplicate label {label:?}")));
            }
        }
        Ok(Self {
            name,
            dimension,
            labels,
            generation: 0,
            slots: Slots::default(),
            index: BTreeMap::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_name(&self, label_id: u32) -> Option<&str> {
        self.labels.get(label_id as usize).map(String::as_str)
    }

    pub fn label_id(&self, name: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == name).map(|i| i as u32)
    }

    /// Mutation counter; strictly increases on every successful mutation.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Number of live records.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: u64) -> Option<RecordRef<'_>> {
        self.index.get(&id).map(|&slot| self.slot_ref(slot))
    }

    /// Live records in ascending id order.
    pub fn scan(&self) -> impl ExactSizeIterator<Item = RecordRef<'_>> + '_ {
        self.index.values().map(move |&slot| self.slot_ref(slot))
    }

    /// Live records in storage order. Cheaper than [`Collection::scan`] and
    /// used by the retrieval kernel, which does its own ordering.
    pub(crate) fn live_slots(&self) -> impl Iterator<Item = RecordRef<'_>> + '_ {
        (0..self.slots.len())
            .filter(move |&slot| self.slots.live[slot])
            .map(move |slot| self.slot_ref(slot))
    }

    /// Inserts a batch atomically: either every record is stored or none is.
    pub fn insert(&mut self, records: Vec<EmbeddingRecord>) -> Result<usize> {
        if records.is_empty() {
            return Ok(0);
        }
        let mut norms = Vec::with_capacity(records.len());
        let mut batch_ids = HashSet::with_capacity(records.len());
        for (pos, record) in records.iter().enumerate() {
            let what = || format!("record {} (batch position {pos})", record.id);
            norms.push(validate_vector(what, &record.vector, self.dimension)?);
            if record.label_id as usize >= self.labels.len() {
                return Err(Error::LabelInvalid {
                    what: what(),
                    label: record.label_id.to_string(),
                });
            }
            if let Some(tag) = &record.source_tag {
                if tag.len() > MAX_SOURCE_TAG_BYTES {
                    return Err(Error::invalid(
                        "source_tag",
                        format!("{} is {} bytes, limit {MAX_SOURCE_TAG_BYTES}", what(), tag.len()),
                    ));
                }
            }
            if self.index.contains_key(&record.id) || !batch_ids.insert(record.id) {
                return Err(Error::DuplicateId { id: record.id });
            }
        }
        let count = records.len();
        self.slots.vectors.reserve(count * self.dimension);
        for (mut record, norm) in records.into_iter().zip(norms) {
            if record.source_tag.as_deref() == Some("") {
                record.source_tag = None;
            }
            let id = record.id;
            let slot = self.slots.push(record, norm);
            self.index.insert(id, slot);
        }
        self.generation += 1;
        Ok(count)
    }

    pub fn delete(&mut self, ids: &[u64]) -> DeleteOutcome {
        let mut outcome = DeleteOutcome::default();
        for &id in ids {
            match self.index.remove(&id) {
                Some(slot) => {
                    self.slots.live[slot] = false;
                    outcome.deleted += 1;
                }
                None => outcome.not_live.push(id),
            }
        }
        if outcome.deleted > 0 {
            self.generation += 1;
            if self.tombstones() > self.len().max(COMPACTION_SLACK) {
                self.compact();
            }
        }
        outcome
    }

    /// Changes the label of a live record and returns its previous label.
    /// Relabeling to the current label still counts as a mutation.
    pub fn relabel(&mut self, id: u64, new_label_id: u32) -> Result<u32> {
        let slot = *self.index.get(&id).ok_or(Error::UnknownId { id })?;
        if new_label_id as usize >= self.labels.len() {
            return Err(Error::LabelInvalid {
                what: format!("relabel of record {id}"),
                label: new_label_id.to_string(),
            });
        }
        let previous = std::mem::replace(&mut self.slots.label_ids[slot], new_label_id);
        self.generation += 1;
        Ok(previous)
    }

    /// Ids of live records matching `predicate`, ascending. A label name
    /// absent from the vocabulary matches nothing.
    pub fn select(&self, predicate: &Predicate) -> Vec<u64> {
        match predicate {
            Predicate::Label(name) => match self.label_id(name) {
                Some(label) => self.scan().filter(|r| r.label_id == label).map(|r| r.id).collect(),
                None => Vec::new(),
            },
            Predicate::SourceTag(tag) => self
                .scan()
                .filter(|r| r.source_tag == Some(tag.as_str()))
                .map(|r| r.id)
                .collect(),
        }
    }

    pub fn tombstones(&self) -> usize {
        self.slots.len() - self.index.len()
    }

    /// Drops tombstoned slots and lays live records out in ascending id
    /// order. Contents and generation are unchanged.
    pub fn compact(&mut self) {
        let mut slots = Slots::default();
        slots.vectors.reserve(self.len() * self.dimension);
        let mut index = BTreeMap::new();
        for (&id, &slot) in &self.index {
            let record = self.slot_ref(slot).to_record();
            let new_slot = slots.push(record, self.slots.norms[slot]);
            index.insert(id, new_slot);
        }
        self.slots = slots;
        self.index = index;
    }

    pub(crate) fn set_generation(&mut self, generation: u64) {
        self.generation = generation;
    }

    /// Per-label live record counts, indexed by label id.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for &slot in self.index.values() {
            counts[self.slots.label_ids[slot] as usize] += 1;
        }
        counts
    }

    fn slot_ref(&self, slot: usize) -> RecordRef<'_> {
        let start = slot * self.dimension;
        RecordRef {
            id: self.slots.ids[slot],
            label_id: self.slots.label_ids[slot],
            vector: &self.slots.vectors[start..start + self.dimension],
            source_tag: self.slots.tags[slot].as_deref(),
            norm_sq: self.slots.norms[slot],
        }
    }
}

/// A set of collections addressed by unique name.
#[derive(Debug, Default)]
pub struct Catalog {
    collections: HashMap<String, Collection>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_collection(
        &mut self,
        name: &str,
        dimension: usize,
        labels: Vec<String>,
    ) -> Result<&mut Collection> {
        if self.collections.contains_key(name) {
            return Err(Error::DuplicateCollection { name: name.to_owned() });
        }
        let collection = Collection::new(name, dimension, labels)?;
        Ok(self.collections.entry(name.to_owned()).or_insert(collection))
    }

    pub fn adopt(&mut self, collection: Collection) -> Result<&mut Collection> {
        let name = collection.name().to_owned();
        if self.collections.contains_key(&name) {
            return Err(Error::DuplicateCollection { name });
        }
        Ok(self.collections.entry(name).or_insert(collection))
    }

    pub fn get(&self, name: &str) -> Result<&Collection> {
        self.collections
            .get(name)
            .ok_or_else(|| Error::UnknownCollection { name: name.to_owned() })
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Collection> {
        self.collections
            .get_mut(name)
            .ok_or_else(|| Error::UnknownCollection { name: name.to_owned() })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.collections.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn rec(id: u64, label: u32, v: &[f32]) -> EmbeddingRecord {
        EmbeddingRecord::new(id, label, v.to_vec())
    }

    fn snapshot(c: &Collection) -> Vec<EmbeddingRecord> {
        c.scan().map(|r| r.to_record()).collect()
    }

    #[test]
    fn create_validates_arguments() {
        let names: Vec<String> = (0..10).map(|i| format!("class{i}")).collect();
        let c = Collection::new("cifar10", 1024, names).unwrap();
        assert_eq!(c.dimension(), 1024);
        assert_eq!(c.generation(), 0);
        assert!(c.is_empty());

        assert!(Collection::new("x", 1, labels(&["a"])).is_ok());
        assert_eq!(Collection::new("x", 0, labels(&["a"])).unwrap_err().code(), "INVALID_ARGUMENT");
        assert!(Collection::new("x", 4, vec![]).is_err());
        assert!(Collection::new("x", 4, labels(&["a", "a"])).is_err());
    }

    #[test]
    fn catalog_rejects_duplicate_names() {
        let mut catalog = Catalog::new();
        catalog.create_collection("x", 2, labels(&["a"])).unwrap();
        let err = catalog.create_collection("x", 3, labels(&["b"])).unwrap_err();
        assert_eq!(err.code(), "DUPLICATE_COLLECTION");
        assert_eq!(catalog.get("y").unwrap_err().code(), "UNKNOWN_COLLECTION");
    }

    #[test]
    fn insert_is_all_or_nothing() {
        let mut c = Collection::new("x", 2, labels(&["a", "b"])).unwrap();
        c.insert(vec![rec(1, 0, &[1.0, 0.0])]).unwrap();
        let before = snapshot(&c);
        let generation = c.generation();

        let bad_batches = [
            (vec![rec(2, 0, &[1.0, 0.0]), rec(3, 0, &[f32::NAN, 0.0])], "NON_FINITE"),
            (vec![rec(2, 0, &[1.0, 0.0]), rec(3, 0, &[1.0])], "DIMENSION_MISMATCH"),
            (vec![rec(2, 0, &[0.0, 0.0])], "ZERO_NORM"),
            (vec![rec(2, 2, &[1.0, 1.0])], "LABEL_INVALID"),
            (vec![rec(1, 0, &[1.0, 1.0])], "DUPLICATE_ID"),
            (vec![rec(5, 0, &[1.0, 1.0]), rec(5, 1, &[1.0, 2.0])], "DUPLICATE_ID"),
            (vec![rec(6, 0, &[f32::INFINITY, 1.0])], "NON_FINITE"),
        ];
        for (batch, code) in bad_batches {
            let err = c.insert(batch).unwrap_err();
            assert_eq!(err.code(), code, "{err}");
            assert_eq!(snapshot(&c), before);
            assert_eq!(c.generation(), generation);
        }
    }

    #[test]
    fn error_names_first_offending_record() {
        let mut c = Collection::new("x", 2, labels(&["a"])).unwrap();
        let err = c
            .insert(vec![rec(10, 0, &[1.0, 0.0]), rec(11, 0, &[f32::NAN, 0.0]), rec(12, 0, &[0.0, 0.0])])
            .unwrap_err();
        assert!(err.to_string().contains("record 11 (batch position 1)"), "{err}");
    }

    #[test]
    fn empty_insert_keeps_generation() {
        let mut c = Collection::new("x", 2, labels(&["a"])).unwrap();
        assert_eq!(c.insert(vec![]).unwrap(), 0);
        assert_eq!(c.generation(), 0);
    }

    #[test]
    fn delete_counts_and_is_idempotent() {
        let mut c = Collection::new("x", 1, labels(&["a"])).unwrap();
        c.insert(vec![rec(1, 0, &[1.0]), rec(2, 0, &[2.0]), rec(3, 0, &[3.0])]).unwrap();
        let g = c.generation();
        let out = c.delete(&[2]);
        assert_eq!(out.deleted, 1);
        assert_eq!(c.len(), 2);
        assert_eq!(c.generation(), g + 1);
        let out = c.delete(&[2, 99]);
        assert_eq!(out.deleted, 0);
        assert_eq!(out.not_live, vec![2, 99]);
        assert_eq!(c.generation(), g + 1);
    }

    #[test]
    fn deleted_id_can_be_reinserted() {
        let mut c = Collection::new("x", 1, labels(&["a", "b"])).unwrap();
        c.insert(vec![rec(1, 0, &[1.0])]).unwrap();
        c.delete(&[1]);
        c.insert(vec![rec(1, 1, &[-1.0])]).unwrap();
        let r = c.get(1).unwrap();
        assert_eq!(r.label_id, 1);
        assert_eq!(r.vector, &[-1.0]);
        assert_eq!(c.tombstones(), 1);
    }

    #[test]
    fn relabel_semantics() {
        let mut c = Collection::new("x", 1, labels(&["a", "b"])).unwrap();
        c.insert(vec![rec(7, 0, &[1.0])]).unwrap();
        let g = c.generation();
        assert_eq!(c.relabel(7, 1).unwrap(), 0);
        assert_eq!(c.generation(), g + 1);
        assert_eq!(c.relabel(7, 1).unwrap(), 1);
        assert_eq!(c.generation(), g + 2);
        assert_eq!(c.get(7).unwrap().vector, &[1.0]);
        assert_eq!(c.relabel(8, 0).unwrap_err().code(), "UNKNOWN_ID");
        assert_eq!(c.relabel(7, 2).unwrap_err().code(), "LABEL_INVALID");
        assert_eq!(c.generation(), g + 2);
    }

    #[test]
    fn scan_is_ascending_by_id() {
        let mut c = Collection::new("x", 1, labels(&["a"])).unwrap();
        assert_eq!(c.scan().count(), 0);
        c.insert(vec![rec(3, 0, &[1.0]), rec(1, 0, &[1.0]), rec(2, 0, &[1.0])]).unwrap();
        let ids: Vec<u64> = c.scan().map(|r| r.id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn compaction_preserves_contents() {
        let mut c = Collection::new("x", 2, labels(&["a", "b"])).unwrap();
        let records: Vec<_> = (0..3000u64)
            .map(|i| rec(i, (i % 2) as u32, &[i as f32 + 1.0, 1.0]))
            .collect();
        c.insert(records).unwrap();
        let doomed: Vec<u64> = (0..2500).collect();
        c.delete(&doomed);
        assert_eq!(c.tombstones(), 0, "auto-compaction should have run");
        assert_eq!(c.len(), 500);
        let ids: Vec<u64> = c.scan().map(|r| r.id).collect();
        assert_eq!(ids, (2500..3000).collect::<Vec<_>>());
        assert_eq!(c.get(2999).unwrap().vector, &[3000.0, 1.0]);
    }

    #[test]
    fn predicates_select_matching_ids() {
        let mut c = Collection::new("x", 1, labels(&["a", "b"])).unwrap();
        c.insert(vec![
            rec(1, 0, &[1.0]).with_source_tag("p"),
            rec(2, 1, &[1.0]).with_source_tag("m"),
            rec(3, 1, &[1.0]),
        ])
        .unwrap();
        assert_eq!(c.select(&"label=b".parse().unwrap()), vec![2, 3]);
        assert_eq!(c.select(&"source_tag=p".parse().unwrap()), vec![1]);
        assert!(c.select(&"label=zzz".parse().unwrap()).is_empty());
        assert!("colour=red".parse::<Predicate>().is_err());
        assert_eq!(Predicate::Label("b".into()).to_string(), "label=b");
    }
}
