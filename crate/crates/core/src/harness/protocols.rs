use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{ClassAccuracy, ProtocolReport, ReportStep, ALL_CLASSES};
use super::{LabeledSet, ProtocolConfig};
use crate::engine::{classify_batch, neighbor_attribution_with, AttributionRule, EngineConfig};
use crate::error::{Error, Result};
use crate::store::{Collection, EmbeddingRecord};

struct Evaluation {
    accuracy: f64,
    per_class: Vec<ClassAccuracy>,
}

/// Classifies every test item against `c`. An empty collection classifies
/// nothing correctly.
fn evaluate(c: &Collection, test: &[EmbeddingRecord], engine: EngineConfig, per_class: bool) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::invalid("test", "test set is empty"));
    }
    let mut correct = vec![0usize; c.labels().len()];
    let mut totals = vec![0usize; c.labels().len()];
    if !c.is_empty() {
        let queries: Vec<&[f32]> = test.iter().map(|t| t.vector.as_slice()).collect();
        for (t, result) in test.iter().zip(classify_batch(c, &queries, engine)) {
            let result = result?;
            totals[t.label_id as usize] += 1;
            if result.predicted_label_id == t.label_id {
                correct[t.label_id as usize] += 1;
            }
        }
    } else {
        for t in test {
            totals[t.label_id as usize] += 1;
        }
    }
    let accuracy = correct.iter().sum::<usize>() as f64 / test.len() as f64;
    let per_class = if per_class {
        totals
            .iter()
            .zip(&correct)
            .enumerate()
            .filter(|(_, (&n, _))| n > 0)
            .map(|(label, (&n, &ok))| ClassAccuracy {
                label: c.labels()[label].clone(),
                size: n,
                accuracy: ok as f64 / n as f64,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Evaluation { accuracy, per_class })
}

fn check_compatible(support: &LabeledSet, test: &LabeledSet) -> Result<()> {
    if support.dimension != test.dimension {
        return Err(Error::DimensionMismatch {
            what: "test set".into(),
            expected: support.dimension,
            actual: test.dimension,
        });
    }
    if support.labels != test.labels {
        return Err(Error::invalid("labels", "support and test vocabularies differ"));
    }
    Ok(())
}

fn class_sizes(c: &Collection, only: Option<&[u32]>) -> Vec<(String, usize)> {
    let counts = c.label_counts();
    match only {
        Some(order) => order
            .iter()
            .map(|&l| (c.labels()[l as usize].clone(), counts[l as usize]))
            .collect(),
        None => c.labels().iter().cloned().zip(counts).collect(),
    }
}

fn step_row(
    step: usize,
    c: &Collection,
    delta: usize,
    sizes: Vec<(String, usize)>,
    eval: Evaluation,
    touched_ids: Vec<u64>,
) -> ReportStep {
    ReportStep {
        step,
        support_size: c.len(),
        removed_or_added: delta,
        scope: ALL_CLASSES.into(),
        class_sizes: sizes,
        accuracy: eval.accuracy,
        generation: c.generation(),
        per_class: eval.per_class,
        touched_ids,
    }
}

/// Fraction of test items whose prediction equals their true label.
pub fn evaluate_accuracy(support: &LabeledSet, test: &LabeledSet, cfg: EngineConfig) -> Result<f64> {
    check_compatible(support, test)?;
    let c = support.to_collection("support")?;
    if c.is_empty() {
        return Err(Error::EmptyCollection { name: "support".into() });
    }
    Ok(evaluate(&c, &test.items, cfg, false)?.accuracy)
}

/// Grows the label space one class at a time. Step `t` holds the support
/// and test items of the first `t` classes of `class_order` (native label
/// order when `None`).
pub fn run_class_incremental(
    support: &LabeledSet,
    test: &LabeledSet,
    class_order: Option<&[u32]>,
    cfg: ProtocolConfig,
) -> Result<ProtocolReport> {
    check_compatible(support, test)?;
    let n = support.labels.len();
    let order: Vec<u32> = match class_order {
        Some(order) => order.to_vec(),
        None => (0..n as u32).collect(),
    };
    let mut seen = BTreeSet::new();
    for &l in &order {
        if l as usize >= n {
            return Err(Error::LabelInvalid {
                what: "class order".into(),
                label: l.to_string(),
            });
        }
        if !seen.insert(l) {
            return Err(Error::invalid("class_order", format!("label {l} listed twice")));
        }
    }
    if order.len() != n {
        return Err(Error::invalid("class_order", "must be a permutation of the label vocabulary"));
    }

    let by_class = support.indices_by_class();
    let mut c = Collection::new("class-incremental", support.dimension, support.labels.clone())?;
    let mut report = ProtocolReport::new("class-incremental", cfg.engine.k, cfg.seed);
    let mut active = vec![false; n];
    for (t, &label) in order.iter().enumerate() {
        let batch: Vec<EmbeddingRecord> = by_class[label as usize]
            .iter()
            .map(|&i| support.items[i].clone())
            .collect();
        let added = c.insert(batch)?;
        active[label as usize] = true;
        let subset: Vec<EmbeddingRecord> = test
            .items
            .iter()
            .filter(|r| active[r.label_id as usize])
            .cloned()
            .collect();
        if subset.is_empty() {
            return Err(Error::invalid(
                "test",
                format!("no test items for the first {} classes", t + 1),
            ));
        }
        let eval = evaluate(&c, &subset, cfg.engine, cfg.per_class)?;
        let sizes = class_sizes(&c, Some(&order[..=t]));
        report.steps.push(step_row(t + 1, &c, added, sizes, eval, Vec::new()));
    }
    Ok(report)
}

/// Seeded per-class orderings of support item indices. One RNG stream
/// shuffles the classes in label order, so the result depends only on the
/// set and the seed.
pub fn stratified_order(support: &LabeledSet, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = support.indices_by_class();
    for g in &mut groups {
        g.sort_by_key(|&i| support.items[i].id);
        g.shuffle(&mut rng);
    }
    groups
}

/// Grows the support with nested, per-class sample prefixes: step `i` holds
/// the first `counts[i]` items of every class under [`stratified_order`].
pub fn run_sample_incremental(
    support: &LabeledSet,
    test: &LabeledSet,
    counts: &[usize],
    cfg: ProtocolConfig,
) -> Result<ProtocolReport> {
    check_compatible(support, test)?;
    if counts.is_empty() {
        return Err(Error::invalid("steps", "sample counts must not be empty"));
    }
    if counts[0] == 0 || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("steps", "sample counts must be positive and strictly ascending"));
    }
    let order = stratified_order(support, cfg.seed);
    let mut c = Collection::new("sample-incremental", support.dimension, support.labels.clone())?;
    let mut report = ProtocolReport::new("sample-incremental", cfg.engine.k, cfg.seed);
    let mut taken = vec![0usize; order.len()];
    for (i, &want) in counts.iter().enumerate() {
        let mut batch = Vec::new();
        for (label, group) in order.iter().enumerate() {
            let target = want.min(group.len());
            if target < want && !group.is_empty() {
                report.notes.push(format!(
                    "step {}: class {} clamped to {target} of {want} requested samples",
                    i + 1,
                    support.labels[label]
                ));
            }
            batch.extend(group[taken[label]..target].iter().map(|&j| support.items[j].clone()));
            taken[label] = target;
        }
        let added = c.insert(batch)?;
        let eval = evaluate(&c, &test.items, cfg.engine, cfg.per_class)?;
        let sizes = class_sizes(&c, None);
        report.steps.push(step_row(i + 1, &c, added, sizes, eval, Vec::new()));
    }
    Ok(report)
}

/// Removal schedule: cumulative fractions of the initial support to remove,
/// one step each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalSchedule {
    pub fractions: Vec<f64>,
    /// Remove the fraction from every class separately instead of from the
    /// pooled support.
    #[serde(default)]
    pub stratified: bool,
    /// Permit a class to lose its last record before the final step.
    #[serde(default)]
    pub allow_class_exhaustion: bool,
}

impl RemovalSchedule {
    pub fn uniform(fractions: Vec<f64>) -> Self {
        Self {
            fractions,
            stratified: false,
            allow_class_exhaustion: false,
        }
    }
}

/// The seeded sequence in which records are removed. Unstratified: one
/// permutation of all support ids. Stratified: one permutation per class.
pub fn random_removal_order(support: &LabeledSet, seed: u64, stratified: bool) -> Vec<Vec<u64>> {
    if stratified {
        stratified_order(support, seed)
            .into_iter()
            .map(|g| g.into_iter().map(|i| support.items[i].id).collect())
            .collect()
    } else {
        let mut ids: Vec<u64> = support.items.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        vec![ids]
    }
}

fn removal_target(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round() as usize
}

/// Removes seeded random records in nested steps and measures accuracy on
/// the fixed test set after each step.
pub fn run_random_removal(
    support: &LabeledSet,
    test: &LabeledSet,
    schedule: &RemovalSchedule,
    cfg: ProtocolConfig,
) -> Result<ProtocolReport> {
    check_compatible(support, test)?;
    if schedule.fractions.is_empty() {
        return Err(Error::invalid("steps", "removal schedule must not be empty"));
    }
    for &f in &schedule.fractions {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::invalid(
                "steps",
                format!("removal fraction {f} exceeds the live support"),
            ));
        }
    }
    let pools = random_removal_order(support, cfg.seed, schedule.stratified);
    let totals: Vec<Vec<usize>> = schedule
        .fractions
        .iter()
        .map(|&f| pools.iter().map(|p| removal_target(f, p.len())).collect())
        .collect();
    for (i, w) in totals.windows(2).enumerate() {
        let (a, b): (usize, usize) = (w[0].iter().sum(), w[1].iter().sum());
        if b <= a {
            return Err(Error::invalid(
                "steps",
                format!("step {} does not shrink the support ({a} then {b} removed)", i + 2),
            ));
        }
    }

    let name = if schedule.stratified { "random-removal-stratified" } else { "random-removal" };
    let mut c = support.to_collection(name)?;
    let mut report = ProtocolReport::new(name, cfg.engine.k, cfg.seed);
    let mut removed = vec![0usize; pools.len()];
    let last = totals.len() - 1;
    for (step, target) in totals.iter().enumerate() {
        let mut ids = Vec::new();
        for (p, pool) in pools.iter().enumerate() {
            ids.extend_from_slice(&pool[removed[p]..target[p]]);
            removed[p] = target[p];
        }
        let before = c.label_counts();
        c.delete(&ids);
        let after = c.label_counts();
        for (label, (&b, &a)) in before.iter().zip(&after).enumerate() {
            if b > 0 && a == 0 {
                let msg = format!("step {}: class {} exhausted", step + 1, support.labels[label]);
                if step != last && !schedule.allow_class_exhaustion {
                    return Err(Error::invalid("steps", msg));
                }
                report.notes.push(msg);
            }
        }
        let eval = evaluate(&c, &test.items, cfg.engine, cfg.per_class)?;
        let sizes = class_sizes(&c, None);
        let count = ids.len();
        report.steps.push(step_row(step + 1, &c, count, sizes, eval, ids));
    }
    Ok(report)
}

/// Per class, the live record with the highest attribution count; ties and
/// all-zero classes resolve to the smallest id.
fn most_valuable(c: &Collection, counts: &BTreeMap<u64, usize>) -> BTreeMap<u32, u64> {
    let mut best: BTreeMap<u32, (usize, u64)> = BTreeMap::new();
    // scan is ascending by id, so only a strictly larger count replaces
    for r in c.scan() {
        let n = counts[&r.id];
        best.entry(r.label_id)
            .and_modify(|b| {
                if n > b.0 {
                    *b = (n, r.id);
                }
            })
            .or_insert((n, r.id));
    }
    best.into_iter().map(|(l, (_, id))| (l, id)).collect()
}

/// Repeatedly removes each class's most valuable feature: the record that
/// most often helps correctly classify the fixed test set. Attribution is
/// recomputed on the current support every round. Step 0 is the baseline.
pub fn run_mvf_removal(
    support: &LabeledSet,
    test: &LabeledSet,
    rounds: usize,
    rule: AttributionRule,
    cfg: ProtocolConfig,
) -> Result<ProtocolReport> {
    check_compatible(support, test)?;
    if rounds == 0 {
        return Err(Error::invalid("rounds", "must be at least 1"));
    }
    if test.is_empty() {
        return Err(Error::invalid("test", "test set is empty"));
    }
    let mut c = support.to_collection("mvf-removal")?;
    let mut report = ProtocolReport::new("mvf-removal", cfg.engine.k, cfg.seed);
    let present: Vec<bool> = c.label_counts().iter().map(|&n| n > 0).collect();
    let eval = evaluate(&c, &test.items, cfg.engine, cfg.per_class)?;
    report.steps.push(step_row(0, &c, 0, class_sizes(&c, None), eval, Vec::new()));

    for round in 1..=rounds {
        if c.is_empty() {
            report.notes.push(format!("round {round}: support exhausted, stopping"));
            break;
        }
        let counts = neighbor_attribution_with(&c, &test.items, cfg.engine, rule)?;
        let chosen = most_valuable(&c, &counts);
        for (label, _) in present.iter().enumerate().filter(|(l, &p)| p && !chosen.contains_key(&(*l as u32))) {
            report
                .notes
                .push(format!("round {round}: class {} exhausted, skipped", support.labels[label]));
        }
        let ids: Vec<u64> = chosen.values().copied().collect();
        c.delete(&ids);
        let eval = evaluate(&c, &test.items, cfg.engine, cfg.per_class)?;
        let sizes = class_sizes(&c, None);
        report.steps.push(step_row(round, &c, ids.len(), sizes, eval, ids));
    }
    Ok(report)
}

/// One dataset taking part in a merge run.
#[derive(Debug, Clone)]
pub struct MergeInput {
    pub tag: String,
    pub support: LabeledSet,
    pub test: LabeledSet,
}

/// The union of several datasets under namespaced labels (`tag/label`).
#[derive(Debug, Clone)]
pub struct MergedSets {
    pub support: LabeledSet,
    /// Per input, its test set remapped into the union label space.
    pub tests: Vec<LabeledSet>,
    /// Per input, the offset of its first label in the union vocabulary.
    pub label_offsets: Vec<u32>,
}

/// Builds the union support. Records get fresh sequential ids, dataset by
/// dataset in ascending original id (so id tie-breaks keep their relative
/// order), and carry their dataset tag as source tag.
pub fn merge_sets(inputs: &[MergeInput]) -> Result<MergedSets> {
    let Some(first) = inputs.first() else {
        return Err(Error::invalid("datasets", "at least one dataset is required"));
    };
    let dimension = first.support.dimension;
    let mut labels = Vec::new();
    let mut seen = BTreeSet::new();
    let mut offsets = Vec::new();
    for input in inputs {
        check_compatible(&input.support, &input.test)?;
        if input.support.dimension != dimension {
            return Err(Error::DimensionMismatch {
                what: format!("dataset {}", input.tag),
                expected: dimension,
                actual: input.support.dimension,
            });
        }
        offsets.push(labels.len() as u32);
        for l in &input.support.labels {
            let namespaced = format!("{}/{l}", input.tag);
            if !seen.insert(namespaced.clone()) {
                return Err(Error::invalid("labels", format!("label collision on {namespaced:?}")));
            }
            labels.push(namespaced);
        }
    }
    let mut next_id = 0u64;
    let mut items = Vec::new();
    let mut tests = Vec::new();
    for (input, &offset) in inputs.iter().zip(&offsets) {
        let mut ordered: Vec<&EmbeddingRecord> = input.support.items.iter().collect();
        ordered.sort_by_key(|r| r.id);
        for r in ordered {
            items.push(
                EmbeddingRecord::new(next_id, r.label_id + offset, r.vector.clone()).with_source_tag(input.tag.clone()),
            );
            next_id += 1;
        }
        let remapped = input
            .test
            .items
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.label_id += offset;
                r
            })
            .collect();
        tests.push(LabeledSet {
            dimension,
            labels: labels.clone(),
            items: remapped,
        });
    }
    // earlier test sets were built before later labels existed
    for t in &mut tests {
        t.labels = labels.clone();
    }
    Ok(MergedSets {
        support: LabeledSet {
            dimension,
            labels,
            items,
        },
        tests,
        label_offsets: offsets,
    })
}

/// Accuracy of each dataset on its own, then on the union support with the
/// union label space. Steps `1..=n` are `isolated:<tag>`, steps
/// `n+1..=2n` are `merged:<tag>`. Datasets without test items are merged
/// but not scored.
pub fn run_merge_consistency(inputs: &[MergeInput], cfg: ProtocolConfig) -> Result<ProtocolReport> {
    let merged = merge_sets(inputs)?;
    let mut report = ProtocolReport::new("merge", cfg.engine.k, cfg.seed);
    let scored: Vec<usize> = (0..inputs.len()).filter(|&i| !inputs[i].test.is_empty()).collect();
    for input in inputs.iter().filter(|d| d.test.is_empty()) {
        report.notes.push(format!("dataset {} has no test items, not scored", input.tag));
    }
    let mut step = 0;
    for &i in &scored {
        let input = &inputs[i];
        let c = input.support.to_collection(&input.tag)?;
        let eval = evaluate(&c, &input.test.items, cfg.engine, cfg.per_class)?;
        step += 1;
        let mut row = step_row(step, &c, c.len(), class_sizes(&c, None), eval, Vec::new());
        row.scope = format!("isolated:{}", input.tag);
        report.steps.push(row);
    }
    let c = merged.support.to_collection("merged")?;
    for &i in &scored {
        let eval = evaluate(&c, &merged.tests[i].items, cfg.engine, cfg.per_class)?;
        step += 1;
        let mut row = step_row(step, &c, c.len(), class_sizes(&c, None), eval, Vec::new());
        row.scope = format!("merged:{}", inputs[i].tag);
        report.steps.push(row);
    }
    Ok(report)
}
