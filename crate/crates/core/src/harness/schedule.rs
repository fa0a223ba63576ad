//! JSON schedule configs driving protocol runs.
//!
//! ```json
//! {"kind": "sample-incremental", "steps": [1, 2, 5, 10], "seed": 7, "k": 10}
//! {"kind": "random-removal", "steps": [0.0, 0.5, 0.9], "seed": 1}
//! {"kind": "mvf-removal", "rounds": 3}
//! {"kind": "class-incremental", "steps": ["cat", "dog"]}
//! {"kind": "merge"}
//! ```

use serde::{Deserialize, Serialize};

use super::protocols::{
    run_class_incremental, run_merge_consistency, run_mvf_removal, run_random_removal, run_sample_incremental,
    MergeInput, RemovalSchedule,
};
use super::{ProtocolConfig, ProtocolReport};
use crate::engine::{AttributionRule, EngineConfig, DEFAULT_K};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `steps` is the class order by label name; empty means native order.
    ClassIncremental {
        #[serde(default)]
        steps: Vec<String>,
    },
    /// `steps` are per-class sample counts.
    SampleIncremental { steps: Vec<usize> },
    /// `steps` are cumulative fractions of the support to remove.
    RandomRemoval {
        steps: Vec<f64>,
        #[serde(default)]
        stratified: bool,
        #[serde(default)]
        allow_class_exhaustion: bool,
    },
    MvfRemoval {
        rounds: usize,
        #[serde(default)]
        attribution: AttributionRule,
    },
    Merge {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub per_class: bool,
}

fn default_k() -> usize {
    DEFAULT_K
}

impl Schedule {
    pub fn from_json(text: &str) -> Result<Self> {
        let schedule: Schedule =
            serde_json::from_str(text).map_err(|e| Error::invalid("schedule", e.to_string()))?;
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        EngineConfig::new(self.k)?;
        match &self.kind {
            ScheduleKind::SampleIncremental { steps } if steps.is_empty() => {
                Err(Error::invalid("steps", "sample-incremental needs at least one count"))
            }
            ScheduleKind::RandomRemoval { steps, .. } if steps.is_empty() => {
                Err(Error::invalid("steps", "random-removal needs at least one fraction"))
            }
            ScheduleKind::MvfRemoval { rounds: 0, .. } => Err(Error::invalid("rounds", "must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn config(&self) -> Result<ProtocolConfig> {
        Ok(ProtocolConfig {
            engine: EngineConfig::new(self.k)?,
            seed: self.seed,
            per_class: self.per_class,
        })
    }
}

/// Runs a schedule. Every kind except `merge` takes exactly one dataset.
pub fn run_schedule(schedule: &Schedule, datasets: &[MergeInput]) -> Result<ProtocolReport> {
    schedule.validate()?;
    let cfg = schedule.config()?;
    if let ScheduleKind::Merge {} = schedule.kind {
        return run_merge_consistency(datasets, cfg);
    }
    let [data] = datasets else {
        return Err(Error::invalid(
            "datasets",
            format!("{} datasets given, this protocol takes exactly one", datasets.len()),
        ));
    };
    let (support, test) = (&data.support, &data.test);
    match &schedule.kind {
        ScheduleKind::ClassIncremental { steps } => {
            let order = if steps.is_empty() {
                None
            } else {
                Some(
                    steps
                        .iter()
                        .map(|name| {
                            support
                                .labels
                                .iter()
                                .position(|l| l == name)
                                .map(|i| i as u32)
                                .ok_or_else(|| Error::LabelInvalid {
                                    what: "class order".into(),
                                    label: name.clone(),
                                })
                        })
                        .collect::<Result<Vec<u32>>>()?,
                )
            };
            run_class_incremental(support, test, order.as_deref(), cfg)
        }
        ScheduleKind::SampleIncremental { steps } => run_sample_incremental(support, test, steps, cfg),
        ScheduleKind::RandomRemoval {
            steps,
            stratified,
            allow_class_exhaustion,
        } => {
            let removal = RemovalSchedule {
                fractions: steps.clone(),
                stratified: *stratified,
                allow_class_exhaustion: *allow_class_exhaustion,
            };
            run_random_removal(support, test, &removal, cfg)
        }
        ScheduleKind::MvfRemoval { rounds, attribution } => run_mvf_removal(support, test, *rounds, *attribution, cfg),
        ScheduleKind::Merge {} => unreachable!("handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_kind() {
        let s = Schedule::from_json(r#"{"kind":"sample-incremental","steps":[1,2,5,10],"seed":7}"#).unwrap();
        assert_eq!(s.kind, ScheduleKind::SampleIncremental { steps: vec![1, 2, 5, 10] });
        assert_eq!((s.seed, s.k), (7, 10));

        let s = Schedule::from_json(r#"{"kind":"mvf-removal","rounds":3,"k":5}"#).unwrap();
        assert_eq!(
            s.kind,
            ScheduleKind::MvfRemoval {
                rounds: 3,
                attribution: AttributionRule::CorrectAndMatching
            }
        );
        assert_eq!(s.k, 5);

        let s = Schedule::from_json(r#"{"kind":"random-removal","steps":[0.0,0.5],"stratified":true}"#).unwrap();
        assert!(matches!(s.kind, ScheduleKind::RandomRemoval { stratified: true, .. }));

        let s = Schedule::from_json(r#"{"kind":"class-incremental"}"#).unwrap();
        assert_eq!(s.kind, ScheduleKind::ClassIncremental { steps: vec![] });

        let s = Schedule::from_json(r#"{"kind":"merge"}"#).unwrap();
        assert_eq!(s.kind, ScheduleKind::Merge {});

        let s = Schedule::from_json(r#"{"kind":"mvf-removal","rounds":1,"attribution":"matching-only"}"#).unwrap();
        assert!(matches!(s.kind, ScheduleKind::MvfRemoval { attribution: AttributionRule::MatchingOnly, .. }));
    }

    #[test]
    fn rejects_invalid_schedules() {
        for bad in [
            r#"{"kind":"sample-incremental","steps":[]}"#,
            r#"{"kind":"mvf-removal","rounds":0}"#,
            r#"{"kind":"mvf-removal","rounds":2,"k":0}"#,
            r#"{"kind":"teleport"}"#,
            r#"{"steps":[1]}"#,
        ] {
            assert!(Schedule::from_json(bad).is_err(), "{bad}");
        }
    }
}
