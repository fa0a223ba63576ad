//! Plot-ready CSV reports.
//!
//! One row per schedule step, optionally followed by one row per class
//! (same `step` value) when per-class accuracy was recorded. Free-form notes
//! and the ids touched by removal steps trail the table as `#` comment lines,
//! so a written report parses back into an identical [`ProtocolReport`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "protocol,step,support_size,removed_or_added,class,per_class_size,accuracy,k,seed,generation";

/// `class` value of a step row whose scope is the whole support.
pub const ALL_CLASSES: &str = "*";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub protocol: String,
    pub k: usize,
    pub seed: u64,
    pub steps: Vec<ReportStep>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportStep {
    pub step: usize,
    pub support_size: usize,
    /// Records added or removed by this step.
    pub removed_or_added: usize,
    /// `*` for the whole support, or a dataset scope for merge runs.
    pub scope: String,
    pub class_sizes: Vec<(String, usize)>,
    pub accuracy: f64,
    pub generation: u64,
    pub per_class: Vec<ClassAccuracy>,
    /// Ids removed by this step (removal protocols only).
    pub touched_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub label: String,
    pub size: usize,
    pub accuracy: f64,
}

impl ProtocolReport {
    pub fn new(protocol: &str, k: usize, seed: u64) -> Self {
        Self {
            protocol: protocol.to_owned(),
            k,
            seed,
            steps: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.accuracy).collect()
    }
}

fn escape_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        match ch {
            '%' => out.push_str("%25"),
            ';' => out.push_str("%3B"),
            ':' => out.push_str("%3A"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_label(s: &str) -> String {
    s.replace("%3A", ":").replace("%3B", ";").replace("%25", "%")
}

fn encode_sizes(sizes: &[(String, usize)]) -> String {
    sizes
        .iter()
        .map(|(l, n)| format!("{}:{n}", escape_label(l)))
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_sizes(s: &str) -> Result<Vec<(String, usize)>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|part| {
            let (l, n) = part
                .rsplit_once(':')
                .ok_or_else(|| Error::Report(format!("bad per_class_size entry {part:?}")))?;
            Ok((unescape_label(l), parse_num(n, "per_class_size")?))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(s: &str, field: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Report(format!("field {field}: cannot parse {s:?}")))
}

/// Serializes a report to CSV text.
pub fn write_report(report: &ProtocolReport) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    let k = report.k.to_string();
    let seed = report.seed.to_string();
    for step in &report.steps {
        let idx = step.step.to_string();
        let support = step.support_size.to_string();
        let delta = step.removed_or_added.to_string();
        let generation = step.generation.to_string();
        w.write_record([
            report.protocol.as_str(),
            &idx,
            &support,
            &delta,
            &step.scope,
            &encode_sizes(&step.class_sizes),
            &step.accuracy.to_string(),
            &k,
            &seed,
            &generation,
        ])
        .expect("in-memory write");
        for class in &step.per_class {
            w.write_record([
                report.protocol.as_str(),
                &idx,
                &support,
                &delta,
                &class.label,
                &class.size.to_string(),
                &class.accuracy.to_string(),
                &k,
                &seed,
                &generation,
            ])
            .expect("in-memory write");
        }
    }
    let mut text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input");
    if !report.steps.is_empty() || !report.notes.is_empty() {
        // protocol/k/seed must survive even when the table is empty
        let _ = writeln!(text, "# meta: {},{},{}", report.protocol, report.k, report.seed);
    }
    for step in &report.steps {
        if !step.touched_ids.is_empty() {
            let ids: Vec<String> = step.touched_ids.iter().map(u64::to_string).collect();
            let _ = writeln!(text, "# ids {}: {}", step.step, ids.join(","));
        }
    }
    for note in &report.notes {
        let _ = writeln!(text, "# note: {}", note.replace('\n', " "));
    }
    text
}

/// Parses CSV text produced by [`write_report`].
pub fn parse_report(text: &str) -> Result<ProtocolReport> {
    let mut table = String::new();
    let mut meta: Option<(String, usize, u64)> = None;
    let mut notes = Vec::new();
    let mut ids: Vec<(usize, Vec<u64>)> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# note: ") {
            notes.push(rest.to_owned());
        } else if let Some(rest) = line.strip_prefix("# meta: ") {
            let mut parts = rest.rsplitn(3, ',');
            let seed = parse_num(parts.next().unwrap_or(""), "seed")?;
            let k = parse_num(parts.next().unwrap_or(""), "k")?;
            let protocol = parts.next().unwrap_or("").to_owned();
            meta = Some((protocol, k, seed));
        } else if let Some(rest) = line.strip_prefix("# ids ") {
            let (step, list) = rest
                .split_once(": ")
                .ok_or_else(|| Error::Report(format!("bad id line {line:?}")))?;
            let list = list
                .split(',')
                .map(|s| parse_num(s, "ids"))
                .collect::<Result<Vec<u64>>>()?;
            ids.push((parse_num(step, "ids step")?, list));
        } else if line.starts_with('#') {
            continue;
        } else {
            table.push_str(line);
            table.push('\n');
        }
    }

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(table.as_bytes());
    let header = reader.headers().map_err(|e| Error::Report(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Report(format!("unexpected header {header:?}")));
    }
    let (protocol, k, seed) = meta.unwrap_or_default();
    let mut report = ProtocolReport::new(&protocol, k, seed);
    report.notes = notes;
    for row in reader.records() {
        let row = row.map_err(|e| Error::Report(e.to_string()))?;
        let step: usize = parse_num(&row[1], "step")?;
        let is_class_row = report.steps.last().is_some_and(|s| s.step == step);
        if is_class_row {
            let last = report.steps.last_mut().unwrap();
            last.per_class.push(ClassAccuracy {
                label: row[4].to_owned(),
                size: parse_num(&row[5], "per_class_size")?,
                accuracy: parse_num(&row[6], "accuracy")?,
            });
        } else {
            report.steps.push(ReportStep {
                step,
                support_size: parse_num(&row[2], "support_size")?,
                removed_or_added: parse_num(&row[3], "removed_or_added")?,
                scope: row[4].to_owned(),
                class_sizes: decode_sizes(&row[5])?,
                accuracy: parse_num(&row[6], "accuracy")?,
                generation: parse_num(&row[9], "generation")?,
                per_class: Vec::new(),
                touched_ids: Vec::new(),
            });
        }
    }
    for (step, list) in ids {
        let target = report
            .steps
            .iter_mut()
            .find(|s| s.step == step)
            .ok_or_else(|| Error::Report(format!("ids for unknown step {step}")))?;
        target.touched_ids = list;
    }
    Ok(report)
}

pub fn emit_report(report: &ProtocolReport, path: &Path) -> Result<()> {
    std::fs::write(path, write_report(report))
        .map_err(|e| Error::io(format!("writing report {}", path.display()), e))
}

pub fn read_report(path: &Path) -> Result<ProtocolReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading report {}", path.display()), e))?;
    parse_report(&text)
}
