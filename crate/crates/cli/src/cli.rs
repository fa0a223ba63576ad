use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use knnvault::harness::{emit_report, run_schedule, LabeledSet, MergeInput, Schedule};
use knnvault::store::{self, segment, MANIFEST_FILE};
use knnvault::{classify_batch, Collection, EngineConfig, Predicate, DEFAULT_K};

use crate::service::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "knnvault", version, about = "Exact kNN classification over a mutable embedding store")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create or extend a collection from EMBV1 segments
    Ingest(IngestArgs),
    /// Classify every record of a query segment
    Classify(ClassifyArgs),
    /// Delete records by id list or predicate and persist the result
    Erase(EraseArgs),
    /// Run an experiment schedule and write its CSV report
    Protocol(ProtocolArgs),
    /// Serve collections over HTTP
    Serve(ServeArgs),
    /// Print collection statistics as JSON
    Stats(StatsArgs),
    /// Print every live record in ascending id order
    Scan(StatsArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Target collection directory
    #[arg(long)]
    pub collection: PathBuf,
    /// Manifest of an export (segments resolved relative to it)
    #[arg(long, conflicts_with_all = ["segment", "name", "labels"])]
    pub manifest: Option<PathBuf>,
    /// Raw EMBV1 segment files
    #[arg(long, num_args = 1..)]
    pub segment: Vec<PathBuf>,
    /// Collection name when creating from raw segments
    #[arg(long)]
    pub name: Option<String>,
    /// Comma-separated label vocabulary when creating from raw segments
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Add to an existing collection instead of refusing to overwrite it
    #[arg(long)]
    pub append: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub collection: PathBuf,
    /// EMBV1 segment of query vectors; their label ids are the truth column
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EraseArgs {
    #[arg(long)]
    pub collection: PathBuf,
    /// File of record ids separated by whitespace or commas
    #[arg(long, conflicts_with = "predicate", required_unless_present = "predicate")]
    pub ids: Option<PathBuf>,
    /// `label=X` or `source_tag=Y`
    #[arg(long)]
    pub predicate: Option<String>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    /// Schedule config (JSON)
    #[arg(long)]
    pub schedule: PathBuf,
    /// Support collection directory; repeat together with --test for merge runs
    #[arg(long, required = true)]
    pub support: Vec<PathBuf>,
    /// Test collection directory, paired positionally with --support
    #[arg(long, required = true)]
    pub test: Vec<PathBuf>,
    /// Override the schedule's k
    #[arg(long)]
    pub k: Option<usize>,
    /// Override the schedule's seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, required = true)]
    pub collection: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Default k for queries that do not set one
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub collection: PathBuf,
}

pub const CLASSIFY_HEADER: [&str; 10] = [
    "query_id",
    "true_label_id",
    "predicted_label_id",
    "predicted_label",
    "votes",
    "summed_similarity",
    "neighbor_ids",
    "neighbor_label_ids",
    "similarities",
    "error",
];

/// Runs one subcommand, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a, out),
        Command::Classify(a) => classify_cmd(a, out),
        Command::Erase(a) => erase(a, out),
        Command::Protocol(a) => protocol(a, out),
        Command::Serve(a) => serve(a),
        Command::Stats(a) => stats(a, out),
        Command::Scan(a) => scan(a, out),
    }
}

fn has_manifest(dir: &Path) -> bool {
    dir.join(MANIFEST_FILE).is_file()
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let exists = has_manifest(&a.collection);
    if exists && !a.append {
        bail!("{} already holds a collection; pass --append to extend it", a.collection.display());
    }
    let collection = if let Some(manifest) = &a.manifest {
        let incoming = store::load(manifest).with_context(|| format!("loading {}", manifest.display()))?;
        if exists {
            let mut c = store::load(&a.collection)?;
            if c.dimension() != incoming.dimension() || c.labels() != incoming.labels() {
                bail!("export does not match the collection's dimension and label vocabulary");
            }
            c.insert(incoming.scan().map(|r| r.to_record()).collect())?;
            c
        } else {
            incoming
        }
    } else {
        if a.segment.is_empty() {
            bail!("give --manifest or at least one --segment");
        }
        let segments = a
            .segment
            .iter()
            .map(|p| segment::read_file(p).with_context(|| format!("reading segment {}", p.display())))
            .collect::<Result<Vec<_>>>()?;
        let mut c = if exists {
            store::load(&a.collection)?
        } else {
            let name = a.name.clone().context("--name is required when creating a collection")?;
            if a.labels.is_empty() {
                bail!("--labels is required when creating a collection");
            }
            Collection::new(name, segments[0].dimension, a.labels.clone())?
        };
        let records = segments.into_iter().flat_map(|s| s.records).collect();
        c.insert(records)?;
        c
    };
    store::save(&collection, &a.collection)?;
    writeln!(
        out,
        "ingested into {}: {} records, generation {}",
        collection.name(),
        collection.len(),
        collection.generation()
    )?;
    Ok(())
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn classify_cmd(a: ClassifyArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = EngineConfig::new(a.k)?;
    let c = store::load(&a.collection)?;
    let queries = segment::read_file(&a.queries)?;
    let vectors: Vec<&[f32]> = queries.records.iter().map(|r| r.vector.as_slice()).collect();
    let results = classify_batch(&c, &vectors, cfg);

    let mut w = csv::Writer::from_path(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    w.write_record(CLASSIFY_HEADER)?;
    let (mut correct, mut scored) = (0usize, 0usize);
    for (q, result) in queries.records.iter().zip(&results) {
        match result {
            Ok(r) => {
                scored += 1;
                correct += usize::from(r.predicted_label_id == q.label_id);
                w.write_record([
                    q.id.to_string(),
                    q.label_id.to_string(),
                    r.predicted_label_id.to_string(),
                    c.label_name(r.predicted_label_id).unwrap_or_default().to_owned(),
                    join(r.votes.iter().map(|(l, n)| format!("{l}:{n}"))),
                    join(r.summed_similarity.iter().map(|(l, s)| format!("{l}:{s}"))),
                    join(r.neighbors.iter().map(|n| n.record_id)),
                    join(r.neighbors.iter().map(|n| n.label_id)),
                    join(r.neighbors.iter().map(|n| n.similarity)),
                    String::new(),
                ])?;
            }
            Err(e) => {
                w.write_record([
                    q.id.to_string(),
                    q.label_id.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("{}: {e}", e.code()),
                ])?;
            }
        }
    }
    w.flush()?;
    writeln!(out, "classified {scored} of {} queries (k = {})", queries.records.len(), a.k)?;
    if scored > 0 {
        writeln!(out, "accuracy against truth column: {} ({correct}/{scored})", correct as f64 / scored as f64)?;
    }
    Ok(())
}

fn parse_ids(text: &str) -> Result<Vec<u64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().with_context(|| format!("bad record id {s:?}")))
        .collect()
}

fn erase(a: EraseArgs, out: &mut dyn Write) -> Result<()> {
    let mut c = store::load(&a.collection)?;
    let ids = match (&a.ids, &a.predicate) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_ids(&text)?
        }
        (None, Some(p)) => c.select(&p.parse::<Predicate>()?),
        (None, None) => bail!("give --ids or --predicate"),
    };
    let outcome = c.delete(&ids);
    if outcome.deleted > 0 {
        store::save(&c, &a.collection)?;
    }
    writeln!(out, "erased {} records, generation {}", outcome.deleted, c.generation())?;
    Ok(())
}

fn protocol(a: ProtocolArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&a.schedule).with_context(|| format!("reading {}", a.schedule.display()))?;
    let mut schedule = Schedule::from_json(&text)?;
    if let Some(k) = a.k {
        schedule.k = k;
    }
    if let Some(seed) = a.seed {
        schedule.seed = seed;
    }
    if a.support.len() != a.test.len() {
        bail!("--support and --test must be given the same number of times");
    }
    let mut datasets = Vec::new();
    for (s, t) in a.support.iter().zip(&a.test) {
        let support = store::load(s).with_context(|| format!("loading support {}", s.display()))?;
        let test = store::load(t).with_context(|| format!("loading test {}", t.display()))?;
        datasets.push(MergeInput {
            tag: support.name().to_owned(),
            support: LabeledSet::from_collection(&support),
            test: LabeledSet::from_collection(&test),
        });
    }
    let report = run_schedule(&schedule, &datasets)?;
    emit_report(&report, &a.output)?;
    writeln!(out, "{}: {} steps written to {}", report.protocol, report.steps.len(), a.output.display())?;
    for note in &report.notes {
        writeln!(out, "note: {note}")?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let state = AppState::open(&a.collection, a.k)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(service::serve(state, a.bind))
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let c = store::load(&a.collection)?;
    let stats = crate::api::StatsResponse {
        name: c.name().to_owned(),
        count: c.len(),
        dimension: c.dimension(),
        labels: c.labels().to_vec(),
        generation: c.generation(),
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&stats)?)?;
    Ok(())
}

/// One line per record: `id,label_id,source_tag,v0;v1;...`. Components use
/// the shortest representation that parses back to the same `f32`.
fn scan(a: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let c = store::load(&a.collection)?;
    for r in c.scan() {
        writeln!(out, "{},{},{},{}", r.id, r.label_id, r.source_tag.unwrap_or(""), join(r.vector))?;
    }
    Ok(())
}
