//! Report files: CSV tables, the JSON summary and the determinism
//! manifest.
//!
//! Every CSV written here is re-parseable by the reader next to its
//! writer. Floats are fixed to six decimals, undefined values stay blank,
//! rows are sorted, and nothing carries a timestamp of the run itself, so
//! reruns on identical inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::SubsystemTeam;
use crate::communities::CommunityCover;
use crate::error::{Error, Result};
use crate::evolution::ExternalStability;
use crate::model::DevId;
use crate::network::InteractionGraph;

fn fmt_f64(value: f64) -> String {
    format!("{value:.6}")
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("{context}: bad number {field:?}")))
}

fn parse_opt(field: &str, context: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(field, context).map(Some)
    }
}

fn parse_usize(field: &str, context: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("{context}: bad count {field:?}")))
}

fn parse_opt_usize(field: &str, context: &str) -> Result<Option<usize>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_usize(field, context).map(Some)
    }
}

fn fmt_time(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn parse_time(field: &str, context: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(field.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| Error::Data(format!("{context}: bad timestamp {field:?}")))
}

fn open_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowRow {
    pub index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    /// Node count of the window graph after isolate pruning.
    pub active_developers: usize,
}

pub fn write_windows_csv(path: &Path, rows: &[WindowRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["index", "start", "end", "active_developers"])?;
    for row in rows {
        w.write_record([
            row.index.to_string(),
            fmt_time(row.start),
            fmt_time(row.end),
            row.active_developers.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io_at(path, e))
}

pub fn read_windows_csv(path: &Path) -> Result<Vec<WindowRow>> {
    let context = path.display().to_string();
    let mut rows = Vec::new();
    for record in open_reader(path)?.records() {
        let record = record?;
        rows.push(WindowRow {
            index: parse_usize(&record[0], &context)?,
            start: parse_time(&record[1], &context)?,
            end: parse_time(&record[2], &context)?,
            active_developers: parse_usize(&record[3], &context)?,
        });
    }
    Ok(rows)
}

pub fn graph_filename(window: usize) -> String {
    format!("graph_w{window}.csv")
}

pub fn write_graph_csv(path: &Path, graph: &InteractionGraph) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["dev_a", "dev_b", "intensity"])?;
    for (a, b, weight) in graph.edges() {
        w.write_record([a.0.to_string(), b.0.to_string(), weight.to_string()])?;
    }
    w.flush().map_err(|e| Error::io_at(path, e))
}

pub fn read_graph_csv(path: &Path, window_index: usize) -> Result<InteractionGraph> {
    let context = path.display().to_string();
    let mut edges = Vec::new();
    for record in open_reader(path)?.records() {
        let record = record?;
        let a = parse_usize(&record[0], &context)? as u32;
        let b = parse_usize(&record[1], &context)? as u32;
        let weight = parse_usize(&record[2], &context)? as u64;
        edges.push((DevId(a), DevId(b), weight));
    }
    Ok(InteractionGraph::from_edges(window_index, edges))
}

pub fn communities_filename(window: usize) -> String {
    format!("communities_w{window}.csv")
}

pub fn write_communities_csv(path: &Path, cover: &CommunityCover) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["community_id", "dev_id"])?;
    for community in &cover.communities {
        for &dev in &community.members {
            w.write_record([community.id.to_string(), dev.0.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io_at(path, e))
}

/// Raw (community_id, dev_id) rows; also the import format for covers
/// produced by external tools.
pub fn read_communities_csv(path: &Path) -> Result<Vec<(usize, DevId)>> {
    let context = path.display().to_string();
    let mut rows = Vec::new();
    for record in open_reader(path)?.records() {
        let record = record?;
        rows.push((
            parse_usize(&record[0], &context)?,
            DevId(parse_usize(&record[1], &context)? as u32),
        ));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityRow {
    pub window: usize,
    pub community_id: usize,
    pub size: usize,
    pub conductance: f64,
}

pub fn write_quality_csv(path: &Path, rows: &[QualityRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["window", "community_id", "size", "conductance"])?;
    for row in rows {
        w.write_record([
            row.window.to_string(),
            row.community_id.to_string(),
            row.size.to_string(),
            fmt_f64(row.conductance),
        ])?;
    }
    w.flush().map_err(|e| Error::io_at(path, e))
}

pub fn read_quality_csv(path: &Path) -> Result<Vec<QualityRow>> {
    let context = path.display().to_string();
    let mut rows = Vec::new();
    for record in open_reader(path)?.records() {
        let record = record?;
        rows.push(QualityRow {
            window: parse_usize(&record[0], &context)?,
            community_id: parse_usize(&record[1], &context)?,
            size: parse_usize(&record[2], &context)?,
            conductance: parse_f64(&record[3], &context)?,
        });
    }
    Ok(rows)
}

pub fn sdt_filename(window: usize) -> String {
    format!("sdt_w{window}.csv")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdtRow {
    pub subsystem: String,
    pub dev_id: u32,
    pub contributing: usize,
    pub informative: usize,
}

pub fn write_sdt_csv(path: &Path, teams: &[SubsystemTeam]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["subsystem", "dev_id", "contributing", "informative"])?;
    for team in teams {
        for (&dev, counts) in &team.members {
            w.write_record([
                team.name.clone(),
                dev.0.to_string(),
                counts.contributing_issues.to_string(),
                counts.informative_issues.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io_at(path, e))
}

pub fn read_sdt_csv(path: &Path) -> Result<Vec<SdtRow>> {
    let context = path.display().to_string();
    let mut rows = Vec::new();
    for record in open_reader(path)?.records() {
        let record = record?;
        rows.push(SdtRow {
            subsystem: record[0].to_string(),
            dev_id: parse_usize(&record[1], &context)? as u32,
            contributing: parse_usize(&record[2], &context)?,
            informative: parse_usize(&record[3], &context)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityRow {
    pub window: usize,
    pub subsystem: String,
    pub sdt_size: usize,
    pub counted_members: usize,
    pub mh: f64,
    /// Blank when no team member appears in the window graph.
    pub sdt_conductance: Option<f64>,
}

pub fn write_heterogeneity_csv(path: &Path, rows: &[HeterogeneityRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "window",
        "subsystem",
        "sdt_size",
        "counted_members",
        "mh",
        "sdt_conductance",
    ])?;
    for row in rows {
        w.write_record([
            row.window.to_string(),
            row.subsystem.clone(),
            row.sdt_size.to_string(),
            row.counted_members.to_string(),
            fmt_f64(row.mh),
            fmt_opt(row.sdt_conductance),
        ])?;
    }
    w.flush().map_err(|e| Error::io_at(path, e))
}

pub fn read_heterogeneity_csv(path: &Path) -> Result<Vec<HeterogeneityRow>> {
    let context = path.display().to_string();
    let mut rows = Vec::new();
    for record in open_reader(path)?.records() {
        let record = record?;
        rows.push(HeterogeneityRow {
            window: parse_usize(&record[0], &context)?,
            subsystem: record[1].to_string(),
            sdt_size: parse_usize(&record[2], &context)?,
            counted_members: parse_usize(&record[3], &context)?,
            mh: parse_f64(&record[4], &context)?,
            sdt_conductance: parse_opt(&record[5], &context)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionRow {
    pub from_window: usize,
    /// Blank when either adjacent window was skipped.
    pub external: Option<ExternalStability>,
    pub i_stab: Option<f64>,
    pub sdt_stab: Option<f64>,
}

pub fn write_evolution_csv(path: &Path, rows: &[EvolutionRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "from_window",
        "joined",
        "left",
        "remained",
        "i_stab",
        "sdt_stab",
    ])?;
    for row in rows {
        let (joined, left, remained) = match row.external {
            Some(e) => (
                e.joined.to_string(),
                e.left.to_string(),
                e.remained.to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            row.from_window.to_string(),
            joined,
            left,
            remained,
            fmt_opt(row.i_stab),
            fmt_opt(row.sdt_stab),
        ])?;
    }
    w.flush().map_err(|e| Error::io_at(path, e))
}

pub fn read_evolution_csv(path: &Path) -> Result<Vec<EvolutionRow>> {
    let context = path.display().to_string();
    let mut rows = Vec::new();
    for record in open_reader(path)?.records() {
        let record = record?;
        let joined = parse_opt_usize(&record[1], &context)?;
        let left = parse_opt_usize(&record[2], &context)?;
        let remained = parse_opt_usize(&record[3], &context)?;
        let external = match (joined, left, remained) {
            (Some(joined), Some(left), Some(remained)) => Some(ExternalStability {
                joined,
                left,
                remained,
            }),
            (None, None, None) => None,
            _ => {
                return Err(Error::Data(format!(
                    "{context}: partial external stability triple"
                )))
            }
        };
        rows.push(EvolutionRow {
            from_window: parse_usize(&record[0], &context)?,
            external,
            i_stab: parse_opt(&record[4], &context)?,
            sdt_stab: parse_opt(&record[5], &context)?,
        });
    }
    Ok(rows)
}

/// correlation.txt: the team-size vs heterogeneity coefficient, or the
/// reason it is undefined.
pub fn write_correlation_txt(path: &Path, r: Option<f64>, pairs: usize) -> Result<()> {
    let text = match r {
        Some(r) => format!(
            "pearson_r = {}\npairs = {pairs}\n",
            fmt_f64(r)
        ),
        None => format!(
            "pearson_r = undefined (needs >= 3 pairs with variance in both coordinates)\npairs = {pairs}\n"
        ),
    };
    fs::write(path, text).map_err(|e| Error::io_at(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: usize,
    pub start: String,
    pub end: String,
    pub active_developers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub community_count: usize,
    pub community_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_conductance: Option<f64>,
    /// Mean heterogeneity over teams with at least two counted members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_mh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub project: String,
    pub windows: Vec<WindowSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_mh_correlation: Option<f64>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(path, text + "\n").map_err(|e| Error::io_at(path, e))
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Run record: what went in, what came out, and whether the run finished.
/// Carries no wall-clock data so that reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    /// "complete", or "failed at <stage>: <error>".
    pub status: String,
    /// Input label to sha256 of the file content.
    pub inputs: BTreeMap<String, String>,
    /// Output filename to sha256 of the file content.
    pub outputs: BTreeMap<String, String>,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n").map_err(|e| Error::io_at(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io_at(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Collects a PathBuf per emitted file so the manifest can hash exactly
/// what a run produced.
#[derive(Debug, Default)]
pub struct EmittedFiles {
    files: Vec<PathBuf>,
}

impl EmittedFiles {
    pub fn push(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    pub fn hashes(&self) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for path in &self.files {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            map.insert(name, sha256_file(path)?);
        }
        Ok(map)
    }
}
