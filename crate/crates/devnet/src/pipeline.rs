//! End-to-end orchestration: ingest, windowing, graphs, communities,
//! alignment, evolution, reports.
//!
//! Stage failures surface wrapped with the stage name; a manifest is
//! written even for aborted runs so partial output directories are
//! recognizable. Per-window work runs on a bounded worker pool; all
//! cross-window state is immutable, so results are deterministic
//! regardless of thread count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::alignment::{
    self, extract_teams, membership_heterogeneity, pearson, team_conductance, SubsystemTeam,
};
use crate::communities::{detect, import_cover, CommunityCover, DetectionParams};
use crate::config::ProjectConfig;
use crate::error::{Error, Result};
use crate::evolution::{external_stability, internal_stability, team_stability};
use crate::ingest::{self, ProjectDataset};
use crate::model::DevId;
use crate::network::{build_graph, ConductanceMode, InteractionGraph};
use crate::report::{
    self, EmittedFiles, EvolutionRow, HeterogeneityRow, Manifest, QualityRow, Summary,
    WindowRow, WindowSummary,
};
use crate::windowing::{build_windows, compute_involvements, InvolvementIndex, TimeWindow};

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Worker threads for per-window stages; None uses the rayon default.
    pub jobs: Option<usize>,
    /// Conductance flavor used for community quality and team conductance.
    pub conductance_mode: ConductanceMode,
    /// Directory of communities_w<t>.csv files replacing the built-in
    /// detection (one file per non-skipped window).
    pub external_cover_dir: Option<PathBuf>,
}

/// Everything computed for one window.
#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    pub window: TimeWindow,
    pub index: InvolvementIndex,
    pub graph: InteractionGraph,
    pub cover: CommunityCover,
    pub teams: Vec<SubsystemTeam>,
    /// Focus per developer with attributed activity mass.
    pub focuses: BTreeMap<DevId, f64>,
    /// One row per subsystem; empty when the window is skipped.
    pub heterogeneity: Vec<HeterogeneityRow>,
}

fn stage<T>(name: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        already @ Error::Stage { .. } => already,
        other => Error::Stage {
            stage: name,
            source: Box::new(other),
        },
    })
}

fn in_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Internal(format!("worker pool: {e}")))?
            .install(work),
    }
}

/// Runs windowing, graph construction, community detection (or import),
/// team extraction and alignment for every window of the dataset.
pub fn analyze_windows(
    dataset: &ProjectDataset,
    options: &PipelineOptions,
) -> Result<Vec<WindowAnalysis>> {
    let windows = stage("windows", Ok(build_windows(dataset)))?;
    let params = DetectionParams {
        conductance_mode: options.conductance_mode,
        ..DetectionParams::from_config(&dataset.config)
    };
    let submap = dataset.config.subsystem_map()?;
    let total_subsystems = submap.len();

    in_pool(options.jobs, || {
        windows
            .par_iter()
            .map(|window| {
                let index = stage("windows", compute_involvements(dataset, window))?;
                let graph = build_graph(&index);
                let cover = match &options.external_cover_dir {
                    None => stage("communities", detect(&graph, &params))?,
                    Some(dir) => stage("communities", import_window_cover(dir, &graph, &params))?,
                };
                let teams = extract_teams(&index, &submap, &dataset.config.activity_thresholds);
                let focuses: BTreeMap<DevId, f64> = index
                    .active_developers()
                    .into_iter()
                    .filter_map(|dev| {
                        alignment::developer_focus(&index, dev, total_subsystems)
                            .map(|b| (dev, b.focus))
                    })
                    .collect();
                let heterogeneity = if cover.is_skipped() {
                    Vec::new()
                } else {
                    let mut rows = Vec::with_capacity(teams.len());
                    for team in &teams {
                        let breakdown =
                            stage("align", membership_heterogeneity(team, &cover, &focuses))?;
                        let conductance = stage(
                            "align",
                            team_conductance(team, &graph, options.conductance_mode),
                        )?;
                        rows.push(HeterogeneityRow {
                            window: window.index,
                            subsystem: team.name.clone(),
                            sdt_size: team.size(),
                            counted_members: breakdown.counted_members,
                            mh: breakdown.mh,
                            sdt_conductance: conductance,
                        });
                    }
                    rows
                };
                Ok(WindowAnalysis {
                    window: *window,
                    index,
                    graph,
                    cover,
                    teams,
                    focuses,
                    heterogeneity,
                })
            })
            .collect()
    })
}

fn import_window_cover(
    dir: &Path,
    graph: &InteractionGraph,
    params: &DetectionParams,
) -> Result<CommunityCover> {
    if graph.node_count() < params.min_window_devs {
        // The skip rule applies regardless of where covers come from.
        return import_cover(graph, &[], params);
    }
    let path = dir.join(report::communities_filename(graph.window_index));
    if !path.exists() {
        return Err(Error::Data(format!(
            "external cover directory lacks {} for a non-skipped window",
            path.display()
        )));
    }
    let rows = report::read_communities_csv(&path)?;
    import_cover(graph, &rows, params)
}

/// Adjacent-window stability rows.
pub fn transitions(analyses: &[WindowAnalysis]) -> Vec<EvolutionRow> {
    analyses
        .windows(2)
        .map(|pair| {
            let (prev, curr) = (&pair[0], &pair[1]);
            EvolutionRow {
                from_window: prev.window.index,
                external: external_stability(&prev.cover, &curr.cover),
                i_stab: internal_stability(&prev.cover, &curr.cover).map(|s| s.value),
                sdt_stab: team_stability(
                    &prev.teams,
                    &curr.teams,
                    &prev.cover,
                    &curr.cover,
                    &prev.focuses,
                    &curr.focuses,
                )
                .map(|s| s.value),
            }
        })
        .collect()
}

/// The (team size, mh) pairs feeding the correlation, drawn from rows
/// whose heterogeneity rests on at least two counted members.
pub fn correlation_pairs(analyses: &[WindowAnalysis]) -> Vec<(f64, f64)> {
    analyses
        .iter()
        .flat_map(|a| &a.heterogeneity)
        .filter(|row| row.counted_members >= 2)
        .map(|row| (row.sdt_size as f64, row.mh))
        .collect()
}

pub fn build_summary(
    project: &str,
    analyses: &[WindowAnalysis],
    correlation: Option<f64>,
) -> Summary {
    let windows = analyses
        .iter()
        .map(|a| {
            let counted: Vec<&HeterogeneityRow> = a
                .heterogeneity
                .iter()
                .filter(|row| row.counted_members >= 2)
                .collect();
            let mean_mh = if counted.is_empty() {
                None
            } else {
                Some(counted.iter().map(|r| r.mh).sum::<f64>() / counted.len() as f64)
            };
            let mean_conductance = if a.cover.quality.is_empty() {
                None
            } else {
                Some(a.cover.quality.iter().sum::<f64>() / a.cover.quality.len() as f64)
            };
            WindowSummary {
                window: a.window.index,
                start: a.window.start.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                end: a.window.end.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                active_developers: a.graph.node_count(),
                skipped: a.cover.skipped.clone(),
                community_count: a.cover.community_count(),
                community_sizes: a.cover.communities.iter().map(|c| c.members.len()).collect(),
                mean_conductance,
                mean_mh,
            }
        })
        .collect();
    Summary {
        project: project.to_string(),
        windows,
        size_mh_correlation: correlation,
    }
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub out_dir: PathBuf,
    pub analyses: Vec<WindowAnalysis>,
    pub summary: Summary,
    pub manifest: Manifest,
}

/// Full run from raw dumps to reports. All artifacts land in `out_dir`;
/// the manifest records input and output hashes. On stage failure the
/// manifest is still written, with the failure recorded in its status.
pub fn run_pipeline(
    config_path: &Path,
    commits_path: &Path,
    issues_path: &Path,
    out_dir: &Path,
    options: &PipelineOptions,
) -> Result<PipelineOutput> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io_at(out_dir, e))?;
    // An unreadable input is an ingest failure; the manifest still gets
    // written, holding the hashes gathered so far.
    let mut inputs = BTreeMap::new();
    let mut hashed = Ok(());
    for (label, path) in [
        ("config", config_path),
        ("commits", commits_path),
        ("issues", issues_path),
    ] {
        match report::sha256_file(path) {
            Ok(digest) => {
                inputs.insert(label.to_string(), digest);
            }
            Err(e) => {
                hashed = Err(e);
                break;
            }
        }
    }
    record_cover_dir(&mut inputs, options);

    let mut emitted = EmittedFiles::default();
    let result = stage("ingest", hashed).and_then(|()| {
        run_stages(config_path, commits_path, issues_path, out_dir, options, &mut emitted)
    });
    finish(out_dir, inputs, emitted, result)
}

/// Reports from an already-ingested dataset: everything `run_pipeline`
/// emits except the dataset copy; the manifest hashes the dataset file.
pub fn report_from_dataset(
    dataset_path: &Path,
    out_dir: &Path,
    options: &PipelineOptions,
) -> Result<PipelineOutput> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io_at(out_dir, e))?;
    let mut inputs = BTreeMap::new();
    let hashed = match report::sha256_file(dataset_path) {
        Ok(digest) => {
            inputs.insert("dataset".to_string(), digest);
            Ok(())
        }
        Err(e) => Err(e),
    };
    record_cover_dir(&mut inputs, options);

    let mut emitted = EmittedFiles::default();
    let result = stage("ingest", hashed)
        .and_then(|()| stage("ingest", ProjectDataset::load(dataset_path)))
        .and_then(|dataset| analyze_and_report(&dataset, out_dir, options, &mut emitted));
    finish(out_dir, inputs, emitted, result)
}

fn record_cover_dir(inputs: &mut BTreeMap<String, String>, options: &PipelineOptions) {
    if let Some(dir) = &options.external_cover_dir {
        inputs.insert("external_cover_dir".to_string(), dir.display().to_string());
    }
}

/// Writes the manifest whether or not the run succeeded, then lets the
/// original error through.
fn finish(
    out_dir: &Path,
    inputs: BTreeMap<String, String>,
    emitted: EmittedFiles,
    result: Result<StagePayload>,
) -> Result<PipelineOutput> {
    let status = match &result {
        Ok(_) => "complete".to_string(),
        Err(Error::Stage { stage, source }) => format!("failed at {stage}: {source}"),
        Err(other) => format!("failed: {other}"),
    };
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status,
        inputs,
        outputs: emitted.hashes()?,
    };
    report::write_manifest(&out_dir.join("manifest.json"), &manifest)?;
    let (analyses, summary) = result?;
    Ok(PipelineOutput {
        out_dir: out_dir.to_path_buf(),
        analyses,
        summary,
        manifest,
    })
}

type StagePayload = (Vec<WindowAnalysis>, Summary);

fn run_stages(
    config_path: &Path,
    commits_path: &Path,
    issues_path: &Path,
    out_dir: &Path,
    options: &PipelineOptions,
    emitted: &mut EmittedFiles,
) -> Result<StagePayload> {
    let config = stage("ingest", ProjectConfig::load(config_path))?;
    let dataset = stage(
        "ingest",
        ingest::ingest_files(commits_path, issues_path, &config),
    )?;
    let dataset_path = out_dir.join("dataset.json");
    stage("ingest", dataset.save(&dataset_path))?;
    emitted.push(dataset_path);
    analyze_and_report(&dataset, out_dir, options, emitted)
}

fn analyze_and_report(
    dataset: &ProjectDataset,
    out_dir: &Path,
    options: &PipelineOptions,
    emitted: &mut EmittedFiles,
) -> Result<StagePayload> {
    let analyses = analyze_windows(dataset, options)?;
    let evolution = transitions(&analyses);
    let pairs = correlation_pairs(&analyses);
    let correlation = pearson(&pairs);
    let summary = build_summary(&dataset.config.project_name, &analyses, correlation);

    stage(
        "report",
        write_reports(out_dir, &analyses, &evolution, &summary, correlation, pairs.len(), emitted),
    )?;
    Ok((analyses, summary))
}

fn write_reports(
    out_dir: &Path,
    analyses: &[WindowAnalysis],
    evolution: &[EvolutionRow],
    summary: &Summary,
    correlation: Option<f64>,
    correlation_pairs: usize,
    emitted: &mut EmittedFiles,
) -> Result<()> {
    let window_rows: Vec<WindowRow> = analyses
        .iter()
        .map(|a| WindowRow {
            index: a.window.index,
            start: a.window.start,
            end: a.window.end,
            active_developers: a.graph.node_count(),
        })
        .collect();
    let path = out_dir.join("windows.csv");
    report::write_windows_csv(&path, &window_rows)?;
    emitted.push(path);

    let mut quality_rows = Vec::new();
    let mut heterogeneity_rows = Vec::new();
    for a in analyses {
        let path = out_dir.join(report::graph_filename(a.window.index));
        report::write_graph_csv(&path, &a.graph)?;
        emitted.push(path);

        let path = out_dir.join(report::sdt_filename(a.window.index));
        report::write_sdt_csv(&path, &a.teams)?;
        emitted.push(path);

        if !a.cover.is_skipped() {
            let path = out_dir.join(report::communities_filename(a.window.index));
            report::write_communities_csv(&path, &a.cover)?;
            emitted.push(path);
            for (community, &phi) in a.cover.communities.iter().zip(&a.cover.quality) {
                quality_rows.push(QualityRow {
                    window: a.window.index,
                    community_id: community.id,
                    size: community.members.len(),
                    conductance: phi,
                });
            }
        }
        heterogeneity_rows.extend(a.heterogeneity.iter().cloned());
    }

    let path = out_dir.join("community_quality.csv");
    report::write_quality_csv(&path, &quality_rows)?;
    emitted.push(path);

    let path = out_dir.join("heterogeneity.csv");
    report::write_heterogeneity_csv(&path, &heterogeneity_rows)?;
    emitted.push(path);

    let path = out_dir.join("correlation.txt");
    report::write_correlation_txt(&path, correlation, correlation_pairs)?;
    emitted.push(path);

    let path = out_dir.join("evolution.csv");
    report::write_evolution_csv(&path, evolution)?;
    emitted.push(path);

    let path = out_dir.join("summary.json");
    report::write_summary(&path, summary)?;
    emitted.push(path);
    Ok(())
}
