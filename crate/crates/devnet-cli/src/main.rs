//! Command line front end for the devnet library.
//!
//! Subcommands mirror the pipeline stages so that any intermediate
//! artifact can be produced (or substituted) on its own; `pipeline` runs
//! everything from raw dumps, `report` runs everything after ingest.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration or data problem,
//! 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use devnet::ingest::ProjectDataset;
use devnet::network::{build_graph, ConductanceMode};
use devnet::pipeline::{self, PipelineOptions};
use devnet::report::{self, WindowRow};
use devnet::synth::{self, SynthSpec};
use devnet::windowing::{build_windows, compute_involvements};
use devnet::{Error, Result};

#[derive(Parser)]
#[command(
    name = "devnet",
    version,
    about = "Mine developer interaction networks from commit and issue dumps",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve identities and link commits to issues, producing a dataset file.
    Ingest(IngestArgs),
    /// List the time windows of a dataset with their active developer counts.
    Windows(StageArgs),
    /// Write per-window interaction graphs as edge lists.
    Graph(StageArgs),
    /// Detect communities per window and score them by conductance.
    Communities(AnalyzeArgs),
    /// Extract subsystem teams and their community alignment metrics.
    Align(AnalyzeArgs),
    /// Measure window-over-window community and team stability.
    Evolve(AnalyzeArgs),
    /// Write every report, summary.json and a manifest from a dataset.
    Report(AnalyzeArgs),
    /// Generate a synthetic project with planted communities.
    Synth(SynthArgs),
    /// Run ingest, analysis and reporting from raw dumps in one go.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Project configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Commit dump, one JSON object per line.
    #[arg(long)]
    commits: PathBuf,
    /// Issue dump, one JSON object per line.
    #[arg(long)]
    issues: PathBuf,
    /// Dataset destination; a directory gets dataset.json inside.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StageArgs {
    /// Dataset file produced by `ingest`.
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Dataset file produced by `ingest`.
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for per-window analysis.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory of precomputed communities_w<t>.csv covers used instead
    /// of the built-in detection.
    #[arg(long, value_name = "DIR")]
    external_cover: Option<PathBuf>,
    /// Count cut and volume in edges instead of summed edge weight.
    #[arg(long)]
    unweighted_conductance: bool,
}

impl AnalyzeArgs {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            jobs: self.jobs,
            conductance_mode: if self.unweighted_conductance {
                ConductanceMode::Unweighted
            } else {
                ConductanceMode::Weighted
            },
            external_cover_dir: self.external_cover.clone(),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for config.toml, commits.jsonl, issues.jsonl and
    /// planted.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Developer pool size; groups draw from the first part of it.
    #[arg(long, default_value_t = 30)]
    devs: usize,
    #[arg(long, default_value_t = 3)]
    subsystems: usize,
    #[arg(long, default_value_t = 3)]
    windows: usize,
    /// Number of planted groups.
    #[arg(long, default_value_t = 3)]
    groups: usize,
    /// Developers per planted group.
    #[arg(long, default_value_t = 10)]
    group_size: usize,
    /// Probability that a group co-member joins an issue.
    #[arg(long, default_value_t = 0.5)]
    p_in: f64,
    /// Probability that an outsider joins an issue.
    #[arg(long, default_value_t = 0.02)]
    p_out: f64,
    /// Fraction of each group replaced with fresh developers per window.
    #[arg(long, default_value_t = 0.0)]
    churn: f64,
    #[arg(long, default_value_t = 30)]
    issues_per_window: usize,
    /// Probability that an issue lands in its group's home subsystem
    /// rather than a uniformly random one.
    #[arg(long, default_value_t = 1.0)]
    alignment: f64,
    #[arg(long, default_value_t = 1)]
    window_months: u32,
    #[arg(long, default_value_t = 10)]
    min_window_devs: usize,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        let planted_groups = (0..self.groups)
            .map(|g| (g * self.group_size..(g + 1) * self.group_size).collect())
            .collect();
        SynthSpec {
            n_developers: self.devs,
            n_subsystems: self.subsystems,
            n_windows: self.windows,
            planted_groups,
            p_in: self.p_in,
            p_out: self.p_out,
            churn_rate: self.churn,
            rng_seed: self.seed,
            issues_per_window: self.issues_per_window,
            alignment: self.alignment,
            window_months: self.window_months,
            min_window_devs: self.min_window_devs,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// Project configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Commit dump, one JSON object per line.
    #[arg(long)]
    commits: PathBuf,
    /// Issue dump, one JSON object per line.
    #[arg(long)]
    issues: PathBuf,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for per-window analysis.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory of precomputed communities_w<t>.csv covers used instead
    /// of the built-in detection.
    #[arg(long, value_name = "DIR")]
    external_cover: Option<PathBuf>,
    /// Count cut and volume in edges instead of summed edge weight.
    #[arg(long)]
    unweighted_conductance: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests travel the error path but are
            // not failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_internal() { 3 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(args) => ingest(&args),
        Command::Windows(args) => windows(&args),
        Command::Graph(args) => graphs(&args),
        Command::Communities(args) => communities(&args),
        Command::Align(args) => align(&args),
        Command::Evolve(args) => evolve(&args),
        Command::Report(args) => {
            pipeline::report_from_dataset(&args.dataset, &args.out, &args.options())?;
            Ok(())
        }
        Command::Synth(args) => {
            let output = synth::generate(&args.spec(), &args.out)?;
            println!("wrote {}", output.config_path.display());
            println!("wrote {}", output.commits_path.display());
            println!("wrote {}", output.issues_path.display());
            println!("wrote {}", output.planted_path.display());
            Ok(())
        }
        Command::Pipeline(args) => {
            let options = PipelineOptions {
                jobs: args.jobs,
                conductance_mode: if args.unweighted_conductance {
                    ConductanceMode::Unweighted
                } else {
                    ConductanceMode::Weighted
                },
                external_cover_dir: args.external_cover.clone(),
            };
            let output =
                pipeline::run_pipeline(&args.config, &args.commits, &args.issues, &args.out, &options)?;
            println!("{} windows analyzed into {}", output.summary.windows.len(), args.out.display());
            Ok(())
        }
    }
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let config = devnet::config::ProjectConfig::load(&args.config)?;
    let dataset = devnet::ingest::ingest_files(&args.commits, &args.issues, &config)?;
    // A trailing separator marks a directory that may not exist yet.
    let wants_dir = args.out.is_dir() || args.out.to_string_lossy().ends_with('/');
    let path = if wants_dir {
        args.out.join("dataset.json")
    } else {
        args.out.clone()
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(parent)?;
    }
    dataset.save(&path)?;
    println!(
        "{} developers, {} commits, {} issues -> {}",
        dataset.developers.len(),
        dataset.commits.len(),
        dataset.issues.len(),
        path.display()
    );
    Ok(())
}

fn out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io_at(path, e))
}

fn windows(args: &StageArgs) -> Result<()> {
    let dataset = ProjectDataset::load(&args.dataset)?;
    out_dir(&args.out)?;
    let mut rows = Vec::new();
    for window in build_windows(&dataset) {
        let index = compute_involvements(&dataset, &window)?;
        rows.push(WindowRow {
            index: window.index,
            start: window.start,
            end: window.end,
            active_developers: build_graph(&index).node_count(),
        });
    }
    let path = args.out.join("windows.csv");
    report::write_windows_csv(&path, &rows)?;
    println!("{} windows -> {}", rows.len(), path.display());
    Ok(())
}

fn graphs(args: &StageArgs) -> Result<()> {
    let dataset = ProjectDataset::load(&args.dataset)?;
    out_dir(&args.out)?;
    let mut count = 0;
    for window in build_windows(&dataset) {
        let index = compute_involvements(&dataset, &window)?;
        let graph = build_graph(&index);
        report::write_graph_csv(&args.out.join(report::graph_filename(window.index)), &graph)?;
        count += 1;
    }
    println!("{count} graphs -> {}", args.out.display());
    Ok(())
}

fn communities(args: &AnalyzeArgs) -> Result<()> {
    let dataset = ProjectDataset::load(&args.dataset)?;
    out_dir(&args.out)?;
    let analyses = pipeline::analyze_windows(&dataset, &args.options())?;
    let mut quality = Vec::new();
    for analysis in &analyses {
        let window = analysis.window.index;
        if analysis.cover.is_skipped() {
            continue;
        }
        report::write_communities_csv(
            &args.out.join(report::communities_filename(window)),
            &analysis.cover,
        )?;
        for (community, &phi) in analysis.cover.communities.iter().zip(&analysis.cover.quality) {
            quality.push(report::QualityRow {
                window,
                community_id: community.id,
                size: community.members.len(),
                conductance: phi,
            });
        }
    }
    let path = args.out.join("community_quality.csv");
    report::write_quality_csv(&path, &quality)?;
    println!("{} windows, {} communities -> {}", analyses.len(), quality.len(), args.out.display());
    Ok(())
}

fn align(args: &AnalyzeArgs) -> Result<()> {
    let dataset = ProjectDataset::load(&args.dataset)?;
    out_dir(&args.out)?;
    let analyses = pipeline::analyze_windows(&dataset, &args.options())?;
    let mut rows = Vec::new();
    for analysis in &analyses {
        report::write_sdt_csv(
            &args.out.join(report::sdt_filename(analysis.window.index)),
            &analysis.teams,
        )?;
        rows.extend(analysis.heterogeneity.iter().cloned());
    }
    report::write_heterogeneity_csv(&args.out.join("heterogeneity.csv"), &rows)?;
    let pairs = pipeline::correlation_pairs(&analyses);
    let r = devnet::alignment::pearson(&pairs);
    report::write_correlation_txt(&args.out.join("correlation.txt"), r, pairs.len())?;
    println!("{} heterogeneity rows -> {}", rows.len(), args.out.display());
    Ok(())
}

fn evolve(args: &AnalyzeArgs) -> Result<()> {
    let dataset = ProjectDataset::load(&args.dataset)?;
    out_dir(&args.out)?;
    let analyses = pipeline::analyze_windows(&dataset, &args.options())?;
    let rows = pipeline::transitions(&analyses);
    let path = args.out.join("evolution.csv");
    report::write_evolution_csv(&path, &rows)?;
    println!("{} transitions -> {}", rows.len(), path.display());
    Ok(())
}
