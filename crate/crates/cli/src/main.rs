use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use repolink_core::collapse::{CollapsedGraph, UltimateParentMap, WeightScheme};
use repolink_core::eval::{cross_split_rate, split_report, GoldGrouping};
use repolink_core::filter::{read_bad_projects, FilterConfig};
use repolink_core::ingest::{check_inputs, InputSet};
use repolink_core::naming::{write_map, ClusterMap};
use repolink_core::pipeline::{
    align_gold, build_collapsed, cluster_collapsed, components_map, ingest, run_pipeline, with_threads, write_filtered,
    PipelineConfig,
};
use repolink_core::synth::{generate_corpus, GroupSizes, SynthConfig};
use repolink_core::{Error, ErrorKind, LouvainConfig, Result};

#[derive(Parser, Debug)]
#[command(name = "repolink", version, about = "Cluster repositories that share commits")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate pair files without clustering.
    IngestCheck(InputArgs),
    /// Connected components of the commit-sharing graph.
    Components(ComponentsArgs),
    /// Write filtered copies of the pair files.
    Filter(FilterArgs),
    /// Collapse forks and build the weighted project graph.
    Collapse(CollapseArgs),
    /// Community detection on a collapsed graph.
    Louvain(LouvainArgs),
    /// Turn a cluster file into the published map format.
    Name(NameArgs),
    /// Score a predicted map against fork groups or another map.
    Eval(EvalArgs),
    /// Generate a synthetic corpus with planted groups.
    Synth(SynthArgs),
    /// Run every stage in one go.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Directory holding c2p.N shard files.
    #[arg(long, conflicts_with = "files")]
    input: Option<PathBuf>,
    /// Explicit pair files instead of a shard directory.
    files: Vec<PathBuf>,
}

impl InputArgs {
    fn files(&self) -> Result<Vec<PathBuf>> {
        match &self.input {
            Some(dir) => InputSet::Directory(dir.clone()),
            None => InputSet::Files(self.files.clone()),
        }
        .files()
    }
}

#[derive(Args, Debug)]
struct FilterFlags {
    /// Drop commits touching more than this many projects.
    #[arg(long)]
    max_commit_span: Option<usize>,
    /// File listing projects to remove, one per line.
    #[arg(long)]
    bad_projects: Option<PathBuf>,
}

impl FilterFlags {
    /// Filtering with defaults filled in from `base`.
    fn config(&self, base: FilterConfig) -> Result<FilterConfig> {
        let mut f = base;
        if let Some(span) = self.max_commit_span {
            f.max_commit_span = span;
        }
        if let Some(p) = &self.bad_projects {
            f.bad_projects = read_bad_projects(p)?;
        }
        f.validate()?;
        Ok(f)
    }

    fn any(&self) -> bool {
        self.max_commit_span.is_some() || self.bad_projects.is_some()
    }
}

#[derive(Args, Debug)]
struct ThreadArgs {
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Args, Debug)]
struct ComponentsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Cluster file to write (`PROJECT;REPRESENTATIVE`).
    #[arg(long)]
    output: PathBuf,
    /// Filters are off unless one of these is given.
    #[command(flatten)]
    filter: FilterFlags,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Directory for the filtered pair files.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    filter: FilterFlags,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug)]
struct CollapseArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Collapsed graph file to write.
    #[arg(long)]
    output: PathBuf,
    /// `REPO;PARENT` fork declarations.
    #[arg(long)]
    fork_map: Option<PathBuf>,
    /// Also write the resolved `REPO;ULTIMATE_PARENT` map here.
    #[arg(long, requires = "fork_map")]
    ultimate_map: Option<PathBuf>,
    #[arg(long, default_value_t = WeightScheme::Unit)]
    weight_scheme: WeightScheme,
    #[command(flatten)]
    filter: FilterFlags,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug)]
struct LouvainArgs {
    /// Collapsed graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Cluster file to write.
    #[arg(long)]
    output: PathBuf,
    /// Smallest modularity gain that counts as an improvement.
    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug)]
struct NameArgs {
    /// Cluster file (`PROJECT;LABEL`).
    #[arg(long)]
    clusters: PathBuf,
    /// Map file to write; a `.gz` suffix compresses it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// `REPO;PARENT` fork map defining the gold groups.
    #[arg(long, required_unless_present = "against")]
    gold: Option<PathBuf>,
    /// Predicted map or cluster file.
    #[arg(long)]
    predicted: PathBuf,
    /// A second map to compare with, in both directions.
    #[arg(long)]
    against: Option<PathBuf>,
    /// Write `group;size;largest;split` lines here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Split groups listed in the table.
    #[arg(long, default_value_t = 10)]
    limit: usize,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 20)]
    n_groups: usize,
    #[arg(long, default_value_t = 5)]
    min_group_size: usize,
    #[arg(long, default_value_t = 20)]
    max_group_size: usize,
    /// Draw group sizes from a power law with this exponent instead of
    /// uniformly.
    #[arg(long)]
    power_law: Option<f64>,
    #[arg(long, default_value_t = 20)]
    commits_per_group: usize,
    #[arg(long, default_value_t = 1.0)]
    share_fraction: f64,
    #[arg(long, default_value_t = 0)]
    n_backup_repos: usize,
    #[arg(long, default_value_t = 0)]
    backup_reach: usize,
    #[arg(long, default_value_t = 1)]
    backup_commits: usize,
    #[arg(long, default_value_t = 0)]
    n_mega_commits: usize,
    #[arg(long, default_value_t = 2)]
    mega_commit_span: usize,
    #[arg(long, default_value_t = 0.0)]
    fork_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        let (min, max) = (self.min_group_size, self.max_group_size);
        SynthConfig {
            n_groups: self.n_groups,
            group_sizes: match self.power_law {
                Some(exponent) => GroupSizes::PowerLaw { exponent, min, max },
                None => GroupSizes::Uniform { min, max },
            },
            commits_per_group: self.commits_per_group,
            share_fraction: self.share_fraction,
            n_backup_repos: self.n_backup_repos,
            backup_reach: self.backup_reach,
            backup_commits: self.backup_commits,
            n_mega_commits: self.n_mega_commits,
            mega_commit_span: self.mega_commit_span,
            fork_fraction: self.fork_fraction,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    max_commit_span: Option<usize>,
    #[arg(long)]
    bad_projects: Option<PathBuf>,
    #[arg(long)]
    weight_scheme: Option<WeightScheme>,
    #[arg(long)]
    fork_map: Option<PathBuf>,
    #[arg(long)]
    skip_louvain: bool,
    #[arg(long)]
    skip_collapse: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    min_gain: Option<f64>,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let overrides = [
            ("input", path(&self.input)),
            ("output", path(&self.output)),
            ("max_commit_span", self.max_commit_span.map(|v| v.to_string())),
            ("bad_projects", path(&self.bad_projects)),
            ("weight_scheme", self.weight_scheme.map(|v| v.to_string())),
            ("fork_map", path(&self.fork_map)),
            ("skip_louvain", self.skip_louvain.then(|| "true".to_owned())),
            ("skip_collapse", self.skip_collapse.then(|| "true".to_owned())),
            ("threads", self.threads.map(|v| v.to_string())),
            ("min_gain", self.min_gain.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn read_clusters(path: &Path) -> Result<ClusterMap> {
    ClusterMap::read(path)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestCheck(args) => {
            let files = args.files()?;
            let s = check_inputs(&files).map_err(|e| e.in_stage("ingest-check"))?;
            println!("files={}", s.files);
            println!("pairs={}", s.pairs);
            println!("commits={}", s.commits);
            println!("projects={}", s.projects);
            println!("multi_project_commits={}", s.multi_project_commits);
            println!("misplaced_records={}", s.misplaced_records);
            if s.misplaced_records > 0 {
                log::warn!("{} records sit in the wrong shard file", s.misplaced_records);
            }
        }
        Command::Components(args) => {
            let files = args.input.files()?;
            let filter = if args.filter.any() {
                args.filter.config(FilterConfig::default())?
            } else {
                FilterConfig::disabled()
            };
            let ingested = with_threads(args.threads.threads, || ingest(&files, &filter, false))?
                .map_err(|e| e.in_stage("components"))?;
            let map = components_map(&ingested)?;
            map.write_clusters(&args.output)?;
            println!(
                "projects={} clusters={} largest={}",
                map.len(),
                map.cluster_count(),
                map.largest_cluster_size()
            );
        }
        Command::Filter(args) => {
            let files = args.input.files()?;
            let filter = args.filter.config(FilterConfig::default())?;
            let stats = with_threads(args.threads.threads, || write_filtered(&files, &args.output, &filter))?
                .map_err(|e| e.in_stage("filter"))?;
            println!(
                "commits={} kept={} dropped_span={} dropped_bad={} bad_occurrences={}",
                stats.commits,
                stats.kept_commits,
                stats.filter.span_dropped_groups,
                stats.filter.bad_dropped_groups,
                stats.filter.bad_project_occurrences
            );
        }
        Command::Collapse(args) => {
            let files = args.input.files()?;
            let filter = if args.filter.any() {
                args.filter.config(FilterConfig::default())?
            } else {
                FilterConfig::disabled()
            };
            let upm = match &args.fork_map {
                Some(p) => UltimateParentMap::read(p)?,
                None => UltimateParentMap::default(),
            };
            if let Some(out) = &args.ultimate_map {
                upm.write(out, false)?;
            }
            let ingested = with_threads(args.threads.threads, || ingest(&files, &filter, true))?
                .map_err(|e| e.in_stage("collapse"))?;
            let graph = build_collapsed(&ingested, &upm, args.weight_scheme);
            graph.write(&args.output)?;
            println!(
                "projects={} nodes={} edges={} hyperedges={}",
                graph.projects.len(),
                graph.nodes.len(),
                graph.graph.edge_count(),
                graph.hyperedge_count
            );
        }
        Command::Louvain(args) => {
            let graph = CollapsedGraph::read(&args.graph)?;
            let config = LouvainConfig {
                min_gain: args.min_gain,
            };
            if !(config.min_gain.is_finite() && config.min_gain >= 0.0) {
                return Err(Error::Config(format!(
                    "--min-gain must be non-negative, got {}",
                    args.min_gain
                )));
            }
            let map = with_threads(args.threads.threads, || cluster_collapsed(&graph, config))?
                .map_err(|e| e.in_stage("louvain"))?;
            map.write_clusters(&args.output)?;
            println!(
                "projects={} clusters={} largest={}",
                map.len(),
                map.cluster_count(),
                map.largest_cluster_size()
            );
        }
        Command::Name(args) => {
            let map = read_clusters(&args.clusters)?;
            let gzip = repolink_core::io::is_gzip_path(&args.output);
            write_map(&map, &args.output, gzip)?;
            info!("wrote {} projects", map.len());
        }
        Command::Eval(args) => {
            let predicted = read_clusters(&args.predicted)?;
            if let Some(gold_path) = &args.gold {
                let gold = align_gold(&GoldGrouping::read(gold_path)?, &predicted);
                let report = split_report(&gold, &predicted)?;
                print!("{}", report.table(args.limit));
                if let Some(out) = &args.report {
                    report.write(out)?;
                }
            }
            if let Some(other) = &args.against {
                let other = read_clusters(other)?;
                let forward = cross_split_rate(&predicted, &other)?;
                let backward = cross_split_rate(&other, &predicted)?;
                println!(
                    "predicted clusters split by other: {}/{} ({:.2}%)",
                    forward.split_groups,
                    forward.total_groups,
                    100.0 * forward.rate
                );
                println!(
                    "other clusters split by predicted: {}/{} ({:.2}%)",
                    backward.split_groups,
                    backward.total_groups,
                    100.0 * backward.rate
                );
            }
        }
        Command::Synth(args) => {
            let corpus = generate_corpus(&args.config())?;
            corpus.write(&args.output)?;
            println!(
                "projects={} commits={} pairs={} forks={}",
                corpus.projects.len(),
                corpus.commit_count,
                corpus.pair_count(),
                corpus.forks.len()
            );
        }
        Command::Pipeline(args) => {
            let cfg = args.config()?;
            let report = run_pipeline(&cfg)?;
            print!("{}", report.human());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Validation => ExitCode::from(1),
                ErrorKind::Runtime => ExitCode::from(2),
            }
        }
    }
}
