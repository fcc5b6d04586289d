//! Stage drivers shared by the command line and the one-shot pipeline.
//!
//! Every stage reads and writes the plain-text formats of the other
//! modules, so running the stages one by one through files gives the same
//! final map as [`run_pipeline`].

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::collapse::{CollapsedGraph, Hyperedge, HyperedgeCounter, UltimateParentMap, WeightScheme};
use crate::components::DisjointSet;
use crate::error::{Error, Result};
use crate::eval::GoldGrouping;
use crate::filter::{read_bad_projects, FilterConfig, FilterStats, GroupFilter, DEFAULT_MAX_COMMIT_SPAN};
use crate::ingest::{group_by_commit, InputSet, PairReader};
use crate::io::{is_gzip_path, AtomicWriter};
use crate::louvain::{louvain_by_component, LouvainConfig};
use crate::model::{Clustering, Interner, ProjectId, RepoName};
use crate::naming::{transform_name, write_map, ClusterMap};

pub const COMPONENTS_MAP: &str = "components.map";
pub const COLLAPSED_GRAPH: &str = "collapsed.graph";
pub const ULTIMATE_MAP: &str = "ultimate.map";
pub const FINAL_MAP: &str = "final.map";
pub const REPORT_FILE: &str = "report.txt";

/// Runs `f` on a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Counters gathered while reading the pair files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub files: usize,
    pub pairs: u64,
    pub commits: u64,
    /// Commit groups that survived filtering.
    pub kept_commits: u64,
    /// Star-expansion links of the kept groups.
    pub links: u64,
    pub filter: FilterStats,
    /// Projects seen in the input that are absent after filtering.
    pub dropped_projects: usize,
}

impl IngestStats {
    fn add(&mut self, other: &IngestStats) {
        self.files += other.files;
        self.pairs += other.pairs;
        self.commits += other.commits;
        self.kept_commits += other.kept_commits;
        self.links += other.links;
        self.filter.add(&other.filter);
    }

    pub fn dropped_commits(&self) -> u64 {
        self.commits - self.kept_commits
    }
}

/// Filtered input merged across shards.
///
/// The universe is the set of projects that occur in at least one kept
/// commit group; `names[i]` is project `i`.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub names: Vec<RepoName>,
    pub components: Clustering,
    /// Distinct kept project sets over universe ids, when requested.
    pub hyperedges: Vec<Hyperedge>,
    pub stats: IngestStats,
}

struct ShardResult {
    names: Vec<RepoName>,
    present: Vec<bool>,
    dsu: DisjointSet,
    hyperedges: Option<HyperedgeCounter>,
    stats: IngestStats,
}

fn ingest_file(path: &Path, filter: &FilterConfig, want_hyperedges: bool) -> Result<ShardResult> {
    let reader = PairReader::open(path)?;
    let source = reader.source().to_owned();
    let mut pairs = 0u64;
    let counted = reader.inspect(|r| {
        if r.is_ok() {
            pairs += 1;
        }
    });
    let mut interner = Interner::new();
    let mut gf = GroupFilter::new(filter);
    let mut observed = 0usize;
    let mut present: Vec<bool> = Vec::new();
    let mut dsu = DisjointSet::new(0);
    let mut counter = want_hyperedges.then(HyperedgeCounter::new);
    let mut stats = IngestStats {
        files: 1,
        ..Default::default()
    };

    let mut groups = group_by_commit(counted, &mut interner, source);
    while let Some(group) = groups.next() {
        let group = group?;
        stats.commits += 1;
        let names = groups.interner().names();
        for (i, name) in names.iter().enumerate().skip(observed) {
            gf.observe(ProjectId(i as u32), name);
        }
        observed = names.len();
        let Some(group) = gf.apply(group) else {
            continue;
        };
        stats.kept_commits += 1;
        stats.links += group.len() as u64 - 1;
        present.resize(observed, false);
        dsu.grow(observed);
        for p in group.projects() {
            present[p.index()] = true;
        }
        dsu.absorb(&group)?;
        if let Some(c) = counter.as_mut() {
            c.add(group.projects(), 1);
        }
    }
    drop(groups);
    stats.pairs = pairs;
    stats.filter = gf.stats;
    present.resize(interner.len(), false);
    dsu.grow(interner.len());
    Ok(ShardResult {
        names: interner.names().to_vec(),
        present,
        dsu,
        hyperedges: counter,
        stats,
    })
}

/// Reads, filters and merges every input file. Files are processed in
/// parallel on the current rayon pool; the merge runs in file order, so the
/// result does not depend on the number of workers.
pub fn ingest(files: &[PathBuf], filter: &FilterConfig, want_hyperedges: bool) -> Result<Ingested> {
    filter.validate()?;
    let mut global = Interner::new();
    let mut stats = IngestStats::default();
    let mut absent: HashSet<RepoName> = HashSet::new();
    let mut dsu = DisjointSet::new(0);
    let mut counter = HyperedgeCounter::new();
    let mut buf = Vec::new();

    // one batch per worker keeps at most `threads` shard results alive
    for batch in files.chunks(rayon::current_num_threads()) {
        let shards: Vec<ShardResult> = batch
            .par_iter()
            .map(|f| ingest_file(f, filter, want_hyperedges))
            .collect::<Result<_>>()?;
        for mut shard in shards {
            stats.add(&shard.stats);
            let ids: Vec<u32> = shard
                .names
                .iter()
                .zip(&shard.present)
                .map(|(name, &present)| {
                    if present {
                        global.intern_name(name).0
                    } else {
                        if global.get(name.as_str()).is_none() {
                            absent.insert(name.clone());
                        }
                        u32::MAX
                    }
                })
                .collect();
            dsu.grow(global.len());
            for local in 0..shard.names.len() {
                if !shard.present[local] {
                    continue;
                }
                let root = shard.dsu.find(ProjectId(local as u32))?;
                if root.index() != local {
                    dsu.union(ProjectId(ids[local]), ProjectId(ids[root.index()]))?;
                }
            }
            if let Some(local) = shard.hyperedges.take() {
                for (members, count) in local.iter() {
                    buf.clear();
                    buf.extend(members.iter().map(|p| ProjectId(ids[p.index()])));
                    counter.add(&buf, count);
                }
            }
        }
    }
    stats.dropped_projects = absent.iter().filter(|n| global.get(n.as_str()).is_none()).count();
    Ok(Ingested {
        names: global.names().to_vec(),
        components: dsu.to_clustering(),
        hyperedges: counter.finish(),
        stats,
    })
}

/// Copies the inputs into `out_dir` under the same file names, keeping only
/// what survives `filter`. Projects inside a commit are written in name
/// order.
pub fn write_filtered(files: &[PathBuf], out_dir: &Path, filter: &FilterConfig) -> Result<IngestStats> {
    filter.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let per_file: Vec<IngestStats> = files
        .par_iter()
        .map(|path| {
            let name = path
                .file_name()
                .ok_or_else(|| Error::Config(format!("{} is not a file", path.display())))?;
            let target = out_dir.join(name);
            if same_file(path, &target) {
                return Err(Error::Config(format!(
                    "filter output {} would overwrite its input",
                    target.display()
                )));
            }
            let mut out = AtomicWriter::create(&target, is_gzip_path(path))?;
            let reader = PairReader::open(path)?;
            let source = reader.source().to_owned();
            let mut interner = Interner::new();
            let mut gf = GroupFilter::new(filter);
            let mut observed = 0usize;
            let mut stats = IngestStats {
                files: 1,
                ..Default::default()
            };
            let mut groups = group_by_commit(reader, &mut interner, source);
            while let Some(group) = groups.next() {
                let group = group?;
                stats.commits += 1;
                let names = groups.interner().names();
                for (i, n) in names.iter().enumerate().skip(observed) {
                    gf.observe(ProjectId(i as u32), n);
                }
                observed = names.len();
                let Some(group) = gf.apply(group) else {
                    continue;
                };
                stats.kept_commits += 1;
                stats.links += group.len() as u64 - 1;
                let mut members: Vec<&RepoName> = group.projects().iter().map(|p| &names[p.index()]).collect();
                members.sort_unstable();
                for m in members {
                    out.write_line(&format!("{};{m}", group.commit))?;
                    stats.pairs += 1;
                }
            }
            stats.filter = gf.stats;
            out.finish()?;
            Ok(stats)
        })
        .collect::<Result<_>>()?;
    let mut total = IngestStats::default();
    for s in &per_file {
        total.add(s);
    }
    Ok(total)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Projects of `ingested` named after their connected component.
pub fn components_map(ingested: &Ingested) -> Result<ClusterMap> {
    ClusterMap::from_clustering(&ingested.components, &ingested.names)
}

pub fn build_collapsed(ingested: &Ingested, upm: &UltimateParentMap, scheme: WeightScheme) -> CollapsedGraph {
    CollapsedGraph::build(
        &ingested.names,
        ingested
            .hyperedges
            .iter()
            .map(|h| (h.projects.as_slice(), h.multiplicity)),
        upm,
        scheme,
    )
}

/// Community detection on the collapsed graph, mapped back onto projects.
/// A graph without edges leaves every node on its own.
pub fn cluster_collapsed(graph: &CollapsedGraph, config: LouvainConfig) -> Result<ClusterMap> {
    let node_labels: Vec<ProjectId> = if graph.graph.total_weight() > 0.0 {
        louvain_by_component(&graph.graph, config)?.assignment().to_vec()
    } else {
        (0..graph.nodes.len() as u32).map(ProjectId).collect()
    };
    let names: Vec<RepoName> = graph.projects.iter().map(|(p, _)| p.clone()).collect();
    let labels: Vec<ProjectId> = graph
        .projects
        .iter()
        .map(|&(_, node)| node_labels[node as usize])
        .collect();
    ClusterMap::from_clustering(&Clustering::from_labels(&labels), &names)
}

/// Puts `gold` into the name space of `predicted`: either the raw
/// repository names or the published (transformed) ones, whichever overlaps
/// more.
pub fn align_gold(gold: &GoldGrouping, predicted: &ClusterMap) -> GoldGrouping {
    let transformed = gold.map_names(|n| RepoName::new(transform_name(n)).expect("transform keeps names valid"));
    let overlap = |g: &GoldGrouping| {
        g.groups()
            .flat_map(|(_, members)| members.iter())
            .filter(|m| predicted.get(m.as_str()).is_some())
            .count()
    };
    if overlap(&transformed) > overlap(gold) {
        transformed
    } else {
        gold.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub max_commit_span: usize,
    pub bad_projects: Option<PathBuf>,
    pub weight_scheme: WeightScheme,
    pub fork_map: Option<PathBuf>,
    pub skip_louvain: bool,
    pub skip_collapse: bool,
    pub threads: usize,
    pub min_gain: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            output: PathBuf::new(),
            max_commit_span: DEFAULT_MAX_COMMIT_SPAN,
            bad_projects: None,
            weight_scheme: WeightScheme::default(),
            fork_map: None,
            skip_louvain: false,
            skip_collapse: false,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            min_gain: 0.0,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "input",
    "output",
    "max_commit_span",
    "bad_projects",
    "weight_scheme",
    "fork_map",
    "skip_louvain",
    "skip_collapse",
    "threads",
    "min_gain",
];

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

/// Parses flat `key = value` text. `#` starts a comment line; keys may use
/// `-` or `_`.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", i + 1)))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_owned()));
    }
    Ok(out)
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key.replace('-', "_").as_str() {
            "input" => self.input = PathBuf::from(value),
            "output" => self.output = PathBuf::from(value),
            "max_commit_span" => self.max_commit_span = parse_num(key, value)?,
            "bad_projects" => self.bad_projects = path(value),
            "weight_scheme" => self.weight_scheme = value.parse()?,
            "fork_map" => self.fork_map = path(value),
            "skip_louvain" => self.skip_louvain = parse_bool(key, value)?,
            "skip_collapse" => self.skip_collapse = parse_bool(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "min_gain" => self.min_gain = parse_num(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key {other:?} (known: {})",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (k, v) in parse_config_text(&text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("no input directory given".into()));
        }
        if self.output.as_os_str().is_empty() {
            return Err(Error::Config("no output directory given".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        if !(self.min_gain.is_finite() && self.min_gain >= 0.0) {
            return Err(Error::Config(format!(
                "min_gain must be a non-negative number, got {}",
                self.min_gain
            )));
        }
        self.filter_base().validate()?;
        for (what, p) in [("bad project list", &self.bad_projects), ("fork map", &self.fork_map)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::Config(format!("{what} {} does not exist", p.display())));
                }
            }
        }
        InputSet::Directory(self.input.clone()).files()?;
        Ok(())
    }

    fn filter_base(&self) -> FilterConfig {
        FilterConfig {
            max_commit_span: self.max_commit_span,
            ..FilterConfig::default()
        }
    }

    pub fn filter_config(&self) -> Result<FilterConfig> {
        let mut f = self.filter_base();
        if let Some(p) = &self.bad_projects {
            f.bad_projects = read_bad_projects(p)?;
        }
        Ok(f)
    }

    pub fn louvain_config(&self) -> LouvainConfig {
        LouvainConfig {
            min_gain: self.min_gain,
        }
    }

    /// The fork map's ultimate parents, or an empty map when collapsing is
    /// off or no fork map is configured.
    pub fn ultimate_parents(&self) -> Result<UltimateParentMap> {
        match (&self.fork_map, self.skip_collapse) {
            (Some(p), false) => UltimateParentMap::read(p),
            _ => Ok(UltimateParentMap::default()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub ingest: IngestStats,
    pub projects: usize,
    pub clusters_before: usize,
    pub largest_before: usize,
    pub clusters_after: usize,
    pub largest_after: usize,
    pub collapsed_nodes: usize,
    pub collapsed_edges: usize,
    pub hyperedges: usize,
    pub ultimate_parents: usize,
    pub stage_times: Vec<(&'static str, Duration)>,
}

impl RunReport {
    /// Machine-readable `key=value` lines.
    pub fn lines(&self) -> Vec<String> {
        let s = &self.ingest;
        let mut out = vec![
            format!("files={}", s.files),
            format!("pairs={}", s.pairs),
            format!("commits={}", s.commits),
            format!("projects={}", self.projects),
            format!("links={}", s.links),
            format!("dropped_commits={}", s.dropped_commits()),
            format!("dropped_commits_span={}", s.filter.span_dropped_groups),
            format!("dropped_commits_bad={}", s.filter.bad_dropped_groups),
            format!("bad_project_occurrences={}", s.filter.bad_project_occurrences),
            format!("dropped_projects={}", s.dropped_projects),
            format!("ultimate_parents={}", self.ultimate_parents),
            format!("hyperedges={}", self.hyperedges),
            format!("collapsed_nodes={}", self.collapsed_nodes),
            format!("collapsed_edges={}", self.collapsed_edges),
            format!("clusters_before_louvain={}", self.clusters_before),
            format!("largest_before_louvain={}", self.largest_before),
            format!("clusters_after_louvain={}", self.clusters_after),
            format!("largest_after_louvain={}", self.largest_after),
        ];
        for (stage, t) in &self.stage_times {
            out.push(format!("time_{stage}_s={:.3}", t.as_secs_f64()));
        }
        out
    }

    pub fn human(&self) -> String {
        let s = &self.ingest;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "input      {} files, {} pairs, {} commits",
            s.files, s.pairs, s.commits
        );
        let _ = writeln!(out, "projects   {} ({} links)", self.projects, s.links);
        let _ = writeln!(
            out,
            "filtered   {} commits over the span limit, {} emptied by bad projects, {} projects dropped",
            s.filter.span_dropped_groups, s.filter.bad_dropped_groups, s.dropped_projects
        );
        let _ = writeln!(
            out,
            "collapse   {} forks, {} nodes, {} edges",
            self.ultimate_parents, self.collapsed_nodes, self.collapsed_edges
        );
        let _ = writeln!(
            out,
            "clusters   {} before, {} after (largest {} before, {} after)",
            self.clusters_before, self.clusters_after, self.largest_before, self.largest_after
        );
        for (stage, t) in &self.stage_times {
            let _ = writeln!(out, "time       {stage:<10} {:.3}s", t.as_secs_f64());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = AtomicWriter::create(path, false)?;
        for line in self.lines() {
            w.write_line(&line)?;
        }
        w.finish()
    }
}

fn timed<T>(
    times: &mut Vec<(&'static str, Duration)>,
    stage: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage))?;
    times.push((stage, start.elapsed()));
    log::info!("{stage} done in {:.3}s", start.elapsed().as_secs_f64());
    Ok(out)
}

/// ingest → filter → components (checkpoint) → collapse → louvain → naming.
///
/// Writes `components.map`, `collapsed.graph`, `ultimate.map` (with a fork
/// map), `final.map` and `report.txt` into the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let files = InputSet::Directory(cfg.input.clone()).files()?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let out = |name: &str| cfg.output.join(name);
    with_threads(cfg.threads, || {
        let mut times = Vec::new();
        let filter = timed(&mut times, "config", || cfg.filter_config())?;
        let ingested = timed(&mut times, "ingest", || ingest(&files, &filter, !cfg.skip_louvain))?;

        let raw = timed(&mut times, "components", || {
            let map = components_map(&ingested)?;
            write_map(&map, &out(COMPONENTS_MAP), false)?;
            Ok(map)
        })?;
        let mut report = RunReport {
            ingest: ingested.stats.clone(),
            projects: ingested.names.len(),
            clusters_before: raw.cluster_count(),
            largest_before: raw.largest_cluster_size(),
            ..Default::default()
        };

        let last = if cfg.skip_louvain {
            raw
        } else {
            let graph = timed(&mut times, "collapse", || {
                let upm = cfg.ultimate_parents()?;
                report.ultimate_parents = upm.len();
                if cfg.fork_map.is_some() && !cfg.skip_collapse {
                    upm.write(&out(ULTIMATE_MAP), false)?;
                }
                let graph = build_collapsed(&ingested, &upm, cfg.weight_scheme);
                graph.write(&out(COLLAPSED_GRAPH))?;
                Ok(graph)
            })?;
            report.collapsed_nodes = graph.nodes.len();
            report.collapsed_edges = graph.graph.edge_count();
            report.hyperedges = graph.hyperedge_count;
            timed(&mut times, "louvain", || {
                cluster_collapsed(&graph, cfg.louvain_config())
            })?
        };
        report.clusters_after = last.cluster_count();
        report.largest_after = last.largest_cluster_size();
        timed(&mut times, "naming", || write_map(&last, &out(FINAL_MAP), false))?;
        report.stage_times = times;
        report.write(&out(REPORT_FILE)).map_err(|e| e.in_stage("report"))?;
        Ok(report)
    })?
}
