//! Shrinking the commit hypergraph before community detection.
//!
//! Forks are replaced by their ultimate parent, commits touching the same
//! project set are merged into one weighted hyperedge, and the hyperedges
//! are star-expanded into a weighted project graph.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{read_two_column, AtomicWriter, Lines};
use crate::model::{CommitGroup, Interner, ProjectId, RepoName};

/// Declared fork parents: repository → the repository it was forked from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForkMap {
    parent: BTreeMap<RepoName, RepoName>,
}

impl ForkMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a declaration. Self-parents are rejected, as is a second,
    /// different parent for the same repository.
    pub fn insert(&mut self, repo: RepoName, parent: RepoName) -> Result<()> {
        if repo == parent {
            return Err(Error::Config(format!("{repo} declared as its own fork parent")));
        }
        match self.parent.get(&repo) {
            Some(existing) if *existing != parent => Err(Error::Config(format!(
                "{repo} declared with two parents: {existing} and {parent}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.parent.insert(repo, parent);
                Ok(())
            }
        }
    }

    pub fn parent(&self, repo: &str) -> Option<&RepoName> {
        self.parent.get(repo)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RepoName, &RepoName)> {
        self.parent.iter()
    }

    /// Reads `REPO;PARENT` lines. Self-parent lines are skipped.
    pub fn read(path: &Path) -> Result<Self> {
        let mut map = ForkMap::new();
        let shown = path.display().to_string();
        read_two_column(path, |no, repo, parent| {
            let repo = RepoName::new(repo)?;
            let parent = RepoName::new(parent)?;
            if repo == parent {
                log::warn!("{shown}:{no}: skipping self-parent declaration for {repo}");
                return Ok(());
            }
            map.insert(repo, parent).map_err(|e| Error::Parse {
                path: shown.clone(),
                line: no,
                message: e.to_string(),
            })
        })?;
        Ok(map)
    }
}

/// Each forked repository mapped to the end of its fork chain.
///
/// Only repositories whose root differs from themselves are stored; any
/// other name is its own root.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UltimateParentMap {
    root: BTreeMap<RepoName, RepoName>,
}

impl UltimateParentMap {
    pub fn root<'a>(&'a self, repo: &'a RepoName) -> &'a RepoName {
        self.root.get(repo.as_str()).unwrap_or(repo)
    }

    pub fn root_of(&self, repo: &str) -> Option<&RepoName> {
        self.root.get(repo)
    }

    pub fn len(&self) -> usize {
        self.root.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RepoName, &RepoName)> {
        self.root.iter()
    }

    /// Writes `REPO;ULTIMATE_PARENT` lines sorted by repository; gzip when
    /// asked or when the path ends in `.gz`.
    pub fn write(&self, path: &Path, gzip: bool) -> Result<()> {
        let mut w = AtomicWriter::create(path, gzip)?;
        for (repo, root) in &self.root {
            w.write_line(&format!("{repo};{root}"))?;
        }
        w.finish()
    }

    /// Reads a file in the fork-map format and closes it under the fork
    /// relation, so both declared-parent and ultimate-parent files work.
    pub fn read(path: &Path) -> Result<Self> {
        Ok(build_ultimate_map(&ForkMap::read(path)?))
    }
}

/// Follows every fork chain to its end.
///
/// Chains are memoized so the total work is linear in the map size. A cycle
/// has no natural end; every repository on it, and every chain leading into
/// it, resolves to the lexicographically smallest name on the cycle.
pub fn build_ultimate_map(forks: &ForkMap) -> UltimateParentMap {
    let mut resolved: HashMap<&str, &RepoName> = HashMap::with_capacity(forks.len());
    let mut on_path: HashMap<&str, usize> = HashMap::new();
    let mut path: Vec<&RepoName> = Vec::new();

    for start in forks.parent.keys() {
        if resolved.contains_key(start.as_str()) {
            continue;
        }
        path.clear();
        on_path.clear();
        let mut cur = start;
        let root: &RepoName = loop {
            if let Some(&r) = resolved.get(cur.as_str()) {
                break r;
            }
            if let Some(&pos) = on_path.get(cur.as_str()) {
                let cycle = &path[pos..];
                let min = *cycle.iter().min().expect("cycle is non-empty");
                break min;
            }
            match forks.parent.get(cur) {
                Some(next) => {
                    on_path.insert(cur.as_str(), path.len());
                    path.push(cur);
                    cur = next;
                }
                None => break cur,
            }
        };
        for repo in &path {
            resolved.insert(repo.as_str(), root);
        }
    }

    let root = forks
        .parent
        .keys()
        .filter_map(|k| {
            let r = resolved[k.as_str()];
            (r != k).then(|| (k.clone(), r.clone()))
        })
        .collect();
    UltimateParentMap { root }
}

/// Maps every interned project to the id of its ultimate parent, interning
/// parents that were not seen yet.
pub fn root_index(interner: &mut Interner, upm: &UltimateParentMap) -> Vec<ProjectId> {
    let n = interner.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let id = ProjectId(i as u32);
        let name = interner.resolve(id).expect("id below len");
        match upm.root_of(name.as_str()).cloned() {
            Some(root) => out.push(interner.intern_name(&root)),
            None => out.push(id),
        }
    }
    out
}

/// Replaces each member by its root (`roots[id]`, identity for ids past
/// the end of `roots`), collapsing duplicates.
pub fn substitute_parents(group: CommitGroup, roots: &[ProjectId]) -> CommitGroup {
    let commit = group.commit;
    let members = group
        .into_projects()
        .into_iter()
        .map(|p| roots.get(p.index()).copied().unwrap_or(p))
        .collect();
    CommitGroup::new(commit, members)
}

/// A distinct project set shared by `multiplicity` commits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hyperedge {
    pub projects: Vec<ProjectId>,
    pub multiplicity: u64,
}

/// Counts commits per distinct project set. Sets are keyed on their sorted
/// member list.
#[derive(Debug, Clone, Default)]
pub struct HyperedgeCounter {
    counts: HashMap<Vec<ProjectId>, u64>,
}

impl HyperedgeCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `count` commits over `projects` (any order, duplicates
    /// allowed). Sets with fewer than two members are ignored.
    pub fn add(&mut self, projects: &[ProjectId], count: u64) {
        let mut key = projects.to_vec();
        key.sort_unstable();
        key.dedup();
        if key.len() < 2 {
            return;
        }
        *self.counts.entry(key).or_insert(0) += count;
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Hyperedges sorted by member list.
    pub fn finish(self) -> Vec<Hyperedge> {
        let mut out: Vec<Hyperedge> = self
            .counts
            .into_iter()
            .map(|(projects, multiplicity)| Hyperedge { projects, multiplicity })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[ProjectId], u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }
}

pub fn dedup_hyperedges<I>(groups: I) -> Vec<Hyperedge>
where
    I: IntoIterator<Item = CommitGroup>,
{
    let mut counter = HyperedgeCounter::new();
    for g in groups {
        counter.add(g.projects(), 1);
    }
    counter.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// Every distinct project set contributes weight 1.
    #[default]
    Unit,
    /// A project set contributes the number of commits that share it.
    Count,
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(WeightScheme::Unit),
            "count" => Ok(WeightScheme::Count),
            other => Err(Error::Config(format!(
                "unknown weight scheme {other:?} (expected unit|count)"
            ))),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Unit => "unit",
            WeightScheme::Count => "count",
        })
    }
}

/// Undirected weighted graph over nodes `0..node_count`, self-loops allowed.
///
/// Edge keys are stored with `a <= b`. The total weight `m` counts a
/// self-loop once; the degree of a node counts its self-loop twice, so
/// `2m` equals the sum of degrees.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedGraph {
    node_count: usize,
    edges: BTreeMap<(u32, u32), f64>,
    total_weight: f64,
}

impl WeightedGraph {
    pub fn new(node_count: usize) -> Self {
        WeightedGraph {
            node_count,
            edges: BTreeMap::new(),
            total_weight: 0.0,
        }
    }

    /// Adds `weight` to the edge between `a` and `b`.
    ///
    /// # Panics
    /// If a node is out of range or the weight is not positive and finite.
    pub fn add_edge(&mut self, a: u32, b: u32, weight: f64) {
        assert!(
            (a as usize) < self.node_count && (b as usize) < self.node_count,
            "edge ({a},{b}) outside {} nodes",
            self.node_count
        );
        assert!(weight > 0.0 && weight.is_finite(), "edge weight must be positive");
        let key = if a <= b { (a, b) } else { (b, a) };
        *self.edges.entry(key).or_insert(0.0) += weight;
        self.total_weight += weight;
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn weight(&self, a: u32, b: u32) -> f64 {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.edges.get(&key).copied().unwrap_or(0.0)
    }

    /// Edges in ascending `(a, b)` order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.node_count];
        for (a, b, w) in self.edges() {
            if a == b {
                d[a as usize] += 2.0 * w;
            } else {
                d[a as usize] += w;
                d[b as usize] += w;
            }
        }
        d
    }
}

/// Star-expands each hyperedge from its smallest node; contributions to the
/// same node pair add up.
pub fn hyperedges_to_weighted_graph(edges: &[Hyperedge], node_count: usize, scheme: WeightScheme) -> WeightedGraph {
    let mut g = WeightedGraph::new(node_count);
    for h in edges {
        let w = match scheme {
            WeightScheme::Unit => 1.0,
            WeightScheme::Count => h.multiplicity as f64,
        };
        let hub = h.projects[0].0;
        for p in &h.projects[1..] {
            g.add_edge(hub, p.0, w);
        }
    }
    g
}

/// The graph community detection runs on, with the bookkeeping needed to
/// map results back to the original projects.
///
/// Nodes are the distinct ultimate parents of the project universe, indexed
/// in ascending name order, so the layout does not depend on input order.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedGraph {
    pub nodes: Vec<RepoName>,
    /// Every universe project with the node it collapsed into, sorted by
    /// project name.
    pub projects: Vec<(RepoName, u32)>,
    pub graph: WeightedGraph,
    pub hyperedge_count: usize,
}

const GRAPH_HEADER: &str = "# repolink collapsed graph v1";

impl CollapsedGraph {
    /// Builds the graph for `universe` given hyperedge counts over the
    /// universe's (pre-substitution) ids.
    pub fn build<'a, I>(universe: &[RepoName], hyperedges: I, upm: &UltimateParentMap, scheme: WeightScheme) -> Self
    where
        I: IntoIterator<Item = (&'a [ProjectId], u64)>,
    {
        let mut nodes: Vec<RepoName> = universe.iter().map(|p| upm.root(p).clone()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let node_of = |name: &RepoName| -> u32 { nodes.binary_search(name).expect("root is a node") as u32 };
        let project_node: Vec<u32> = universe.iter().map(|p| node_of(upm.root(p))).collect();

        let mut counter = HyperedgeCounter::new();
        let mut buf = Vec::new();
        for (members, count) in hyperedges {
            buf.clear();
            buf.extend(members.iter().map(|p| ProjectId(project_node[p.index()])));
            counter.add(&buf, count);
        }
        let hyperedges = counter.finish();
        let graph = hyperedges_to_weighted_graph(&hyperedges, nodes.len(), scheme);

        let mut projects: Vec<(RepoName, u32)> = universe.iter().cloned().zip(project_node).collect();
        projects.sort_unstable();
        CollapsedGraph {
            nodes,
            projects,
            graph,
            hyperedge_count: hyperedges.len(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = AtomicWriter::create(path, false)?;
        w.write_line(GRAPH_HEADER)?;
        w.write_line(&format!("# hyperedges={}", self.hyperedge_count))?;
        for n in &self.nodes {
            w.write_line(&format!("n;{n}"))?;
        }
        for (p, node) in &self.projects {
            w.write_line(&format!("p;{p};{node}"))?;
        }
        for (a, b, wt) in self.graph.edges() {
            w.write_line(&format!("e;{a};{b};{wt}"))?;
        }
        w.finish()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let shown = path.display().to_string();
        let err = |line: u64, message: String| Error::Parse {
            path: shown.clone(),
            line,
            message,
        };
        let mut lines = Lines::open(path)?;
        let mut nodes = Vec::new();
        let mut projects = Vec::new();
        let mut edges = Vec::new();
        let mut hyperedge_count = 0usize;
        while let Some((no, line)) = lines.next_line()? {
            if let Some(rest) = line.strip_prefix("# hyperedges=") {
                hyperedge_count = rest.parse().map_err(|_| err(no, "bad hyperedge count".into()))?;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(';').collect();
            match fields.as_slice() {
                ["n", name] => nodes.push(RepoName::new(*name).map_err(|e| err(no, e.to_string()))?),
                ["p", name, node] => {
                    let name = RepoName::new(*name).map_err(|e| err(no, e.to_string()))?;
                    let node: u32 = node.parse().map_err(|_| err(no, format!("bad node id {node:?}")))?;
                    projects.push((name, node));
                }
                ["e", a, b, w] => {
                    let a: u32 = a.parse().map_err(|_| err(no, format!("bad node id {a:?}")))?;
                    let b: u32 = b.parse().map_err(|_| err(no, format!("bad node id {b:?}")))?;
                    let w: f64 = w.parse().map_err(|_| err(no, format!("bad weight {w:?}")))?;
                    if !(w > 0.0 && w.is_finite()) {
                        return Err(err(no, format!("non-positive weight {w}")));
                    }
                    edges.push((no, a, b, w));
                }
                _ => return Err(err(no, format!("unrecognized graph line {line:?}"))),
            }
        }
        let n = nodes.len() as u32;
        if let Some((_, node)) = projects.iter().find(|(_, node)| *node >= n) {
            return Err(err(0, format!("project mapped to missing node {node}")));
        }
        let mut graph = WeightedGraph::new(nodes.len());
        for (no, a, b, w) in edges {
            if a >= n || b >= n {
                return Err(err(no, format!("edge ({a},{b}) references a missing node")));
            }
            graph.add_edge(a, b, w);
        }
        Ok(CollapsedGraph {
            nodes,
            projects,
            graph,
            hyperedge_count,
        })
    }
}
