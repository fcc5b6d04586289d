//! Cluster representatives and the published map formats.
//!
//! Internally clusters are keyed by plain repository names. The published
//! map rewrites names on the way out: `github.com/` is dropped and the
//! first remaining `/` becomes `_`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::collapse::UltimateParentMap;
use crate::error::{Error, Result};
use crate::io::{read_two_column, AtomicWriter};
use crate::model::{Clustering, RepoName};

const GITHUB_PREFIX: &str = "github.com/";

pub fn transform_name(name: &RepoName) -> String {
    let s = name.as_str();
    let s = s.strip_prefix(GITHUB_PREFIX).unwrap_or(s);
    s.replacen('/', "_", 1)
}

/// The shortest member name, ties broken by byte order.
pub fn cluster_name<'a, I>(members: I) -> Result<&'a RepoName>
where
    I: IntoIterator<Item = &'a RepoName>,
{
    members
        .into_iter()
        .min_by(|a, b| {
            a.as_str()
                .len()
                .cmp(&b.as_str().len())
                .then_with(|| a.as_str().as_bytes().cmp(b.as_str().as_bytes()))
        })
        .ok_or(Error::EmptyCluster)
}

/// A clustering keyed by repository name: every project mapped to a label
/// naming its cluster.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterMap {
    label: BTreeMap<RepoName, RepoName>,
}

impl ClusterMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, project: RepoName, label: RepoName) {
        self.label.insert(project, label);
    }

    /// Names each cluster of `clustering` with [`cluster_name`];
    /// `names[i]` is the name of project `i`.
    pub fn from_clustering(clustering: &Clustering, names: &[RepoName]) -> Result<Self> {
        if names.len() != clustering.universe_size() {
            return Err(Error::UniverseMismatch {
                expected: clustering.universe_size(),
                found: names.len(),
            });
        }
        let mut map = ClusterMap::new();
        for members in clustering.clusters() {
            let rep = cluster_name(members.iter().map(|p| &names[p.index()]))?.clone();
            for p in members {
                map.insert(names[p.index()].clone(), rep.clone());
            }
        }
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }

    pub fn get(&self, project: &str) -> Option<&RepoName> {
        self.label.get(project)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RepoName, &RepoName)> {
        self.label.iter()
    }

    pub fn projects(&self) -> impl Iterator<Item = &RepoName> {
        self.label.keys()
    }

    /// Members of each cluster, keyed by label.
    pub fn clusters(&self) -> BTreeMap<&RepoName, Vec<&RepoName>> {
        let mut out: BTreeMap<&RepoName, Vec<&RepoName>> = BTreeMap::new();
        for (p, l) in &self.label {
            out.entry(l).or_default().push(p);
        }
        out
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters().len()
    }

    pub fn largest_cluster_size(&self) -> usize {
        self.clusters().values().map(Vec::len).max().unwrap_or(0)
    }

    /// Relabels every cluster with its [`cluster_name`].
    pub fn normalized(&self) -> Self {
        let mut out = ClusterMap::new();
        for members in self.clusters().values() {
            let rep = cluster_name(members.iter().copied()).expect("clusters are non-empty");
            for &m in members {
                out.insert(m.clone(), rep.clone());
            }
        }
        out
    }

    /// Id-based view over the projects in name order.
    pub fn to_clustering(&self) -> (Vec<RepoName>, Clustering) {
        let names: Vec<RepoName> = self.label.keys().cloned().collect();
        let labels: Vec<&RepoName> = self.label.values().collect();
        (names, Clustering::from_labels(&labels))
    }

    /// Reads `PROJECT;LABEL` lines.
    pub fn read(path: &Path) -> Result<Self> {
        let mut map = ClusterMap::new();
        let shown = path.display().to_string();
        read_two_column(path, |no, p, l| {
            let p = RepoName::new(p)?;
            let l = RepoName::new(l)?;
            if map.label.insert(p.clone(), l).is_some() {
                return Err(Error::Parse {
                    path: shown.clone(),
                    line: no,
                    message: format!("{p} listed twice"),
                });
            }
            Ok(())
        })?;
        Ok(map)
    }

    /// Writes the intermediate cluster file: untransformed
    /// `PROJECT;REPRESENTATIVE` lines sorted by project.
    pub fn write_clusters(&self, path: &Path) -> Result<()> {
        let normalized = self.normalized();
        let mut w = AtomicWriter::create(path, false)?;
        for (p, l) in normalized.iter() {
            w.write_line(&format!("{p};{l}"))?;
        }
        w.finish()
    }
}

/// Writes the published map: `TRANSFORMED_PROJECT;TRANSFORMED_CLUSTER_NAME`
/// for every project, sorted by the first column.
pub fn write_map(map: &ClusterMap, path: &Path, gzip: bool) -> Result<()> {
    let mut w = AtomicWriter::create(path, gzip)?;
    for line in map_lines(map) {
        w.write_line(&line)?;
    }
    w.finish()
}

pub fn map_lines(map: &ClusterMap) -> Vec<String> {
    let normalized = map.normalized();
    let mut rows: Vec<(String, &RepoName, String)> = normalized
        .iter()
        .map(|(p, l)| (transform_name(p), p, transform_name(l)))
        .collect();
    rows.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()).then_with(|| a.1.cmp(b.1)));
    rows.into_iter().map(|(p, _, l)| format!("{p};{l}")).collect()
}

/// Writes the ultimate-parent file: `REPO;ULTIMATE_PARENT` for every forked
/// repository.
pub fn write_fork_map(upm: &UltimateParentMap, path: &Path, gzip: bool) -> Result<()> {
    upm.write(path, gzip)
}
