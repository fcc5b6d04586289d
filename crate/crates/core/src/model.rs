//! Domain types shared by every stage: repository names, commit hashes,
//! dense project ids and the interner that issues them, commit groups and
//! clusterings.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A forge-style repository path such as `github.com/owner/name`.
///
/// Names are non-empty and contain no whitespace and no `;` (the field
/// delimiter of every file format used by the pipeline).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RepoName(String);

impl RepoName {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if Self::is_valid(&name) {
            Ok(RepoName(name))
        } else {
            Err(Error::InvalidName(name))
        }
    }

    pub fn is_valid(name: &str) -> bool {
        !name.is_empty() && !name.chars().any(|c| c == ';' || c.is_whitespace())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for RepoName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for RepoName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RepoName::new(s)
    }
}

impl AsRef<str> for RepoName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for RepoName {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// A git commit id: 20 raw SHA1 bytes. Ordering of the raw bytes matches
/// the ordering of the lowercase hex form.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommitHash([u8; 20]);

impl CommitHash {
    pub const HEX_LEN: usize = 40;

    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        CommitHash(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    /// Parses 40 lowercase hex characters.
    pub fn parse(hex: &str) -> Result<Self> {
        let raw = hex.as_bytes();
        if raw.len() != Self::HEX_LEN {
            return Err(Error::InvalidHash(hex.to_owned()));
        }
        let mut out = [0u8; 20];
        for (i, pair) in raw.chunks_exact(2).enumerate() {
            match (nibble(pair[0]), nibble(pair[1])) {
                (Some(hi), Some(lo)) => out[i] = (hi << 4) | lo,
                _ => return Err(Error::InvalidHash(hex.to_owned())),
            }
        }
        Ok(CommitHash(out))
    }

    pub fn to_hex(&self) -> String {
        self.to_string()
    }
}

fn nibble(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        _ => None,
    }
}

impl fmt::Display for CommitHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for CommitHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CommitHash({self})")
    }
}

impl FromStr for CommitHash {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CommitHash::parse(s)
    }
}

/// Dense id issued by an [`Interner`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProjectId(pub u32);

impl ProjectId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Append-only bijection between repository names and dense ids.
///
/// Ids are handed out in first-seen order, so identical inputs always yield
/// identical ids. Reads take `&self` and writes `&mut self`; wrap it in a
/// lock to share one interner between threads.
#[derive(Debug, Default, Clone)]
pub struct Interner {
    names: Vec<RepoName>,
    ids: HashMap<RepoName, ProjectId>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Result<ProjectId> {
        if let Some(&id) = self.ids.get(name) {
            return Ok(id);
        }
        let name = RepoName::new(name)?;
        Ok(self.insert_new(name))
    }

    pub fn intern_name(&mut self, name: &RepoName) -> ProjectId {
        match self.ids.get(name.as_str()) {
            Some(&id) => id,
            None => self.insert_new(name.clone()),
        }
    }

    fn insert_new(&mut self, name: RepoName) -> ProjectId {
        let id = ProjectId(u32::try_from(self.names.len()).expect("more than u32::MAX projects"));
        self.names.push(name.clone());
        self.ids.insert(name, id);
        id
    }

    pub fn resolve(&self, id: ProjectId) -> Result<&RepoName> {
        self.names.get(id.index()).ok_or(Error::UnknownId(id.0))
    }

    pub fn get(&self, name: &str) -> Option<ProjectId> {
        self.ids.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[RepoName] {
        &self.names
    }
}

/// One commit and the projects that contain it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitGroup {
    pub commit: CommitHash,
    projects: Vec<ProjectId>,
}

impl CommitGroup {
    /// Builds a group, sorting and deduplicating the members.
    pub fn new(commit: CommitHash, mut projects: Vec<ProjectId>) -> Self {
        projects.sort_unstable();
        projects.dedup();
        CommitGroup { commit, projects }
    }

    pub fn projects(&self) -> &[ProjectId] {
        &self.projects
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    pub fn into_projects(self) -> Vec<ProjectId> {
        self.projects
    }
}

/// Total assignment of projects `0..universe_size` to clusters. A cluster is
/// labelled by its smallest member id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clustering {
    assignment: Vec<ProjectId>,
}

impl Clustering {
    pub fn singletons(universe_size: usize) -> Self {
        Clustering {
            assignment: (0..universe_size as u32).map(ProjectId).collect(),
        }
    }

    /// Canonicalizes arbitrary per-project labels: projects sharing a label
    /// end up in one cluster, named by its minimum project id.
    pub fn from_labels<L: Eq + std::hash::Hash>(labels: &[L]) -> Self {
        let mut first: HashMap<&L, ProjectId> = HashMap::with_capacity(labels.len());
        let assignment = labels
            .iter()
            .enumerate()
            .map(|(i, l)| *first.entry(l).or_insert(ProjectId(i as u32)))
            .collect();
        Clustering { assignment }
    }

    pub fn universe_size(&self) -> usize {
        self.assignment.len()
    }

    pub fn cluster_of(&self, id: ProjectId) -> Result<ProjectId> {
        self.assignment.get(id.index()).copied().ok_or(Error::OutOfBounds {
            id: id.0,
            universe: self.assignment.len(),
        })
    }

    pub fn assignment(&self) -> &[ProjectId] {
        &self.assignment
    }

    /// Members of each cluster, keyed by cluster id, in ascending order.
    pub fn clusters(&self) -> Vec<Vec<ProjectId>> {
        let mut slot = vec![usize::MAX; self.assignment.len()];
        let mut out: Vec<Vec<ProjectId>> = Vec::new();
        for (i, c) in self.assignment.iter().enumerate() {
            let s = &mut slot[c.index()];
            if *s == usize::MAX {
                *s = out.len();
                out.push(Vec::new());
            }
            out[*s].push(ProjectId(i as u32));
        }
        out
    }

    pub fn cluster_count(&self) -> usize {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(i, c)| c.index() == *i)
            .count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.assignment.len()];
        for c in &self.assignment {
            sizes[c.index()] += 1;
        }
        sizes.retain(|&s| s > 0);
        sizes
    }

    pub fn largest_cluster_size(&self) -> usize {
        self.cluster_sizes().into_iter().max().unwrap_or(0)
    }
}
