//! Dropping problematic projects and commits before clustering.
//!
//! Two filters, applied in this order: known-bad projects are removed from
//! every commit group, then groups spanning more than `max_commit_span`
//! projects are dropped whole.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::Lines;
use crate::model::{CommitGroup, ProjectId, RepoName};

pub const DEFAULT_MAX_COMMIT_SPAN: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    pub max_commit_span: usize,
    pub bad_projects: BTreeSet<RepoName>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_commit_span: DEFAULT_MAX_COMMIT_SPAN,
            bad_projects: BTreeSet::new(),
        }
    }
}

impl FilterConfig {
    /// A configuration that lets everything through.
    pub fn disabled() -> Self {
        FilterConfig {
            max_commit_span: usize::MAX,
            bad_projects: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_commit_span < 2 {
            return Err(Error::Config(format!(
                "max commit span must be at least 2, got {}",
                self.max_commit_span
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.max_commit_span == usize::MAX && self.bad_projects.is_empty()
    }
}

/// Reads a bad-project list: one repository name per line, `#` comments and
/// blank lines ignored.
pub fn read_bad_projects(path: &Path) -> Result<BTreeSet<RepoName>> {
    let mut out = BTreeSet::new();
    let mut lines = Lines::open(path)?;
    while let Some((no, line)) = lines.next_line()? {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let name = RepoName::new(line).map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: no,
            message: format!("invalid repository name {line:?}"),
        })?;
        out.insert(name);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterStats {
    /// Groups dropped for exceeding the span limit.
    pub span_dropped_groups: u64,
    /// Project occurrences removed because the project is on the bad list.
    pub bad_project_occurrences: u64,
    /// Groups left empty after bad-project removal.
    pub bad_dropped_groups: u64,
}

impl FilterStats {
    pub fn add(&mut self, other: &FilterStats) {
        self.span_dropped_groups += other.span_dropped_groups;
        self.bad_project_occurrences += other.bad_project_occurrences;
        self.bad_dropped_groups += other.bad_dropped_groups;
    }
}

/// Removes bad projects from the group. A group that loses every member is
/// dropped; a group reduced to one member is kept.
pub fn filter_bad_projects(
    group: CommitGroup,
    bad: &HashSet<ProjectId>,
    stats: &mut FilterStats,
) -> Option<CommitGroup> {
    if bad.is_empty() || !group.projects().iter().any(|p| bad.contains(p)) {
        return Some(group);
    }
    let commit = group.commit;
    let before = group.len();
    let kept: Vec<ProjectId> = group.into_projects().into_iter().filter(|p| !bad.contains(p)).collect();
    stats.bad_project_occurrences += (before - kept.len()) as u64;
    if kept.is_empty() {
        stats.bad_dropped_groups += 1;
        None
    } else {
        Some(CommitGroup::new(commit, kept))
    }
}

/// Drops the group when it spans more than `max_commit_span` projects.
pub fn filter_commit_span(group: CommitGroup, max_commit_span: usize, stats: &mut FilterStats) -> Option<CommitGroup> {
    if group.len() > max_commit_span {
        stats.span_dropped_groups += 1;
        None
    } else {
        Some(group)
    }
}

/// Both filters bound to one interner's id space.
///
/// Bad project ids are learned incrementally through [`observe`] so the
/// filter works while names are still being interned by a streaming reader.
///
/// [`observe`]: GroupFilter::observe
#[derive(Debug, Clone)]
pub struct GroupFilter<'a> {
    config: &'a FilterConfig,
    bad_ids: HashSet<ProjectId>,
    pub stats: FilterStats,
}

impl<'a> GroupFilter<'a> {
    pub fn new(config: &'a FilterConfig) -> Self {
        GroupFilter {
            config,
            bad_ids: HashSet::new(),
            stats: FilterStats::default(),
        }
    }

    /// Registers a newly interned project.
    pub fn observe(&mut self, id: ProjectId, name: &RepoName) {
        if self.config.bad_projects.contains(name) {
            self.bad_ids.insert(id);
        }
    }

    pub fn apply(&mut self, group: CommitGroup) -> Option<CommitGroup> {
        let group = filter_bad_projects(group, &self.bad_ids, &mut self.stats)?;
        filter_commit_span(group, self.config.max_commit_span, &mut self.stats)
    }
}
