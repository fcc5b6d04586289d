//! Scoring clusterings: split rates against fork-parent groups, directional
//! split rates between two clusterings, and the adjusted Rand index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::collapse::UltimateParentMap;
use crate::error::{Error, Result};
use crate::io::AtomicWriter;
use crate::model::{Clustering, RepoName};
use crate::naming::ClusterMap;

/// Reference groups: each ultimate parent with all of its known forks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldGrouping {
    groups: BTreeMap<RepoName, BTreeSet<RepoName>>,
}

impl GoldGrouping {
    pub fn from_ultimate_map(upm: &UltimateParentMap) -> Self {
        let mut groups: BTreeMap<RepoName, BTreeSet<RepoName>> = BTreeMap::new();
        for (repo, root) in upm.iter() {
            let g = groups.entry(root.clone()).or_default();
            g.insert(root.clone());
            g.insert(repo.clone());
        }
        GoldGrouping { groups }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(Self::from_ultimate_map(&UltimateParentMap::read(path)?))
    }

    /// Rewrites every name, e.g. into the published map's name space.
    pub fn map_names(&self, mut f: impl FnMut(&RepoName) -> RepoName) -> Self {
        let mut groups: BTreeMap<RepoName, BTreeSet<RepoName>> = BTreeMap::new();
        for (parent, members) in &self.groups {
            groups.entry(f(parent)).or_default().extend(members.iter().map(&mut f));
        }
        GoldGrouping { groups }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> impl Iterator<Item = (&RepoName, &BTreeSet<RepoName>)> {
        self.groups.iter()
    }

    pub fn repo_count(&self) -> usize {
        self.groups.values().map(BTreeSet::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRow {
    pub group: RepoName,
    /// Members of the gold group present in the predicted clustering.
    pub member_count: usize,
    /// How many of them share the most common predicted cluster.
    pub in_largest: usize,
    pub split: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Sorted by member count, largest first.
    pub rows: Vec<SplitRow>,
    pub total_groups: usize,
    pub split_groups: usize,
    pub total_repos: usize,
    /// Repositories belonging to split groups.
    pub split_repo_count: usize,
    /// Repositories outside their group's largest predicted cluster.
    pub misplaced_repos: usize,
    /// Gold members absent from the predicted clustering.
    pub missing: usize,
    /// Gold groups with fewer than two members present, hence not scored.
    pub unevaluable_groups: usize,
}

impl EvalReport {
    /// Fraction of scored repositories that sit in split groups.
    pub fn split_rate(&self) -> f64 {
        ratio(self.split_repo_count, self.total_repos)
    }

    pub fn group_split_rate(&self) -> f64 {
        ratio(self.split_groups, self.total_groups)
    }

    /// `group;size;largest;split` lines.
    pub fn machine_lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| format!("{};{};{};{}", r.group, r.member_count, r.in_largest, r.split))
            .collect()
    }

    /// Human-readable summary with the `limit` largest split groups.
    pub fn table(&self, limit: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "gold groups scored: {} ({} split, {:.2}%)",
            self.total_groups,
            self.split_groups,
            100.0 * self.group_split_rate()
        );
        let _ = writeln!(
            s,
            "repositories scored: {} ({} in split groups, {:.2}%; {} outside their largest cluster)",
            self.total_repos,
            self.split_repo_count,
            100.0 * self.split_rate(),
            self.misplaced_repos
        );
        let _ = writeln!(
            s,
            "missing from prediction: {} repos; unscored groups: {}",
            self.missing, self.unevaluable_groups
        );
        let _ = writeln!(s, "{:>10} {:>10}  parent", "in split", "lrgst grp");
        for r in self.rows.iter().filter(|r| r.split).take(limit) {
            let _ = writeln!(s, "{:>10} {:>10}  {}", r.member_count, r.in_largest, r.group);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = AtomicWriter::create(path, false)?;
        for line in self.machine_lines() {
            w.write_line(&line)?;
        }
        w.finish()
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores `predicted` against the gold fork groups. Gold members missing
/// from the prediction are counted and skipped.
pub fn split_report(gold: &GoldGrouping, predicted: &ClusterMap) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::Eval("gold grouping is empty".into()));
    }
    let mut report = EvalReport {
        rows: Vec::new(),
        total_groups: 0,
        split_groups: 0,
        total_repos: 0,
        split_repo_count: 0,
        misplaced_repos: 0,
        missing: 0,
        unevaluable_groups: 0,
    };
    for (parent, members) in gold.groups() {
        let mut cells: HashMap<&RepoName, usize> = HashMap::new();
        let mut present = 0;
        for m in members {
            match predicted.get(m.as_str()) {
                Some(label) => {
                    *cells.entry(label).or_insert(0) += 1;
                    present += 1;
                }
                None => report.missing += 1,
            }
        }
        if present < 2 {
            report.unevaluable_groups += 1;
            continue;
        }
        let in_largest = cells.values().copied().max().unwrap_or(0);
        let split = cells.len() >= 2;
        report.total_groups += 1;
        report.total_repos += present;
        report.misplaced_repos += present - in_largest;
        if split {
            report.split_groups += 1;
            report.split_repo_count += present;
        }
        report.rows.push(SplitRow {
            group: parent.clone(),
            member_count: present,
            in_largest,
            split,
        });
    }
    if report.total_groups == 0 {
        log::warn!("no gold group has two or more members in the predicted clustering");
    }
    if report.missing > 0 {
        log::warn!(
            "{} gold repositories not found in the predicted clustering",
            report.missing
        );
    }
    report
        .rows
        .sort_by(|a, b| b.member_count.cmp(&a.member_count).then_with(|| a.group.cmp(&b.group)));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSplit {
    pub split_groups: usize,
    pub total_groups: usize,
    pub rate: f64,
}

/// How many `reference` clusters are split by `candidate`, looking only at
/// projects both clusterings contain. Directional: run it both ways.
pub fn cross_split_rate(reference: &ClusterMap, candidate: &ClusterMap) -> Result<CrossSplit> {
    let mut labels: HashMap<&RepoName, (Option<&RepoName>, bool)> = HashMap::new();
    let mut matched = 0usize;
    for (project, ref_label) in reference.iter() {
        let Some(cand) = candidate.get(project.as_str()) else {
            continue;
        };
        matched += 1;
        let entry = labels.entry(ref_label).or_insert((None, false));
        match entry.0 {
            None => entry.0 = Some(cand),
            Some(first) if first != cand => entry.1 = true,
            Some(_) => {}
        }
    }
    if matched == 0 {
        return Err(Error::Eval("the two clusterings share no projects".into()));
    }
    let total_groups = labels.len();
    let split_groups = labels.values().filter(|(_, split)| *split).count();
    Ok(CrossSplit {
        split_groups,
        total_groups,
        rate: ratio(split_groups, total_groups),
    })
}

fn pairs(n: u64) -> f64 {
    (n as f64) * (n.saturating_sub(1) as f64) / 2.0
}

/// Adjusted Rand index between two clusterings of the same universe.
pub fn adjusted_rand_index(a: &Clustering, b: &Clustering) -> Result<f64> {
    if a.universe_size() != b.universe_size() {
        return Err(Error::UniverseMismatch {
            expected: a.universe_size(),
            found: b.universe_size(),
        });
    }
    let n = a.universe_size() as u64;
    let mut cells: HashMap<(u32, u32), u64> = HashMap::new();
    let mut rows: HashMap<u32, u64> = HashMap::new();
    let mut cols: HashMap<u32, u64> = HashMap::new();
    for (x, y) in a.assignment().iter().zip(b.assignment()) {
        *cells.entry((x.0, y.0)).or_insert(0) += 1;
        *rows.entry(x.0).or_insert(0) += 1;
        *cols.entry(y.0).or_insert(0) += 1;
    }
    let index: f64 = cells.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// ARI between two name-keyed clusterings, which must cover exactly the
/// same projects.
pub fn adjusted_rand_index_maps(a: &ClusterMap, b: &ClusterMap) -> Result<f64> {
    if a.len() != b.len() || a.projects().zip(b.projects()).any(|(x, y)| x != y) {
        return Err(Error::Eval(format!(
            "clusterings cover different projects ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    adjusted_rand_index(&a.to_clustering().1, &b.to_clustering().1)
}
