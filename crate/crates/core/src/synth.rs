//! Synthetic commit→project corpora with planted project groups.
//!
//! Every planted group has a root repository and members that clone its
//! history. On top of that the generator can add the two anomalies that
//! glue unrelated groups together in real data: backup repositories that
//! hold commits of many foreign groups, and single commits spanning a huge
//! number of projects.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collapse::ForkMap;
use crate::error::{Error, Result};
use crate::ingest::{shard_index, ShardIndex, SHARD_COUNT};
use crate::io::AtomicWriter;
use crate::model::{CommitHash, RepoName};
use crate::naming::ClusterMap;

pub const GOLD_FILE: &str = "gold.map";
pub const FORKS_FILE: &str = "forks.map";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupSizes {
    /// Uniform on `min..=max`.
    Uniform { min: usize, max: usize },
    /// Discrete power law `P(s) ∝ s^-exponent` on `min..=max`.
    PowerLaw { exponent: f64, min: usize, max: usize },
}

impl GroupSizes {
    fn bounds(&self) -> (usize, usize) {
        match *self {
            GroupSizes::Uniform { min, max } | GroupSizes::PowerLaw { min, max, .. } => (min, max),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match *self {
            GroupSizes::Uniform { min, max } => rng.gen_range(min..=max),
            GroupSizes::PowerLaw { exponent, min, max } => {
                // inverse CDF of the continuous law on [min, max + 1)
                let (lo, hi) = (min as f64, (max + 1) as f64);
                let u: f64 = rng.gen();
                let s = if (exponent - 1.0).abs() < 1e-12 {
                    lo * (hi / lo).powf(u)
                } else {
                    let e = 1.0 - exponent;
                    (lo.powf(e) + u * (hi.powf(e) - lo.powf(e))).powf(1.0 / e)
                };
                (s.floor() as usize).clamp(min, max)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_groups: usize,
    pub group_sizes: GroupSizes,
    pub commits_per_group: usize,
    /// Lower bound of the history fraction a non-root member holds. Each
    /// member clones a prefix whose length is drawn uniformly between this
    /// fraction and the full history; 1.0 means every member holds every
    /// group commit.
    pub share_fraction: f64,
    pub n_backup_repos: usize,
    /// Foreign groups each backup repository touches.
    pub backup_reach: usize,
    /// Commits a backup repository holds from each group it touches (taken
    /// from the start of that group's history).
    pub backup_commits: usize,
    pub n_mega_commits: usize,
    pub mega_commit_span: usize,
    /// Fraction of each group's non-root members declared as forks.
    pub fork_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_groups: 20,
            group_sizes: GroupSizes::Uniform { min: 5, max: 20 },
            commits_per_group: 20,
            share_fraction: 1.0,
            n_backup_repos: 0,
            backup_reach: 0,
            backup_commits: 1,
            n_mega_commits: 0,
            mega_commit_span: 2,
            fork_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (min, max) = self.group_sizes.bounds();
        if min == 0 || min > max {
            return bad(format!("group size range {min}..={max} is empty or includes 0"));
        }
        if let GroupSizes::PowerLaw { exponent, .. } = self.group_sizes {
            if !(exponent.is_finite() && exponent > 0.0) {
                return bad(format!("power-law exponent must be positive, got {exponent}"));
            }
        }
        if self.n_groups == 0 {
            return bad("at least one group is required".into());
        }
        if self.commits_per_group == 0 {
            return bad("commits_per_group must be positive".into());
        }
        if !(self.share_fraction > 0.0 && self.share_fraction <= 1.0) {
            return bad(format!("share_fraction must be in (0, 1], got {}", self.share_fraction));
        }
        if !(0.0..=1.0).contains(&self.fork_fraction) {
            return bad(format!("fork_fraction must be in [0, 1], got {}", self.fork_fraction));
        }
        if self.mega_commit_span < 2 {
            return bad("mega_commit_span must be at least 2".into());
        }
        if self.n_backup_repos > 0 {
            if self.backup_reach >= self.n_groups {
                return bad(format!(
                    "backup_reach {} needs more than {} groups",
                    self.backup_reach, self.n_groups
                ));
            }
            if self.backup_commits == 0 {
                return bad("backup_commits must be positive".into());
            }
        }
        Ok(())
    }
}

/// A generated corpus held in memory.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub projects: Vec<RepoName>,
    /// Planted group of every project, labelled by the group root.
    pub gold: ClusterMap,
    pub forks: ForkMap,
    pub commit_count: usize,
    /// `(commit, project index)` pairs sorted by commit then project name.
    pairs: Vec<(CommitHash, u32)>,
    /// Largest planted group.
    pub largest_group: usize,
}

impl SynthCorpus {
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// All pairs in file order (ascending commit, then project name).
    pub fn pairs(&self) -> impl Iterator<Item = (CommitHash, &RepoName)> + '_ {
        self.pairs.iter().map(|&(c, p)| (c, &self.projects[p as usize]))
    }

    pub fn shard_pairs(&self, shard: ShardIndex) -> impl Iterator<Item = (CommitHash, &RepoName)> + '_ {
        self.pairs().filter(move |(c, _)| shard_index(c) == shard)
    }

    /// Writes `c2p.0` … `c2p.31`, `gold.map` and `forks.map` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut writers = Vec::with_capacity(SHARD_COUNT);
        for shard in ShardIndex::all() {
            writers.push(AtomicWriter::create(&dir.join(shard.file_name()), false)?);
        }
        for (commit, project) in self.pairs() {
            writers[shard_index(&commit).value()].write_line(&format!("{commit};{project}"))?;
        }
        for w in writers {
            w.finish()?;
        }

        let mut gold = AtomicWriter::create(&dir.join(GOLD_FILE), false)?;
        for (p, g) in self.gold.iter() {
            gold.write_line(&format!("{p};{g}"))?;
        }
        gold.finish()?;

        let mut forks = AtomicWriter::create(&dir.join(FORKS_FILE), false)?;
        for (r, p) in self.forks.iter() {
            forks.write_line(&format!("{r};{p}"))?;
        }
        forks.finish()
    }
}

fn fresh_hash(rng: &mut ChaCha8Rng, seen: &mut HashSet<CommitHash>) -> CommitHash {
    loop {
        let h = CommitHash::from_bytes(rng.gen());
        if seen.insert(h) {
            return h;
        }
    }
}

fn name(s: String) -> RepoName {
    RepoName::new(s).expect("generated names are valid")
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // groups and their members; member 0 of each group is its root
    let mut projects: Vec<RepoName> = Vec::new();
    let mut groups: Vec<Vec<u32>> = Vec::with_capacity(cfg.n_groups);
    for g in 0..cfg.n_groups {
        let size = cfg.group_sizes.sample(&mut rng);
        let mut members = Vec::with_capacity(size);
        for i in 0..size {
            let id = projects.len() as u32;
            let repo = if i == 0 {
                format!("github.com/org{g:04}/lib{g:04}")
            } else if id % 10 == 7 {
                format!("gitlab.com/user{id:06}/lib{g:04}")
            } else {
                format!("github.com/user{id:06}/lib{g:04}")
            };
            projects.push(name(repo));
            members.push(id);
        }
        groups.push(members);
    }
    let n = projects.len();
    if cfg.n_mega_commits > 0 && cfg.mega_commit_span > n {
        return Err(Error::Config(format!(
            "mega_commit_span {} exceeds the {n} generated projects",
            cfg.mega_commit_span
        )));
    }

    let mut seen = HashSet::new();
    let mut pairs: Vec<(CommitHash, u32)> = Vec::new();
    let mut histories: Vec<Vec<CommitHash>> = Vec::with_capacity(groups.len());
    for members in &groups {
        let history: Vec<CommitHash> = (0..cfg.commits_per_group)
            .map(|_| fresh_hash(&mut rng, &mut seen))
            .collect();
        for (i, &m) in members.iter().enumerate() {
            let len = if i == 0 || cfg.share_fraction >= 1.0 {
                history.len()
            } else {
                let f = rng.gen_range(cfg.share_fraction..=1.0);
                ((f * history.len() as f64).round() as usize).clamp(1, history.len())
            };
            pairs.extend(history[..len].iter().map(|&c| (c, m)));
        }
        histories.push(history);
    }

    // backup repositories: non-root members that also store foreign history
    let candidates: Vec<(usize, u32)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, ms)| ms[1..].iter().map(move |&m| (g, m)))
        .collect();
    if cfg.n_backup_repos > candidates.len() {
        return Err(Error::Config(format!(
            "{} backup repos requested but only {} non-root projects exist",
            cfg.n_backup_repos,
            candidates.len()
        )));
    }
    let mut backups = HashSet::new();
    for idx in sample(&mut rng, candidates.len(), cfg.n_backup_repos).into_iter() {
        let (home, repo) = candidates[idx];
        backups.insert(repo);
        let mut reached = 0;
        for g in sample(&mut rng, cfg.n_groups, cfg.backup_reach + 1).into_iter() {
            if g == home || reached == cfg.backup_reach {
                continue;
            }
            reached += 1;
            let take = cfg.backup_commits.min(histories[g].len());
            pairs.extend(histories[g][..take].iter().map(|&c| (c, repo)));
        }
    }

    for _ in 0..cfg.n_mega_commits {
        let c = fresh_hash(&mut rng, &mut seen);
        for p in sample(&mut rng, n, cfg.mega_commit_span).into_iter() {
            pairs.push((c, p as u32));
        }
    }

    // declared forks, sometimes chained through an earlier fork
    let mut forks = ForkMap::new();
    for members in &groups {
        let eligible: Vec<u32> = members[1..].iter().copied().filter(|m| !backups.contains(m)).collect();
        let count = ((cfg.fork_fraction * eligible.len() as f64).round() as usize).min(eligible.len());
        let mut parents = vec![members[0]];
        for idx in sample(&mut rng, eligible.len(), count).into_iter() {
            let fork = eligible[idx];
            let parent = if rng.gen_bool(0.5) {
                members[0]
            } else {
                parents[rng.gen_range(0..parents.len())]
            };
            forks
                .insert(projects[fork as usize].clone(), projects[parent as usize].clone())
                .expect("fresh fork declarations");
            parents.push(fork);
        }
    }

    let mut gold = ClusterMap::new();
    for members in &groups {
        let root = &projects[members[0] as usize];
        for &m in members {
            gold.insert(projects[m as usize].clone(), root.clone());
        }
    }

    pairs.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| projects[a.1 as usize].cmp(&projects[b.1 as usize]))
    });
    pairs.dedup();

    Ok(SynthCorpus {
        largest_group: groups.iter().map(Vec::len).max().unwrap_or(0),
        commit_count: seen.len(),
        projects,
        gold,
        forks,
        pairs,
    })
}
