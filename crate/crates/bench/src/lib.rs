//! Fixtures shared by the benchmarks.

use std::path::{Path, PathBuf};

use repolink_core::ingest::InputSet;
use repolink_core::synth::{generate_corpus, GroupSizes, SynthConfig};
use repolink_core::Result;

/// A corpus of `n_groups` groups of 50 projects with a few backups and
/// mega-commits, so both filters and Louvain have something to do.
pub fn bench_config(n_groups: usize, commits_per_group: usize) -> SynthConfig {
    SynthConfig {
        n_groups,
        group_sizes: GroupSizes::Uniform { min: 50, max: 50 },
        commits_per_group,
        n_backup_repos: n_groups / 40,
        backup_reach: 20,
        backup_commits: 10,
        n_mega_commits: 2,
        mega_commit_span: n_groups * 10,
        fork_fraction: 0.3,
        seed: 42,
        ..SynthConfig::default()
    }
}

/// Writes the corpus into `dir` and returns its shard files.
pub fn write_corpus(dir: &Path, cfg: &SynthConfig) -> Result<Vec<PathBuf>> {
    generate_corpus(cfg)?.write(dir)?;
    InputSet::Directory(dir.to_path_buf()).files()
}
