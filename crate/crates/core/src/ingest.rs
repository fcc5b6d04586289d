//! Reading sharded `commit;project` pair files and grouping them by commit.
//!
//! Pair files hold one `HASH;REPO_NAME` line per pair, sorted ascending by
//! hash. The corpus is split over 32 shard files `c2p.0` … `c2p.31` keyed by
//! the top five bits of the commit's first byte, so every shard can be
//! processed on its own.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::Lines;
use crate::model::{CommitGroup, CommitHash, Interner, ProjectId, RepoName};

pub const SHARD_COUNT: usize = 32;
pub const SHARD_PREFIX: &str = "c2p.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub commit: CommitHash,
    pub project: RepoName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShardIndex(u8);

impl ShardIndex {
    pub fn new(value: u8) -> Option<Self> {
        ((value as usize) < SHARD_COUNT).then_some(ShardIndex(value))
    }

    pub fn value(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ShardIndex> {
        (0..SHARD_COUNT as u8).map(ShardIndex)
    }

    pub fn file_name(self) -> String {
        format!("{SHARD_PREFIX}{}", self.0)
    }
}

impl fmt::Display for ShardIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Top five bits of the first hash byte.
pub fn shard_index(commit: &CommitHash) -> ShardIndex {
    ShardIndex((commit.as_bytes()[0] >> 3) & 0x1f)
}

/// Parses one `HASH;REPO_NAME` line. Only the first `;` separates, so a
/// project containing `;` is rejected by name validation.
pub fn parse_pair_line(line: &str) -> std::result::Result<PairRecord, String> {
    let (hash, name) = line
        .split_once(';')
        .ok_or_else(|| "expected `commit;project`".to_string())?;
    let commit = CommitHash::parse(hash).map_err(|_| format!("malformed commit hash {hash:?}"))?;
    let project = RepoName::new(name).map_err(|_| format!("malformed project name {name:?}"))?;
    Ok(PairRecord { commit, project })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberedRecord {
    pub line: u64,
    pub record: PairRecord,
}

/// Streams parsed records out of one pair file.
pub struct PairReader {
    lines: Lines,
    source: String,
}

impl PairReader {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(PairReader {
            lines: Lines::open(path)?,
            source: path.display().to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl Iterator for PairReader {
    type Item = Result<NumberedRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.lines.next_line() {
            Ok(None) => None,
            Ok(Some((line, text))) => Some(
                parse_pair_line(text)
                    .map(|record| NumberedRecord { line, record })
                    .map_err(|message| Error::Parse {
                        path: self.source.clone(),
                        line,
                        message,
                    }),
            ),
            Err(e) => Some(Err(e)),
        }
    }
}

/// Groups a hash-sorted record stream into one [`CommitGroup`] per commit,
/// interning project names on the way. Holds at most one group in memory.
pub struct GroupByCommit<'a, I> {
    records: I,
    interner: &'a mut Interner,
    source: String,
    pending: Option<NumberedRecord>,
    last: Option<CommitHash>,
    failed: bool,
}

pub fn group_by_commit<I>(records: I, interner: &mut Interner, source: impl Into<String>) -> GroupByCommit<'_, I>
where
    I: Iterator<Item = Result<NumberedRecord>>,
{
    GroupByCommit {
        records,
        interner,
        source: source.into(),
        pending: None,
        last: None,
        failed: false,
    }
}

impl<I> GroupByCommit<'_, I>
where
    I: Iterator<Item = Result<NumberedRecord>>,
{
    pub fn interner(&self) -> &Interner {
        self.interner
    }

    fn pull(&mut self) -> Option<Result<NumberedRecord>> {
        self.pending.take().map(Ok).or_else(|| self.records.next())
    }

    fn next_group(&mut self) -> Option<Result<CommitGroup>> {
        let first = match self.pull()? {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let commit = first.record.commit;
        if let Some(prev) = self.last {
            if commit <= prev {
                return Some(Err(Error::SortViolation {
                    path: self.source.clone(),
                    line: first.line,
                    previous: prev.to_hex(),
                    current: commit.to_hex(),
                }));
            }
        }
        self.last = Some(commit);
        let mut members: Vec<ProjectId> = vec![self.interner.intern_name(&first.record.project)];
        loop {
            match self.records.next() {
                None => break,
                Some(Err(e)) => return Some(Err(e)),
                Some(Ok(r)) if r.record.commit == commit => {
                    members.push(self.interner.intern_name(&r.record.project));
                }
                Some(Ok(r)) => {
                    self.pending = Some(r);
                    break;
                }
            }
        }
        Some(Ok(CommitGroup::new(commit, members)))
    }
}

impl<I> Iterator for GroupByCommit<'_, I>
where
    I: Iterator<Item = Result<NumberedRecord>>,
{
    type Item = Result<CommitGroup>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.next_group();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

/// Where the pair files come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSet {
    /// A directory holding some of `c2p.0` … `c2p.31` (optionally `.gz`).
    Directory(PathBuf),
    Files(Vec<PathBuf>),
}

impl InputSet {
    /// Resolves to the concrete list of files, in shard order for a
    /// directory. An input set with no files is a validation error.
    pub fn files(&self) -> Result<Vec<PathBuf>> {
        let files = match self {
            InputSet::Directory(dir) => discover_shards(dir)?,
            InputSet::Files(files) => {
                for f in files {
                    if !f.is_file() {
                        return Err(Error::Config(format!("input file {} does not exist", f.display())));
                    }
                }
                files.clone()
            }
        };
        if files.is_empty() {
            return Err(Error::Config("no input pair files".into()));
        }
        Ok(files)
    }
}

pub fn discover_shards(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "input directory {} does not exist",
            dir.display()
        )));
    }
    let mut out = Vec::new();
    for shard in ShardIndex::all() {
        let plain = dir.join(shard.file_name());
        let gz = dir.join(format!("{}.gz", shard.file_name()));
        if plain.is_file() {
            out.push(plain);
        } else if gz.is_file() {
            out.push(gz);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "no {SHARD_PREFIX}N shard files in {}",
            dir.display()
        )));
    }
    Ok(out)
}

/// Summary produced by a full validating pass over the inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub files: usize,
    pub pairs: u64,
    pub commits: u64,
    pub projects: usize,
    pub multi_project_commits: u64,
    /// Records whose commit belongs to a different shard than the file's
    /// `c2p.N` name says. Only counted for files with a shard-style name.
    pub misplaced_records: u64,
}

/// Parses every file, checking format and sort order.
pub fn check_inputs(files: &[PathBuf]) -> Result<IngestSummary> {
    let mut interner = Interner::new();
    let mut summary = IngestSummary {
        files: files.len(),
        ..Default::default()
    };
    for path in files {
        let expected = shard_of_path(path);
        let reader = PairReader::open(path)?;
        let source = reader.source().to_owned();
        let mut pairs = 0u64;
        let mut misplaced = 0u64;
        let counted = reader.inspect(|r| {
            if let Ok(r) = r {
                pairs += 1;
                if expected.is_some_and(|s| s != shard_index(&r.record.commit)) {
                    misplaced += 1;
                }
            }
        });
        for group in group_by_commit(counted, &mut interner, source) {
            let group = group?;
            summary.commits += 1;
            if group.len() > 1 {
                summary.multi_project_commits += 1;
            }
        }
        summary.pairs += pairs;
        summary.misplaced_records += misplaced;
    }
    summary.projects = interner.len();
    Ok(summary)
}

/// Shard number encoded in a `c2p.N` / `c2p.N.gz` file name.
pub fn shard_of_path(path: &Path) -> Option<ShardIndex> {
    let name = path.file_name()?.to_str()?;
    let name = name.strip_suffix(".gz").unwrap_or(name);
    let n: u8 = name.strip_prefix(SHARD_PREFIX)?.parse().ok()?;
    ShardIndex::new(n)
}
