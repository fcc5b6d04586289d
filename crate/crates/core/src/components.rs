//! Connected components of the project graph induced by shared commits.
//!
//! A commit held by `n` projects is expanded into `n - 1` links from its
//! smallest project id to every other member. Links are never materialized
//! globally: they stream straight into a [`DisjointSet`], so memory scales
//! with the number of projects.

use crate::error::{Error, Result};
use crate::model::{Clustering, CommitGroup, ProjectId};

/// Undirected link with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    a: ProjectId,
    b: ProjectId,
}

impl Link {
    /// Canonical link between two distinct projects; `None` for a self-pair.
    pub fn new(x: ProjectId, y: ProjectId) -> Option<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(Link { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(Link { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn a(&self) -> ProjectId {
        self.a
    }

    pub fn b(&self) -> ProjectId {
        self.b
    }
}

/// Star expansion of one commit group: its smallest member linked to each
/// of the others. Single-project groups yield nothing.
pub fn hyperedge_to_links(group: &CommitGroup) -> impl Iterator<Item = Link> + '_ {
    let projects = group.projects();
    let hub = projects.first().copied();
    projects
        .iter()
        .skip(1)
        .filter_map(move |&p| Link::new(hub.expect("non-empty when iterating"), p))
}

/// Union by rank with path compression.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(size: usize) -> Self {
        DisjointSet {
            parent: (0..size as u32).collect(),
            rank: vec![0; size],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Grows the universe with fresh singletons.
    pub fn grow(&mut self, size: usize) {
        let old = self.parent.len();
        if size > old {
            self.parent.extend(old as u32..size as u32);
            self.rank.resize(size, 0);
        }
    }

    fn check(&self, id: ProjectId) -> Result<usize> {
        let i = id.index();
        if i < self.parent.len() {
            Ok(i)
        } else {
            Err(Error::OutOfBounds {
                id: id.0,
                universe: self.parent.len(),
            })
        }
    }

    pub fn find(&mut self, id: ProjectId) -> Result<ProjectId> {
        let i = self.check(id)?;
        Ok(ProjectId(self.root(i as u32)))
    }

    /// Merges the sets of `a` and `b`; returns whether they were distinct.
    pub fn union(&mut self, a: ProjectId, b: ProjectId) -> Result<bool> {
        let a = self.check(a)? as u32;
        let b = self.check(b)? as u32;
        Ok(self.union_unchecked(a, b))
    }

    fn root(&mut self, x: u32) -> u32 {
        let mut r = x;
        while self.parent[r as usize] != r {
            r = self.parent[r as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != r {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = r;
            cur = next;
        }
        r
    }

    fn union_unchecked(&mut self, a: u32, b: u32) -> bool {
        let ra = self.root(a);
        let rb = self.root(b);
        if ra == rb {
            return false;
        }
        let (hi, lo) = match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => (rb, ra),
            std::cmp::Ordering::Greater => (ra, rb),
            std::cmp::Ordering::Equal => {
                self.rank[ra as usize] += 1;
                (ra, rb)
            }
        };
        self.parent[lo as usize] = hi;
        true
    }

    /// Feeds a commit group's star links into the structure. Returns the
    /// number of links applied.
    pub fn absorb(&mut self, group: &CommitGroup) -> Result<usize> {
        if let Some(&max) = group.projects().last() {
            self.check(max)?;
        }
        let mut n = 0;
        for link in hyperedge_to_links(group) {
            self.union_unchecked(link.a.0, link.b.0);
            n += 1;
        }
        Ok(n)
    }

    pub fn to_clustering(&mut self) -> Clustering {
        let roots: Vec<u32> = (0..self.parent.len() as u32).map(|i| self.root(i)).collect();
        Clustering::from_labels(&roots)
    }
}

/// Components of the graph spanned by `groups` over `0..universe_size`.
pub fn connected_components<I>(groups: I, universe_size: usize) -> Result<Clustering>
where
    I: IntoIterator<Item = Result<CommitGroup>>,
{
    let mut ds = DisjointSet::new(universe_size);
    for g in groups {
        ds.absorb(&g?)?;
    }
    Ok(ds.to_clustering())
}

/// Combines per-shard component results: every shard cluster is unioned
/// into one structure, which yields the components of the union of all
/// shards' edges.
pub fn merge_shard_components(shards: &[Clustering]) -> Result<Clustering> {
    let Some(first) = shards.first() else {
        return Ok(Clustering::singletons(0));
    };
    let n = first.universe_size();
    let mut ds = DisjointSet::new(n);
    for shard in shards {
        if shard.universe_size() != n {
            return Err(Error::UniverseMismatch {
                expected: n,
                found: shard.universe_size(),
            });
        }
        for (i, c) in shard.assignment().iter().enumerate() {
            if c.index() != i {
                ds.union_unchecked(c.0, i as u32);
            }
        }
    }
    Ok(ds.to_clustering())
}
