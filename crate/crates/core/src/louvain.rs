//! Deterministic Louvain modularity optimization.
//!
//! Each level starts from singleton communities, sweeps the nodes in
//! ascending id order moving each one to the neighbouring community with
//! the largest modularity gain (ties go to the smallest community id) until
//! a sweep makes no move, then collapses every community into a super-node.
//! The run stops at the first level that makes no move.
//!
//! Modularity uses the classic form
//! `Q = Σ_c [ Σin_c / 2m − (Σtot_c / 2m)² ]`, where `Σin_c` is twice the
//! weight inside community `c` (self-loops included twice) and `Σtot_c` the
//! sum of member degrees.

use rayon::prelude::*;

use crate::collapse::WeightedGraph;
use crate::components::DisjointSet;
use crate::error::{Error, Result};
use crate::model::{Clustering, ProjectId};

/// Upper bound on sweeps within one level. Exact gains guarantee
/// termination long before this; it only guards against float pathologies.
const MAX_SWEEPS: usize = 10_000;

/// Compressed adjacency of a [`WeightedGraph`], self-loops kept apart.
#[derive(Debug, Clone)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    self_loops: Vec<f64>,
    degrees: Vec<f64>,
}

impl Adjacency {
    fn new(g: &WeightedGraph) -> Self {
        let n = g.node_count();
        let mut counts = vec![0usize; n];
        let mut self_loops = vec![0.0; n];
        for (a, b, w) in g.edges() {
            if a == b {
                self_loops[a as usize] += w;
            } else {
                counts[a as usize] += 1;
                counts[b as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let total = *offsets.last().unwrap();
        let mut targets = vec![0u32; total];
        let mut weights = vec![0.0; total];
        let mut fill = offsets[..n].to_vec();
        for (a, b, w) in g.edges() {
            if a != b {
                targets[fill[a as usize]] = b;
                weights[fill[a as usize]] = w;
                fill[a as usize] += 1;
                targets[fill[b as usize]] = a;
                weights[fill[b as usize]] = w;
                fill[b as usize] += 1;
            }
        }
        Adjacency {
            offsets,
            targets,
            weights,
            self_loops,
            degrees: g.degrees(),
        }
    }

    fn neighbours(&self, node: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let range = self.offsets[node]..self.offsets[node + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }
}

/// Community assignment with the per-community aggregates the gain formula
/// needs. Community ids are node ids of the graph the partition lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    community: Vec<u32>,
    sigma_tot: Vec<f64>,
    sigma_in: Vec<f64>,
}

impl Partition {
    pub fn singletons(g: &WeightedGraph) -> Self {
        let n = g.node_count();
        Self::from_assignment(g, (0..n as u32).collect()).expect("identity assignment is valid")
    }

    /// Builds a partition from explicit labels (each below the node count),
    /// computing the aggregates from scratch.
    pub fn from_assignment(g: &WeightedGraph, community: Vec<u32>) -> Result<Self> {
        let n = g.node_count();
        if community.len() != n {
            return Err(Error::UniverseMismatch {
                expected: n,
                found: community.len(),
            });
        }
        if let Some(&c) = community.iter().find(|&&c| c as usize >= n) {
            return Err(Error::OutOfBounds { id: c, universe: n });
        }
        let mut sigma_tot = vec![0.0; n];
        let mut sigma_in = vec![0.0; n];
        for (a, b, w) in g.edges() {
            let (ca, cb) = (community[a as usize] as usize, community[b as usize] as usize);
            if a == b {
                sigma_tot[ca] += 2.0 * w;
                sigma_in[ca] += 2.0 * w;
            } else {
                sigma_tot[ca] += w;
                sigma_tot[cb] += w;
                if ca == cb {
                    sigma_in[ca] += 2.0 * w;
                }
            }
        }
        Ok(Partition {
            community,
            sigma_tot,
            sigma_in,
        })
    }

    pub fn community(&self, node: u32) -> u32 {
        self.community[node as usize]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.community
    }

    pub fn sigma_tot(&self, community: u32) -> f64 {
        self.sigma_tot[community as usize]
    }

    pub fn sigma_in(&self, community: u32) -> f64 {
        self.sigma_in[community as usize]
    }

    pub fn community_count(&self) -> usize {
        let mut seen = vec![false; self.community.len()];
        self.community
            .iter()
            .filter(|&&c| !std::mem::replace(&mut seen[c as usize], true))
            .count()
    }

    fn quality(&self, two_m: f64) -> f64 {
        self.sigma_in
            .iter()
            .zip(&self.sigma_tot)
            .map(|(&sin, &stot)| sin / two_m - (stot / two_m) * (stot / two_m))
            .sum()
    }
}

/// Modularity of `assignment` (node → community label below the node
/// count) on `g`.
pub fn modularity(g: &WeightedGraph, assignment: &[u32]) -> Result<f64> {
    let m = g.total_weight();
    if m <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    Ok(Partition::from_assignment(g, assignment.to_vec())?.quality(2.0 * m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LouvainConfig {
    /// A move is applied only when its modularity gain exceeds this.
    pub min_gain: f64,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        LouvainConfig { min_gain: 0.0 }
    }
}

/// One applied move, reported to observers after the partition is updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveEvent {
    pub node: u32,
    pub from: u32,
    pub to: u32,
    /// Modularity gain predicted by the gain formula.
    pub gain: f64,
}

/// Runs local-move sweeps until one sweep moves nothing. Returns whether
/// any node moved.
pub fn local_move_pass(g: &WeightedGraph, p: &Partition) -> (Partition, bool) {
    let mut next = p.clone();
    let improved = local_move_pass_observed(g, &mut next, LouvainConfig::default(), |_, _| {});
    (next, improved)
}

/// [`local_move_pass`] in place, calling `observer` after every move.
pub fn local_move_pass_observed(
    g: &WeightedGraph,
    p: &mut Partition,
    config: LouvainConfig,
    mut observer: impl FnMut(&Partition, &MoveEvent),
) -> bool {
    let adj = Adjacency::new(g);
    move_nodes(&adj, p, g.total_weight(), config, &mut observer)
}

fn move_nodes(
    adj: &Adjacency,
    p: &mut Partition,
    m: f64,
    config: LouvainConfig,
    observer: &mut dyn FnMut(&Partition, &MoveEvent),
) -> bool {
    if m <= 0.0 {
        return false;
    }
    let n = adj.degrees.len();
    let two_m = 2.0 * m;
    // gains are compared as 2m·k_i,C − Σtot_C·k_i, i.e. ΔQ scaled by 2m²
    let threshold = config.min_gain * two_m * m;
    let mut weight_to = vec![0.0f64; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut any = false;

    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for node in 0..n {
            let k = adj.degrees[node];
            if k == 0.0 {
                continue;
            }
            for (nb, w) in adj.neighbours(node) {
                let c = p.community[nb as usize];
                if weight_to[c as usize] == 0.0 {
                    touched.push(c);
                }
                weight_to[c as usize] += w;
            }
            let own = p.community[node];
            let loop_w = adj.self_loops[node];
            let k_own = weight_to[own as usize];

            p.sigma_tot[own as usize] -= k;
            p.sigma_in[own as usize] -= 2.0 * k_own + 2.0 * loop_w;

            let score = |c: u32, k_in: f64, p: &Partition| two_m * k_in - p.sigma_tot[c as usize] * k;
            let stay = score(own, k_own, p);
            let mut best = own;
            let mut best_score = f64::NEG_INFINITY;
            for &c in &touched {
                if c == own {
                    continue;
                }
                let s = score(c, weight_to[c as usize], p);
                if s > best_score || (s == best_score && c < best) {
                    best = c;
                    best_score = s;
                }
            }

            let target = if best != own && best_score - stay > threshold {
                best
            } else {
                own
            };
            let k_target = weight_to[target as usize];
            p.sigma_tot[target as usize] += k;
            p.sigma_in[target as usize] += 2.0 * k_target + 2.0 * loop_w;
            p.community[node] = target;

            for c in touched.drain(..) {
                weight_to[c as usize] = 0.0;
            }

            if target != own {
                moved = true;
                observer(
                    p,
                    &MoveEvent {
                        node: node as u32,
                        from: own,
                        to: target,
                        gain: (best_score - stay) / (two_m * m),
                    },
                );
            }
        }
        if !moved {
            return any;
        }
        any = true;
    }
    log::warn!("local moves did not settle within {MAX_SWEEPS} sweeps");
    any
}

/// Collapses each community of `p` into one node. Super-nodes are numbered
/// by their smallest member. Returns the graph and the node → super-node
/// map.
pub fn aggregate(g: &WeightedGraph, p: &Partition) -> (WeightedGraph, Vec<u32>) {
    let n = g.node_count();
    let mut renumber = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut mapping = Vec::with_capacity(n);
    for node in 0..n {
        let c = p.community[node] as usize;
        if renumber[c] == u32::MAX {
            renumber[c] = next;
            next += 1;
        }
        mapping.push(renumber[c]);
    }
    let mut out = WeightedGraph::new(next as usize);
    for (a, b, w) in g.edges() {
        out.add_edge(mapping[a as usize], mapping[b as usize], w);
    }
    (out, mapping)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub nodes: usize,
    pub communities: usize,
    /// Modularity of the flattened partition on the input graph.
    pub modularity: f64,
}

#[derive(Debug, Clone)]
pub struct LouvainOutcome {
    /// Input node → community, canonicalized to the smallest member node.
    pub clustering: Clustering,
    pub levels: Vec<LevelSummary>,
    /// Graph after the last aggregation; its nodes are the communities.
    pub final_graph: WeightedGraph,
    pub modularity: f64,
}

pub fn louvain(g: &WeightedGraph) -> Result<Clustering> {
    Ok(run_louvain(g, LouvainConfig::default())?.clustering)
}

pub fn run_louvain(g: &WeightedGraph, config: LouvainConfig) -> Result<LouvainOutcome> {
    let m = g.total_weight();
    if m <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let mut levels = Vec::new();
    let (labels, final_graph) = run_levels(g, m, config, |labels| {
        let q = modularity(g, labels).expect("labels are valid for the input graph");
        let communities = Clustering::from_labels(labels).cluster_count();
        levels.push(LevelSummary {
            nodes: 0,
            communities,
            modularity: q,
        });
    });
    let mut nodes = g.node_count();
    for level in &mut levels {
        level.nodes = nodes;
        nodes = level.communities;
    }
    let modularity = modularity(g, &labels)?;
    Ok(LouvainOutcome {
        clustering: Clustering::from_labels(&labels),
        levels,
        final_graph,
        modularity,
    })
}

/// Level loop. `m` is the weight gains are normalized by, which differs from
/// the graph's own total when the graph is one component of a larger one.
fn run_levels(
    g: &WeightedGraph,
    m: f64,
    config: LouvainConfig,
    mut on_level: impl FnMut(&[u32]),
) -> (Vec<u32>, WeightedGraph) {
    let mut labels: Vec<u32> = (0..g.node_count() as u32).collect();
    let mut graph = g.clone();
    loop {
        let adj = Adjacency::new(&graph);
        let mut p = Partition::singletons(&graph);
        if !move_nodes(&adj, &mut p, m, config, &mut |_, _| {}) {
            return (labels, graph);
        }
        let (next, mapping) = aggregate(&graph, &p);
        for l in labels.iter_mut() {
            *l = mapping[*l as usize];
        }
        on_level(&labels);
        graph = next;
    }
}

/// Louvain run independently on every connected component, in parallel on
/// the current rayon pool.
///
/// Gains inside each component are normalized by the whole graph's total
/// weight, which makes the result identical to [`run_louvain`] on the whole
/// graph: moves never cross components and every tie-break compares ids
/// within a single component.
pub fn louvain_by_component(g: &WeightedGraph, config: LouvainConfig) -> Result<Clustering> {
    let m = g.total_weight();
    if m <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let n = g.node_count();
    let mut ds = DisjointSet::new(n);
    for (a, b, _) in g.edges() {
        ds.union(ProjectId(a), ProjectId(b))?;
    }
    let comps = ds.to_clustering();

    // component id → its member nodes (ascending) and edges
    let mut slot = vec![usize::MAX; n];
    let mut members: Vec<Vec<u32>> = Vec::new();
    for (node, c) in comps.assignment().iter().enumerate() {
        let s = &mut slot[c.index()];
        if *s == usize::MAX {
            *s = members.len();
            members.push(Vec::new());
        }
        members[*s].push(node as u32);
    }
    let mut local = vec![0u32; n];
    for nodes in &members {
        for (i, &node) in nodes.iter().enumerate() {
            local[node as usize] = i as u32;
        }
    }
    let mut edges: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); members.len()];
    for (a, b, w) in g.edges() {
        let s = slot[comps.assignment()[a as usize].index()];
        edges[s].push((local[a as usize], local[b as usize], w));
    }

    let results: Vec<Vec<u32>> = members
        .par_iter()
        .zip(edges.par_iter())
        .map(|(nodes, edges)| {
            if edges.is_empty() {
                return (0..nodes.len() as u32).collect();
            }
            let mut sub = WeightedGraph::new(nodes.len());
            for &(a, b, w) in edges {
                sub.add_edge(a, b, w);
            }
            run_levels(&sub, m, config, |_| {}).0
        })
        .collect();

    let mut labels = vec![0u32; n];
    for (nodes, result) in members.iter().zip(&results) {
        for (i, &node) in nodes.iter().enumerate() {
            labels[node as usize] = nodes[result[i] as usize];
        }
    }
    Ok(Clustering::from_labels(&labels))
}
