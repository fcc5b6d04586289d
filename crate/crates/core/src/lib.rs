//! Related-project clustering from shared commits.
//!
//! The input is a set of sorted `commit;project` pair files. Projects that
//! share a commit are linked, the link graph is filtered for known
//! anomalies, forks are collapsed into their ultimate parents, and Louvain
//! community detection splits oversized components.

pub mod collapse;
pub mod components;
pub mod error;
pub mod eval;
pub mod filter;
pub mod ingest;
pub mod io;
pub mod louvain;
pub mod model;
pub mod naming;
pub mod pipeline;
pub mod synth;

pub use collapse::{
    build_ultimate_map, CollapsedGraph, ForkMap, Hyperedge, UltimateParentMap, WeightScheme, WeightedGraph,
};
pub use components::{connected_components, merge_shard_components, DisjointSet, Link};
pub use error::{Error, ErrorKind, Result};
pub use eval::{adjusted_rand_index, cross_split_rate, split_report, EvalReport, GoldGrouping, SplitRow};
pub use filter::FilterConfig;
pub use ingest::{shard_index, ShardIndex, SHARD_COUNT};
pub use louvain::{louvain, modularity, LouvainConfig};
pub use model::{Clustering, CommitGroup, CommitHash, Interner, ProjectId, RepoName};
pub use naming::{cluster_name, transform_name, ClusterMap};
pub use pipeline::{run_pipeline, PipelineConfig, RunReport};
pub use synth::{generate_corpus, SynthConfig};
