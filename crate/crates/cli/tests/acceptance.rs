//! Acceptance suite. Runs every exit criterion and prints one PASS/FAIL
//! line for each; the process fails if any criterion fails.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use repolink_core::eval::{adjusted_rand_index_maps, cross_split_rate, split_report, GoldGrouping};
use repolink_core::ingest::InputSet;
use repolink_core::louvain::{local_move_pass_observed, louvain_by_component, run_louvain, Partition};
use repolink_core::naming::{map_lines, write_map};
use repolink_core::pipeline::{align_gold, components_map, ingest, with_threads};
use repolink_core::synth::{generate_corpus, GroupSizes, SynthConfig, SynthCorpus};
use repolink_core::{
    build_ultimate_map, cluster_name, connected_components, louvain, merge_shard_components, shard_index,
    transform_name, ClusterMap, Clustering, CommitGroup, CommitHash, FilterConfig, ForkMap, LouvainConfig, ProjectId,
    RepoName, UltimateParentMap, WeightedGraph, SHARD_COUNT,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_repolink")
}

fn repolink(args: &[&str]) -> String {
    let out = Command::new(bin()).args(args).output().expect("spawn repolink");
    assert!(
        out.status.success(),
        "repolink {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn labels(c: &Clustering) -> Vec<u32> {
    c.assignment().iter().map(|p| p.0).collect()
}

fn random_hypergraph(rng: &mut ChaCha8Rng, n: usize, commits: usize) -> Vec<CommitGroup> {
    (0..commits)
        .map(|_| {
            let size = rng.gen_range(1..=6.min(n));
            let members = (0..size).map(|_| ProjectId(rng.gen_range(0..n as u32))).collect();
            CommitGroup::new(CommitHash::from_bytes(rng.gen()), members)
        })
        .collect()
}

fn bfs_components(n: usize, groups: &[CommitGroup]) -> Vec<u32> {
    let mut adj = vec![Vec::new(); n];
    for g in groups {
        for &a in g.projects() {
            for &b in g.projects() {
                if a != b {
                    adj[a.index()].push(b.index());
                }
            }
        }
    }
    let mut label = vec![u32::MAX; n];
    for start in 0..n {
        if label[start] != u32::MAX {
            continue;
        }
        label[start] = start as u32;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if label[v] == u32::MAX {
                    label[v] = start as u32;
                    queue.push_back(v);
                }
            }
        }
    }
    label
}

fn oracle_q(g: &WeightedGraph, part: &[u32]) -> f64 {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (x, y, w) in g.edges() {
        let (x, y) = (x as usize, y as usize);
        if x == y {
            a[x][x] += 2.0 * w;
        } else {
            a[x][y] += w;
            a[y][x] += w;
        }
    }
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if part[i] == part[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Best modularity over all set partitions, enumerated as restricted
/// growth strings.
fn exhaustive_optimum(g: &WeightedGraph) -> (f64, Vec<u32>) {
    let n = g.node_count();
    let mut rgs = vec![0u32; n];
    let mut best = (f64::NEG_INFINITY, rgs.clone());
    loop {
        let q = oracle_q(g, &rgs);
        if q > best.0 {
            best = (q, rgs.clone());
        }
        let mut i = n;
        loop {
            if i <= 1 {
                return best;
            }
            i -= 1;
            if rgs[i] <= rgs[..i].iter().copied().max().unwrap_or(0) {
                rgs[i] += 1;
                rgs[i + 1..].iter_mut().for_each(|r| *r = 0);
                break;
            }
        }
    }
}

fn graph(n: usize, edges: &[(u32, u32)]) -> WeightedGraph {
    let mut g = WeightedGraph::new(n);
    for &(a, b) in edges {
        g.add_edge(a, b, 1.0);
    }
    g
}

fn gnp(rng: &mut ChaCha8Rng, n: usize, p: f64) -> WeightedGraph {
    let mut g = WeightedGraph::new(n);
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            if rng.gen_bool(p) {
                g.add_edge(a, b, 1.0);
            }
        }
    }
    g
}

// 1
fn components_vs_bfs() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=50);
        let commits = rng.gen_range(0..=200);
        let groups = random_hypergraph(&mut rng, n, commits);
        let got = connected_components(groups.iter().cloned().map(Ok), n).map_err(|e| e.to_string())?;
        if labels(&got) != bfs_components(n, &groups) {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    check(
        mismatches == 0 && within(t, 5.0),
        format!(
            "200 hypergraphs, {mismatches} mismatches, {:.2}s (limit 5s)",
            t.as_secs_f64()
        ),
    )
}

// 2
fn shard_split_invariance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=60);
        let commits = rng.gen_range(1..=200);
        let groups = random_hypergraph(&mut rng, n, commits);

        // in memory
        let whole = connected_components(groups.iter().cloned().map(Ok), n).unwrap();
        let shards: Vec<Clustering> = (0..SHARD_COUNT)
            .map(|i| {
                let part = groups
                    .iter()
                    .filter(|g| shard_index(&g.commit).value() == i)
                    .cloned()
                    .map(Ok);
                connected_components(part, n).unwrap()
            })
            .collect();
        if merge_shard_components(&shards).unwrap() != whole {
            mismatches += 1;
        }

        // through shard files
        let mut pairs: Vec<(CommitHash, String)> = groups
            .iter()
            .flat_map(|g| g.projects().iter().map(move |p| (g.commit, format!("host/o{}/r", p.0))))
            .collect();
        pairs.sort();
        let dir = tempfile::tempdir().unwrap();
        let (one, many) = (dir.path().join("one"), dir.path().join("many"));
        std::fs::create_dir_all(&one).unwrap();
        std::fs::create_dir_all(&many).unwrap();
        let text = |it: &mut dyn Iterator<Item = &(CommitHash, String)>| -> String {
            it.map(|(c, p)| format!("{c};{p}\n")).collect()
        };
        std::fs::write(one.join("c2p.0"), text(&mut pairs.iter())).unwrap();
        for i in 0..SHARD_COUNT {
            let body = text(&mut pairs.iter().filter(|(c, _)| shard_index(c).value() == i));
            std::fs::write(many.join(format!("c2p.{i}")), body).unwrap();
        }
        let map = |d: &Path| {
            let files = InputSet::Directory(d.to_path_buf()).files().unwrap();
            components_map(&ingest(&files, &FilterConfig::disabled(), false).unwrap()).unwrap()
        };
        if map(&one) != map(&many) {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    check(
        mismatches == 0 && within(t, 10.0),
        format!(
            "100 corpora, {mismatches} mismatches, {:.2}s (limit 10s)",
            t.as_secs_f64()
        ),
    )
}

// 3
fn louvain_micro() -> Outcome {
    let start = Instant::now();
    let disjoint = graph(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
    let a = labels(&louvain(&disjoint).unwrap()) == [0, 0, 0, 3, 3, 3];

    let bridged = graph(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]);
    let found = labels(&louvain(&bridged).unwrap());
    let q = oracle_q(&bridged, &found);
    let (opt, _) = exhaustive_optimum(&bridged);
    let b = found == [0, 0, 0, 3, 3, 3] && (q - 5.0 / 14.0).abs() <= 1e-9 && (opt - 5.0 / 14.0).abs() <= 1e-9;

    // G(n, 1/2) with n in 3..=8; edgeless draws are redrawn
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut graphs, mut ok, mut worst) = (0, 0, f64::INFINITY);
    let mut worst_case = String::new();
    while graphs < 50 {
        let n = rng.gen_range(3..=8);
        let g = gnp(&mut rng, n, 0.5);
        if g.total_weight() == 0.0 {
            continue;
        }
        graphs += 1;
        let (opt, _) = exhaustive_optimum(&g);
        let got = oracle_q(&g, &labels(&louvain(&g).unwrap()));
        if got >= 0.9 * opt - 1e-12 {
            ok += 1;
        }
        if opt > 1e-12 && got / opt < worst {
            worst = got / opt;
            worst_case = format!("Q {got:.4} vs optimum {opt:.4} on n={n}");
        }
    }
    let c = ok == graphs;
    let t = start.elapsed();
    check(
        a && b && c && within(t, 30.0),
        format!(
            "(a) disjoint triangles {}, (b) bridged Q={q:.9} optimum {opt:.9} {}, \
             (c) {ok}/{graphs} graphs reach 0.9 of optimum, worst ratio {worst:.3} ({worst_case}); {:.2}s (limit 30s)",
            pass_word(a),
            pass_word(b),
            t.as_secs_f64()
        ),
    )
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "wrong"
    }
}

// 4
fn louvain_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad_moves = 0;
    let mut moves = 0;
    let mut flatten_err: f64 = 0.0;
    let mut level_drops = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=30);
        let p = rng.gen_range(0.05..0.4);
        let g = gnp(&mut rng, n, p);
        if g.total_weight() == 0.0 {
            continue;
        }
        let mut part = Partition::singletons(&g);
        let mut prev = oracle_q(&g, part.assignment());
        local_move_pass_observed(&g, &mut part, LouvainConfig::default(), |after, _| {
            let q = oracle_q(&g, after.assignment());
            moves += 1;
            if q <= prev {
                bad_moves += 1;
            }
            prev = q;
        });

        let out = run_louvain(&g, LouvainConfig::default()).unwrap();
        let flat = oracle_q(&g, &labels(&out.clustering));
        let top: Vec<u32> = (0..out.final_graph.node_count() as u32).collect();
        flatten_err = flatten_err.max((flat - oracle_q(&out.final_graph, &top)).abs());
        let mut last = f64::NEG_INFINITY;
        for level in &out.levels {
            if level.modularity < last {
                level_drops += 1;
            }
            last = level.modularity;
        }
    }

    // repeated runs and thread counts, in memory and through the binary
    let mut g = WeightedGraph::new(600);
    for a in 0..600u32 {
        for _ in 0..3 {
            let b = if rng.gen_bool(0.85) {
                (a / 30) * 30 + rng.gen_range(0..30)
            } else {
                rng.gen_range(0..600)
            };
            if a != b {
                g.add_edge(a, b, 1.0);
            }
        }
    }
    let runs: Vec<Clustering> = [1, 1, 3, 8]
        .iter()
        .map(|&t| {
            with_threads(t, || louvain_by_component(&g, LouvainConfig::default()))
                .unwrap()
                .unwrap()
        })
        .collect();
    let same_in_memory = runs.windows(2).all(|w| w[0] == w[1]);

    let corpus = generate_corpus(&SynthConfig {
        n_groups: 40,
        group_sizes: GroupSizes::Uniform { min: 5, max: 40 },
        n_backup_repos: 3,
        backup_reach: 8,
        backup_commits: 5,
        n_mega_commits: 2,
        mega_commit_span: 200,
        fork_fraction: 0.4,
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    corpus.write(dir.path()).unwrap();
    let forks = dir.path().join("forks.map");
    let outputs: Vec<Vec<u8>> = ["1", "1", "2", "8"]
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let out = dir.path().join(format!("run{i}"));
            repolink(&[
                "pipeline",
                "--input",
                s(dir.path()),
                "--output",
                s(&out),
                "--fork-map",
                s(&forks),
                "--max-commit-span",
                "100",
                "--threads",
                t,
            ]);
            std::fs::read(out.join("final.map")).unwrap()
        })
        .collect();
    let same_files = outputs.windows(2).all(|w| w[0] == w[1]);

    check(
        bad_moves == 0 && flatten_err <= 1e-9 && level_drops == 0 && same_in_memory && same_files,
        format!(
            "{moves} moves, {bad_moves} non-improving; max flatten gap {flatten_err:.1e}; \
             {level_drops} level drops; identical across runs/threads: memory {same_in_memory}, files {same_files}"
        ),
    )
}

/// The desk-scale anomaly corpus shared by criteria 5 to 7.
struct AnomalyRun {
    _dir: tempfile::TempDir,
    corpus: SynthCorpus,
    out: PathBuf,
    held_out: GoldGrouping,
    raw_largest: usize,
    elapsed: Duration,
}

fn anomaly_config() -> SynthConfig {
    SynthConfig {
        n_groups: 200,
        group_sizes: GroupSizes::Uniform { min: 50, max: 50 },
        commits_per_group: 250,
        share_fraction: 1.0,
        n_backup_repos: 5,
        backup_reach: 30,
        backup_commits: 100,
        n_mega_commits: 3,
        mega_commit_span: 2000,
        fork_fraction: 0.5,
        seed: 5,
    }
}

fn anomaly_run() -> AnomalyRun {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus");
    let corpus = generate_corpus(&anomaly_config()).unwrap();
    corpus.write(&input).unwrap();

    // half of the declared forks feed the collapse, the other half is held
    // out as ground truth
    let full = build_ultimate_map(&corpus.forks);
    let mut known = String::new();
    let mut held = ForkMap::new();
    for (i, (repo, parent)) in corpus.forks.iter().enumerate() {
        if i % 2 == 0 {
            known.push_str(&format!("{repo};{parent}\n"));
        } else {
            held.insert(repo.clone(), full.root(repo).clone()).unwrap();
        }
    }
    let known_path = dir.path().join("known_forks.map");
    std::fs::write(&known_path, known).unwrap();

    let raw = dir.path().join("raw.clusters");
    repolink(&["components", "--input", s(&input), "--output", s(&raw)]);
    let raw_largest = ClusterMap::read(&raw).unwrap().largest_cluster_size();

    let out = dir.path().join("out");
    repolink(&[
        "pipeline",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--fork-map",
        s(&known_path),
        "--max-commit-span",
        "1000",
    ]);
    AnomalyRun {
        held_out: GoldGrouping::from_ultimate_map(&build_ultimate_map(&held)),
        _dir: dir,
        corpus,
        out,
        raw_largest,
        elapsed: start.elapsed(),
    }
}

/// The final map keyed by untransformed names, for comparison with the
/// planted truth.
fn untransformed(map: &ClusterMap, names: &[RepoName]) -> ClusterMap {
    let by_transformed: std::collections::HashMap<String, &RepoName> =
        names.iter().map(|n| (transform_name(n), n)).collect();
    let mut out = ClusterMap::new();
    for (p, l) in map.iter() {
        out.insert(by_transformed[p.as_str()].clone(), l.clone());
    }
    out
}

// 5
fn mega_cluster(run: &AnomalyRun) -> Outcome {
    let n = run.corpus.projects.len();
    let a = run.raw_largest * 10 >= n * 3;
    let final_map = untransformed(
        &ClusterMap::read(&run.out.join("final.map")).unwrap(),
        &run.corpus.projects,
    );
    let ari = adjusted_rand_index_maps(&run.corpus.gold, &final_map).map_err(|e| e.to_string())?;
    let largest = final_map.largest_cluster_size();
    let planted = run.corpus.largest_group;
    let b = ari >= 0.90 && largest <= 2 * planted;
    check(
        a && b && within(run.elapsed, 60.0),
        format!(
            "{n} projects; raw largest component {} ({:.1}%, need >= 30%); after filter + Louvain ARI {ari:.4} \
             (need >= 0.90), largest cluster {largest} (need <= {}); {:.2}s end to end (limit 60s)",
            run.raw_largest,
            100.0 * run.raw_largest as f64 / n as f64,
            2 * planted,
            run.elapsed.as_secs_f64()
        ),
    )
}

// 6
fn fork_evaluation(run: &AnomalyRun) -> Outcome {
    let mut forks = ForkMap::new();
    for i in 0..9244 {
        forks
            .insert(format!("fork{i:05}/r").parse().unwrap(), "root/r".parse().unwrap())
            .unwrap();
    }
    let gold = GoldGrouping::from_ultimate_map(&build_ultimate_map(&forks));
    let mut predicted = ClusterMap::new();
    predicted.insert("root/r".parse().unwrap(), "root/r".parse().unwrap());
    for i in 0..9244 {
        let label = if i < 9221 { "root/r" } else { "other/r" };
        predicted.insert(format!("fork{i:05}/r").parse().unwrap(), label.parse().unwrap());
    }
    let row = split_report(&gold, &predicted).map_err(|e| e.to_string())?.rows[0].clone();
    let fixture = (row.member_count, row.in_largest, row.split) == (9245, 9222, true);

    let final_map = ClusterMap::read(&run.out.join("final.map")).unwrap();
    let report = split_report(&align_gold(&run.held_out, &final_map), &final_map).map_err(|e| e.to_string())?;
    let rate = report.group_split_rate();
    check(
        fixture && rate <= 0.05 && report.total_groups > 0,
        format!(
            "fixture row ({}, {}, split={}); held-out forks: {} groups scored, group split rate {:.2}% \
             (need <= 5%), repo-level {:.2}%",
            row.member_count,
            row.in_largest,
            row.split,
            report.total_groups,
            100.0 * rate,
            100.0 * report.split_rate()
        ),
    )
}

// 7
fn cross_clustering(run: &AnomalyRun) -> Outcome {
    let raw = ClusterMap::read(&run.out.join("components.map")).unwrap();
    let louv = ClusterMap::read(&run.out.join("final.map")).unwrap();
    let self_rate = cross_split_rate(&louv, &louv).unwrap().rate;
    // the components map is a coarsening of the Louvain map
    let coarsening = cross_split_rate(&louv, &raw).unwrap();
    let splitting = cross_split_rate(&raw, &louv).unwrap();
    check(
        self_rate == 0.0 && coarsening.rate == 0.0 && splitting.split_groups >= 1,
        format!(
            "self {self_rate}; Louvain clusters split by components {}/{} ({:.2}%); \
             components split by Louvain {}/{} ({:.2}%)",
            coarsening.split_groups,
            coarsening.total_groups,
            100.0 * coarsening.rate,
            splitting.split_groups,
            splitting.total_groups,
            100.0 * splitting.rate
        ),
    )
}

// 8
fn format_fidelity() -> Outcome {
    let t = transform_name(&"github.com/miranagha/js".parse().unwrap());
    let names: Vec<RepoName> = vec!["grr".parse().unwrap(), "rh24/parrot-ruby".parse().unwrap()];
    let rep = cluster_name(&names).unwrap().to_string();

    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&SynthConfig {
        fork_fraction: 0.6,
        seed: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut map_ok = true;
    for (file, gz) in [("final.map", false), ("final.map.gz", true)] {
        let path = dir.path().join(file);
        write_map(&corpus.gold, &path, gz).unwrap();
        let back = ClusterMap::read(&path).unwrap();
        let mut expected = map_lines(&corpus.gold);
        let mut got: Vec<String> = back.iter().map(|(p, l)| format!("{p};{l}")).collect();
        expected.sort();
        got.sort();
        map_ok &= expected == got;
    }
    let upm = build_ultimate_map(&corpus.forks);
    let fork_path = dir.path().join("ultimate.map");
    upm.write(&fork_path, false).unwrap();
    let fork_ok = UltimateParentMap::read(&fork_path).unwrap() == upm && !upm.is_empty();
    check(
        t == "miranagha_js" && rep == "grr" && map_ok && fork_ok,
        format!("transform {t:?}, cluster name {rep:?}, map round trip {map_ok}, fork file round trip {fork_ok}"),
    )
}

// reaped by wait4 below, which also reports the peak RSS
#[allow(clippy::zombie_processes)]
fn peak_rss_kib(mut cmd: Command) -> (std::process::ExitStatus, u64, Duration) {
    use std::os::unix::process::ExitStatusExt;
    let start = Instant::now();
    let child = cmd.spawn().expect("spawn");
    let mut status = 0;
    // SAFETY: rusage is plain data and the pid belongs to our own child.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let pid = unsafe { libc::wait4(child.id() as libc::pid_t, &mut status, 0, &mut usage) };
    assert_eq!(pid, child.id() as libc::pid_t, "wait4 failed");
    let elapsed = start.elapsed();
    (
        std::process::ExitStatus::from_raw(status),
        usage.ru_maxrss as u64,
        elapsed,
    )
}

// 9
fn throughput() -> Outcome {
    let cfg = SynthConfig {
        n_groups: 200,
        group_sizes: GroupSizes::Uniform { min: 50, max: 50 },
        commits_per_group: 100,
        seed: 9,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    corpus.write(dir.path()).unwrap();
    let lines = corpus.pair_count();
    let projects = corpus.projects.len();
    drop(corpus);

    let out = dir.path().join("components.clusters");
    let mut cmd = Command::new(bin());
    cmd.args([
        "components",
        "--input",
        s(dir.path()),
        "--output",
        s(&out),
        "--threads",
        "1",
    ]);
    cmd.stdout(std::process::Stdio::null());
    let (status, rss_kib, elapsed) = peak_rss_kib(cmd);
    // 1 KiB per project
    let limit_kib = 10 * projects as u64;
    check(
        status.success() && lines >= 1_000_000 && within(elapsed, 30.0) && rss_kib < limit_kib,
        format!(
            "{lines} lines, {projects} projects, {:.2}s single-threaded (limit 30s), peak RSS {:.1} MiB \
             (limit {:.1} MiB = 10 x projects x 1 KiB)",
            elapsed.as_secs_f64(),
            rss_kib as f64 / 1024.0,
            limit_kib as f64 / 1024.0
        ),
    )
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |id: u32, name: &str, outcome: std::thread::Result<Outcome>| {
        let (ok, detail) = match outcome {
            Ok(Ok(d)) => (true, d),
            Ok(Err(d)) => (false, d),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        println!("criterion {id} [{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(id);
        }
    };

    report(1, "components match BFS oracle", catch_unwind(components_vs_bfs));
    report(2, "shard-split invariance", catch_unwind(shard_split_invariance));
    report(3, "Louvain micro-benchmarks", catch_unwind(louvain_micro));
    report(4, "Louvain invariants", catch_unwind(louvain_invariants));
    match catch_unwind(anomaly_run) {
        Ok(run) => {
            report(
                5,
                "mega-cluster reproduction",
                catch_unwind(AssertUnwindSafe(|| mega_cluster(&run))),
            );
            report(
                6,
                "fork evaluation",
                catch_unwind(AssertUnwindSafe(|| fork_evaluation(&run))),
            );
            report(
                7,
                "cross-clustering comparison",
                catch_unwind(AssertUnwindSafe(|| cross_clustering(&run))),
            );
        }
        Err(e) => {
            for (id, name) in [
                (5, "mega-cluster reproduction"),
                (6, "fork evaluation"),
                (7, "cross-clustering comparison"),
            ] {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .unwrap_or_else(|| "corpus run panicked".into());
                report(id, name, Ok(Err(msg)));
            }
        }
    }
    report(8, "format fidelity", catch_unwind(format_fidelity));
    report(9, "throughput floor", catch_unwind(throughput));

    if failed.is_empty() {
        println!("acceptance: all 9 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
