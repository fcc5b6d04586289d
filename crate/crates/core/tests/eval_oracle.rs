use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use repolink_core::eval::{adjusted_rand_index, cross_split_rate, split_report, GoldGrouping};
use repolink_core::{build_ultimate_map, ClusterMap, Clustering, ForkMap, RepoName};

fn n(s: &str) -> RepoName {
    RepoName::new(s).unwrap()
}

/// Pair-counting ARI computed over all pairs explicitly.
fn ari_oracle(a: &[u32], b: &[u32]) -> f64 {
    let len = a.len();
    let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..len {
        for j in i + 1..len {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            total += 1.0;
            if sa && sb {
                both += 1.0;
            }
            if sa {
                only_a += 1.0;
            }
            if sb {
                only_b += 1.0;
            }
        }
    }
    if total == 0.0 {
        return 1.0;
    }
    let expected = only_a * only_b / total;
    let max = (only_a + only_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

#[test]
fn ari_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let len = rng.gen_range(0..40);
        let ka = rng.gen_range(1..6);
        let kb = rng.gen_range(1..6);
        let a: Vec<u32> = (0..len).map(|_| rng.gen_range(0..ka)).collect();
        let b: Vec<u32> = (0..len).map(|_| rng.gen_range(0..kb)).collect();
        let got = adjusted_rand_index(&Clustering::from_labels(&a), &Clustering::from_labels(&b)).unwrap();
        assert!((got - ari_oracle(&a, &b)).abs() < 1e-9);
    }
}

fn map_from(labels: &[u32]) -> ClusterMap {
    let mut m = ClusterMap::new();
    for (i, l) in labels.iter().enumerate() {
        m.insert(n(&format!("p{i:03}")), n(&format!("c{l}")));
    }
    m
}

#[test]
fn cross_split_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let len = rng.gen_range(1..60);
        let fine: Vec<u32> = (0..len).map(|_| rng.gen_range(0..12)).collect();
        // merge fine clusters pairwise into a coarser clustering
        let coarse: Vec<u32> = fine.iter().map(|c| c / 2).collect();
        let (f, c) = (map_from(&fine), map_from(&coarse));
        assert_eq!(cross_split_rate(&f, &f).unwrap().rate, 0.0);
        assert_eq!(cross_split_rate(&f, &c).unwrap().rate, 0.0);
        let back = cross_split_rate(&c, &f).unwrap();
        let expected = (0..6u32)
            .filter(|&g| {
                let parts: std::collections::BTreeSet<u32> = fine.iter().copied().filter(|x| x / 2 == g).collect();
                parts.len() >= 2
            })
            .count();
        assert_eq!(back.split_groups, expected);
    }
}

#[test]
fn large_fork_group_row() {
    let mut forks = ForkMap::new();
    for i in 0..9244 {
        forks.insert(n(&format!("fork{i:05}/r")), n("root/r")).unwrap();
    }
    let gold = GoldGrouping::from_ultimate_map(&build_ultimate_map(&forks));
    let mut predicted = ClusterMap::new();
    predicted.insert(n("root/r"), n("root/r"));
    for i in 0..9244 {
        let label = if i < 9221 { "root/r" } else { "elsewhere" };
        predicted.insert(n(&format!("fork{i:05}/r")), n(label));
    }
    let report = split_report(&gold, &predicted).unwrap();
    let row = &report.rows[0];
    assert_eq!((row.member_count, row.in_largest, row.split), (9245, 9222, true));
    assert_eq!(report.machine_lines(), vec!["root/r;9245;9222;true"]);
}
