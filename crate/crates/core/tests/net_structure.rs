mod common;

use common::graph;
use std::collections::BTreeSet;

#[test]
fn vector_counts() {
    for (name, n) in [
        ("golden_uniform.toml", 7),
        ("cantor33.toml", 8),
        ("nineteen.toml", 19),
        ("j_vs_i.toml", 8),
        ("three_singletons.toml", 19),
    ] {
        let (_, g) = graph(name);
        assert!(g.is_finite_type(), "{name}");
        assert_eq!(g.len(), n, "{name}");
    }
}

#[test]
fn graph_is_closed_and_lengths_are_normalized() {
    for name in [
        "golden_uniform.toml",
        "golden_biased.toml",
        "cantor33.toml",
        "nineteen.toml",
        "j_vs_i.toml",
    ] {
        let (_, g) = graph(name);
        for v in 0..g.len() {
            assert!(!g.edges(v).is_empty(), "{name}: {v} has no children");
            for e in g.edges(v) {
                assert!(e.child < g.len(), "{name}");
            }
            let len = &g.vector(v).length;
            assert_eq!(len.sign(), 1, "{name}: vertex {v}");
            assert!(
                *len <= len.field().one(),
                "{name}: vertex {v} has length {}",
                len.render()
            );
        }
    }
}

/// Edges of the golden-mean transition graph as drawn in the literature,
/// root 0, parallel edges collapsed.
#[rustfmt::skip]
const GOLDEN_EDGES: [(usize, usize); 13] = [
    (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (2, 4), (6, 4),
    (3, 3), (3, 2), (4, 2), (4, 6), (4, 5), (5, 2),
];

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[test]
fn golden_graph_matches_the_published_drawing() {
    let (_, g) = graph("golden_uniform.toml");
    assert_eq!(g.len(), 7);
    let ours: BTreeSet<(usize, usize)> = (0..g.len())
        .flat_map(|v| g.edges(v).iter().map(move |e| (v, e.child)))
        .collect();
    let theirs: BTreeSet<(usize, usize)> = GOLDEN_EDGES.into_iter().collect();
    assert_eq!(ours.len(), theirs.len());
    // Relabel everything but the root.
    let mut p: Vec<usize> = (0..7).collect();
    let mut found = 0;
    loop {
        let image: BTreeSet<(usize, usize)> = ours.iter().map(|&(a, b)| (p[a], p[b])).collect();
        if image == theirs {
            found += 1;
        }
        if !next_permutation(&mut p[1..]) {
            break;
        }
    }
    assert!(found >= 1, "no rooted relabelling matches");
}
