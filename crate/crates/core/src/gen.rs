//! Seeded graph generators for tests, cross-validation and measurement.
//!
//! Every generator is a pure function of its parameters and seed; identical
//! calls produce identical graphs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{complete_graph, ColoredGraph, EColor, VColor, Vertex};

fn sprinkle_colors(rng: &mut ChaCha8Rng, n: usize) -> Vec<(Vertex, VColor)> {
    let mut colors = Vec::new();
    for v in 0..n {
        if rng.gen_bool(0.25) {
            colors.push((v, VColor(rng.gen_range(0..2))));
        }
    }
    colors
}

/// Union of `k` edge-disjoint random forests on `n` vertices. Edges are
/// single-direction triples of color 0 with random orientation; a sparse
/// sprinkling of vertex colors from `{0, 1}` is added.
pub fn random_forest_union(n: usize, k: usize, seed: u64) -> ColoredGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: std::collections::BTreeSet<(Vertex, Vertex)> = Default::default();
    let mut edges = Vec::new();
    for _ in 0..k.max(1) {
        let mut order: Vec<Vertex> = (0..n).collect();
        order.shuffle(&mut rng);
        for idx in 1..n {
            if !rng.gen_bool(0.9) {
                continue; // leave some components split
            }
            let v = order[idx];
            // try a few earlier vertices to stay edge-disjoint across forests
            for _ in 0..8 {
                let w = order[rng.gen_range(0..idx)];
                let key = (v.min(w), v.max(w));
                if used.insert(key) {
                    let (a, b) = if rng.gen_bool(0.5) { (v, w) } else { (w, v) };
                    edges.push((a, b, EColor(0)));
                    break;
                }
            }
        }
    }
    let colors = sprinkle_colors(&mut rng, n);
    ColoredGraph::new(n, colors, edges).expect("forest union construction")
}

/// Random unit-interval graph: `n` unit intervals with uniform starts, the
/// vertex ids sorted by interval start (so the id order is a valid
/// unit-interval order). Returns the graph and the interval starts.
/// Expected degree is roughly `4 * density`.
pub fn unit_interval(n: usize, density: f64, seed: u64) -> (ColoredGraph, Vec<f64>) {
    assert!(density > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = (n as f64 / (2.0 * density)).max(1.0);
    let mut starts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..span)).collect();
    starts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if starts[j] - starts[i] > 1.0 {
                break;
            }
            edges.push((i, j, EColor(0)));
            edges.push((j, i, EColor(0)));
        }
    }
    let colors = sprinkle_colors(&mut rng, n);
    let graph = ColoredGraph::new(n, colors, edges).expect("unit interval construction");
    (graph, starts)
}

/// Random graph with maximum undirected degree at most `max_deg`
/// (symmetric single-color pairs).
pub fn bounded_degree(n: usize, max_deg: usize, seed: u64) -> ColoredGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deg = vec![0usize; n];
    let mut used: std::collections::BTreeSet<(Vertex, Vertex)> = Default::default();
    let mut edges = Vec::new();
    let attempts = 3 * n * max_deg.max(1);
    for _ in 0..attempts {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v || deg[u] >= max_deg || deg[v] >= max_deg {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if used.insert(key) {
            deg[u] += 1;
            deg[v] += 1;
            edges.push((u, v, EColor(0)));
            edges.push((v, u, EColor(0)));
        }
    }
    let colors = sprinkle_colors(&mut rng, n);
    ColoredGraph::new(n, colors, edges).expect("bounded degree construction")
}

/// The `w x h` grid graph, vertex `(x, y)` at id `y * w + x`.
pub fn grid(w: usize, h: usize) -> ColoredGraph {
    let mut edges = Vec::new();
    let id = |x: usize, y: usize| y * w + x;
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                edges.push((id(x, y), id(x + 1, y), EColor(0)));
                edges.push((id(x + 1, y), id(x, y), EColor(0)));
            }
            if y + 1 < h {
                edges.push((id(x, y), id(x, y + 1), EColor(0)));
                edges.push((id(x, y + 1), id(x, y), EColor(0)));
            }
        }
    }
    ColoredGraph::new(w * h, [], edges).expect("grid construction")
}

/// Subdivision of the complete graph `K_n`: arboricity at most 2 with
/// `n + n(n-1)/2` vertices. The family on which quantified queries defeat
/// logarithmic labels.
pub fn subdivided_clique(n: usize) -> ColoredGraph {
    complete_graph(n).subdivide().expect("complete graphs are simple undirected")
}

/// Erdos-Renyi graph as symmetric single-color pairs.
pub fn random_gnp(n: usize, p: f64, seed: u64) -> ColoredGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v, EColor(0)));
                edges.push((v, u, EColor(0)));
            }
        }
    }
    let colors = sprinkle_colors(&mut rng, n);
    ColoredGraph::new(n, colors, edges).expect("gnp construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forest_union_is_sparse_and_deterministic() {
        let g1 = random_forest_union(50, 1, 9);
        assert!(g1.is_und_forest());
        let g2 = random_forest_union(50, 1, 9);
        assert_eq!(g1, g2);
        let g3 = random_forest_union(50, 1, 10);
        assert_ne!(g1, g3);

        // union of k forests has degeneracy <= 2k-1
        for k in 1..=4 {
            let g = random_forest_union(80, k, 1000 + k as u64);
            assert!(g.degeneracy_orientation().degeneracy() <= 2 * k - 1);
        }
    }

    #[test]
    fn unit_interval_matches_interval_overlap() {
        let (g, starts) = unit_interval(60, 1.0, 33);
        for i in 0..g.n() {
            for j in 0..g.n() {
                if i == j {
                    continue;
                }
                let overlap = (starts[i] - starts[j]).abs() <= 1.0;
                assert_eq!(g.und_adjacent(i, j), overlap, "pair ({i},{j})");
            }
        }
        // ids are in interval order
        assert!(starts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn bounded_degree_respects_cap() {
        let g = bounded_degree(70, 4, 5);
        assert!(g.vertices().all(|v| g.und_degree(v) <= 4));
        assert!(g.edge_count() > 0);
    }

    #[test]
    fn grid_and_subdivided_clique_counts() {
        let g = grid(4, 3);
        assert_eq!(g.n(), 12);
        assert_eq!(g.edges().count(), 2 * (3 * 3 + 4 * 2));

        let s = subdivided_clique(5);
        assert_eq!(s.n(), 5 + 10);
        assert!(!s.is_und_forest());
        assert!(s.degeneracy_orientation().degeneracy() <= 3);
    }
}
