//! Colored-graph data model and metric utilities.
//!
//! A [`ColoredGraph`] is a directed multi-colored graph: each vertex carries a
//! (possibly empty) set of vertex colors and each edge is a `(u, v, color)`
//! triple. Distance queries ignore directions and colors. Graphs are
//! immutable after construction; every derived construction builds a new
//! graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::codec::{read_varint, write_varint, CodecError};

pub type Vertex = usize;

/// Vertex color drawn from palette C1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VColor(pub u16);

/// Edge color drawn from palette C2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EColor(pub u16);

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex id {0} out of range (n = {1})")]
    VertexOutOfRange(Vertex, usize),
    #[error("power exponent must be >= 1")]
    ZeroPower,
    #[error("expected a simple undirected single-color graph: {0}")]
    NotSimpleUndirected(&'static str),
    #[error("expected an acyclic graph")]
    Cyclic,
    #[error("graph text parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Directed colored graph with dense vertex ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredGraph {
    n: usize,
    vertex_colors: Vec<BTreeSet<VColor>>,
    edges: BTreeSet<(Vertex, Vertex, EColor)>,
    /// Undirected adjacency ignoring colors and loops, deduplicated, sorted.
    und_adj: Vec<Vec<Vertex>>,
    /// Directed out-adjacency `(v, color)` per vertex, sorted.
    out_adj: Vec<Vec<(Vertex, EColor)>>,
}

impl ColoredGraph {
    pub fn new(
        n: usize,
        vertex_colors: impl IntoIterator<Item = (Vertex, VColor)>,
        edges: impl IntoIterator<Item = (Vertex, Vertex, EColor)>,
    ) -> Result<Self, GraphError> {
        let mut colors = vec![BTreeSet::new(); n];
        for (v, c) in vertex_colors {
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v, n));
            }
            colors[v].insert(c);
        }
        let mut edge_set = BTreeSet::new();
        for (u, v, c) in edges {
            if u >= n {
                return Err(GraphError::VertexOutOfRange(u, n));
            }
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v, n));
            }
            edge_set.insert((u, v, c));
        }
        Ok(Self::from_parts(n, colors, edge_set))
    }

    fn from_parts(
        n: usize,
        vertex_colors: Vec<BTreeSet<VColor>>,
        edges: BTreeSet<(Vertex, Vertex, EColor)>,
    ) -> Self {
        let mut und: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); n];
        let mut out: Vec<Vec<(Vertex, EColor)>> = vec![Vec::new(); n];
        for &(u, v, c) in &edges {
            out[u].push((v, c));
            if u != v {
                und[u].insert(v);
                und[v].insert(u);
            }
        }
        for list in &mut out {
            list.sort_unstable();
        }
        let und_adj = und.into_iter().map(|s| s.into_iter().collect()).collect();
        ColoredGraph { n, vertex_colors, edges, und_adj, out_adj: out }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        0..self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex, EColor)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex, c: EColor) -> bool {
        self.edges.contains(&(u, v, c))
    }

    /// True when some edge joins `u` and `v` in either direction, any color.
    pub fn und_adjacent(&self, u: Vertex, v: Vertex) -> bool {
        u != v && self.und_adj[u].binary_search(&v).is_ok()
    }

    pub fn und_neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.und_adj[v]
    }

    pub fn und_degree(&self, v: Vertex) -> usize {
        self.und_adj[v].len()
    }

    pub fn out_edges(&self, v: Vertex) -> &[(Vertex, EColor)] {
        &self.out_adj[v]
    }

    pub fn vertex_colors(&self, v: Vertex) -> &BTreeSet<VColor> {
        &self.vertex_colors[v]
    }

    pub fn has_vertex_color(&self, v: Vertex, c: VColor) -> bool {
        self.vertex_colors[v].contains(&c)
    }

    /// Vertex color palette C1 (colors actually used, ascending).
    pub fn vertex_palette(&self) -> BTreeSet<VColor> {
        self.vertex_colors.iter().flatten().copied().collect()
    }

    /// Edge color palette C2 (colors actually used, ascending).
    pub fn edge_palette(&self) -> BTreeSet<EColor> {
        self.edges.iter().map(|&(_, _, c)| c).collect()
    }

    fn check_vertex(&self, v: Vertex) -> Result<(), GraphError> {
        if v >= self.n {
            Err(GraphError::VertexOutOfRange(v, self.n))
        } else {
            Ok(())
        }
    }

    // -- metric utilities ---------------------------------------------------

    /// Undirected distances from `source` to every vertex (`None` = unreachable).
    pub fn distances_from(&self, source: Vertex) -> Result<Vec<Option<usize>>, GraphError> {
        self.check_vertex(source)?;
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &w in &self.und_adj[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Length of a shortest undirected path, `None` when `u` and `v` lie in
    /// different components.
    pub fn distance(&self, u: Vertex, v: Vertex) -> Result<Option<usize>, GraphError> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Ok(Some(0));
        }
        // bidirectional would be faster; plain BFS is the trusted baseline
        Ok(self.distances_from(u)?[v])
    }

    /// The ball `N^t(X)`: every vertex at undirected distance <= t from `X`.
    pub fn ball(&self, sources: &BTreeSet<Vertex>, t: usize) -> Result<BTreeSet<Vertex>, GraphError> {
        let mut dist: BTreeMap<Vertex, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for &x in sources {
            self.check_vertex(x)?;
            dist.insert(x, 0);
            queue.push_back(x);
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du == t {
                continue;
            }
            for &w in &self.und_adj[u] {
                if !dist.contains_key(&w) {
                    dist.insert(w, du + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist.into_keys().collect())
    }

    pub fn ball_of(&self, v: Vertex, t: usize) -> Result<BTreeSet<Vertex>, GraphError> {
        self.ball(&BTreeSet::from([v]), t)
    }

    /// Simple undirected power graph: `{x,y}` adjacent iff `0 < d(x,y) <= m`.
    /// Colors are erased; the result uses edge color 0 in both directions.
    pub fn power_graph(&self, m: usize) -> Result<ColoredGraph, GraphError> {
        if m == 0 {
            return Err(GraphError::ZeroPower);
        }
        let mut edges = BTreeSet::new();
        for v in 0..self.n {
            for u in self.ball_of(v, m)? {
                if u != v {
                    edges.insert((v, u, EColor(0)));
                    edges.insert((u, v, EColor(0)));
                }
            }
        }
        Ok(Self::from_parts(self.n, vec![BTreeSet::new(); self.n], edges))
    }

    // -- derived constructions ---------------------------------------------

    /// Induced subgraph on `keep`; returns the graph together with the
    /// local-to-global vertex map (sorted ascending).
    pub fn induced_subgraph(&self, keep: &BTreeSet<Vertex>) -> Result<(ColoredGraph, Vec<Vertex>), GraphError> {
        for &v in keep {
            self.check_vertex(v)?;
        }
        let local_to_global: Vec<Vertex> = keep.iter().copied().collect();
        let global_to_local: BTreeMap<Vertex, Vertex> =
            local_to_global.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let mut colors = Vec::with_capacity(local_to_global.len());
        for &g in &local_to_global {
            colors.push(self.vertex_colors[g].clone());
        }
        let mut edges = BTreeSet::new();
        for &(u, v, c) in &self.edges {
            if let (Some(&lu), Some(&lv)) = (global_to_local.get(&u), global_to_local.get(&v)) {
                edges.insert((lu, lv, c));
            }
        }
        Ok((Self::from_parts(local_to_global.len(), colors, edges), local_to_global))
    }

    /// `G \ X`, with the same id compaction as [`induced_subgraph`].
    pub fn remove_vertices(&self, remove: &BTreeSet<Vertex>) -> Result<(ColoredGraph, Vec<Vertex>), GraphError> {
        let keep: BTreeSet<Vertex> = (0..self.n).filter(|v| !remove.contains(v)).collect();
        self.induced_subgraph(&keep)
    }

    /// Line graph of `und(self)`: one vertex per undirected edge, adjacency
    /// for incident edges. Vertex i corresponds to the i-th undirected pair
    /// in ascending order.
    pub fn line_graph(&self) -> ColoredGraph {
        let pairs: Vec<(Vertex, Vertex)> = {
            let mut set = BTreeSet::new();
            for &(u, v, _) in &self.edges {
                if u != v {
                    set.insert((u.min(v), u.max(v)));
                }
            }
            set.into_iter().collect()
        };
        let mut incident: BTreeMap<Vertex, Vec<usize>> = BTreeMap::new();
        for (i, &(u, v)) in pairs.iter().enumerate() {
            incident.entry(u).or_default().push(i);
            incident.entry(v).or_default().push(i);
        }
        let mut edges = BTreeSet::new();
        for ids in incident.values() {
            for (a, &i) in ids.iter().enumerate() {
                for &j in &ids[a + 1..] {
                    edges.insert((i, j, EColor(0)));
                    edges.insert((j, i, EColor(0)));
                }
            }
        }
        Self::from_parts(pairs.len(), vec![BTreeSet::new(); pairs.len()], edges)
    }

    /// Requires a simple loop-free undirected single-color graph.
    fn require_simple_undirected(&self) -> Result<EColor, GraphError> {
        let palette = self.edge_palette();
        if palette.len() > 1 {
            return Err(GraphError::NotSimpleUndirected("more than one edge color"));
        }
        for &(u, v, c) in &self.edges {
            if u == v {
                return Err(GraphError::NotSimpleUndirected("loop present"));
            }
            if !self.edges.contains(&(v, u, c)) {
                return Err(GraphError::NotSimpleUndirected("missing reverse edge"));
            }
        }
        Ok(palette.into_iter().next().unwrap_or(EColor(0)))
    }

    /// Inserts a fresh vertex on every undirected edge. Subdivision vertices
    /// get ids `n..n+|E|` in ascending order of the edge pairs they split.
    pub fn subdivide(&self) -> Result<ColoredGraph, GraphError> {
        let color = self.require_simple_undirected()?;
        let pairs: Vec<(Vertex, Vertex)> = {
            let mut set = BTreeSet::new();
            for &(u, v, _) in &self.edges {
                set.insert((u.min(v), u.max(v)));
            }
            set.into_iter().collect()
        };
        let n = self.n + pairs.len();
        let mut colors = self.vertex_colors.clone();
        colors.resize(n, BTreeSet::new());
        let mut edges = BTreeSet::new();
        for (i, &(u, v)) in pairs.iter().enumerate() {
            let z = self.n + i;
            for (a, b) in [(u, z), (z, u), (v, z), (z, v)] {
                edges.insert((a, b, color));
            }
        }
        Ok(Self::from_parts(n, colors, edges))
    }

    /// Acyclic orientation by repeated minimum-degree peeling of `und(self)`.
    ///
    /// Every edge triple is assigned to the endpoint peeled first; the
    /// maximum number of distinct out-neighbors equals the degeneracy of
    /// `und(self)`, which is at most `2 * arboricity - 1`.
    pub fn degeneracy_orientation(&self) -> Orientation {
        let n = self.n;
        let mut degree: Vec<usize> = (0..n).map(|v| self.und_degree(v)).collect();
        let mut removed = vec![false; n];
        // bucket queue over degrees; ties broken by smallest id for determinism
        let max_deg = degree.iter().copied().max().unwrap_or(0);
        let mut buckets: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); max_deg + 1];
        for v in 0..n {
            buckets[degree[v]].insert(v);
        }
        let mut order = Vec::with_capacity(n);
        let mut rank = vec![0usize; n];
        let mut degeneracy = 0usize;
        let mut cursor = 0usize;
        for step in 0..n {
            // degrees drop by at most 1 per removal, so backing up one
            // bucket before scanning forward restores the minimum
            cursor = cursor.saturating_sub(1);
            while cursor < buckets.len() && buckets[cursor].is_empty() {
                cursor += 1;
            }
            let v = *buckets[cursor].iter().next().expect("bucket queue exhausted early");
            buckets[cursor].remove(&v);
            degeneracy = degeneracy.max(degree[v]);
            removed[v] = true;
            rank[v] = step;
            order.push(v);
            for &w in &self.und_adj[v] {
                if !removed[w] {
                    buckets[degree[w]].remove(&w);
                    degree[w] -= 1;
                    buckets[degree[w]].insert(w);
                }
            }
        }
        let mut out: Vec<Vec<OrientedEdge>> = vec![Vec::new(); n];
        for &(u, v, c) in &self.edges {
            if u == v || rank[u] <= rank[v] {
                out[u].push(OrientedEdge { neighbor: v, color: c, toward_neighbor: true });
            } else {
                out[v].push(OrientedEdge { neighbor: u, color: c, toward_neighbor: false });
            }
        }
        let mut max_out = 0usize;
        for list in &mut out {
            list.sort_unstable();
            let distinct = list
                .iter()
                .map(|e| e.neighbor)
                .collect::<BTreeSet<_>>()
                .len();
            max_out = max_out.max(distinct);
        }
        Orientation { out, max_out_degree: max_out, degeneracy }
    }

    /// True when `und(self)` contains no cycle (parallel colored edges between
    /// one pair collapse to a single undirected edge).
    pub fn is_und_forest(&self) -> bool {
        let mut seen = vec![false; self.n];
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![(s, usize::MAX)];
            while let Some((v, parent)) = stack.pop() {
                for &w in &self.und_adj[v] {
                    if w == parent {
                        continue;
                    }
                    if seen[w] {
                        return false;
                    }
                    seen[w] = true;
                    stack.push((w, v));
                }
            }
        }
        // a loop is a cycle
        self.edges.iter().all(|&(u, v, _)| u != v)
    }

    // -- compact binary serialization (used by catalogs) --------------------

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_varint(&mut out, self.n as u64);
        let colored: Vec<Vertex> = (0..self.n).filter(|&v| !self.vertex_colors[v].is_empty()).collect();
        write_varint(&mut out, colored.len() as u64);
        for v in colored {
            write_varint(&mut out, v as u64);
            write_varint(&mut out, self.vertex_colors[v].len() as u64);
            for c in &self.vertex_colors[v] {
                write_varint(&mut out, u64::from(c.0));
            }
        }
        write_varint(&mut out, self.edges.len() as u64);
        for &(u, v, c) in &self.edges {
            write_varint(&mut out, u as u64);
            write_varint(&mut out, v as u64);
            write_varint(&mut out, u64::from(c.0));
        }
        out
    }

    pub fn from_binary(buf: &[u8]) -> Result<Self, GraphError> {
        let mut pos = 0;
        let n = read_varint(buf, &mut pos)? as usize;
        let mut colors = vec![BTreeSet::new(); n];
        let colored = read_varint(buf, &mut pos)? as usize;
        for _ in 0..colored {
            let v = read_varint(buf, &mut pos)? as usize;
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v, n));
            }
            let k = read_varint(buf, &mut pos)? as usize;
            for _ in 0..k {
                colors[v].insert(VColor(read_varint(buf, &mut pos)? as u16));
            }
        }
        let m = read_varint(buf, &mut pos)? as usize;
        let mut edges = BTreeSet::new();
        for _ in 0..m {
            let u = read_varint(buf, &mut pos)? as usize;
            let v = read_varint(buf, &mut pos)? as usize;
            let c = EColor(read_varint(buf, &mut pos)? as u16);
            if u >= n {
                return Err(GraphError::VertexOutOfRange(u, n));
            }
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v, n));
            }
            edges.insert((u, v, c));
        }
        Ok(Self::from_parts(n, colors, edges))
    }

    // -- text format ---------------------------------------------------------

    /// Line-based text format: `n <count>`, optional `vc <v> <color>...`
    /// lines, `e <u> <v> <color>` lines, `#` comments.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n {}", self.n).unwrap();
        for v in 0..self.n {
            if !self.vertex_colors[v].is_empty() {
                write!(out, "vc {v}").unwrap();
                for c in &self.vertex_colors[v] {
                    write!(out, " {}", c.0).unwrap();
                }
                out.push('\n');
            }
        }
        for &(u, v, c) in &self.edges {
            writeln!(out, "e {u} {v} {}", c.0).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut n: Option<usize> = None;
        let mut colors: Vec<BTreeSet<VColor>> = Vec::new();
        let mut edges = BTreeSet::new();
        let parse_err = |line: usize, message: &str| GraphError::Parse {
            line,
            message: message.to_owned(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let head = tokens.next().unwrap();
            match head {
                "n" => {
                    let count: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "expected `n <count>`"))?;
                    if n.is_some() {
                        return Err(parse_err(line_no, "duplicate n header"));
                    }
                    n = Some(count);
                    colors = vec![BTreeSet::new(); count];
                }
                "vc" => {
                    let count = n.ok_or_else(|| parse_err(line_no, "vc before n header"))?;
                    let v: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "expected `vc <v> <color>...`"))?;
                    if v >= count {
                        return Err(parse_err(line_no, "vertex id out of range"));
                    }
                    for tok in tokens {
                        let c: u16 = tok
                            .parse()
                            .map_err(|_| parse_err(line_no, "bad vertex color"))?;
                        colors[v].insert(VColor(c));
                    }
                }
                "e" => {
                    let count = n.ok_or_else(|| parse_err(line_no, "e before n header"))?;
                    let u: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "expected `e <u> <v> <color>`"))?;
                    let v: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "expected `e <u> <v> <color>`"))?;
                    let c: u16 = match tokens.next() {
                        Some(t) => t.parse().map_err(|_| parse_err(line_no, "bad edge color"))?,
                        None => 0,
                    };
                    if u >= count || v >= count {
                        return Err(parse_err(line_no, "edge endpoint out of range"));
                    }
                    edges.insert((u, v, EColor(c)));
                }
                _ => return Err(parse_err(line_no, "unknown directive")),
            }
        }
        let n = n.ok_or_else(|| parse_err(0, "missing n header"))?;
        Ok(Self::from_parts(n, colors, edges))
    }
}

/// One entry of a vertex out-list: the neighbor, the edge color, and whether
/// the underlying triple runs from the owner toward the neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct OrientedEdge {
    pub neighbor: Vertex,
    pub color: EColor,
    pub toward_neighbor: bool,
}

/// Acyclic edge assignment with bounded out-lists; `max_out_degree` counts
/// distinct out-neighbors (entries may repeat a neighbor with different
/// colors or directions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orientation {
    out: Vec<Vec<OrientedEdge>>,
    max_out_degree: usize,
    degeneracy: usize,
}

impl Orientation {
    pub fn out_list(&self, v: Vertex) -> &[OrientedEdge] {
        &self.out[v]
    }

    pub fn n(&self) -> usize {
        self.out.len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.max_out_degree
    }

    pub fn degeneracy(&self) -> usize {
        self.degeneracy
    }

    /// Re-inserts every out-edge; must reproduce the input edge set exactly.
    pub fn reconstruct_edges(&self) -> BTreeSet<(Vertex, Vertex, EColor)> {
        let mut edges = BTreeSet::new();
        for (v, list) in self.out.iter().enumerate() {
            for e in list {
                if e.toward_neighbor {
                    edges.insert((v, e.neighbor, e.color));
                } else {
                    edges.insert((e.neighbor, v, e.color));
                }
            }
        }
        edges
    }
}

/// Complete graph on `n` vertices as symmetric single-color pairs.
pub fn complete_graph(n: usize) -> ColoredGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v {
                edges.push((u, v, EColor(0)));
            }
        }
    }
    ColoredGraph::new(n, [], edges).expect("complete graph construction")
}

/// Path 0-1-...-(n-1) as symmetric single-color pairs.
pub fn path_graph(n: usize) -> ColoredGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((v - 1, v, EColor(0)));
        edges.push((v, v - 1, EColor(0)));
    }
    ColoredGraph::new(n, [], edges).expect("path construction")
}

/// Cycle on `n >= 3` vertices as symmetric single-color pairs.
pub fn cycle_graph(n: usize) -> ColoredGraph {
    let mut edges = Vec::new();
    for v in 0..n {
        let w = (v + 1) % n;
        edges.push((v, w, EColor(0)));
        edges.push((w, v, EColor(0)));
    }
    ColoredGraph::new(n, [], edges).expect("cycle construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_graph(n: usize, p: f64, seed: u64) -> ColoredGraph {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    edges.push((u, v, EColor(0)));
                    edges.push((v, u, EColor(0)));
                }
            }
        }
        ColoredGraph::new(n, [], edges).unwrap()
    }

    // independent oracle: single-source BFS written against und_neighbors only
    fn bfs_oracle(g: &ColoredGraph, s: Vertex) -> Vec<Option<usize>> {
        let mut dist = vec![None; g.n()];
        dist[s] = Some(0);
        let mut frontier = vec![s];
        let mut level = 0usize;
        while !frontier.is_empty() {
            level += 1;
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in g.und_neighbors(v) {
                    if dist[w].is_none() {
                        dist[w] = Some(level);
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    #[test]
    fn ball_radius_zero_is_identity() {
        let g = random_graph(12, 0.3, 1);
        let x: BTreeSet<Vertex> = [0, 3, 7].into();
        assert_eq!(g.ball(&x, 0).unwrap(), x);
    }

    #[test]
    fn ball_on_path() {
        let g = path_graph(5);
        let b = g.ball(&BTreeSet::from([2]), 1).unwrap();
        assert_eq!(b, BTreeSet::from([1, 2, 3]));
    }

    #[test]
    fn ball_matches_bfs_oracle() {
        let g = random_graph(20, 0.2, 42);
        let oracle = bfs_oracle(&g, 0);
        let expected: BTreeSet<Vertex> = (0..20)
            .filter(|&v| matches!(oracle[v], Some(d) if d <= 2))
            .collect();
        assert_eq!(g.ball(&BTreeSet::from([0]), 2).unwrap(), expected);
    }

    #[test]
    fn ball_monotone_and_composes() {
        for seed in 0..5 {
            let g = random_graph(15, 0.2, seed);
            let x: BTreeSet<Vertex> = [1, 4].into();
            for t in 0..4 {
                let b1 = g.ball(&x, t).unwrap();
                let b2 = g.ball(&x, t + 1).unwrap();
                assert!(b1.is_subset(&b2));
                if t >= 1 {
                    let step = g.ball(&x, 1).unwrap();
                    assert_eq!(g.ball(&step, t - 1).unwrap(), b1);
                }
            }
        }
    }

    #[test]
    fn distance_basics() {
        let g = ColoredGraph::new(2, [], []).unwrap();
        assert_eq!(g.distance(0, 0).unwrap(), Some(0));
        assert_eq!(g.distance(0, 1).unwrap(), None);
        let c6 = cycle_graph(6);
        assert_eq!(c6.distance(0, 3).unwrap(), Some(3));
        assert!(matches!(c6.distance(0, 9), Err(GraphError::VertexOutOfRange(9, 6))));
    }

    #[test]
    fn distance_symmetric_vs_oracle() {
        let g = random_graph(25, 0.15, 7);
        let oracle0 = bfs_oracle(&g, 0);
        for v in 0..g.n() {
            assert_eq!(g.distance(0, v).unwrap(), oracle0[v]);
            assert_eq!(g.distance(v, 0).unwrap(), oracle0[v]);
        }
    }

    #[test]
    fn power_graph_examples() {
        let g = random_graph(10, 0.3, 3);
        let p1 = g.power_graph(1).unwrap();
        for u in 0..10 {
            for v in 0..10 {
                assert_eq!(p1.und_adjacent(u, v), g.und_adjacent(u, v));
            }
        }
        assert!(g.power_graph(0).is_err());

        let p4 = path_graph(4);
        let sq = p4.power_graph(2).unwrap();
        assert!(sq.und_adjacent(0, 2) && sq.und_adjacent(1, 3));
        assert!(!sq.und_adjacent(0, 3));

        let k5 = complete_graph(5);
        let k5m = k5.power_graph(4).unwrap();
        for u in 0..5 {
            for v in 0..5 {
                assert_eq!(k5m.und_adjacent(u, v), u != v);
            }
        }
    }

    #[test]
    fn power_compose_tree_exact_general_subset() {
        // on trees (P7): G^a then ^b equals G^(ab)
        let t = path_graph(7);
        let lhs = t.power_graph(2).unwrap().power_graph(3).unwrap();
        let rhs = t.power_graph(6).unwrap();
        assert_eq!(lhs, rhs);
        // on general graphs: subset
        let g = random_graph(12, 0.25, 9);
        let lhs = g.power_graph(2).unwrap().power_graph(2).unwrap();
        let rhs = g.power_graph(4).unwrap();
        for (u, v, c) in lhs.edges() {
            assert!(rhs.has_edge(u, v, c));
        }
    }

    #[test]
    fn degeneracy_of_forests_and_cliques() {
        let f = path_graph(9);
        assert!(f.degeneracy_orientation().degeneracy() <= 1);
        let k4 = complete_graph(4);
        let o = k4.degeneracy_orientation();
        assert_eq!(o.degeneracy(), 3);
        assert_eq!(o.max_out_degree(), 3);
    }

    #[test]
    fn degeneracy_of_two_tree_union() {
        // two edge-disjoint spanning trees on 10 vertices: d <= 2k-1 = 3
        let mut edges = Vec::new();
        for v in 1..10 {
            edges.push((v - 1, v, EColor(0)));
            edges.push((v, v - 1, EColor(0)));
        }
        for v in 2..10 {
            edges.push((v - 2, v, EColor(1)));
            edges.push((v, v - 2, EColor(1)));
        }
        edges.push((0, 9, EColor(1)));
        edges.push((9, 0, EColor(1)));
        let g = ColoredGraph::new(10, [], edges).unwrap();
        assert!(g.degeneracy_orientation().degeneracy() <= 3);
    }

    #[test]
    fn orientation_reconstructs_edges() {
        for seed in 0..6 {
            let g = random_graph(18, 0.2, seed);
            let o = g.degeneracy_orientation();
            let edges: BTreeSet<_> = g.edges().collect();
            assert_eq!(o.reconstruct_edges(), edges);
        }
        // directed multi-colored case with a loop
        let g = ColoredGraph::new(
            4,
            [],
            [
                (0, 1, EColor(0)),
                (1, 0, EColor(1)),
                (0, 1, EColor(2)),
                (2, 2, EColor(0)),
                (3, 2, EColor(0)),
            ],
        )
        .unwrap();
        let o = g.degeneracy_orientation();
        assert_eq!(o.reconstruct_edges(), g.edges().collect());
    }

    #[test]
    fn subdivide_examples() {
        let e = ColoredGraph::new(2, [], [(0, 1, EColor(0)), (1, 0, EColor(0))]).unwrap();
        let s = e.subdivide().unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.distance(0, 1).unwrap(), Some(2));

        let k4 = complete_graph(4);
        let s = k4.subdivide().unwrap();
        assert_eq!(s.n(), 4 + 6);
        assert_eq!(s.edges().count(), 2 * 12); // 12 undirected edges
        assert!(s.degeneracy_orientation().degeneracy() <= 3); // arboricity <= 2

        let tri = cycle_graph(3);
        let s = tri.subdivide().unwrap();
        let c6 = cycle_graph(6);
        assert_eq!(s.n(), 6);
        assert!(s.vertices().all(|v| s.und_degree(v) == 2));
        assert_eq!(s.distance(0, 1).unwrap(), Some(2));
        // isomorphic to C6: connected 2-regular on 6 vertices
        assert_eq!(s.distances_from(0).unwrap().iter().filter(|d| d.is_some()).count(), c6.n());
    }

    #[test]
    fn subdivide_rejects_directed_and_multicolor() {
        let directed = ColoredGraph::new(2, [], [(0, 1, EColor(0))]).unwrap();
        assert!(directed.subdivide().is_err());
        let multi = ColoredGraph::new(
            2,
            [],
            [(0, 1, EColor(0)), (1, 0, EColor(0)), (0, 1, EColor(1)), (1, 0, EColor(1))],
        )
        .unwrap();
        assert!(multi.subdivide().is_err());
    }

    #[test]
    fn subdivide_adjacency_via_middle_vertex() {
        for seed in 0..5 {
            let g = random_graph(9, 0.35, seed);
            let s = g.subdivide().unwrap();
            for u in 0..g.n() {
                for v in 0..g.n() {
                    if u == v {
                        continue;
                    }
                    let has_z = s.vertices().any(|z| {
                        z >= g.n()
                            && s.distance(u, z).unwrap() == Some(1)
                            && s.distance(z, v).unwrap() == Some(1)
                    });
                    assert_eq!(g.und_adjacent(u, v), has_z);
                }
            }
        }
    }

    #[test]
    fn line_graph_of_path_is_path() {
        let p4 = path_graph(4);
        let l = p4.line_graph();
        assert_eq!(l.n(), 3);
        assert!(l.und_adjacent(0, 1) && l.und_adjacent(1, 2) && !l.und_adjacent(0, 2));
    }

    #[test]
    fn induced_subgraph_and_removal() {
        let g = random_graph(10, 0.4, 5);
        let keep: BTreeSet<Vertex> = [1, 3, 4, 8].into();
        let (sub, map) = g.induced_subgraph(&keep).unwrap();
        assert_eq!(map, vec![1, 3, 4, 8]);
        for (lu, &gu) in map.iter().enumerate() {
            for (lv, &gv) in map.iter().enumerate() {
                assert_eq!(sub.und_adjacent(lu, lv), g.und_adjacent(gu, gv));
            }
        }
        let (rest, rest_map) = g.remove_vertices(&keep).unwrap();
        assert_eq!(rest.n(), 6);
        assert!(rest_map.iter().all(|v| !keep.contains(v)));
    }

    #[test]
    fn text_round_trip() {
        let g = ColoredGraph::new(
            5,
            [(0, VColor(1)), (0, VColor(3)), (2, VColor(0))],
            [(0, 1, EColor(0)), (1, 0, EColor(0)), (3, 4, EColor(2)), (2, 2, EColor(1))],
        )
        .unwrap();
        let text = g.to_text();
        let back = ColoredGraph::from_text(&text).unwrap();
        assert_eq!(back, g);

        let with_comments = "# a graph\nn 3\n e 0 1 0 # edge\n\ne 1 2\n";
        let parsed = ColoredGraph::from_text(with_comments).unwrap();
        assert_eq!(parsed.edge_count(), 2);
        assert!(ColoredGraph::from_text("e 0 1 0\n").is_err());
        assert!(ColoredGraph::from_text("n 2\ne 0 5 0\n").is_err());
    }

    #[test]
    fn binary_round_trip() {
        for seed in 0..4 {
            let g = random_graph(14, 0.3, seed);
            assert_eq!(ColoredGraph::from_binary(&g.to_binary()).unwrap(), g);
        }
    }

    #[test]
    fn forest_detection() {
        assert!(path_graph(6).is_und_forest());
        assert!(!cycle_graph(4).is_und_forest());
        let loopy = ColoredGraph::new(2, [], [(0, 0, EColor(0))]).unwrap();
        assert!(!loopy.is_und_forest());
    }
}
