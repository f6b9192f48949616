//! Label-pure exact distances on forests via centroid decomposition.
//!
//! Each vertex records, for every centroid on its decomposition path, the
//! centroid id and its distance to it. Two labels alone then give the exact
//! forest distance as the minimum of `d(u,c) + d(c,v)` over shared
//! centroids; labels hold at most `ceil(log2 n) + 1` entries.

use std::collections::{BTreeMap, VecDeque};

use crate::codec::{read_varint, write_varint, Catalog};
use crate::graph::{ColoredGraph, Vertex};
use crate::logic::Formula;

use super::{LabelerError, PieceBuild, PieceLabeler};

/// One decomposition-path entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CentroidEntry {
    pub level: u32,
    pub centroid: u64,
    pub dist: u64,
}

/// Decomposition path of one vertex, root centroid first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CentroidList {
    pub entries: Vec<CentroidEntry>,
}

impl CentroidList {
    pub fn encode(&self, out: &mut Vec<u8>) {
        write_varint(out, self.entries.len() as u64);
        for e in &self.entries {
            write_varint(out, e.centroid);
            write_varint(out, e.dist);
        }
    }

    pub fn decode(buf: &[u8], pos: &mut usize) -> Result<Self, LabelerError> {
        let count = read_varint(buf, pos)?;
        let mut entries = Vec::with_capacity(count as usize);
        for level in 0..count {
            let centroid = read_varint(buf, pos)?;
            let dist = read_varint(buf, pos)?;
            entries.push(CentroidEntry { level: level as u32, centroid, dist });
        }
        Ok(CentroidList { entries })
    }
}

/// Recursive centroid decomposition of `und(forest)`; entry ids are the
/// graph's own vertex ids. Errors when the graph has a cycle.
pub fn centroid_decompose(forest: &ColoredGraph) -> Result<Vec<CentroidList>, LabelerError> {
    if !forest.is_und_forest() {
        return Err(LabelerError::CyclicPiece);
    }
    let n = forest.n();
    let mut lists = vec![CentroidList::default(); n];
    let mut removed = vec![false; n];
    let mut seen = vec![false; n];

    // iterative worklist of (piece vertices, level)
    let mut work: VecDeque<(Vec<Vertex>, u32)> = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &w in forest.und_neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        work.push_back((comp, 0));
    }

    while let Some((piece, level)) = work.pop_front() {
        if piece.is_empty() {
            continue;
        }
        let centroid = find_centroid(forest, &piece, &removed);
        // record distances from the centroid across the current piece
        let dist = bfs_within(forest, centroid, &removed);
        for &v in &piece {
            lists[v].entries.push(CentroidEntry {
                level,
                centroid: centroid as u64,
                dist: dist[&v] as u64,
            });
        }
        removed[centroid] = true;
        // split into remaining components
        let mut assigned: BTreeMap<Vertex, bool> = BTreeMap::new();
        for &v in &piece {
            if v != centroid {
                assigned.insert(v, false);
            }
        }
        for (&start, _) in assigned.clone().iter() {
            if assigned[&start] {
                continue;
            }
            let mut sub = Vec::new();
            let mut stack = vec![start];
            assigned.insert(start, true);
            while let Some(v) = stack.pop() {
                sub.push(v);
                for &w in forest.und_neighbors(v) {
                    if !removed[w] && assigned.get(&w) == Some(&false) {
                        assigned.insert(w, true);
                        stack.push(w);
                    }
                }
            }
            sub.sort_unstable();
            work.push_back((sub, level + 1));
        }
    }
    Ok(lists)
}

fn bfs_within(
    graph: &ColoredGraph,
    source: Vertex,
    removed: &[bool],
) -> BTreeMap<Vertex, usize> {
    let mut dist = BTreeMap::from([(source, 0usize)]);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[&v];
        for &w in graph.und_neighbors(v) {
            if !removed[w] && !dist.contains_key(&w) {
                dist.insert(w, dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Vertex of the piece minimizing the largest part after removal; ties by
/// smallest id so labels are reproducible.
fn find_centroid(graph: &ColoredGraph, piece: &[Vertex], removed: &[bool]) -> Vertex {
    let total = piece.len();
    if total == 1 {
        return piece[0];
    }
    let in_piece: BTreeMap<Vertex, usize> =
        piece.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // subtree sizes by iterative post-order from the smallest vertex
    let root = piece[0];
    let mut parent: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    let mut order = Vec::with_capacity(total);
    let mut stack = vec![root];
    parent.insert(root, root);
    while let Some(v) = stack.pop() {
        order.push(v);
        for &w in graph.und_neighbors(v) {
            if !removed[w] && in_piece.contains_key(&w) && !parent.contains_key(&w) {
                parent.insert(w, v);
                stack.push(w);
            }
        }
    }
    let mut size: BTreeMap<Vertex, usize> = piece.iter().map(|&v| (v, 1)).collect();
    for &v in order.iter().rev() {
        if v != root {
            *size.get_mut(&parent[&v]).unwrap() += size[&v];
        }
    }
    let mut best = (usize::MAX, usize::MAX);
    for &v in piece {
        // the largest component after deleting v: children subtrees or the rest
        let mut worst = total - size[&v];
        for &w in graph.und_neighbors(v) {
            if !removed[w] && in_piece.contains_key(&w) && parent.get(&w) == Some(&v) {
                worst = worst.max(size[&w]);
            }
        }
        if (worst, v) < best {
            best = (worst, v);
        }
    }
    best.1
}

/// Exact forest distance from two decomposition paths; `None` when the
/// vertices share no centroid (different components).
pub fn centroid_dist(a: &CentroidList, b: &CentroidList) -> Option<u64> {
    let index: BTreeMap<u64, u64> = a.entries.iter().map(|e| (e.centroid, e.dist)).collect();
    let mut best: Option<u64> = None;
    for e in &b.entries {
        if let Some(&da) = index.get(&e.centroid) {
            let candidate = da + e.dist;
            best = Some(best.map_or(candidate, |cur| cur.min(candidate)));
        }
    }
    best
}

/// Label-pure forest-distance labeler; emits no catalog sections.
pub struct CentroidLabeler;

fn parse_sublabel(bytes: &[u8]) -> Result<(u64, CentroidList), LabelerError> {
    let mut pos = 0;
    let piece = read_varint(bytes, &mut pos)?;
    let list = CentroidList::decode(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(LabelerError::Malformed("trailing bytes in centroid sublabel".into()));
    }
    Ok((piece, list))
}

impl PieceLabeler for CentroidLabeler {
    fn name(&self) -> &'static str {
        "centroid"
    }

    fn build(
        &self,
        piece_id: u64,
        piece: &ColoredGraph,
        local_to_global: &[Vertex],
    ) -> Result<PieceBuild, LabelerError> {
        if piece.n() == 0 {
            return Err(LabelerError::EmptyPiece);
        }
        let lists = centroid_decompose(piece)?;
        let sublabels = lists
            .into_iter()
            .map(|mut list| {
                for e in &mut list.entries {
                    e.centroid = local_to_global[e.centroid as usize] as u64;
                }
                let mut out = Vec::new();
                write_varint(&mut out, piece_id);
                list.encode(&mut out);
                out
            })
            .collect();
        Ok(PieceBuild { sublabels, sections: Vec::new() })
    }

    fn dist(&self, _catalog: &Catalog, a: &[u8], b: &[u8]) -> Result<Option<u64>, LabelerError> {
        let (pa, la) = parse_sublabel(a)?;
        let (pb, lb) = parse_sublabel(b)?;
        if pa != pb {
            return Err(LabelerError::WrongPiece { expected: pa, got: pb });
        }
        Ok(centroid_dist(&la, &lb))
    }

    fn eval(
        &self,
        _catalog: &Catalog,
        piece_id: u64,
        formula: &Formula,
        args: &[&[u8]],
        _sets: &[Vec<Vec<u8>>],
    ) -> Result<bool, LabelerError> {
        // only Boolean combinations of dist/eq atoms over the arguments are
        // answerable from distance labels
        let vars = formula.free_fo_vars();
        if vars.len() != args.len() {
            return Err(LabelerError::Malformed(format!(
                "formula takes {} arguments, got {}",
                vars.len(),
                args.len()
            )));
        }
        let mut parsed = Vec::with_capacity(args.len());
        for bytes in args {
            let (pid, list) = parse_sublabel(bytes)?;
            if pid != piece_id {
                return Err(LabelerError::WrongPiece { expected: piece_id, got: pid });
            }
            parsed.push(list);
        }
        let dist_of = |x: &str, y: &str| -> Result<Option<u64>, LabelerError> {
            let ix = vars.iter().position(|v| v == x).unwrap();
            let iy = vars.iter().position(|v| v == y).unwrap();
            Ok(centroid_dist(&parsed[ix], &parsed[iy]))
        };
        eval_dist_combination(formula, &dist_of)
    }

    fn count(
        &self,
        _catalog: &Catalog,
        _piece_id: u64,
        _formula: &Formula,
        _sets: &[Vec<Vec<u8>>],
        _modulus: Option<u64>,
    ) -> Result<u64, LabelerError> {
        Err(LabelerError::UnsupportedQuery(
            "centroid labels answer distance queries only".into(),
        ))
    }
}

fn eval_dist_combination(
    formula: &Formula,
    dist_of: &dyn Fn(&str, &str) -> Result<Option<u64>, LabelerError>,
) -> Result<bool, LabelerError> {
    match formula {
        Formula::DistLe(x, y, k) => {
            Ok(matches!(dist_of(x, y)?, Some(d) if d <= *k as u64))
        }
        Formula::Eq(x, y) => Ok(x == y || dist_of(x, y)? == Some(0)),
        Formula::Not(f) => Ok(!eval_dist_combination(f, dist_of)?),
        Formula::And(a, b) => {
            Ok(eval_dist_combination(a, dist_of)? && eval_dist_combination(b, dist_of)?)
        }
        Formula::Or(a, b) => {
            Ok(eval_dist_combination(a, dist_of)? || eval_dist_combination(b, dist_of)?)
        }
        Formula::Implies(a, b) => {
            Ok(!eval_dist_combination(a, dist_of)? || eval_dist_combination(b, dist_of)?)
        }
        other => Err(LabelerError::UnsupportedQuery(format!(
            "centroid labels answer distance queries only, got {other:?}"
        ))),
    }
}
