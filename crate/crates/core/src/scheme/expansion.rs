//! Bounded FO queries over an expansion partition (scheme 0x02).
//!
//! The vertex set is partitioned so that small unions of parts induce
//! simple subgraphs (stable sets, forests, treewidth at most 2 — the levels
//! the validator can certify). For bound `p`, every window `V_alpha` —
//! union of `min(p, N)` parts — is labeled by the piece labeler; a basic
//! bounded query is true iff it holds in some window containing all its
//! arguments, and `m = 0` sentence parts use precomputed per-window truth
//! bits with the two-phase set-argument rule.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::codec::{read_varint, scheme_id, write_varint, Catalog, LabelBundle};
use crate::graph::{ColoredGraph, GraphError, Vertex};
use crate::labeler::PieceLabeler;
use crate::logic::{eval_oracle, print_plan, BoundedPlan, QueryPlan};

use super::local::{labeler_by_name, read_plan};
use super::SchemeError;

/// Vertex partition with a target witness bound; parts are compacted to
/// `0..n_parts` with no empty part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionPartition {
    parts: Vec<usize>,
    n_parts: usize,
    p: usize,
}

impl ExpansionPartition {
    pub fn new(parts: Vec<usize>, p: usize) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        for &part in &parts {
            let next = remap.len();
            remap.entry(part).or_insert(next);
        }
        let parts: Vec<usize> = parts.into_iter().map(|p| remap[&p]).collect();
        let n_parts = remap.len();
        ExpansionPartition { parts, n_parts, p }
    }

    pub fn part_of(&self, v: Vertex) -> usize {
        self.parts[v]
    }

    pub fn n_parts(&self) -> usize {
        self.n_parts
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.parts.len()
    }

    /// Text format: `part <v> <id>` lines.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "# p {}", self.p).unwrap();
        for (v, part) in self.parts.iter().enumerate() {
            writeln!(out, "part {v} {part}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str, n: usize, p: usize) -> Result<Self, SchemeError> {
        let mut parts = vec![usize::MAX; n];
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            if tokens.next() != Some("part") {
                return Err(SchemeError::MalformedLabel(format!(
                    "partition file line {}: expected `part <v> <id>`",
                    idx + 1
                )));
            }
            let v: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| SchemeError::MalformedLabel("bad part line".into()))?;
            let id: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| SchemeError::MalformedLabel("bad part line".into()))?;
            if v >= n {
                return Err(SchemeError::Graph(GraphError::VertexOutOfRange(v, n)));
            }
            parts[v] = id;
        }
        if let Some(v) = parts.iter().position(|&p| p == usize::MAX) {
            return Err(SchemeError::MalformedLabel(format!(
                "partition file assigns no part to vertex {v}"
            )));
        }
        Ok(ExpansionPartition::new(parts, p))
    }
}

/// Depth-residue partition of a forest: color = BFS depth mod (p+1). Each
/// part is stable and any union of parts stays a forest, so every
/// certifiable level passes.
pub fn tree_depth_mod_partition(
    forest: &ColoredGraph,
    p: usize,
) -> Result<ExpansionPartition, SchemeError> {
    if !forest.is_und_forest() {
        return Err(SchemeError::Graph(GraphError::Cyclic));
    }
    let modulus = p + 1;
    let mut depth = vec![usize::MAX; forest.n()];
    for root in 0..forest.n() {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &w in forest.und_neighbors(v) {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    Ok(ExpansionPartition::new(depth.into_iter().map(|d| d % modulus).collect(), p))
}

/// Greedy partition for graphs without a dedicated constructor: each vertex
/// takes the smallest color keeping its part stable and (for `p >= 2`)
/// every pair of parts acyclic. Used by the measurement harness; the
/// partition is valid for correctness regardless of how many parts emerge.
pub fn greedy_pair_forest_partition(graph: &ColoredGraph, p: usize) -> ExpansionPartition {
    let n = graph.n();
    let mut color = vec![usize::MAX; n];
    // union-find per unordered color pair, grown lazily
    let mut pair_dsu: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    let mut n_colors = 0usize;
    for v in 0..n {
        let neighbor_colors: Vec<(Vertex, usize)> = graph
            .und_neighbors(v)
            .iter()
            .filter(|&&w| color[w] != usize::MAX)
            .map(|&w| (w, color[w]))
            .collect();
        let mut candidate = 0usize;
        'try_color: loop {
            // stability
            if neighbor_colors.iter().any(|&(_, c)| c == candidate) {
                candidate += 1;
                continue;
            }
            if p >= 2 {
                // pair acyclicity: v must not join two vertices already
                // connected inside any (candidate, other) union
                for other in 0..=n_colors {
                    let key = (candidate.min(other), candidate.max(other));
                    let relevant: Vec<Vertex> = neighbor_colors
                        .iter()
                        .filter(|&&(_, c)| c == candidate || c == other)
                        .map(|&(w, _)| w)
                        .collect();
                    if relevant.len() >= 2 {
                        let parent = pair_dsu.entry(key).or_insert_with(|| (0..n).collect());
                        let mut roots = BTreeSet::new();
                        for &w in &relevant {
                            if !roots.insert(find(parent, w)) {
                                candidate += 1;
                                continue 'try_color;
                            }
                        }
                    }
                }
            }
            break;
        }
        color[v] = candidate;
        n_colors = n_colors.max(candidate + 1);
        if p >= 2 {
            for other in 0..n_colors {
                let key = (candidate.min(other), candidate.max(other));
                let parent = pair_dsu.entry(key).or_insert_with(|| (0..n).collect());
                for &(w, c) in &neighbor_colors {
                    if c == candidate || c == other {
                        let a = find(parent, v);
                        let b = find(parent, w);
                        parent[a] = b;
                    }
                }
            }
        }
    }
    ExpansionPartition::new(color, p)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LevelStatus {
    Pass,
    Fail { witness: String },
    Unchecked,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub n_parts: usize,
    pub p: usize,
    /// status of level `i` at index `i - 1`
    pub levels: Vec<LevelStatus>,
}

impl PartitionReport {
    pub fn certified_up_to(&self) -> usize {
        self.levels
            .iter()
            .take_while(|s| matches!(s, LevelStatus::Pass))
            .count()
    }
}

/// True when the simple undirected graph reduces to nothing by repeatedly
/// deleting degree-<=1 vertices and suppressing degree-2 vertices
/// (equivalently, treewidth at most 2).
fn reduces_to_empty_tw2(adj: &mut [BTreeSet<usize>]) -> bool {
    let mut alive: BTreeSet<usize> = (0..adj.len()).collect();
    loop {
        let Some(&v) = alive.iter().find(|&&v| adj[v].len() <= 2) else {
            return alive.is_empty();
        };
        match adj[v].len() {
            0 => {
                alive.remove(&v);
            }
            1 => {
                let w = *adj[v].iter().next().unwrap();
                adj[w].remove(&v);
                adj[v].clear();
                alive.remove(&v);
            }
            2 => {
                let mut it = adj[v].iter();
                let a = *it.next().unwrap();
                let b = *it.next().unwrap();
                adj[a].remove(&v);
                adj[b].remove(&v);
                adj[v].clear();
                alive.remove(&v);
                adj[a].insert(b);
                adj[b].insert(a);
            }
            _ => unreachable!("find() only yields degree <= 2"),
        }
    }
}

/// Leveled certification of the partition conditions: stability (level 1),
/// pairwise acyclicity (level 2), triple unions of treewidth at most 2
/// (level 3); levels past 3 are reported unchecked.
pub fn validate_partition(
    graph: &ColoredGraph,
    partition: &ExpansionPartition,
    p: usize,
) -> Result<PartitionReport, SchemeError> {
    let n_parts = partition.n_parts();
    let mut levels = Vec::new();

    // level 1: each part is a stable set
    let mut level1 = LevelStatus::Pass;
    'one: for (u, v, _) in graph.edges() {
        if u != v && partition.part_of(u) == partition.part_of(v) {
            level1 = LevelStatus::Fail { witness: format!("edge ({u},{v}) inside part {}", partition.part_of(u)) };
            break 'one;
        }
    }
    levels.push(level1);

    let class_members = |parts: &[usize]| -> BTreeSet<Vertex> {
        (0..graph.n())
            .filter(|&v| parts.contains(&partition.part_of(v)))
            .collect()
    };

    if p >= 2 {
        let mut level2 = LevelStatus::Pass;
        'two: for a in 0..n_parts {
            for b in a + 1..n_parts {
                let members = class_members(&[a, b]);
                let (sub, _) = graph.induced_subgraph(&members)?;
                if !sub.is_und_forest() {
                    level2 = LevelStatus::Fail { witness: format!("parts ({a},{b}) contain a cycle") };
                    break 'two;
                }
            }
        }
        levels.push(level2);
    }

    if p >= 3 {
        let mut level3 = LevelStatus::Pass;
        'three: for a in 0..n_parts {
            for b in a + 1..n_parts {
                for c in b + 1..n_parts {
                    let members = class_members(&[a, b, c]);
                    let (sub, _) = graph.induced_subgraph(&members)?;
                    let mut adj: Vec<BTreeSet<usize>> = (0..sub.n())
                        .map(|v| sub.und_neighbors(v).iter().copied().collect())
                        .collect();
                    if !reduces_to_empty_tw2(&mut adj) {
                        level3 =
                            LevelStatus::Fail { witness: format!("parts ({a},{b},{c}) exceed treewidth 2") };
                        break 'three;
                    }
                }
            }
        }
        levels.push(level3);
    }

    for _ in 4..=p {
        levels.push(LevelStatus::Unchecked);
    }
    Ok(PartitionReport { n_parts, p, levels })
}

/// Hard cap on how many windows a build may enumerate.
pub const MAX_WINDOWS: u128 = 100_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, from: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in from..n {
            current.push(i);
            rec(n, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(n, k, 0, &mut current, &mut out);
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct ExpansionMeta {
    p: usize,
    window_size: usize,
    n_parts: usize,
    labeler: String,
    windows: Vec<Vec<usize>>,
    sentence_leaves: Vec<usize>,
}

fn require_bounded(plan: &QueryPlan) -> Result<&BoundedPlan, SchemeError> {
    match plan {
        QueryPlan::Bounded(p) => Ok(p),
        other => Err(SchemeError::PlanKindMismatch {
            expected: "bounded",
            got: other.kind_name(),
        }),
    }
}

/// Builds window labelings for a bounded plan over the given partition.
pub fn build_bounded_scheme(
    graph: &ColoredGraph,
    partition: &ExpansionPartition,
    plan: &QueryPlan,
    labeler: &dyn PieceLabeler,
) -> Result<(LabelBundle, Catalog), SchemeError> {
    let bounded = require_bounded(plan)?;
    plan.validate()?;
    if partition.n() != graph.n() {
        return Err(SchemeError::MalformedLabel(format!(
            "partition covers {} vertices, graph has {}",
            partition.n(),
            graph.n()
        )));
    }
    let n_parts = partition.n_parts();
    let window_size = bounded.p.min(n_parts).max(1);
    let window_count = binomial(n_parts, window_size);
    if window_count > MAX_WINDOWS {
        return Err(SchemeError::PartitionTooCoarse {
            parts: n_parts,
            windows: window_count,
            budget: MAX_WINDOWS,
        });
    }
    let windows = combinations(n_parts, window_size);

    let mut sections: Vec<(String, Vec<u8>)> = Vec::new();
    let mut vertex_entries: Vec<Vec<(u64, Vec<u8>)>> = vec![Vec::new(); graph.n()];
    let mut window_members: Vec<BTreeSet<Vertex>> = Vec::with_capacity(windows.len());
    for (wid, window) in windows.iter().enumerate() {
        let members: BTreeSet<Vertex> = (0..graph.n())
            .filter(|&v| window.contains(&partition.part_of(v)))
            .collect();
        sections.push((
            format!(
                "alpha/{}",
                window.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
            ),
            serde_json::to_vec(&serde_json::json!({ "id": wid, "parts": window }))
                .expect("window meta serializes"),
        ));
        if !members.is_empty() {
            let (piece, map) = graph.induced_subgraph(&members)?;
            let built = labeler.build(wid as u64, &piece, &map)?;
            sections.extend(built.sections.iter().cloned());
            for (local, &v) in map.iter().enumerate() {
                vertex_entries[v].push((wid as u64, built.sublabels[local].clone()));
            }
        }
        window_members.push(members);
    }

    // truth bits for the sentence leaves (m = 0), per window
    let sentence_leaves: Vec<usize> = bounded
        .basics
        .iter()
        .enumerate()
        .filter(|(_, b)| b.vars.is_empty())
        .map(|(i, _)| i)
        .collect();
    let mut bits = vec![0u8; (sentence_leaves.len() * windows.len()).div_ceil(8)];
    for (row, &leaf) in sentence_leaves.iter().enumerate() {
        let formula = &bounded.basics[leaf].formula;
        let empty: Vec<BTreeSet<Vertex>> =
            formula.free_set_vars().iter().map(|_| BTreeSet::new()).collect();
        let refs: Vec<&BTreeSet<Vertex>> = empty.iter().collect();
        for (wid, members) in window_members.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let (piece, _) = graph.induced_subgraph(members)?;
            if eval_oracle(&piece, formula, &[], &refs)? {
                let idx = row * windows.len() + wid;
                bits[idx / 8] |= 1 << (idx % 8);
            }
        }
    }

    // the membership budget from the window structure, asserted per build
    let budget = binomial(n_parts.saturating_sub(1), window_size.saturating_sub(1)) as usize;
    let mut labels = Vec::with_capacity(graph.n());
    for v in 0..graph.n() {
        assert!(
            vertex_entries[v].len() <= budget.max(1),
            "vertex {v} lies in {} windows, budget {budget}",
            vertex_entries[v].len()
        );
        let mut label = Vec::new();
        write_varint(&mut label, v as u64);
        write_varint(&mut label, partition.part_of(v) as u64);
        write_varint(&mut label, vertex_entries[v].len() as u64);
        for (wid, sublabel) in &vertex_entries[v] {
            write_varint(&mut label, *wid);
            write_varint(&mut label, sublabel.len() as u64);
            label.extend_from_slice(sublabel);
        }
        labels.push(label);
    }

    let meta = ExpansionMeta {
        p: bounded.p,
        window_size,
        n_parts,
        labeler: labeler.name().to_owned(),
        windows,
        sentence_leaves,
    };
    let mut catalog = Catalog::new(scheme_id::EXPANSION);
    for (name, bytes) in sections {
        catalog.insert(name, bytes)?;
    }
    catalog.insert("plan", print_plan(plan).into_bytes())?;
    catalog.insert("partition/meta", serde_json::to_vec(&meta).expect("meta serializes"))?;
    catalog.insert("bits/balpha", bits)?;
    let bundle = LabelBundle::new(scheme_id::EXPANSION, labels)?;
    Ok((bundle, catalog))
}

struct ParsedExpansionLabel {
    entries: Vec<(u64, Vec<u8>)>,
}

/// Pure decoder for scheme 0x02.
pub struct BoundedDecoder<'a> {
    catalog: &'a Catalog,
    labeler: Box<dyn PieceLabeler>,
    plan: BoundedPlan,
    meta: ExpansionMeta,
}

impl<'a> BoundedDecoder<'a> {
    pub fn new(bundle: &LabelBundle, catalog: &'a Catalog) -> Result<Self, SchemeError> {
        if bundle.scheme_id() != scheme_id::EXPANSION {
            return Err(SchemeError::WrongScheme {
                expected: scheme_id::EXPANSION,
                got: bundle.scheme_id(),
            });
        }
        let meta: ExpansionMeta = {
            let bytes = catalog.section("partition/meta").ok_or_else(|| {
                SchemeError::MalformedLabel("catalog missing partition/meta".into())
            })?;
            serde_json::from_slice(bytes)
                .map_err(|e| SchemeError::MalformedLabel(format!("bad partition/meta: {e}")))?
        };
        let plan = match read_plan(catalog)? {
            QueryPlan::Bounded(p) => p,
            other => {
                return Err(SchemeError::PlanKindMismatch {
                    expected: "bounded",
                    got: other.kind_name(),
                })
            }
        };
        let labeler = labeler_by_name(&meta.labeler)?;
        Ok(BoundedDecoder { catalog, labeler, plan, meta })
    }

    fn parse_label(&self, bytes: &[u8]) -> Result<ParsedExpansionLabel, SchemeError> {
        let mut pos = 0;
        let _id = read_varint(bytes, &mut pos)?;
        let _part = read_varint(bytes, &mut pos)?;
        let count = read_varint(bytes, &mut pos)? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let wid = read_varint(bytes, &mut pos)?;
            let len = read_varint(bytes, &mut pos)? as usize;
            let end = pos
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| SchemeError::MalformedLabel("truncated sublabel".into()))?;
            entries.push((wid, bytes[pos..end].to_vec()));
            pos = end;
        }
        if pos != bytes.len() {
            return Err(SchemeError::MalformedLabel("trailing bytes".into()));
        }
        Ok(ParsedExpansionLabel { entries })
    }

    fn sentence_bit(&self, leaf: usize, wid: usize) -> Result<bool, SchemeError> {
        let row = self
            .meta
            .sentence_leaves
            .iter()
            .position(|&l| l == leaf)
            .ok_or_else(|| SchemeError::MalformedLabel("missing sentence bits".into()))?;
        let bits = self
            .catalog
            .section("bits/balpha")
            .ok_or_else(|| SchemeError::MalformedLabel("catalog missing bits/balpha".into()))?;
        let idx = row * self.meta.windows.len() + wid;
        let byte = bits
            .get(idx / 8)
            .ok_or_else(|| SchemeError::MalformedLabel("bit index out of range".into()))?;
        Ok(byte >> (idx % 8) & 1 == 1)
    }

    /// Answers the planned bounded query from labels.
    pub fn eval(
        &self,
        arg_labels: &[&[u8]],
        set_label_sets: &[Vec<&[u8]>],
    ) -> Result<bool, SchemeError> {
        if arg_labels.len() != self.plan.vars.len() {
            return Err(SchemeError::UnsupportedQuery(format!(
                "plan takes {} arguments, got {}",
                self.plan.vars.len(),
                arg_labels.len()
            )));
        }
        if set_label_sets.len() != self.plan.set_vars.len() {
            return Err(SchemeError::UnsupportedQuery(format!(
                "plan takes {} set arguments, got {}",
                self.plan.set_vars.len(),
                set_label_sets.len()
            )));
        }
        let args: Vec<ParsedExpansionLabel> = arg_labels
            .iter()
            .map(|b| self.parse_label(b))
            .collect::<Result<_, _>>()?;
        // per set variable: window -> member sublabels
        let mut set_windows: Vec<BTreeMap<u64, Vec<Vec<u8>>>> = Vec::new();
        for family in set_label_sets {
            let mut map: BTreeMap<u64, Vec<Vec<u8>>> = BTreeMap::new();
            for bytes in family {
                let parsed = self.parse_label(bytes)?;
                for (wid, sub) in parsed.entries {
                    map.entry(wid).or_default().push(sub);
                }
            }
            set_windows.push(map);
        }
        let touched: BTreeSet<u64> =
            set_windows.iter().flat_map(|m| m.keys().copied()).collect();

        let result = self.plan.expr.try_eval(&mut |&leaf: &usize| {
            let basic = &self.plan.basics[leaf];
            let formula = &basic.formula;
            let clipped_sets_for = |wid: u64| -> Vec<Vec<Vec<u8>>> {
                formula
                    .free_set_vars()
                    .iter()
                    .map(|sv| {
                        let si = self
                            .plan
                            .set_vars
                            .iter()
                            .position(|v| v == sv)
                            .expect("validated: basic sets are plan sets");
                        set_windows[si].get(&wid).cloned().unwrap_or_default()
                    })
                    .collect()
            };
            if basic.vars.is_empty() {
                // two-phase sentence rule
                for &wid in &touched {
                    let sets = clipped_sets_for(wid);
                    if self.labeler.eval(self.catalog, wid, formula, &[], &sets)? {
                        return Ok(true);
                    }
                }
                for wid in 0..self.meta.windows.len() {
                    if !touched.contains(&(wid as u64)) && self.sentence_bit(leaf, wid)? {
                        return Ok(true);
                    }
                }
                return Ok(false);
            }
            // windows containing every argument of the leaf
            let positions: Vec<usize> = basic
                .vars
                .iter()
                .map(|name| {
                    self.plan
                        .vars
                        .iter()
                        .position(|v| v == name)
                        .expect("validated: basic vars are plan vars")
                })
                .collect();
            let mut candidates: Option<BTreeSet<u64>> = None;
            for &pos in &positions {
                let windows: BTreeSet<u64> =
                    args[pos].entries.iter().map(|&(w, _)| w).collect();
                candidates = Some(match candidates {
                    None => windows,
                    Some(acc) => acc.intersection(&windows).copied().collect(),
                });
            }
            for wid in candidates.unwrap_or_default() {
                let arg_bytes: Vec<&[u8]> = formula
                    .free_fo_vars()
                    .iter()
                    .map(|name| {
                        let pos = self
                            .plan
                            .vars
                            .iter()
                            .position(|v| v == name)
                            .expect("validated");
                        args[pos]
                            .entries
                            .iter()
                            .find(|&&(w, _)| w == wid)
                            .map(|(_, s)| s.as_slice())
                            .expect("candidate windows contain every argument")
                    })
                    .collect();
                let sets = clipped_sets_for(wid);
                if self.labeler.eval(self.catalog, wid, formula, &arg_bytes, &sets)? {
                    return Ok(true);
                }
            }
            Ok::<bool, SchemeError>(false)
        })?;
        Ok(result)
    }
}
