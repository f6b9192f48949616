//! Basic (t,s)-local sentences with set arguments over a nice cover
//! (scheme 0x05).
//!
//! Build: color the cover's intersection graph with a proper distance-s
//! coloring, give every vertex the smallest color of a piece whose
//! 2t-kernel holds it, and for every multiset of s colors form the union
//! graph of the pieces in those colors (vertex-colored with the kernel
//! colors). The sentence restricted to one color multiset is evaluated
//! inside its union graph: scatteredness at distance > 2t transfers between
//! the union and the whole graph for kernel vertices. Truth bits for empty
//! set arguments are precomputed per union.
//!
//! Query: unions meeting the set arguments are re-evaluated through the
//! piece labeler with sets clipped; unions disjoint from them answer by
//! their precomputed bit.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::codec::{read_varint, scheme_id, write_varint, Catalog, LabelBundle};
use crate::cover::{kernel_coloring, validate_cover, Cover};
use crate::graph::{ColoredGraph, VColor, Vertex};
use crate::labeler::PieceLabeler;
use crate::logic::{eval_oracle, print_plan, Formula, QueryPlan, ScatteredPlan};

use super::local::{labeler_by_name, read_plan};
use super::SchemeError;

#[derive(Debug, Serialize, Deserialize)]
struct ScatteredMeta {
    t: usize,
    s: usize,
    labeler: String,
    color_count: usize,
    /// first vertex color reserved for kernel colors
    pbase: u16,
    /// color multiset per union id; empty unions keep their slot
    tuples: Vec<Vec<usize>>,
}

fn require_scattered(plan: &QueryPlan) -> Result<&ScatteredPlan, SchemeError> {
    match plan {
        QueryPlan::Scattered(p) => Ok(p),
        other => Err(SchemeError::PlanKindMismatch {
            expected: "scattered",
            got: other.kind_name(),
        }),
    }
}

/// All multisets of `m` colors out of `0..colors`, ascending tuples.
fn color_multisets(colors: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(m);
    fn rec(colors: usize, m: usize, from: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == m {
            out.push(current.clone());
            return;
        }
        for c in from..colors {
            current.push(c);
            rec(colors, m, c, current, out);
            current.pop();
        }
    }
    rec(colors, m, 0, &mut current, &mut out);
    out
}

/// The sentence restricted to one color multiset: s witnesses, pairwise at
/// distance > 2t, each satisfying psi and carrying its assigned kernel
/// color.
fn tuple_formula(psi: &Formula, colors: &[usize], pbase: u16, t: usize) -> Formula {
    let free = psi.free_fo_vars();
    let x = &free[0];
    let wit = |i: usize| format!("wit{}", i + 1);
    let mut parts = Vec::new();
    for a in 0..colors.len() {
        for b in a + 1..colors.len() {
            parts.push(Formula::not(Formula::DistLe(wit(a), wit(b), 2 * t)));
        }
    }
    for (i, &c) in colors.iter().enumerate() {
        parts.push(Formula::and(
            psi.rename_free_var(x, &wit(i)),
            Formula::Col(VColor(pbase + c as u16), wit(i)),
        ));
    }
    let mut body = Formula::and_all(parts);
    for i in (0..colors.len()).rev() {
        body = Formula::exists(wit(i), body);
    }
    body
}

/// Builds the scattered-sentence labeling over a nice cover of radius at
/// least `2t + 1`.
pub fn build_scattered_scheme(
    graph: &ColoredGraph,
    plan: &QueryPlan,
    labeler: &dyn PieceLabeler,
    cover: Cover,
) -> Result<(LabelBundle, Catalog), SchemeError> {
    let scattered = require_scattered(plan)?;
    plan.validate()?;
    if !cover.is_nice() {
        return Err(SchemeError::CoverNotNice);
    }
    let t = scattered.t;
    let m = scattered.s;
    if cover.r() < 2 * t + 1 {
        return Err(SchemeError::CoverDefect(format!(
            "cover has radius {}, scattered scheme needs {}",
            cover.r(),
            2 * t + 1
        )));
    }
    let report = validate_cover(graph, &cover)?;
    if !report.passed() {
        return Err(SchemeError::CoverDefect(format!(
            "condition (1) fails at vertices {:?}",
            report.condition1_witnesses
        )));
    }

    let kc = kernel_coloring(graph, &cover, 2 * t, m)?;
    let pbase = graph
        .vertex_palette()
        .iter()
        .map(|c| c.0 + 1)
        .max()
        .unwrap_or(0);

    // vertex-colored copy of the graph: original colors plus kernel colors
    let colored = {
        let mut colors: Vec<(Vertex, VColor)> = Vec::new();
        for v in 0..graph.n() {
            for c in graph.vertex_colors(v) {
                colors.push((v, *c));
            }
            colors.push((v, VColor(pbase + kc.vertex_color[v] as u16)));
        }
        ColoredGraph::new(graph.n(), colors, graph.edges())?
    };

    let tuples = color_multisets(kc.color_count, m);
    let mut bits = vec![0u8; tuples.len().div_ceil(8)];
    let mut sections: Vec<(String, Vec<u8>)> = Vec::new();
    // per union: sublabels for its members
    let mut vertex_entries: Vec<Vec<(u64, Vec<u8>)>> = vec![Vec::new(); graph.n()];
    for (uid, tuple) in tuples.iter().enumerate() {
        let members: BTreeSet<Vertex> = (0..graph.n())
            .filter(|&v| {
                cover
                    .pieces_of(v)
                    .iter()
                    .any(|&p| tuple.contains(&kc.piece_color[p]))
            })
            .collect();
        sections.push((
            format!("union/{}", tuple.iter().map(usize::to_string).collect::<Vec<_>>().join("-")),
            serde_json::to_vec(&serde_json::json!({ "id": uid, "colors": tuple }))
                .expect("union meta serializes"),
        ));
        if members.is_empty() {
            continue;
        }
        let (piece, map) = colored.induced_subgraph(&members)?;
        let built = labeler.build(uid as u64, &piece, &map)?;
        sections.extend(built.sections.iter().cloned());
        for (local, &v) in map.iter().enumerate() {
            vertex_entries[v].push((uid as u64, built.sublabels[local].clone()));
        }
        // truth bit for empty set arguments, computed on the union directly
        let phi = tuple_formula(&scattered.psi, tuple, pbase, t);
        let empty: Vec<BTreeSet<Vertex>> =
            phi.free_set_vars().iter().map(|_| BTreeSet::new()).collect();
        let refs: Vec<&BTreeSet<Vertex>> = empty.iter().collect();
        if eval_oracle(&piece, &phi, &[], &refs)? {
            bits[uid / 8] |= 1 << (uid % 8);
        }
    }

    let mut labels = Vec::with_capacity(graph.n());
    for v in 0..graph.n() {
        let mut label = Vec::new();
        write_varint(&mut label, v as u64);
        write_varint(&mut label, kc.vertex_color[v] as u64);
        write_varint(&mut label, vertex_entries[v].len() as u64);
        for (uid, sublabel) in &vertex_entries[v] {
            write_varint(&mut label, *uid);
            write_varint(&mut label, sublabel.len() as u64);
            label.extend_from_slice(sublabel);
        }
        labels.push(label);
    }

    let meta = ScatteredMeta {
        t,
        s: m,
        labeler: labeler.name().to_owned(),
        color_count: kc.color_count,
        pbase,
        tuples,
    };
    let mut catalog = Catalog::new(scheme_id::SCATTERED);
    for (name, bytes) in sections {
        catalog.insert(name, bytes)?;
    }
    catalog.insert("plan", print_plan(plan).into_bytes())?;
    catalog.insert("cover/meta", serde_json::to_vec(&meta).expect("meta serializes"))?;
    catalog.insert(
        "coloring/gamma",
        kc.piece_color.iter().flat_map(|c| (*c as u32).to_le_bytes()).collect(),
    )?;
    catalog.insert("bits/b", bits)?;
    let bundle = LabelBundle::new(scheme_id::SCATTERED, labels)?;
    Ok((bundle, catalog))
}

/// Pure decoder for scheme 0x05.
pub struct ScatteredDecoder<'a> {
    catalog: &'a Catalog,
    labeler: Box<dyn PieceLabeler>,
    plan: ScatteredPlan,
    meta: ScatteredMeta,
}

impl<'a> ScatteredDecoder<'a> {
    pub fn new(bundle: &LabelBundle, catalog: &'a Catalog) -> Result<Self, SchemeError> {
        if bundle.scheme_id() != scheme_id::SCATTERED {
            return Err(SchemeError::WrongScheme {
                expected: scheme_id::SCATTERED,
                got: bundle.scheme_id(),
            });
        }
        let meta: ScatteredMeta = {
            let bytes = catalog
                .section("cover/meta")
                .ok_or_else(|| SchemeError::MalformedLabel("catalog missing cover/meta".into()))?;
            serde_json::from_slice(bytes)
                .map_err(|e| SchemeError::MalformedLabel(format!("bad cover/meta: {e}")))?
        };
        let plan = match read_plan(catalog)? {
            QueryPlan::Scattered(p) => p,
            other => {
                return Err(SchemeError::PlanKindMismatch {
                    expected: "scattered",
                    got: other.kind_name(),
                })
            }
        };
        let labeler = labeler_by_name(&meta.labeler)?;
        Ok(ScatteredDecoder { catalog, labeler, plan, meta })
    }

    fn parse_label(&self, bytes: &[u8]) -> Result<Vec<(u64, Vec<u8>)>, SchemeError> {
        let mut pos = 0;
        let _id = read_varint(bytes, &mut pos)?;
        let _p_color = read_varint(bytes, &mut pos)?;
        let count = read_varint(bytes, &mut pos)? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let uid = read_varint(bytes, &mut pos)?;
            let len = read_varint(bytes, &mut pos)? as usize;
            let end = pos
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| SchemeError::MalformedLabel("truncated sublabel".into()))?;
            entries.push((uid, bytes[pos..end].to_vec()));
            pos = end;
        }
        if pos != bytes.len() {
            return Err(SchemeError::MalformedLabel("trailing bytes".into()));
        }
        Ok(entries)
    }

    fn bit(&self, uid: usize) -> Result<bool, SchemeError> {
        let bits = self
            .catalog
            .section("bits/b")
            .ok_or_else(|| SchemeError::MalformedLabel("catalog missing bits/b".into()))?;
        let byte = bits
            .get(uid / 8)
            .ok_or_else(|| SchemeError::MalformedLabel("truth bit out of range".into()))?;
        Ok(byte >> (uid % 8) & 1 == 1)
    }

    /// Answers the sentence for the given set arguments (label families in
    /// the plan's set-variable order).
    pub fn eval(&self, set_label_sets: &[Vec<&[u8]>]) -> Result<bool, SchemeError> {
        if set_label_sets.len() != self.plan.set_vars.len() {
            return Err(SchemeError::UnsupportedQuery(format!(
                "plan takes {} set arguments, got {}",
                self.plan.set_vars.len(),
                set_label_sets.len()
            )));
        }
        // per union, per set variable: members' sublabels
        let unions = self.meta.tuples.len();
        let mut per_union: Vec<Vec<Vec<Vec<u8>>>> =
            vec![vec![Vec::new(); set_label_sets.len()]; unions];
        let mut touched = vec![false; unions];
        for (si, family) in set_label_sets.iter().enumerate() {
            for bytes in family {
                for (uid, sublabel) in self.parse_label(bytes)? {
                    let uid = uid as usize;
                    if uid >= unions {
                        return Err(SchemeError::MalformedLabel("union id out of range".into()));
                    }
                    touched[uid] = true;
                    per_union[uid][si].push(sublabel);
                }
            }
        }
        // evaluate the touched unions with clipped sets
        for uid in 0..unions {
            if !touched[uid] {
                continue;
            }
            let tuple = &self.meta.tuples[uid];
            let phi = tuple_formula(&self.plan.psi, tuple, self.meta.pbase, self.meta.t);
            // order the clipped families by the tuple formula's set order
            let phi_sets = phi.free_set_vars();
            let families: Vec<Vec<Vec<u8>>> = phi_sets
                .iter()
                .map(|sv| {
                    let si = self
                        .plan
                        .set_vars
                        .iter()
                        .position(|v| v == sv)
                        .expect("validated: psi sets are plan sets");
                    per_union[uid][si].clone()
                })
                .collect();
            if self.labeler.eval(self.catalog, uid as u64, &phi, &[], &families)? {
                return Ok(true);
            }
        }
        // untouched unions answer by their precomputed empty-set bit
        for uid in 0..unions {
            if !touched[uid] && self.bit(uid)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}
